// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gdimpute/dataset.hpp"
#include "gdimpute/error.hpp"

namespace gdimpute {

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::kLoaded:
      return "loaded";
    case Provenance::kAugmented:
      return "augmented";
    case Provenance::kSynthetic:
      return "synthetic";
  }
  return "unknown";
}

namespace {

Value sample_uniform(const FeatureSpec& f, Rng& rng) {
  if (f.is_numeric()) {
    std::uniform_real_distribution<double> u(f.lo, f.hi);
    return u(rng);
  }
  std::uniform_int_distribution<std::size_t> u(0, f.category_count() - 1);
  return f.categories[u(rng)];
}

}  // namespace

Dataset augment(const Dataset& dataset, std::size_t target_size, std::uint64_t seed) {
  if (dataset.empty()) throw DataError("cannot augment an empty dataset");
  if (target_size < dataset.size()) {
    throw DataError("augmentation target " + std::to_string(target_size) + " is below the dataset size " +
                    std::to_string(dataset.size()));
  }
  Dataset out = dataset;
  if (target_size == dataset.size()) return out;
  out.provenance = Provenance::kAugmented;
  const auto& schema = *dataset.schema;
  const std::size_t d = schema.size();
  const std::size_t n = dataset.size();
  out.rows.reserve(target_size);
  for (std::size_t i = n; i < target_size; ++i) {
    Rng rng = make_rng(seed, i);
    std::uniform_int_distribution<std::size_t> pick_row(0, n - 1);
    std::vector<Value> values = dataset.rows[pick_row(rng)].values();
    std::uniform_int_distribution<std::size_t> pick_count(1, d);
    const std::size_t count = pick_count(rng);
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t k = 0; k < count; ++k) {
      values[order[k]] = sample_uniform(schema.feature(order[k]), rng);
    }
    out.rows.emplace_back(std::move(values));
  }
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, const SplitSpec& spec) {
  if (dataset.empty()) throw DataError("cannot split an empty dataset");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(spec.seed, 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train =
      static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(dataset.size())));
  Dataset train{dataset.schema, {}, dataset.provenance};
  Dataset test{dataset.schema, {}, dataset.provenance};
  train.rows.reserve(n_train);
  test.rows.reserve(dataset.size() - n_train);
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k < n_train ? train : test).rows.push_back(dataset.rows[order[k]]);
  }
  return {std::move(train), std::move(test)};
}

void MaskingProtocol::validate(const FeatureSchema& schema) const {
  if (mode == MaskMode::kFixedFeature) {
    if (!schema.index_of(target_feature)) {
      throw ConfigError("masking target feature '" + target_feature + "' is not in the schema");
    }
    return;
  }
  if (!(missing_fraction > 0.0 && missing_fraction < 1.0)) {
    throw ConfigError("missing_fraction must lie in (0, 1)");
  }
}

std::size_t masked_count(std::size_t feature_count, double fraction) {
  const auto n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(feature_count)));
  return std::clamp<std::size_t>(n, 1, std::max<std::size_t>(feature_count, 1));
}

ObservationMask random_mask(std::size_t feature_count, std::size_t hidden, Rng& rng) {
  std::vector<std::size_t> order(feature_count);
  std::iota(order.begin(), order.end(), 0);
  // Partial Fisher-Yates: only the first `hidden` slots are needed.
  for (std::size_t k = 0; k < hidden && k < feature_count; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, feature_count - 1);
    std::swap(order[k], order[pick(rng)]);
  }
  ObservationMask mask = ObservationMask::all(feature_count, true);
  for (std::size_t k = 0; k < hidden && k < feature_count; ++k) mask.set(order[k], false);
  return mask;
}

std::vector<MaskedCase> make_masked_testset(const Dataset& test, const MaskingProtocol& protocol) {
  const auto& schema = *test.schema;
  protocol.validate(schema);
  std::vector<MaskedCase> cases;
  cases.reserve(test.size());
  const std::size_t d = schema.size();
  const std::size_t hidden = masked_count(d, protocol.missing_fraction);
  for (std::size_t r = 0; r < test.size(); ++r) {
    ObservationMask mask = ObservationMask::all(d, true);
    if (protocol.mode == MaskMode::kFixedFeature) {
      mask.set(*schema.index_of(protocol.target_feature), false);
    } else {
      Rng rng = make_rng(protocol.seed, r);
      mask = random_mask(d, hidden, rng);
    }
    cases.push_back({apply_mask(test.rows[r], mask), test.rows[r]});
  }
  return cases;
}

}  // namespace gdimpute
