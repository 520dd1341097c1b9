// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "gdimpute/autograd.hpp"
#include "gdimpute/dataset.hpp"
#include "gdimpute/rng.hpp"
#include "gdimpute/schema.hpp"

namespace gdimpute::testing {

/// Three components, five features: numerics with distinct ranges and two
/// categoricals.
inline std::shared_ptr<const FeatureSchema> small_schema() {
  std::vector<FeatureSpec> f;
  f.push_back({"frame_len", FeatureKind::kNumeric, 400.0, 700.0, {}, "frame"});
  f.push_back({"frame_style", FeatureKind::kCategorical, 0, 1, {"road", "gravel", "track"}, "frame"});
  f.push_back({"wheel_d", FeatureKind::kNumeric, 500.0, 700.0, {}, "wheel"});
  f.push_back({"seat_h", FeatureKind::kNumeric, -10.0, 10.0, {}, "saddle"});
  f.push_back({"seat_kind", FeatureKind::kCategorical, 0, 1, {"foam", "gel"}, "saddle"});
  return std::make_shared<const FeatureSchema>(FeatureSchema::create({"frame", "wheel", "saddle"}, std::move(f)));
}

inline AssemblyGraph small_graph(const FeatureSchema& s) {
  return AssemblyGraph::create(s, {{"frame", "wheel"}, {"frame", "saddle"}});
}

/// Uniform random complete row.
inline CompleteDesign random_row(const FeatureSchema& s, Rng& rng) {
  std::vector<Value> v;
  for (const auto& spec : s.features()) {
    if (spec.is_numeric()) {
      v.emplace_back(std::uniform_real_distribution<double>(spec.lo, spec.hi)(rng));
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, spec.category_count() - 1);
      v.emplace_back(spec.categories[pick(rng)]);
    }
  }
  return CompleteDesign(std::move(v));
}

inline Dataset random_dataset(std::shared_ptr<const FeatureSchema> s, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.schema = s;
  for (std::size_t i = 0; i < n; ++i) d.rows.push_back(random_row(*s, rng));
  return d;
}

inline ag::Mat random_mat(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  ag::Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

/// Largest relative gradient error over every trainable parameter:
/// |analytic - numeric| / max(|analytic| + |numeric|, floor), with central
/// differences of step h. The default step sits near cbrt(eps), where
/// truncation and rounding errors of a central difference balance.
/// `loss` must build a scalar on the given tape.
inline double gradient_check(ag::ParameterSet& params, const std::function<ag::Var(ag::Tape&)>& loss,
                             double h = 1e-5) {
  params.zero_grad();
  double base = 0.0;
  {
    ag::Tape tape(true);
    auto l = loss(tape);
    base = l.value()(0, 0);
    tape.backward(l);
  }
  // A central difference cannot resolve slopes below eps |L| / h: one ulp of
  // the loss over 2h. Entries under 1e5 times that resolution are compared
  // absolutely against it, so structurally zero gradients do not divide
  // rounding noise by ~0.
  const double floor = 1e5 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(base)) / h;
  double worst = 0.0;
  for (const auto& p : params.items()) {
    if (!p->trainable) continue;
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double saved = p->value.data()[i];
      p->value.data()[i] = saved + h;
      double up = 0.0, down = 0.0;
      {
        ag::Tape t(false);
        up = loss(t).value()(0, 0);
      }
      p->value.data()[i] = saved - h;
      {
        ag::Tape t(false);
        down = loss(t).value()(0, 0);
      }
      p->value.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad.data()[i];
      const double denom = std::max(std::abs(analytic) + std::abs(numeric), floor);
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace gdimpute::testing

#include "gdimpute/diffusion.hpp"

namespace gdimpute::testing {

/// Smallest sensible imputer; trains in well under a second on a few hundred
/// rows.
inline ImputerConfig tiny_config(GraphVariant variant = GraphVariant::kGatv2) {
  ImputerConfig c;
  c.encoder.variant = variant;
  c.encoder.hidden_dim = 8;
  c.encoder.heads = 2;
  c.encoder.category_embed_dim = 3;
  c.fusion.d_token = 8;
  c.fusion.fusion_heads = 2;
  c.denoiser.blocks = 1;
  c.denoiser.channels = 8;
  c.denoiser.time_dim = 8;
  c.denoiser.heads = 2;
  c.schedule.steps = 20;
  c.category_dim = 4;
  return c;
}

inline ImputerModel tiny_trained_model(std::uint64_t seed = 1, int epochs = 2, std::size_t rows = 120) {
  auto schema = small_schema();
  auto graph = small_graph(*schema);
  auto model = ImputerModel::create(schema, graph, tiny_config(), seed);
  TrainingConfig tc;
  tc.epochs = epochs;
  tc.batch_size = 32;
  train(model, random_dataset(schema, rows, seed + 100), tc, seed + 200);
  return model;
}

}  // namespace gdimpute::testing
