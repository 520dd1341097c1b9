// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#include <algorithm>
#include <cmath>

#include "gdimpute/dataset.hpp"
#include "gdimpute/error.hpp"

namespace gdimpute {

using nlohmann::json;

SyntheticConfig SyntheticConfig::from_json(const json& doc) {
  SyntheticConfig c;
  try {
    if (doc.contains("components")) c.components = doc["components"].get<std::vector<std::string>>();
    if (doc.contains("edges")) {
      c.edges.clear();
      for (const auto& e : doc["edges"]) {
        if (!e.is_array() || e.size() != 2) throw ConfigError("synthetic edges must be [a, b] pairs");
        c.edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
      }
    }
    if (doc.contains("numeric_per_component")) {
      const auto& n = doc["numeric_per_component"];
      if (n.is_number_integer()) {
        c.numeric_per_component.assign(c.components.size(), n.get<int>());
      } else {
        c.numeric_per_component = n.get<std::vector<int>>();
      }
    }
    c.rows = doc.value("rows", c.rows);
    c.coupling = doc.value("coupling", c.coupling);
    c.noise = doc.value("noise", c.noise);
    c.deterministic_categorical = doc.value("deterministic_categorical", c.deterministic_categorical);
    c.noise_categorical = doc.value("noise_categorical", c.noise_categorical);
    c.noise_categories = doc.value("noise_categories", c.noise_categories);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synthetic config: ") + e.what());
  }
  c.validate();
  return c;
}

json SyntheticConfig::to_json() const {
  json edges_json = json::array();
  for (const auto& [a, b] : edges) edges_json.push_back({a, b});
  return json{{"components", components},
              {"edges", edges_json},
              {"numeric_per_component", numeric_per_component},
              {"rows", rows},
              {"coupling", coupling},
              {"noise", noise},
              {"deterministic_categorical", deterministic_categorical},
              {"noise_categorical", noise_categorical},
              {"noise_categories", noise_categories}};
}

void SyntheticConfig::validate() const {
  if (components.empty()) throw ConfigError("synthetic config needs at least one component");
  if (numeric_per_component.size() != components.size()) {
    throw ConfigError("numeric_per_component must have one entry per component");
  }
  for (int n : numeric_per_component) {
    if (n < 1) throw ConfigError("every synthetic component needs at least one numeric feature");
  }
  if (rows == 0) throw ConfigError("synthetic rows must be positive");
  if (!(coupling >= 0.0) || !(noise >= 0.0)) throw ConfigError("coupling and noise must be non-negative");
  if (noise_categorical && noise_categories < 2) throw ConfigError("noise_categories must be >= 2");
}

SyntheticBundle generate_synthetic(const SyntheticConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t n_comp = config.components.size();

  // Per-feature loadings, offsets and signs come from a dedicated stream so
  // the row streams stay independent of the feature layout.
  Rng layout_rng = make_rng(seed, ~0ULL);
  std::uniform_real_distribution<double> loading(0.6, 1.4);
  std::uniform_real_distribution<double> offset(-2.0, 2.0);
  std::bernoulli_distribution negative(0.3);

  struct NumericPlan {
    std::size_t component;
    double a;
    double b;
  };
  std::vector<FeatureSpec> features;
  std::vector<NumericPlan> plans;  // indexed by feature; unused for categoricals
  SyntheticBundle bundle;
  const double spread = 5.5;
  for (std::size_t c = 0; c < n_comp; ++c) {
    const auto& comp = config.components[c];
    for (int k = 0; k < config.numeric_per_component[c]; ++k) {
      const double a = (negative(layout_rng) ? -1.0 : 1.0) * loading(layout_rng);
      const double b = offset(layout_rng);
      const double half = spread * (std::abs(a) + config.noise);
      FeatureSpec f;
      f.name = comp + "_p" + std::to_string(k);
      f.kind = FeatureKind::kNumeric;
      f.lo = b - half;
      f.hi = b + half;
      f.component = comp;
      if (c == 0 && k == 0) bundle.driver_feature = features.size();
      features.push_back(f);
      plans.push_back({c, a, b});
    }
    if (c == 0 && config.deterministic_categorical) {
      FeatureSpec f;
      f.name = comp + "_style";
      f.kind = FeatureKind::kCategorical;
      f.categories = {"low", "high"};
      f.component = comp;
      bundle.deterministic_feature = features.size();
      features.push_back(f);
      plans.push_back({c, 0.0, 0.0});
    }
    if (c + 1 == n_comp && config.noise_categorical) {
      FeatureSpec f;
      f.name = comp + "_finish";
      f.kind = FeatureKind::kCategorical;
      for (int k = 0; k < config.noise_categories; ++k) f.categories.push_back("c" + std::to_string(k));
      f.component = comp;
      bundle.noise_feature = features.size();
      features.push_back(f);
      plans.push_back({c, 0.0, 0.0});
    }
  }
  auto schema = std::make_shared<const FeatureSchema>(FeatureSchema::create(config.components, features));

  auto edges = config.edges;
  if (edges.empty()) {
    for (std::size_t c = 0; c + 1 < n_comp; ++c) edges.emplace_back(config.components[c], config.components[c + 1]);
  }
  bundle.graph = AssemblyGraph::create(*schema, edges);
  if (bundle.driver_feature) bundle.driver_threshold = plans[*bundle.driver_feature].b;

  Dataset ds{schema, {}, Provenance::kSynthetic};
  ds.rows.reserve(config.rows);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> own(n_comp), latent(n_comp);
  for (std::size_t r = 0; r < config.rows; ++r) {
    Rng rng = make_rng(seed, r);
    for (auto& u : own) u = normal(rng);
    for (std::size_t c = 0; c < n_comp; ++c) {
      double z = own[c];
      for (auto nb : bundle.graph.neighbors(c)) z += config.coupling * own[nb];
      const double deg = static_cast<double>(bundle.graph.degree(c));
      latent[c] = z / std::sqrt(1.0 + config.coupling * config.coupling * deg);
    }
    std::vector<Value> values(schema->size());
    for (std::size_t i = 0; i < schema->size(); ++i) {
      const auto& f = schema->feature(i);
      if (f.is_numeric()) {
        const auto& p = plans[i];
        const double v = p.b + p.a * latent[p.component] + config.noise * normal(rng);
        values[i] = std::clamp(v, f.lo, f.hi);
      } else if (bundle.noise_feature && i == *bundle.noise_feature) {
        std::uniform_int_distribution<std::size_t> pick(0, f.category_count() - 1);
        values[i] = f.categories[pick(rng)];
      }
    }
    if (bundle.deterministic_feature) {
      const double driver = std::get<double>(values[*bundle.driver_feature]);
      values[*bundle.deterministic_feature] = std::string(driver >= bundle.driver_threshold ? "high" : "low");
    }
    ds.rows.emplace_back(std::move(values));
  }
  bundle.schema = schema;
  bundle.dataset = std::move(ds);
  return bundle;
}

}  // namespace gdimpute
