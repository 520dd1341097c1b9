// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#include "gdimpute/experiment.hpp"

#include <algorithm>

#include "gdimpute/error.hpp"

namespace gdimpute {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kDiffusion:
      return "diffusion";
    case Method::kHotDeck:
      return "hotdeck";
    case Method::kPpca:
      return "ppca";
    case Method::kForest:
      return "forest";
  }
  return "diffusion";
}

Method parse_method(std::string_view s) {
  if (s == "diffusion") return Method::kDiffusion;
  if (s == "hotdeck") return Method::kHotDeck;
  if (s == "ppca") return Method::kPpca;
  if (s == "forest") return Method::kForest;
  throw ConfigError("unknown method '" + std::string(s) + "' (expected diffusion, hotdeck, ppca or forest)");
}

namespace {

void require_file(const fs::path& p, const char* field) {
  if (!fs::exists(p)) throw ConfigError(std::string(field) + " file '" + p.string() + "' does not exist");
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

json masking_to_json(const MaskingProtocol& m) {
  return json{{"missing_fraction", m.missing_fraction},
              {"mode", m.mode == MaskMode::kFixedFeature ? "fixed_feature" : "random"},
              {"target_feature", m.target_feature},
              {"seed", m.seed}};
}

MaskingProtocol masking_from_json(const json& j) {
  MaskingProtocol m;
  m.missing_fraction = j.value("missing_fraction", m.missing_fraction);
  const auto mode = j.value("mode", std::string("random"));
  if (mode == "fixed_feature") {
    m.mode = MaskMode::kFixedFeature;
  } else if (mode != "random") {
    throw ConfigError("masking.mode must be 'random' or 'fixed_feature'");
  }
  m.target_feature = j.value("target_feature", std::string());
  m.seed = j.value("seed", m.seed);
  return m;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (data_path.empty()) {
    if (!synthetic) throw ConfigError("experiment needs either a data path or a synthetic section");
    synthetic->validate();
  } else {
    require_file(schema_path, "schema");
    require_file(graph_path, "graph");
    require_file(data_path, "data");
  }
  model.validate();
  training.validate();
  if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0)) {
    throw ConfigError("split.train_fraction must lie in (0, 1)");
  }
  if (k < 1) throw ConfigError("k must be >= 1");
  forest.forest.validate();
}

ExperimentConfig ExperimentConfig::from_json(const json& j, const fs::path& base_dir) {
  ExperimentConfig c;
  if (j.contains("schema")) c.schema_path = resolve(base_dir, j["schema"].get<std::string>());
  if (j.contains("graph")) c.graph_path = resolve(base_dir, j["graph"].get<std::string>());
  if (j.contains("data")) c.data_path = resolve(base_dir, j["data"].get<std::string>());
  if (j.contains("synthetic")) c.synthetic = SyntheticConfig::from_json(j["synthetic"]);
  if (j.contains("model")) c.model = ImputerConfig::from_json(j["model"]);
  if (j.contains("training")) c.training = TrainingConfig::from_json(j["training"]);
  if (j.contains("masking")) c.masking = masking_from_json(j["masking"]);
  if (j.contains("split")) c.split.train_fraction = j["split"].value("train_fraction", c.split.train_fraction);
  c.augment_to = j.value("augment_to", c.augment_to);
  c.eval_rows = j.value("eval_rows", c.eval_rows);
  c.k = j.value("k", c.k);
  c.seed = j.value("seed", c.seed);
  if (j.contains("method")) c.method = parse_method(j["method"].get<std::string>());
  if (j.contains("ppca")) {
    const auto& p = j["ppca"];
    if (p.contains("latent_dim")) c.ppca.latent_dim = p["latent_dim"].get<int>();
    c.ppca.tol = p.value("tol", c.ppca.tol);
    c.ppca.max_iter = p.value("max_iter", c.ppca.max_iter);
  }
  if (j.contains("forest")) {
    const auto& f = j["forest"];
    c.forest.rounds = f.value("rounds", c.forest.rounds);
    c.forest.tol = f.value("tol", c.forest.tol);
    c.forest.forest.trees = f.value("trees", c.forest.forest.trees);
    c.forest.forest.max_depth = f.value("max_depth", c.forest.forest.max_depth);
  }
  return c;
}

json ExperimentConfig::to_json() const {
  json j{{"model", model.to_json()},
         {"training", training.to_json()},
         {"masking", masking_to_json(masking)},
         {"split", {{"train_fraction", split.train_fraction}}},
         {"augment_to", augment_to},
         {"eval_rows", eval_rows},
         {"k", k},
         {"seed", seed},
         {"method", std::string(to_string(method))},
         {"forest",
          {{"rounds", forest.rounds},
           {"tol", forest.tol},
           {"trees", forest.forest.trees},
           {"max_depth", forest.forest.max_depth}}}};
  json ppca_j{{"tol", ppca.tol}, {"max_iter", ppca.max_iter}};
  if (ppca.latent_dim) ppca_j["latent_dim"] = *ppca.latent_dim;
  j["ppca"] = ppca_j;
  if (!schema_path.empty()) j["schema"] = schema_path.string();
  if (!graph_path.empty()) j["graph"] = graph_path.string();
  if (!data_path.empty()) j["data"] = data_path.string();
  if (synthetic) j["synthetic"] = synthetic->to_json();
  return j;
}

ExperimentConfig load_experiment(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("experiment config '" + path.string() + "' does not exist");
  return ExperimentConfig::from_json(read_json_file(path), path.parent_path());
}

Workspace prepare_workspace(const ExperimentConfig& config) {
  config.validate();
  Workspace ws;
  Dataset all;
  if (config.data_path.empty()) {
    auto bundle = generate_synthetic(*config.synthetic, config.seed);
    ws.schema = bundle.schema;
    ws.graph = bundle.graph;
    all = bundle.dataset;
    ws.synthetic = std::move(bundle);
  } else {
    ws.schema = std::make_shared<const FeatureSchema>(load_schema(config.schema_path));
    ws.graph = load_graph(config.graph_path, *ws.schema);
    all = load_csv(config.data_path, ws.schema);
  }
  if (config.augment_to > all.size()) all = augment(all, config.augment_to, derive_seed(config.seed, 1));
  auto [train, test] = split(all, SplitSpec{config.split.train_fraction, derive_seed(config.seed, 2)});
  if (train.empty() || test.empty()) throw DataError("split produced an empty train or test set");
  ws.train = std::move(train);
  ws.test = std::move(test);
  return ws;
}

ImputerModel train_model(const ExperimentConfig& config, const Workspace& ws, TrainingResult* result,
                         const EpochCallback& on_epoch) {
  auto model = ImputerModel::create(ws.schema, ws.graph, config.model, derive_seed(config.seed, 3));
  auto r = train(model, ws.train, config.training, derive_seed(config.seed, 4), on_epoch);
  if (result) *result = std::move(r);
  return model;
}

namespace {

std::vector<SampleSet> replicate(std::span<const PartialDesign> partials, std::vector<CompleteDesign> outputs,
                                 int k) {
  std::vector<SampleSet> out(partials.size());
  for (std::size_t i = 0; i < partials.size(); ++i) {
    out[i].input = partials[i];
    out[i].draws.assign(static_cast<std::size_t>(k), outputs[i]);
  }
  return out;
}

}  // namespace

std::vector<SampleSet> run_method(Method method, const ExperimentConfig& config, const Dataset& train,
                                  std::span<const PartialDesign> partials, int k, std::uint64_t seed,
                                  const ImputerModel* model) {
  if (k < 1) throw ConfigError("k must be >= 1");
  std::vector<CompleteDesign> outputs;
  switch (method) {
    case Method::kDiffusion:
      if (model == nullptr) throw ConfigError("the diffusion method needs a trained model (checkpoint)");
      return sample_many(*model, partials, k, seed);
    case Method::kHotDeck:
      for (const auto& p : partials) outputs.push_back(hotdeck_impute(train, p));
      break;
    case Method::kPpca: {
      const auto fitted = ppca_fit(train, config.ppca);
      for (const auto& p : partials) outputs.push_back(ppca_impute(fitted, p));
      break;
    }
    case Method::kForest:
      outputs = forest_impute(train, partials, config.forest, seed);
      break;
  }
  return replicate(partials, std::move(outputs), k);
}

EvaluationReport run_evaluation(const ExperimentConfig& config, const Workspace& ws, Method method,
                                const ImputerModel* model) {
  MaskingProtocol protocol = config.masking;
  protocol.seed = derive_seed(config.seed, 5) ^ config.masking.seed;
  Dataset test = ws.test;
  if (config.eval_rows > 0 && test.rows.size() > config.eval_rows) test.rows.resize(config.eval_rows);
  const auto cases = make_masked_testset(test, protocol);
  std::vector<PartialDesign> partials;
  partials.reserve(cases.size());
  for (const auto& c : cases) partials.push_back(c.partial);
  const auto samples = run_method(method, config, ws.train, partials, config.k, derive_seed(config.seed, 6), model);
  json echo = config.to_json();
  echo["method"] = std::string(to_string(method));
  // Paths depend on where the config was loaded from; keep reports portable.
  for (const char* key : {"schema", "graph", "data"}) {
    if (echo.contains(key)) echo[key] = fs::path(echo[key].get<std::string>()).filename().string();
  }
  return evaluate(ws.train, cases, samples, std::string(to_string(method)), echo);
}

}  // namespace gdimpute
