// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gdimpute/baselines.hpp"
#include "gdimpute/dataset.hpp"
#include "gdimpute/diffusion.hpp"
#include "gdimpute/metrics.hpp"

namespace gdimpute {

enum class Method { kDiffusion, kHotDeck, kPpca, kForest };

std::string_view to_string(Method m);
Method parse_method(std::string_view s);

/// One experiment: where the data comes from, how the model is built and
/// trained, and how the test set is masked and scored. Relative paths are
/// resolved against the directory of the config file.
struct ExperimentConfig {
  std::filesystem::path schema_path;
  std::filesystem::path graph_path;
  std::filesystem::path data_path;
  /// Used when no data path is given; also provides schema and graph.
  std::optional<SyntheticConfig> synthetic;

  ImputerConfig model;
  TrainingConfig training;
  MaskingProtocol masking;
  SplitSpec split;
  /// Augment the loaded rows to this many before splitting; 0 disables.
  std::size_t augment_to = 0;
  /// Score only the first this-many test rows; 0 scores all.
  std::size_t eval_rows = 0;
  int k = 50;
  std::uint64_t seed = 0;
  Method method = Method::kDiffusion;
  PpcaOptions ppca;
  ForestImputeOptions forest;

  /// Checks sub-configs and that every referenced file exists. Throws
  /// ConfigError naming the first offending path or field.
  void validate() const;
  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  nlohmann::json to_json() const;
};

ExperimentConfig load_experiment(const std::filesystem::path& path);

struct Workspace {
  std::shared_ptr<const FeatureSchema> schema;
  AssemblyGraph graph;
  Dataset train;
  Dataset test;
  /// Set for synthetic data: positions of the constructed features.
  std::optional<SyntheticBundle> synthetic;
};

Workspace prepare_workspace(const ExperimentConfig& config);

/// Builds and trains a model on the workspace's training split.
ImputerModel train_model(const ExperimentConfig& config, const Workspace& ws, TrainingResult* result = nullptr,
                         const EpochCallback& on_epoch = {});

/// K completions per partial row. Deterministic methods repeat their single
/// output K times. `model` is required for the diffusion method.
std::vector<SampleSet> run_method(Method method, const ExperimentConfig& config, const Dataset& train,
                                  std::span<const PartialDesign> partials, int k, std::uint64_t seed,
                                  const ImputerModel* model);

/// Masks the test split per the config and scores `method`.
EvaluationReport run_evaluation(const ExperimentConfig& config, const Workspace& ws, Method method,
                                const ImputerModel* model);

}  // namespace gdimpute
