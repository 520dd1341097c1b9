// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gdimpute/rng.hpp"
#include "gdimpute/schema.hpp"

namespace gdimpute {

enum class Provenance { kLoaded, kAugmented, kSynthetic };

std::string_view to_string(Provenance p);

struct Dataset {
  std::shared_ptr<const FeatureSchema> schema;
  std::vector<CompleteDesign> rows;
  Provenance provenance = Provenance::kLoaded;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
};

// -- CSV ---------------------------------------------------------------------

/// Splits CSV text into records. Supports quoted fields with doubled quotes.
std::vector<std::vector<std::string>> parse_csv(std::istream& in);
std::string csv_escape(const std::string& field);

/// Loads a complete dataset. Throws DataError naming row and column on any
/// header mismatch, empty cell, unparsable or out-of-range number, or
/// unknown category.
Dataset load_csv(const std::filesystem::path& path, std::shared_ptr<const FeatureSchema> schema);
/// Loads rows that may contain missing cells (empty strings).
std::vector<PartialDesign> load_partial_csv(const std::filesystem::path& path,
                                            const FeatureSchema& schema);

void write_csv(const std::filesystem::path& path, const FeatureSchema& schema,
               const std::vector<CompleteDesign>& rows);
void write_csv(const std::filesystem::path& path, const FeatureSchema& schema,
               const std::vector<PartialDesign>& rows);

// -- Augmentation, split, masking -------------------------------------------

/// Extends `dataset` to `target_size` rows. Each new row clones a uniformly
/// chosen source row and resamples a uniformly sized, uniformly chosen
/// nonempty subset of its features uniformly over their declared domain.
Dataset augment(const Dataset& dataset, std::size_t target_size, std::uint64_t seed);

struct SplitSpec {
  double train_fraction = 0.9;
  std::uint64_t seed = 0;
};

/// Shuffled disjoint partition with floor(train_fraction * N) training rows.
std::pair<Dataset, Dataset> split(const Dataset& dataset, const SplitSpec& spec);

enum class MaskMode { kRandomPerRow, kFixedFeature };

struct MaskingProtocol {
  double missing_fraction = 0.10;
  MaskMode mode = MaskMode::kRandomPerRow;
  std::string target_feature;
  std::uint64_t seed = 0;

  void validate(const FeatureSchema& schema) const;
};

/// Number of hidden positions for a row of `feature_count` features:
/// round-to-nearest of fraction * D with a floor of 1.
std::size_t masked_count(std::size_t feature_count, double fraction);

/// Mask hiding exactly `hidden` uniformly chosen positions.
ObservationMask random_mask(std::size_t feature_count, std::size_t hidden, Rng& rng);

struct MaskedCase {
  PartialDesign partial;
  CompleteDesign truth;
};

std::vector<MaskedCase> make_masked_testset(const Dataset& test, const MaskingProtocol& protocol);

// -- Synthetic assemblies ----------------------------------------------------

/// Desk-scale parametric assembly generator. Every component owns a latent
/// factor; a component's factor mixes its own independent draw with those of
/// its graph neighbours according to `coupling`. Numeric features are
/// linear-plus-noise functions of their component's factor.
struct SyntheticConfig {
  std::vector<std::string> components{"frame", "fork", "wheel", "saddle", "handle"};
  /// Empty means a path over `components` in declaration order.
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<int> numeric_per_component{4, 4, 3, 3, 4};
  std::size_t rows = 2000;
  double coupling = 1.0;
  double noise = 0.05;
  /// Adds a binary feature that is a threshold function of a numeric driver.
  bool deterministic_categorical = true;
  /// Adds a categorical feature that is independent of everything else.
  bool noise_categorical = true;
  int noise_categories = 4;

  static SyntheticConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
  void validate() const;
};

struct SyntheticBundle {
  std::shared_ptr<const FeatureSchema> schema;
  AssemblyGraph graph;
  Dataset dataset;
  std::optional<std::size_t> deterministic_feature;
  std::optional<std::size_t> driver_feature;
  std::optional<std::size_t> noise_feature;
  /// Threshold (in the driver's raw units) that separates the two labels.
  double driver_threshold = 0.0;
};

SyntheticBundle generate_synthetic(const SyntheticConfig& config, std::uint64_t seed);

}  // namespace gdimpute
