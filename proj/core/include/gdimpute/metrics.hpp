// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gdimpute/dataset.hpp"
#include "gdimpute/diffusion.hpp"

namespace gdimpute {

inline constexpr int kReportVersion = 1;
inline constexpr int kDefaultKlBins = 20;

// All metrics work on normalized values: numerics min-max scaled by their
// schema range, categorical codes divided by (C - 1).

/// Mean over rows of sqrt(mean squared error over the row's missing
/// numerics). Rows without missing numerics do not count. `masks` marks
/// observed positions. Throws DataError when no numeric cell is missing.
double rmse(const FeatureSchema& schema, std::span<const CompleteDesign> predictions,
            std::span<const CompleteDesign> truths, std::span<const ObservationMask> masks);

/// Mean over rows of the fraction of wrong missing categoricals. Rows
/// without missing categoricals do not count.
double error_rate(const FeatureSchema& schema, std::span<const CompleteDesign> predictions,
                  std::span<const CompleteDesign> truths, std::span<const ObservationMask> masks);

/// Mean absolute error pooled over all missing numeric cells.
double mae(const FeatureSchema& schema, std::span<const CompleteDesign> predictions,
           std::span<const CompleteDesign> truths, std::span<const ObservationMask> masks);

/// 1 - SSE/SST over the pooled missing numeric cells; nullopt when SST = 0.
std::optional<double> r_squared(const FeatureSchema& schema, std::span<const CompleteDesign> predictions,
                                std::span<const CompleteDesign> truths, std::span<const ObservationMask> masks);

/// Per feature, the mean absolute Pearson correlation with every other
/// feature over `train` (categoricals by code; constant features correlate 0).
std::vector<double> mean_abs_correlation(const Dataset& train);
/// Features whose mean absolute correlation exceeds the median of all means.
std::vector<bool> diversity_eligible(const Dataset& train);

/// max_{k != l} |v_k - v_l|.
double max_pairwise_gap(std::span<const double> values);

/// Mean over rows of the mean over eligible missing features of the largest
/// pairwise gap among the K draws. Rows without an eligible missing feature
/// do not count. Throws when K < 2 or nothing is eligible.
double diversity_score(const FeatureSchema& schema, std::span<const SampleSet> samples,
                       const std::vector<bool>& eligible);
double diversity_score(std::span<const SampleSet> samples, const Dataset& train);

/// Mean largest pairwise gap for a single feature over the rows where it is
/// missing, without the eligibility filter.
double feature_diversity(const FeatureSchema& schema, std::span<const SampleSet> samples, std::size_t feature);

/// KL(generated || dataset) in nats between add-one smoothed histograms:
/// `bins` equal-width bins over the schema range for numerics, one bin per
/// label for categoricals.
double feature_kl(const FeatureSpec& spec, std::span<const Value> generated, std::span<const Value> dataset,
                  int bins = kDefaultKlBins);
/// KL between two smoothed count vectors of the same length.
double smoothed_kl(std::span<const double> p_counts, std::span<const double> q_counts);

/// Mean over rows of |mean_k S_kj - y_j|; `feature` must be missing in
/// every row.
double conditional_distance(const FeatureSchema& schema, std::span<const SampleSet> samples,
                            std::span<const CompleteDesign> truths, std::size_t feature);

struct RowBookkeeping {
  std::size_t missing = 0;
  std::size_t missing_numeric = 0;
  std::size_t missing_categorical = 0;
};

struct EvaluationReport {
  std::string method;
  std::size_t n_test = 0;
  int k = 0;
  std::optional<double> rmse;
  std::optional<double> error_rate;
  std::optional<double> mae;
  std::optional<double> r_squared;
  std::optional<double> diversity_score;
  std::map<std::string, double> feature_kl;
  std::map<std::string, double> feature_diversity;
  std::map<std::string, double> conditional_distance;
  std::vector<RowBookkeeping> rows;
  nlohmann::json config;

  nlohmann::json to_json() const;
};

/// Scores `samples` (one SampleSet per case, aligned) against the masked
/// test cases. Point predictions aggregate each sample set; deterministic
/// methods pass K identical draws. Metrics that are undefined for the
/// data (for instance no missing categorical) are reported as null.
EvaluationReport evaluate(const Dataset& train, std::span<const MaskedCase> cases, std::span<const SampleSet> samples,
                          const std::string& method, const nlohmann::json& config = nlohmann::json::object());

/// Deterministic serialization: sorted keys, two-space indent, trailing newline.
std::string report_text(const EvaluationReport& report);

}  // namespace gdimpute
