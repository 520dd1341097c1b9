// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gdimpute/autograd.hpp"
#include "gdimpute/dataset.hpp"
#include "gdimpute/random_forest.hpp"

namespace gdimpute {

// -- Hot deck ------------------------------------------------------------------

/// Mean over observed positions of |a - b| on min-max normalized numerics and
/// 0/1 mismatch on categoricals. Zero when nothing is observed.
double hotdeck_distance(const FeatureSchema& schema, const PartialDesign& partial, const CompleteDesign& donor);

/// Index of the nearest donor, lowest index on ties.
std::size_t hotdeck_donor(const Dataset& train, const PartialDesign& partial);
CompleteDesign hotdeck_impute(const Dataset& train, const PartialDesign& partial);

// -- Probabilistic PCA -----------------------------------------------------------

struct PpcaOptions {
  /// Latent dimension; nullopt means min(8, numeric features - 1), at least 1.
  std::optional<int> latent_dim;
  double tol = 1e-6;
  int max_iter = 1000;
};

/// x = W z + mu + eps with eps ~ N(0, sigma2 I) over the numeric features
/// (min-max normalized). Categorical features are imputed by their
/// training mode.
struct PpcaModel {
  std::shared_ptr<const FeatureSchema> schema;
  std::vector<std::size_t> numeric;  // schema positions of the modelled features
  Eigen::VectorXd mean;
  ag::Mat weight;  // d x q
  double sigma2 = 0.0;
  std::vector<std::size_t> category_mode;  // per schema position; unused for numerics
  std::vector<double> log_likelihood;      // one entry per EM iteration
  bool converged = false;

  /// W W^T + sigma2 I.
  ag::Mat covariance() const;
};

PpcaModel ppca_fit(const Dataset& train, const PpcaOptions& options = {});
/// Missing numerics take their conditional mean given the observed numerics,
/// clamped to the schema range.
CompleteDesign ppca_impute(const PpcaModel& model, const PartialDesign& partial);

// -- Iterative forest --------------------------------------------------------------

struct ForestImputeOptions {
  int rounds = 10;
  double tol = 1e-4;
  ForestConfig forest;
};

/// MissForest-style iterative imputation over the union of the complete
/// training rows and `partials`. Returns one completion per partial row.
std::vector<CompleteDesign> forest_impute(const Dataset& train, std::span<const PartialDesign> partials,
                                          const ForestImputeOptions& options, std::uint64_t seed);

}  // namespace gdimpute
