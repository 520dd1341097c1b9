// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gdimpute/autograd.hpp"

namespace gdimpute {

struct ForestConfig {
  int trees = 25;
  int max_depth = 8;
  int min_samples_split = 2;
  /// Features tried per split; 0 means floor(sqrt(p)).
  int max_features = 0;

  void validate() const;
};

/// Bootstrap-aggregated CART. Regression splits minimise the summed squared
/// error; classification splits minimise the weighted Gini impurity over
/// labels 0..classes-1.
class RandomForest {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf mean or majority label
  };
  using Tree = std::vector<Node>;

  /// `x` is n x p; `y` holds targets, or class labels stored as doubles.
  /// classes == 0 selects regression.
  static RandomForest fit(const ag::Mat& x, std::span<const double> y, int classes, const ForestConfig& config,
                          std::uint64_t seed);

  /// Regression: mean of the tree predictions. Classification: majority
  /// vote, lowest label on ties.
  double predict(std::span<const double> row) const;
  std::size_t tree_count() const { return trees_.size(); }
  bool is_classifier() const { return classes_ > 0; }

 private:
  static double predict_tree(const Tree& tree, std::span<const double> row);

  std::vector<Tree> trees_;
  int classes_ = 0;
};

}  // namespace gdimpute
