// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#include "gdimpute/random_forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gdimpute/error.hpp"
#include "gdimpute/rng.hpp"

namespace gdimpute {

using ag::Mat;

void ForestConfig::validate() const {
  if (trees < 1) throw ConfigError("forest.trees must be >= 1");
  if (max_depth < 0) throw ConfigError("forest.max_depth must be >= 0");
  if (min_samples_split < 2) throw ConfigError("forest.min_samples_split must be >= 2");
  if (max_features < 0) throw ConfigError("forest.max_features must be >= 0");
}

namespace {

struct Builder {
  const Mat& x;
  std::span<const double> y;
  int classes;
  int max_depth;
  int min_split;
  int mtry;
  Rng& rng;

  double leaf_value(const std::vector<int>& idx) const {
    if (classes == 0) {
      double s = 0.0;
      for (int i : idx) s += y[static_cast<std::size_t>(i)];
      return s / static_cast<double>(idx.size());
    }
    std::vector<int> counts(static_cast<std::size_t>(classes), 0);
    for (int i : idx) ++counts[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])];
    return static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }

  bool pure(const std::vector<int>& idx) const {
    const double first = y[static_cast<std::size_t>(idx.front())];
    return std::all_of(idx.begin(), idx.end(), [&](int i) { return y[static_cast<std::size_t>(i)] == first; });
  }

  // Impurity score to minimise: SSE for regression, n * Gini for classes.
  struct Best {
    int feature = -1;
    double threshold = 0.0;
    double score = std::numeric_limits<double>::infinity();
  };

  void scan_feature(const std::vector<int>& idx, int f, Best& best) const {
    std::vector<std::pair<double, double>> vals;
    vals.reserve(idx.size());
    for (int i : idx) vals.emplace_back(x(i, f), y[static_cast<std::size_t>(i)]);
    std::sort(vals.begin(), vals.end());
    const auto n = vals.size();
    if (vals.front().first == vals.back().first) return;
    if (classes == 0) {
      double total = 0.0, total_sq = 0.0;
      for (auto& v : vals) {
        total += v.second;
        total_sq += v.second * v.second;
      }
      double left = 0.0, left_sq = 0.0;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        left += vals[k].second;
        left_sq += vals[k].second * vals[k].second;
        if (vals[k].first == vals[k + 1].first) continue;
        const double nl = static_cast<double>(k + 1);
        const double nr = static_cast<double>(n - k - 1);
        const double right = total - left;
        const double sse = (left_sq - left * left / nl) + ((total_sq - left_sq) - right * right / nr);
        if (sse < best.score) {
          best = {f, 0.5 * (vals[k].first + vals[k + 1].first), sse};
        }
      }
    } else {
      std::vector<double> total(static_cast<std::size_t>(classes), 0.0), left(total.size(), 0.0);
      for (auto& v : vals) total[static_cast<std::size_t>(v.second)] += 1.0;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        left[static_cast<std::size_t>(vals[k].second)] += 1.0;
        if (vals[k].first == vals[k + 1].first) continue;
        const double nl = static_cast<double>(k + 1);
        const double nr = static_cast<double>(n - k - 1);
        double sl = 0.0, sr = 0.0;
        for (std::size_t c = 0; c < total.size(); ++c) {
          sl += left[c] * left[c];
          const double r = total[c] - left[c];
          sr += r * r;
        }
        // n_l * gini_l + n_r * gini_r
        const double score = (nl - sl / nl) + (nr - sr / nr);
        if (score < best.score) {
          best = {f, 0.5 * (vals[k].first + vals[k + 1].first), score};
        }
      }
    }
  }

  int build(RandomForest::Tree& tree, std::vector<int> idx, int depth) {
    const int id = static_cast<int>(tree.size());
    tree.emplace_back();
    tree[static_cast<std::size_t>(id)].value = leaf_value(idx);
    if (depth >= max_depth || static_cast<int>(idx.size()) < min_split || pure(idx)) return id;

    const auto p = static_cast<int>(x.cols());
    std::vector<int> features(static_cast<std::size_t>(p));
    std::iota(features.begin(), features.end(), 0);
    // Partial Fisher-Yates: the first mtry entries are a uniform subset.
    for (int k = 0; k < mtry; ++k) {
      std::uniform_int_distribution<int> pick(k, p - 1);
      std::swap(features[static_cast<std::size_t>(k)], features[static_cast<std::size_t>(pick(rng))]);
    }
    Best best;
    for (int k = 0; k < mtry; ++k) scan_feature(idx, features[static_cast<std::size_t>(k)], best);
    if (best.feature < 0) return id;

    std::vector<int> left, right;
    for (int i : idx) (x(i, best.feature) <= best.threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    const int l = build(tree, std::move(left), depth + 1);
    const int r = build(tree, std::move(right), depth + 1);
    auto& node = tree[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = r;
    return id;
  }
};

}  // namespace

RandomForest RandomForest::fit(const Mat& x, std::span<const double> y, int classes, const ForestConfig& config,
                               std::uint64_t seed) {
  config.validate();
  if (x.rows() == 0 || x.rows() != static_cast<Eigen::Index>(y.size())) {
    throw DataError("random forest needs a non-empty design matrix aligned with its targets");
  }
  if (classes < 0) throw ConfigError("class count must be >= 0");
  for (double v : y) {
    if (!std::isfinite(v)) throw DataError("random forest target is not finite");
    if (classes > 0 && (v < 0 || v >= classes || v != std::floor(v))) throw DataError("class label out of range");
  }
  RandomForest rf;
  rf.classes_ = classes;
  const auto n = static_cast<int>(x.rows());
  const auto p = static_cast<int>(x.cols());
  int mtry = config.max_features > 0 ? config.max_features
                                     : static_cast<int>(std::floor(std::sqrt(static_cast<double>(p))));
  mtry = std::clamp(mtry, p > 0 ? 1 : 0, p);
  for (int t = 0; t < config.trees; ++t) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(t));
    std::uniform_int_distribution<int> draw(0, n - 1);
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (auto& i : idx) i = draw(rng);
    Builder b{x, y, classes, p > 0 ? config.max_depth : 0, config.min_samples_split, mtry, rng};
    Tree tree;
    b.build(tree, std::move(idx), 0);
    rf.trees_.push_back(std::move(tree));
  }
  return rf;
}

double RandomForest::predict_tree(const Tree& tree, std::span<const double> row) {
  int id = 0;
  while (tree[static_cast<std::size_t>(id)].feature >= 0) {
    const auto& n = tree[static_cast<std::size_t>(id)];
    id = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return tree[static_cast<std::size_t>(id)].value;
}

double RandomForest::predict(std::span<const double> row) const {
  if (classes_ == 0) {
    double s = 0.0;
    for (const auto& t : trees_) s += predict_tree(t, row);
    return s / static_cast<double>(trees_.size());
  }
  std::vector<int> votes(static_cast<std::size_t>(classes_), 0);
  for (const auto& t : trees_) ++votes[static_cast<std::size_t>(predict_tree(t, row))];
  return static_cast<double>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

}  // namespace gdimpute
