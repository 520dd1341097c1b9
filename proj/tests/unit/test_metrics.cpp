// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#include <gtest/gtest.h>

#include <cmath>

#include "gdimpute/error.hpp"
#include "gdimpute/metrics.hpp"
#include "oracles.hpp"

namespace gdimpute {
namespace {

std::shared_ptr<const FeatureSchema> unit_schema() {
  std::vector<FeatureSpec> f;
  f.push_back({"a", FeatureKind::kNumeric, 0.0, 1.0, {}, "c"});
  f.push_back({"b", FeatureKind::kNumeric, 0.0, 1.0, {}, "c"});
  f.push_back({"k", FeatureKind::kCategorical, 0, 1, {"x", "y"}, "c"});
  f.push_back({"m", FeatureKind::kCategorical, 0, 1, {"x", "y", "z"}, "c"});
  return std::make_shared<const FeatureSchema>(FeatureSchema::create({"c"}, f));
}

TEST(Metrics, MatchBruteForceOracles) {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto in = testing::oracle::random_instance(rng);
    EXPECT_LT(testing::oracle::library_deviation(in), 1e-10) << "instance " << trial;
  }
}

TEST(Metrics, RmseHandCase) {
  std::vector<FeatureSpec> f;
  f.push_back({"p", FeatureKind::kNumeric, 0.0, 1.0, {}, "c"});
  f.push_back({"q", FeatureKind::kNumeric, 0.0, 1.0, {}, "c"});
  const auto s = FeatureSchema::create({"c"}, f);
  // Errors of 2 on both missing features: sqrt((4 + 4) / 2) = 2.
  const std::vector<CompleteDesign> pred{CompleteDesign({3.0, -1.0})};
  const std::vector<CompleteDesign> truth{CompleteDesign({1.0, 1.0})};
  const std::vector<ObservationMask> mask{ObservationMask::all(2, false)};
  EXPECT_EQ(rmse(s, pred, truth, mask), 2.0);
}

TEST(Metrics, ErrorRateMaeAndRSquaredHandCases) {
  auto s = unit_schema();
  const std::vector<CompleteDesign> pred{CompleteDesign({0.2, 0.4, std::string("x"), std::string("z")})};
  const std::vector<CompleteDesign> truth{CompleteDesign({0.1, 0.3, std::string("x"), std::string("y")})};
  const std::vector<ObservationMask> mask{ObservationMask::all(4, false)};
  EXPECT_DOUBLE_EQ(error_rate(*s, pred, truth, mask), 0.5);
  EXPECT_NEAR(mae(*s, pred, truth, mask), 0.1, 1e-15);
  EXPECT_FALSE(r_squared(*s, truth, truth, {std::vector<ObservationMask>{ObservationMask(std::vector<bool>{false, true, true, true})}}).has_value());
  EXPECT_EQ(*r_squared(*s, truth, truth, mask), 1.0);
  EXPECT_THROW(error_rate(*s, pred, truth, {std::vector<ObservationMask>{ObservationMask(std::vector<bool>{false, false, true, true})}}),
               DataError);
}

TEST(Metrics, KlTwoBinHandCase) {
  // Smoothed counts give p = (0.75, 0.25) and q = (0.5, 0.5).
  const double expected = 0.75 * std::log(1.5) + 0.25 * std::log(0.5);
  const std::vector<double> p{2, 0}, q{0, 0};
  EXPECT_NEAR(smoothed_kl(p, q), 0.1308, 1e-4);
  EXPECT_NEAR(smoothed_kl(p, q), expected, 1e-15);
  auto s = unit_schema();
  const std::vector<Value> gen{std::string("x"), std::string("x")};
  const std::vector<Value> data{std::string("x"), std::string("y")};
  EXPECT_NEAR(feature_kl(s->feature(2), gen, data), expected, 1e-15);
}

TEST(Metrics, KlOfIdenticalSamplesIsZero) {
  auto s = unit_schema();
  Rng rng(3);
  std::vector<Value> v;
  for (int i = 0; i < 50; ++i) v.emplace_back(std::uniform_real_distribution<double>(0, 1)(rng));
  EXPECT_EQ(feature_kl(s->feature(0), v, v), 0.0);
  EXPECT_THROW(feature_kl(s->feature(0), v, v, 1), ConfigError);
  // The top of the range falls in the last bin.
  const std::vector<Value> top{1.0};
  const std::vector<Value> high{0.99};
  EXPECT_EQ(feature_kl(s->feature(0), top, high), 0.0);
}

TEST(Metrics, DiversityHandCases) {
  const double draws[] = {0.0, 0.3, 0.1};
  EXPECT_NEAR(max_pairwise_gap(draws), 0.3, 1e-15);
  auto s = unit_schema();
  SampleSet set;
  set.input = PartialDesign({Missing{}, 0.5, Missing{}, std::string("y")});
  for (int k = 0; k < 4; ++k) set.draws.push_back(CompleteDesign({0.25, 0.5, std::string("y"), std::string("y")}));
  const std::vector<SampleSet> sets{set};
  EXPECT_EQ(diversity_score(*s, sets, {true, true, true, true}), 0.0);
  EXPECT_EQ(feature_diversity(*s, sets, 0), 0.0);
  set.draws[2] = CompleteDesign({0.75, 0.5, std::string("x"), std::string("y")});
  const std::vector<SampleSet> varied{set};
  EXPECT_DOUBLE_EQ(diversity_score(*s, varied, {true, true, true, true}), (0.5 + 1.0) / 2);
  EXPECT_DOUBLE_EQ(diversity_score(*s, varied, {false, true, true, true}), 1.0);
  EXPECT_THROW(diversity_score(*s, varied, {false, true, false, true}), DataError);
  set.draws.resize(1);
  const std::vector<SampleSet> single{set};
  EXPECT_THROW(diversity_score(*s, single, {true, true, true, true}), DataError);
}

TEST(Metrics, DiversityIgnoresDrawOrder) {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    auto in = testing::oracle::random_instance(rng);
    const auto eligible = std::vector<bool>(in.schema->size(), true);
    const double before = diversity_score(*in.schema, in.samples, eligible);
    for (auto& set : in.samples) std::shuffle(set.draws.begin(), set.draws.end(), rng);
    EXPECT_EQ(diversity_score(*in.schema, in.samples, eligible), before);
  }
}

TEST(Metrics, PointMetricsIgnoreRowOrder) {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    auto in = testing::oracle::random_instance(rng);
    if (!testing::oracle::rmse(in)) continue;
    std::vector<ObservationMask> masks;
    for (const auto& p : in.partials) masks.push_back(p.mask());
    const double r = rmse(*in.schema, in.predictions, in.truths, masks);
    const double m = mae(*in.schema, in.predictions, in.truths, masks);
    std::vector<std::size_t> order(in.truths.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<CompleteDesign> p2, t2;
    std::vector<ObservationMask> m2;
    for (auto i : order) {
      p2.push_back(in.predictions[i]);
      t2.push_back(in.truths[i]);
      m2.push_back(masks[i]);
    }
    EXPECT_NEAR(rmse(*in.schema, p2, t2, m2), r, 1e-12);
    EXPECT_NEAR(mae(*in.schema, p2, t2, m2), m, 1e-12);
  }
}

TEST(Metrics, ConditionalDistanceHandCase) {
  std::vector<FeatureSpec> f;
  f.push_back({"p", FeatureKind::kNumeric, 0.0, 4.0, {}, "c"});
  f.push_back({"q", FeatureKind::kNumeric, 0.0, 4.0, {}, "c"});
  const auto s = FeatureSchema::create({"c"}, f);
  SampleSet set;
  set.input = PartialDesign({Missing{}, 2.0});
  set.draws = {CompleteDesign({1.0, 2.0}), CompleteDesign({3.0, 2.0})};
  const std::vector<SampleSet> sets{set};
  const std::vector<CompleteDesign> truth{CompleteDesign({1.0, 2.0})};
  // |2 - 1| in raw units, 1/4 after scaling by the range.
  EXPECT_DOUBLE_EQ(conditional_distance(s, sets, truth, 0), 0.25);
  EXPECT_THROW(conditional_distance(s, sets, truth, 1), DataError);
}

TEST(Metrics, EligibilityPicksCorrelatedFeatures) {
  std::vector<FeatureSpec> f;
  for (const char* n : {"a", "b", "c", "noise"}) f.push_back({n, FeatureKind::kNumeric, -10.0, 10.0, {}, "c"});
  auto s = std::make_shared<const FeatureSchema>(FeatureSchema::create({"c"}, f));
  Dataset d;
  d.schema = s;
  Rng rng(6);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double z = g(rng);
    d.rows.push_back(CompleteDesign({z, 2 * z + 0.1 * g(rng), -z + 0.5 * g(rng), g(rng)}));
  }
  const auto e = diversity_eligible(d);
  EXPECT_TRUE(e[0]);
  EXPECT_TRUE(e[1]);
  EXPECT_FALSE(e[3]);
  const auto mc = mean_abs_correlation(d);
  EXPECT_LT(mc[3], 0.2);
}

TEST(Evaluate, DeterministicMethodHasZeroDiversityAndStableText) {
  Rng rng(7);
  auto in = testing::oracle::random_instance(rng);
  while (!diversity_eligible(in.train)[in.always_missing]) in = testing::oracle::random_instance(rng);
  std::vector<MaskedCase> cases;
  std::vector<SampleSet> copies;
  for (std::size_t i = 0; i < in.truths.size(); ++i) {
    cases.push_back({in.partials[i], in.truths[i]});
    SampleSet s;
    s.input = in.partials[i];
    s.draws.assign(3, in.truths[i]);
    copies.push_back(s);
  }
  const auto report = evaluate(in.train, cases, copies, "oracle", nlohmann::json{{"seed", 1}});
  ASSERT_TRUE(report.diversity_score.has_value());
  EXPECT_EQ(*report.diversity_score, 0.0);
  // Averaging identical draws can move the point prediction by an ulp.
  if (report.rmse) {
    EXPECT_NEAR(*report.rmse, 0.0, 1e-15);
  }
  if (report.error_rate) {
    EXPECT_EQ(*report.error_rate, 0.0);
  }
  EXPECT_EQ(report.n_test, in.truths.size());
  EXPECT_EQ(report.k, 3);
  const auto text = report_text(report);
  EXPECT_EQ(text, report_text(evaluate(in.train, cases, copies, "oracle", nlohmann::json{{"seed", 1}})));
  EXPECT_EQ(text.back(), '\n');
  const auto j = nlohmann::json::parse(text);
  EXPECT_EQ(j.at("report_version"), kReportVersion);
  EXPECT_TRUE(j.contains("normalization"));
  EXPECT_EQ(j.at("rows").size(), in.truths.size());
  // Keys are emitted in sorted order.
  EXPECT_LT(text.find("\"config\""), text.find("\"method\""));
}

}  // namespace
}  // namespace gdimpute
