// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#include <gtest/gtest.h>

#include <cmath>

#include "gdimpute/diffusion.hpp"
#include "gdimpute/error.hpp"
#include "test_support.hpp"

namespace gdimpute {
namespace {

TEST(NoiseSchedule, QuadraticBetasAndCumulativeProduct) {
  const auto s = NoiseSchedule::quadratic(ScheduleConfig{});
  ASSERT_EQ(s.steps(), 50);
  EXPECT_NEAR(s.beta(1), 1e-4, 1e-15);
  EXPECT_NEAR(s.beta(50), 0.5, 1e-15);
  double prod = 1.0;
  for (int t = 1; t <= 50; ++t) {
    const double root = std::sqrt(1e-4) + (t - 1) * (std::sqrt(0.5) - std::sqrt(1e-4)) / 49.0;
    EXPECT_NEAR(s.beta(t), root * root, 1e-15);
    prod *= 1.0 - s.beta(t);
    EXPECT_NEAR(s.alpha_bar(t), prod, 1e-15);
    if (t > 1) {
      EXPECT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
    }
  }
  EXPECT_EQ(s.alpha_bar(0), 1.0);
  EXPECT_LT(s.alpha_bar(50), 1e-3);
  EXPECT_THROW(s.beta(0), ConfigError);
  EXPECT_THROW(s.beta(51), ConfigError);
}

TEST(NoiseSchedule, PosteriorVariance) {
  const auto s = NoiseSchedule::from_betas({0.1, 0.2, 0.3});
  EXPECT_NEAR(s.posterior_variance(1), 0.0, 1e-15);
  const double ab1 = 0.9, ab2 = 0.9 * 0.8;
  EXPECT_NEAR(s.posterior_variance(2), 0.2 * (1 - ab1) / (1 - ab2), 1e-15);
  EXPECT_THROW(NoiseSchedule::from_betas({}), ConfigError);
  EXPECT_THROW(NoiseSchedule::from_betas({0.1, 1.0}), ConfigError);
}

TEST(ForwardNoise, ClosedForm) {
  const auto s = NoiseSchedule::quadratic(ScheduleConfig{});
  Eigen::VectorXd x0(3), eps(3);
  x0 << 1.0, -2.0, 0.5;
  eps << 0.3, 0.1, -1.0;
  const auto xt = forward_noise(x0, 10, eps, s);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(xt(i), std::sqrt(s.alpha_bar(10)) * x0(i) + std::sqrt(1 - s.alpha_bar(10)) * eps(i), 1e-15);
  }
  EXPECT_THROW(forward_noise(x0, 0, eps, s), ConfigError);
  EXPECT_THROW(forward_noise(x0, 51, eps, s), ConfigError);
}

TEST(ForwardNoise, MomentsMatchTheMarginal) {
  const auto s = NoiseSchedule::quadratic(ScheduleConfig{});
  Rng rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  const int n = 20000;
  for (int t : {1, 10, 30, 50}) {
    Eigen::VectorXd x0 = Eigen::VectorXd::Constant(n, 2.0), eps(n);
    for (int i = 0; i < n; ++i) eps(i) = g(rng);
    const auto xt = forward_noise(x0, t, eps, s);
    const double mean = xt.mean();
    const double var = (xt.array() - mean).square().sum() / (n - 1);
    const double sd = std::sqrt(1 - s.alpha_bar(t));
    EXPECT_LT(std::abs(mean - 2.0 * std::sqrt(s.alpha_bar(t))), 4 * sd / std::sqrt(n));
    EXPECT_LT(std::abs(var - sd * sd), 4 * sd * sd * std::sqrt(2.0 / (n - 1)));
  }
}

TEST(Representation, NumericRoundTripAndCategoryTargets) {
  auto schema = testing::small_schema();
  auto model = ImputerModel::create(schema, testing::small_graph(*schema), testing::tiny_config(), 3);
  const auto data = testing::random_dataset(schema, 50, 4);
  model.fit_representation(data);
  EXPECT_EQ(model.feature_width(0), 1);
  EXPECT_EQ(model.feature_width(1), 4);
  double mean = 0.0;
  for (const auto& row : data.rows) {
    const auto x = model.represent(encode(*schema, row));
    mean += x(0, 0) / 50.0;
    for (std::size_t f = 0; f < schema->size(); ++f) {
      const std::vector<double> v(x.row(static_cast<Eigen::Index>(f)).data(),
                                  x.row(static_cast<Eigen::Index>(f)).data() + x.cols());
      const auto back = model.decode_feature(f, v);
      if (schema->feature(f).is_numeric()) {
        EXPECT_NEAR(std::get<double>(back), row.number(f), 1e-9);
      } else {
        EXPECT_EQ(std::get<std::string>(back), row.label(f));
      }
    }
  }
  EXPECT_NEAR(mean, 0.0, 1e-12);
  const auto& targets = model.parameters().at("repr.category_targets");
  EXPECT_FALSE(targets.trainable);
  EXPECT_FALSE(model.parameters().at("repr.numeric_stats").trainable);
  // Decoding clamps to the schema range.
  const std::vector<double> huge{1e6};
  EXPECT_EQ(std::get<double>(model.decode_feature(0, huge)), 700.0);
}

TEST(Imputer, ParameterInitIsSeedDeterministic) {
  auto schema = testing::small_schema();
  auto a = ImputerModel::create(schema, testing::small_graph(*schema), testing::tiny_config(), 5);
  auto b = ImputerModel::create(schema, testing::small_graph(*schema), testing::tiny_config(), 5);
  auto c = ImputerModel::create(schema, testing::small_graph(*schema), testing::tiny_config(), 6);
  ASSERT_EQ(a.parameters().size(), b.parameters().size());
  bool differs = false;
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    EXPECT_EQ(a.parameters().items()[i]->value, b.parameters().items()[i]->value);
    differs = differs || a.parameters().items()[i]->value != c.parameters().items()[i]->value;
  }
  EXPECT_TRUE(differs);
}

TEST(Imputer, UntrainedModelRefusesToSample) {
  auto schema = testing::small_schema();
  auto model = ImputerModel::create(schema, testing::small_graph(*schema), testing::tiny_config(), 5);
  Rng rng(1);
  auto p = testing::random_row(*schema, rng).to_partial();
  p.set(0, Missing{});
  EXPECT_THROW(sample(model, p, 3, 1), ModelError);
}

TEST(Imputer, TrainingIsDeterministic) {
  auto a = testing::tiny_trained_model(9);
  auto b = testing::tiny_trained_model(9);
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    EXPECT_EQ(a.parameters().items()[i]->value, b.parameters().items()[i]->value)
        << a.parameters().items()[i]->name;
  }
  EXPECT_TRUE(a.trained());
}

TEST(Imputer, WeightAverageReplacesFinalWeights) {
  auto schema = testing::small_schema();
  const auto data = testing::random_dataset(schema, 60, 2);
  auto fit = [&](double decay) {
    auto m = ImputerModel::create(schema, testing::small_graph(*schema), testing::tiny_config(), 4);
    TrainingConfig tc;
    tc.epochs = 3;
    tc.batch_size = 16;
    tc.ema_decay = decay;
    train(m, data, tc, 6);
    return m;
  };
  auto plain = fit(0.0);
  auto averaged = fit(0.9);
  auto again = fit(0.9);
  const auto* p = plain.parameters().find("fusion.query.weight");
  const auto* a = averaged.parameters().find("fusion.query.weight");
  ASSERT_NE(p, nullptr);
  EXPECT_NE(p->value, a->value);
  EXPECT_EQ(a->value, again.parameters().find("fusion.query.weight")->value);
  // Frozen tensors are not averaged.
  EXPECT_EQ(plain.parameters().find("repr.numeric_stats")->value, averaged.parameters().find("repr.numeric_stats")->value);

  TrainingConfig bad;
  bad.ema_decay = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  TrainingConfig tc;
  tc.ema_decay = 0.99;
  EXPECT_EQ(TrainingConfig::from_json(tc.to_json()).ema_decay, 0.99);
}

TEST(Imputer, CallbackStopsTraining) {
  auto schema = testing::small_schema();
  auto model = ImputerModel::create(schema, testing::small_graph(*schema), testing::tiny_config(), 5);
  TrainingConfig tc;
  tc.epochs = 10;
  const auto r = train(model, testing::random_dataset(schema, 40, 1), tc, 3,
                       [](int epoch, double loss) { return epoch < 2 && std::isfinite(loss); });
  EXPECT_EQ(r.loss_trace.size(), 3u);
  EXPECT_TRUE(r.stopped_early);
}

TEST(Sampling, ConservesObservedValuesAndValidates) {
  const auto model = testing::tiny_trained_model();
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto truth = testing::random_row(model.schema(), rng);
    const auto partial = apply_mask(truth, random_mask(5, 1 + trial % 4, rng));
    const auto set = sample(model, partial, 6, static_cast<std::uint64_t>(trial));
    ASSERT_EQ(set.draws.size(), 6u);
    for (const auto& d : set.draws) {
      EXPECT_TRUE(is_valid(model.schema(), d));
      for (std::size_t f = 0; f < 5; ++f) {
        if (!partial.is_missing(f)) {
          EXPECT_EQ(d[f], partial[f]);
        }
      }
    }
  }
}

TEST(Sampling, SeedControlsDraws) {
  const auto model = testing::tiny_trained_model();
  Rng rng(3);
  auto p = testing::random_row(model.schema(), rng).to_partial();
  p.set(0, Missing{});
  p.set(3, Missing{});
  const auto a = sample(model, p, 8, 42);
  EXPECT_EQ(sample(model, p, 8, 42).draws, a.draws);
  EXPECT_NE(sample(model, p, 8, 43).draws, a.draws);
  // Trajectories are independent: the first draws of K=8 and K=3 agree.
  const auto b = sample(model, p, 3, 42);
  for (int j = 0; j < 3; ++j) EXPECT_EQ(b.draws[j], a.draws[j]);
  EXPECT_NE(a.draws[0], a.draws[1]);
}

TEST(Sampling, ManyMatchesPerRowSeeds) {
  const auto model = testing::tiny_trained_model();
  Rng rng(4);
  std::vector<PartialDesign> partials;
  for (int i = 0; i < 4; ++i) partials.push_back(apply_mask(testing::random_row(model.schema(), rng), random_mask(5, 2, rng)));
  const auto many = sample_many(model, partials, 5, 77);
  ASSERT_EQ(many.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto single = sample(model, partials[i], 5, derive_seed(77, i));
    for (int j = 0; j < 5; ++j) {
      for (std::size_t f = 0; f < 5; ++f) {
        if (model.schema().feature(f).is_numeric()) {
          EXPECT_NEAR(many[i].draws[j].number(f), single.draws[j].number(f), 1e-9);
        } else {
          EXPECT_EQ(many[i].draws[j].label(f), single.draws[j].label(f));
        }
      }
    }
  }
}

TEST(Sampling, FullyObservedRowReturnsCopies) {
  const auto model = testing::tiny_trained_model();
  Rng rng(5);
  const auto row = testing::random_row(model.schema(), rng);
  const auto set = sample(model, row.to_partial(), 4, 1);
  ASSERT_EQ(set.draws.size(), 4u);
  for (const auto& d : set.draws) EXPECT_EQ(d, row);
  EXPECT_THROW(sample(model, row.to_partial(), 0, 1), ConfigError);
}

TEST(Aggregate, MeanAndLowestIndexMode) {
  auto schema = testing::small_schema();
  SampleSet s;
  s.input = PartialDesign({Missing{}, Missing{}, 600.0, 0.0, std::string("gel")});
  auto draw = [](double len, const char* style) {
    return CompleteDesign({len, std::string(style), 600.0, 0.0, std::string("gel")});
  };
  s.draws = {draw(500, "track"), draw(600, "gravel"), draw(700, "gravel"), draw(400, "track")};
  const auto agg = aggregate(*schema, s);
  EXPECT_DOUBLE_EQ(agg.number(0), 550.0);
  // gravel (index 1) and track (index 2) tie; the lower index wins.
  EXPECT_EQ(agg.label(1), "gravel");
  EXPECT_EQ(agg.number(2), 600.0);
}

TEST(ImputerConfig, JsonRoundTrip) {
  const auto c = testing::tiny_config(GraphVariant::kGcn);
  const auto j = c.to_json();
  EXPECT_EQ(ImputerConfig::from_json(j).to_json(), j);
  TrainingConfig t;
  t.epochs = 7;
  EXPECT_EQ(TrainingConfig::from_json(t.to_json()).epochs, 7);
  t.mask_fraction = 0.0;
  EXPECT_THROW(t.validate(), ConfigError);
  DenoiserConfig d;
  d.channels = 10;
  d.heads = 4;
  EXPECT_THROW(d.validate(), ConfigError);
}

}  // namespace
}  // namespace gdimpute
