// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gdimpute/autograd.hpp"
#include "gdimpute/dataset.hpp"
#include "gdimpute/graph_encoder.hpp"
#include "gdimpute/nn.hpp"
#include "gdimpute/schema.hpp"
#include "gdimpute/tokenizer.hpp"

namespace gdimpute {

struct ScheduleConfig {
  int steps = 50;
  double beta_start = 1e-4;
  double beta_end = 0.5;

  void validate() const;
  nlohmann::json to_json() const;
  static ScheduleConfig from_json(const nlohmann::json& j);
};

/// beta_t for t = 1..T, with alpha_t = 1 - beta_t and alpha_bar_t their
/// running product. Index 0 holds the alpha_bar_0 = 1 convention.
class NoiseSchedule {
 public:
  NoiseSchedule() = default;
  /// Quadratic: betas are the squares of an even grid from sqrt(start) to
  /// sqrt(end).
  static NoiseSchedule quadratic(const ScheduleConfig& config);
  static NoiseSchedule from_betas(std::vector<double> betas);

  int steps() const { return static_cast<int>(betas_.size()); }
  double beta(int t) const;
  double alpha(int t) const { return 1.0 - beta(t); }
  double alpha_bar(int t) const;
  /// beta_t (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t).
  double posterior_variance(int t) const;

 private:
  std::vector<double> betas_;
  std::vector<double> alpha_bar_;  // size T + 1
};

/// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) noise. Throws for t
/// outside [1, T].
Eigen::VectorXd forward_noise(const Eigen::VectorXd& x0, int t, const Eigen::VectorXd& noise,
                              const NoiseSchedule& schedule);

struct DenoiserConfig {
  int blocks = 4;
  int channels = 64;
  int time_dim = 64;
  int heads = 4;

  void validate() const;
  nlohmann::json to_json() const;
  static DenoiserConfig from_json(const nlohmann::json& j);
};

struct ImputerConfig {
  GraphEncoderConfig encoder;
  FusionConfig fusion;
  DenoiserConfig denoiser;
  ScheduleConfig schedule;
  /// Width of the frozen per-category targets in diffusion space.
  int category_dim = 8;

  void validate() const;
  nlohmann::json to_json() const;
  static ImputerConfig from_json(const nlohmann::json& j);
};

struct TrainingConfig {
  int epochs = 200;
  int batch_size = 64;
  double learning_rate = 1e-3;
  /// Fraction of features hidden by each training row's conditioning mask.
  double mask_fraction = 0.10;
  double clip_norm = 1.0;
  /// Decay of an exponential moving average of the weights, which replaces
  /// the final weights when training ends; 0 disables it.
  double ema_decay = 0.0;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainingConfig from_json(const nlohmann::json& j);
};

struct TrainingResult {
  /// Mean loss per epoch, in order.
  std::vector<double> loss_trace;
  bool stopped_early = false;
};

/// K completions of one partial design.
struct SampleSet {
  PartialDesign input;
  std::vector<CompleteDesign> draws;

  std::vector<std::size_t> missing_positions() const { return input.mask().missing_positions(); }
};

/// Mean for numeric features, mode for categorical features (lowest category
/// index on ties). Observed entries come from the input.
CompleteDesign aggregate(const FeatureSchema& schema, const SampleSet& samples);

/// Graph-conditioned diffusion imputer: graph encoder, tokenizer, fusion and
/// a transformer denoiser over the per-feature diffusion representation.
class ImputerModel {
 public:
  ImputerModel(const ImputerModel&) = delete;
  ImputerModel& operator=(const ImputerModel&) = delete;
  ImputerModel(ImputerModel&&) noexcept = default;
  ImputerModel& operator=(ImputerModel&&) noexcept = default;

  /// Fresh model with parameters initialised from `seed`.
  static ImputerModel create(std::shared_ptr<const FeatureSchema> schema, AssemblyGraph graph,
                             const ImputerConfig& config, std::uint64_t seed);

  const FeatureSchema& schema() const { return *schema_; }
  std::shared_ptr<const FeatureSchema> schema_ptr() const { return schema_; }
  const AssemblyGraph& graph() const { return graph_; }
  const ImputerConfig& config() const { return config_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  ag::ParameterSet& parameters() { return *params_; }
  const ag::ParameterSet& parameters() const { return *params_; }
  const GraphEncoder& encoder() const { return encoder_; }
  const FeatureTokenizer& tokenizer() const { return tokenizer_; }
  const CrossModalFusion& fusion() const { return fusion_; }

  bool trained() const { return trained_; }
  void set_trained(bool t) { trained_ = t; }

  /// Width of feature f in diffusion space (1 or category_dim).
  int feature_width(std::size_t f) const;
  int max_width() const { return max_width_; }

  /// Records per-feature standardisation statistics from `data`.
  void fit_representation(const Dataset& data);
  /// Diffusion-space target of one encoded row; D x max_width, zero padded.
  ag::Mat represent(const EncodedRow& row) const;
  /// Decodes one feature's diffusion-space vector into a schema value.
  Value decode_feature(std::size_t f, std::span<const double> x) const;

  /// Conditioning tensor for a batch of encoded rows: (rows * D) x d_token.
  ag::Var condition(ag::Tape& tape, std::span<const EncodedRow> rows, Rng* dropout_rng = nullptr) const;
  /// Predicted noise; x_t and cond are (rows * D) x max_width and
  /// (rows * D) x d_token, steps has one entry per row.
  ag::Var denoise(ag::Tape& tape, ag::Var x_t, const std::vector<int>& steps, ag::Var cond) const;

 private:
  ImputerModel() = default;

  struct Block {
    nn::Linear time;
    nn::Linear cond;
    nn::LayerNorm norm_attn;
    nn::Linear q, k, v, o;
    nn::LayerNorm norm_ffn;
    nn::Linear ffn_in, ffn_out;
  };

  std::shared_ptr<const FeatureSchema> schema_;
  AssemblyGraph graph_;
  ImputerConfig config_;
  NoiseSchedule schedule_;
  std::unique_ptr<ag::ParameterSet> params_;
  GraphEncoder encoder_;
  FeatureTokenizer tokenizer_;
  CrossModalFusion fusion_;

  nn::GroupLinear input_;
  nn::Linear cond_in_;
  nn::Linear time_in_;
  std::vector<Block> blocks_;
  nn::LayerNorm norm_out_;
  nn::GroupLinear output_;

  ag::Parameter* numeric_stats_ = nullptr;     // D x 2: mean, std
  ag::Parameter* category_targets_ = nullptr;  // sum(C) x category_dim
  std::vector<int> category_offset_;
  int max_width_ = 1;
  bool trained_ = false;
};

/// Called after each epoch with (epoch index, mean loss); returning false
/// stops training.
using EpochCallback = std::function<bool(int, double)>;

/// Self-supervised training: every row draws a fresh conditioning mask,
/// hidden positions are noised at a uniform step and the denoiser regresses
/// the noise on those positions only. Deterministic given `seed`.
TrainingResult train(ImputerModel& model, const Dataset& data, const TrainingConfig& config, std::uint64_t seed,
                     const EpochCallback& on_epoch = {});

/// K reverse-diffusion trajectories over the missing features of `partial`.
/// Trajectory k draws its noise from make_rng(seed, k).
SampleSet sample(const ImputerModel& model, const PartialDesign& partial, int k, std::uint64_t seed);

/// sample() applied per row, with row i using derive_seed(seed, i).
/// Rows are processed in fixed-size chunks for throughput.
std::vector<SampleSet> sample_many(const ImputerModel& model, std::span<const PartialDesign> partials, int k,
                                   std::uint64_t seed);

CompleteDesign impute_point(const ImputerModel& model, const PartialDesign& partial, int k, std::uint64_t seed);

}  // namespace gdimpute
