// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#include "gdimpute/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gdimpute/error.hpp"

namespace gdimpute {

using ag::Mat;
using ag::Var;
using nlohmann::json;

// -- Configs -------------------------------------------------------------------

void ScheduleConfig::validate() const {
  if (steps < 1) throw ConfigError("schedule.steps must be >= 1");
  if (!(beta_start >= 0.0 && beta_start < 1.0 && beta_end >= 0.0 && beta_end < 1.0)) {
    throw ConfigError("schedule betas must lie in [0, 1)");
  }
  if (beta_end < beta_start) throw ConfigError("schedule.beta_end must be >= schedule.beta_start");
}

json ScheduleConfig::to_json() const {
  return json{{"steps", steps}, {"beta_start", beta_start}, {"beta_end", beta_end}};
}

ScheduleConfig ScheduleConfig::from_json(const json& j) {
  ScheduleConfig c;
  c.steps = j.value("steps", c.steps);
  c.beta_start = j.value("beta_start", c.beta_start);
  c.beta_end = j.value("beta_end", c.beta_end);
  c.validate();
  return c;
}

void DenoiserConfig::validate() const {
  if (blocks < 1 || channels < 1 || time_dim < 2 || heads < 1) {
    throw ConfigError("denoiser.blocks, channels, heads must be >= 1 and time_dim >= 2");
  }
  if (channels % heads != 0) throw ConfigError("denoiser.channels must be divisible by denoiser.heads");
}

json DenoiserConfig::to_json() const {
  return json{{"blocks", blocks}, {"channels", channels}, {"time_dim", time_dim}, {"heads", heads}};
}

DenoiserConfig DenoiserConfig::from_json(const json& j) {
  DenoiserConfig c;
  c.blocks = j.value("blocks", c.blocks);
  c.channels = j.value("channels", c.channels);
  c.time_dim = j.value("time_dim", c.time_dim);
  c.heads = j.value("heads", c.heads);
  c.validate();
  return c;
}

void ImputerConfig::validate() const {
  encoder.validate();
  fusion.validate();
  denoiser.validate();
  schedule.validate();
  if (category_dim < 1) throw ConfigError("category_dim must be >= 1");
}

json ImputerConfig::to_json() const {
  return json{{"encoder", encoder.to_json()},
              {"fusion", fusion.to_json()},
              {"denoiser", denoiser.to_json()},
              {"schedule", schedule.to_json()},
              {"category_dim", category_dim}};
}

ImputerConfig ImputerConfig::from_json(const json& j) {
  ImputerConfig c;
  if (j.contains("encoder")) c.encoder = GraphEncoderConfig::from_json(j["encoder"]);
  if (j.contains("fusion")) c.fusion = FusionConfig::from_json(j["fusion"]);
  if (j.contains("denoiser")) c.denoiser = DenoiserConfig::from_json(j["denoiser"]);
  if (j.contains("schedule")) c.schedule = ScheduleConfig::from_json(j["schedule"]);
  c.category_dim = j.value("category_dim", c.category_dim);
  c.validate();
  return c;
}

void TrainingConfig::validate() const {
  if (epochs < 1) throw ConfigError("training.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("training.batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("training.learning_rate must be > 0");
  if (!(mask_fraction > 0.0 && mask_fraction <= 1.0)) throw ConfigError("training.mask_fraction must lie in (0, 1]");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ConfigError("training.ema_decay must lie in [0, 1)");
}

json TrainingConfig::to_json() const {
  return json{{"epochs", epochs},
              {"batch_size", batch_size},
              {"learning_rate", learning_rate},
              {"mask_fraction", mask_fraction},
              {"clip_norm", clip_norm},
              {"ema_decay", ema_decay}};
}

TrainingConfig TrainingConfig::from_json(const json& j) {
  TrainingConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.mask_fraction = j.value("mask_fraction", c.mask_fraction);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.ema_decay = j.value("ema_decay", c.ema_decay);
  c.validate();
  return c;
}

// -- Schedule ------------------------------------------------------------------

NoiseSchedule NoiseSchedule::quadratic(const ScheduleConfig& config) {
  config.validate();
  std::vector<double> betas(static_cast<std::size_t>(config.steps));
  const double a = std::sqrt(config.beta_start);
  const double b = std::sqrt(config.beta_end);
  for (int i = 0; i < config.steps; ++i) {
    const double u = config.steps == 1 ? 0.0 : static_cast<double>(i) / (config.steps - 1);
    const double s = a + (b - a) * u;
    betas[static_cast<std::size_t>(i)] = s * s;
  }
  return from_betas(std::move(betas));
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  if (betas.empty()) throw ConfigError("noise schedule needs at least one step");
  NoiseSchedule s;
  s.alpha_bar_.assign(betas.size() + 1, 1.0);
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (!(betas[i] >= 0.0 && betas[i] < 1.0)) throw ConfigError("noise schedule betas must lie in [0, 1)");
    s.alpha_bar_[i + 1] = s.alpha_bar_[i] * (1.0 - betas[i]);
  }
  s.betas_ = std::move(betas);
  return s;
}

double NoiseSchedule::beta(int t) const {
  if (t < 1 || t > steps()) throw ConfigError("diffusion step " + std::to_string(t) + " outside [1, T]");
  return betas_[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > steps()) throw ConfigError("diffusion step " + std::to_string(t) + " outside [0, T]");
  return alpha_bar_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::posterior_variance(int t) const {
  const double denom = 1.0 - alpha_bar(t);
  if (denom <= 0.0) return 0.0;
  return beta(t) * (1.0 - alpha_bar(t - 1)) / denom;
}

Eigen::VectorXd forward_noise(const Eigen::VectorXd& x0, int t, const Eigen::VectorXd& noise,
                              const NoiseSchedule& schedule) {
  if (t < 1 || t > schedule.steps()) {
    throw ConfigError("diffusion step " + std::to_string(t) + " outside [1, T]");
  }
  if (x0.size() != noise.size()) throw ModelError("forward_noise: x0 and noise differ in length");
  const double ab = schedule.alpha_bar(t);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * noise;
}

// -- Aggregation ---------------------------------------------------------------

CompleteDesign aggregate(const FeatureSchema& schema, const SampleSet& samples) {
  if (samples.draws.empty()) throw ModelError("cannot aggregate an empty sample set");
  std::vector<Value> out = samples.input.values();
  for (auto f : samples.missing_positions()) {
    const auto& spec = schema.feature(f);
    if (spec.is_numeric()) {
      double s = 0.0;
      for (const auto& d : samples.draws) s += d.number(f);
      out[f] = std::clamp(s / static_cast<double>(samples.draws.size()), spec.lo, spec.hi);
    } else {
      std::vector<std::size_t> counts(spec.category_count(), 0);
      for (const auto& d : samples.draws) ++counts[*spec.category_index(d.label(f))];
      const auto best = std::max_element(counts.begin(), counts.end()) - counts.begin();
      out[f] = spec.categories[static_cast<std::size_t>(best)];
    }
  }
  return CompleteDesign(std::move(out));
}

// -- Model ---------------------------------------------------------------------

ImputerModel ImputerModel::create(std::shared_ptr<const FeatureSchema> schema, AssemblyGraph graph,
                                  const ImputerConfig& config, std::uint64_t seed) {
  if (!schema) throw SchemaError("imputer needs a schema");
  config.validate();
  ImputerModel m;
  m.schema_ = std::move(schema);
  m.graph_ = std::move(graph);
  m.config_ = config;
  m.schedule_ = NoiseSchedule::quadratic(config.schedule);
  m.params_ = std::make_unique<ag::ParameterSet>();
  auto& params = *m.params_;
  const auto& s = *m.schema_;
  Rng rng = make_rng(seed, 0x6d6f64656cULL);

  m.encoder_ = GraphEncoder::create(s, m.graph_, config.encoder, params, rng);
  m.tokenizer_ = FeatureTokenizer::create(s, config.fusion.d_token, params, rng);
  m.fusion_ = CrossModalFusion::create(config.fusion, config.encoder.hidden_dim, params, rng);

  const auto d = static_cast<int>(s.size());
  int category_rows = 0;
  m.category_offset_.assign(s.size(), -1);
  for (std::size_t f = 0; f < s.size(); ++f) {
    if (s.feature(f).is_categorical()) {
      m.category_offset_[f] = category_rows;
      category_rows += static_cast<int>(s.feature(f).category_count());
    }
  }
  m.max_width_ = category_rows > 0 ? std::max(1, config.category_dim) : 1;

  const int c = config.denoiser.channels;
  const int td = config.denoiser.time_dim;
  m.input_ = nn::GroupLinear::create(params, "denoiser.input", d, m.max_width_, c, true, rng);
  m.cond_in_ = nn::Linear::create(params, "denoiser.cond_in", config.fusion.d_token, c, true, rng);
  m.time_in_ = nn::Linear::create(params, "denoiser.time_in", td, td, true, rng);
  for (int b = 0; b < config.denoiser.blocks; ++b) {
    const std::string p = "denoiser.block" + std::to_string(b);
    Block blk;
    blk.time = nn::Linear::create(params, p + ".time", td, c, true, rng);
    blk.cond = nn::Linear::create(params, p + ".cond", config.fusion.d_token, c, true, rng);
    blk.norm_attn = nn::LayerNorm::create(params, p + ".norm_attn", c);
    blk.q = nn::Linear::create(params, p + ".q", c, c, false, rng);
    blk.k = nn::Linear::create(params, p + ".k", c, c, false, rng);
    blk.v = nn::Linear::create(params, p + ".v", c, c, false, rng);
    blk.o = nn::Linear::create(params, p + ".o", c, c, true, rng);
    blk.norm_ffn = nn::LayerNorm::create(params, p + ".norm_ffn", c);
    blk.ffn_in = nn::Linear::create(params, p + ".ffn_in", c, 2 * c, true, rng);
    blk.ffn_out = nn::Linear::create(params, p + ".ffn_out", 2 * c, c, true, rng);
    m.blocks_.push_back(blk);
  }
  m.norm_out_ = nn::LayerNorm::create(params, "denoiser.norm_out", c);
  m.output_ = nn::GroupLinear::create(params, "denoiser.output", d, c, m.max_width_, true, rng);
  // Start close to the zero predictor.
  m.output_.weight->value *= 0.1;

  Mat stats(d, 2);
  stats.col(0).setZero();
  stats.col(1).setOnes();
  m.numeric_stats_ = &params.add("repr.numeric_stats", std::move(stats), false);
  if (category_rows > 0) {
    m.category_targets_ =
        &params.add("repr.category_targets", nn::normal_init(category_rows, m.max_width_, 1.0, rng), false);
  }
  return m;
}

int ImputerModel::feature_width(std::size_t f) const {
  return schema_->feature(f).is_categorical() ? max_width_ : 1;
}

void ImputerModel::fit_representation(const Dataset& data) {
  if (data.empty()) throw DataError("cannot fit the diffusion representation on an empty dataset");
  const auto& s = *schema_;
  auto& stats = numeric_stats_->value;
  for (std::size_t f = 0; f < s.size(); ++f) {
    const auto& spec = s.feature(f);
    const auto r = static_cast<Eigen::Index>(f);
    if (!spec.is_numeric()) {
      stats(r, 0) = 0.0;
      stats(r, 1) = 1.0;
      continue;
    }
    double mean = 0.0;
    for (const auto& row : data.rows) mean += spec.normalize(row.number(f));
    mean /= static_cast<double>(data.size());
    double var = 0.0;
    for (const auto& row : data.rows) {
      const double u = spec.normalize(row.number(f)) - mean;
      var += u * u;
    }
    var /= static_cast<double>(data.size());
    stats(r, 0) = mean;
    // Constant features keep unit scale.
    stats(r, 1) = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
}

Mat ImputerModel::represent(const EncodedRow& row) const {
  const auto& s = *schema_;
  if (row.size() != s.size()) throw SchemaError("row does not match the model's schema");
  Mat x = Mat::Zero(static_cast<Eigen::Index>(s.size()), max_width_);
  const auto& stats = numeric_stats_->value;
  for (std::size_t f = 0; f < s.size(); ++f) {
    const auto r = static_cast<Eigen::Index>(f);
    if (s.feature(f).is_numeric()) {
      x(r, 0) = (row.value[f] - stats(r, 0)) / stats(r, 1);
    } else {
      x.row(r) = category_targets_->value.row(category_offset_[f] + static_cast<int>(row.value[f]));
    }
  }
  return x;
}

Value ImputerModel::decode_feature(std::size_t f, std::span<const double> x) const {
  const auto& spec = schema_->feature(f);
  if (spec.is_numeric()) {
    const auto r = static_cast<Eigen::Index>(f);
    const double unit = x[0] * numeric_stats_->value(r, 1) + numeric_stats_->value(r, 0);
    return std::clamp(spec.denormalize(unit), spec.lo, spec.hi);
  }
  const auto& targets = category_targets_->value;
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < spec.category_count(); ++k) {
    const auto row = targets.row(category_offset_[f] + static_cast<int>(k));
    double dist = 0.0;
    for (int c = 0; c < max_width_; ++c) {
      const double u = x[static_cast<std::size_t>(c)] - row(c);
      dist += u * u;
    }
    if (dist < best_d) {
      best_d = dist;
      best = k;
    }
  }
  return spec.categories[best];
}

Var ImputerModel::condition(ag::Tape& tape, std::span<const EncodedRow> rows, Rng* dropout_rng) const {
  Var g = encoder_.encode(tape, rows);
  Var tokens = tokenizer_.tokenize(tape, rows);
  return fusion_.fuse(tape, tokens, g, static_cast<int>(schema_->size()),
                      static_cast<int>(schema_->component_count()), dropout_rng);
}

Var ImputerModel::denoise(ag::Tape& tape, Var x_t, const std::vector<int>& steps, Var cond) const {
  const auto d = static_cast<int>(schema_->size());
  const auto b = static_cast<Eigen::Index>(steps.size());
  if (x_t.rows() != b * d || x_t.cols() != max_width_) throw ModelError("denoiser input has the wrong shape");
  if (cond.rows() != b * d) throw ModelError("conditioning tensor does not match the denoiser batch");
  const int td = config_.denoiser.time_dim;
  Mat temb(b, td);
  for (Eigen::Index i = 0; i < b; ++i) temb.row(i) = nn::timestep_embedding(steps[static_cast<std::size_t>(i)], td);
  Var te = ag::silu(time_in_(tape, tape.constant(std::move(temb))));

  Var h = ag::add(input_(tape, x_t), cond_in_(tape, cond));
  for (const auto& blk : blocks_) {
    h = ag::add(h, ag::add(ag::repeat_rows(blk.time(tape, te), d), blk.cond(tape, cond)));
    Var a = blk.norm_attn(tape, h);
    Var att = ag::attention(blk.q(tape, a), blk.k(tape, a), blk.v(tape, a), config_.denoiser.heads, d, d);
    h = ag::add(h, blk.o(tape, att));
    Var f = blk.norm_ffn(tape, h);
    h = ag::add(h, blk.ffn_out(tape, ag::silu(blk.ffn_in(tape, f))));
  }
  return output_(tape, norm_out_(tape, h));
}

// -- Training ------------------------------------------------------------------

TrainingResult train(ImputerModel& model, const Dataset& data, const TrainingConfig& config, std::uint64_t seed,
                     const EpochCallback& on_epoch) {
  config.validate();
  if (data.empty()) throw DataError("cannot train on an empty dataset");
  const auto& schema = model.schema();
  if (!data.schema || !(*data.schema == schema)) throw SchemaError("training data schema differs from the model's");
  model.fit_representation(data);

  const auto n = data.size();
  const auto d = schema.size();
  const int w = model.max_width();
  std::vector<EncodedRow> encoded;
  std::vector<Mat> targets;
  encoded.reserve(n);
  targets.reserve(n);
  for (const auto& row : data.rows) {
    encoded.push_back(encode(schema, row));
    targets.push_back(model.represent(encoded.back()));
  }
  const auto hidden = masked_count(d, config.mask_fraction);
  const auto& sched = model.schedule();

  nn::Adam::Options opt;
  opt.learning_rate = config.learning_rate;
  opt.clip_norm = config.clip_norm;
  nn::Adam adam(model.parameters(), opt);
  model.parameters().zero_grad();

  std::vector<Mat> ema;
  if (config.ema_decay > 0.0) {
    for (const auto& p : model.parameters().items()) ema.push_back(p->value);
  }
  std::uint64_t updates = 0;
  auto update_ema = [&] {
    if (ema.empty()) return;
    ++updates;
    // Short warm-up so the average is not anchored to the initialisation.
    const double u = static_cast<double>(updates);
    const double decay = std::min(config.ema_decay, (1.0 + u) / (10.0 + u));
    std::size_t i = 0;
    for (const auto& p : model.parameters().items()) {
      if (p->trainable) ema[i] = decay * ema[i] + (1.0 - decay) * p->value;
      ++i;
    }
  };

  TrainingResult result;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(epoch) + 1);
    std::shuffle(order.begin(), order.end(), rng);
    std::uniform_int_distribution<int> step_dist(1, sched.steps());
    std::normal_distribution<double> gauss(0.0, 1.0);
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
      const auto stop = std::min(n, start + static_cast<std::size_t>(config.batch_size));
      const auto bsz = stop - start;
      const auto rows = static_cast<Eigen::Index>(bsz * d);
      std::vector<EncodedRow> cond_rows;
      cond_rows.reserve(bsz);
      std::vector<int> steps(bsz);
      Mat x_t = Mat::Zero(rows, w);
      Mat noise = Mat::Zero(rows, w);
      Mat weight = Mat::Zero(rows, w);
      for (std::size_t i = 0; i < bsz; ++i) {
        const auto src = order[start + i];
        const auto mask = random_mask(d, hidden, rng);
        EncodedRow er = encoded[src];
        const int t = step_dist(rng);
        steps[i] = t;
        const double sa = std::sqrt(sched.alpha_bar(t));
        const double sn = std::sqrt(1.0 - sched.alpha_bar(t));
        for (std::size_t f = 0; f < d; ++f) {
          if (mask.observed(f)) continue;
          er.observed[f] = 0;
          er.value[f] = 0.0;
          const auto r = static_cast<Eigen::Index>(i * d + f);
          const int width = model.feature_width(f);
          for (int c = 0; c < width; ++c) {
            const double eps = gauss(rng);
            noise(r, c) = eps;
            x_t(r, c) = sa * targets[src](static_cast<Eigen::Index>(f), c) + sn * eps;
            weight(r, c) = 1.0 / width;
          }
        }
        cond_rows.push_back(std::move(er));
      }
      ag::Tape tape(true);
      Var cond = model.condition(tape, cond_rows, &rng);
      Var pred = model.denoise(tape, tape.constant(std::move(x_t)), steps, cond);
      Var loss = ag::masked_mse(pred, noise, weight);
      const double value = loss.value()(0, 0);
      if (!std::isfinite(value)) {
        throw ModelError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch starting at row " +
                         std::to_string(start));
      }
      tape.backward(loss);
      adam.step();
      update_ema();
      total += value * static_cast<double>(bsz);
    }
    const double mean = total / static_cast<double>(n);
    result.loss_trace.push_back(mean);
    if (on_epoch && !on_epoch(epoch, mean)) {
      result.stopped_early = epoch + 1 < config.epochs;
      break;
    }
  }
  if (!ema.empty()) {
    std::size_t i = 0;
    for (const auto& p : model.parameters().items()) {
      if (p->trainable) p->value = ema[i];
      ++i;
    }
  }
  // The in-memory model matches what a checkpoint reload produces.
  model.parameters().round_to_float();
  model.set_trained(true);
  return result;
}

// -- Sampling ------------------------------------------------------------------

namespace {

std::vector<SampleSet> sample_chunk(const ImputerModel& model, std::span<const PartialDesign> partials,
                                    std::span<const std::uint64_t> seeds, int k) {
  const auto& schema = model.schema();
  const auto d = schema.size();
  const int w = model.max_width();
  const auto n = partials.size();
  std::vector<SampleSet> out(n);
  std::vector<EncodedRow> encoded;
  encoded.reserve(n);
  std::vector<std::vector<std::size_t>> missing(n);
  bool any_missing = false;
  for (std::size_t i = 0; i < n; ++i) {
    validate(schema, partials[i]);
    out[i].input = partials[i];
    encoded.push_back(encode(schema, partials[i]));
    missing[i] = partials[i].mask().missing_positions();
    any_missing = any_missing || !missing[i].empty();
  }
  if (!any_missing) {
    for (std::size_t i = 0; i < n; ++i) {
      out[i].draws.assign(static_cast<std::size_t>(k), CompleteDesign(partials[i].values()));
    }
    return out;
  }

  const auto traj = n * static_cast<std::size_t>(k);
  const auto rows = static_cast<Eigen::Index>(traj * d);
  Mat cond_tiled(rows, model.config().fusion.d_token);
  {
    ag::Tape tape(false);
    const Mat cond = model.condition(tape, encoded).value();
    const auto dd = static_cast<Eigen::Index>(d);
    for (std::size_t i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) {
        const auto dst = static_cast<Eigen::Index>(i * static_cast<std::size_t>(k) + static_cast<std::size_t>(j));
        cond_tiled.middleRows(dst * dd, dd) = cond.middleRows(static_cast<Eigen::Index>(i) * dd, dd);
      }
    }
  }

  Mat hidden = Mat::Zero(rows, w);
  std::vector<Rng> rngs;
  rngs.reserve(traj);
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      rngs.push_back(make_rng(seeds[i], static_cast<std::uint64_t>(j)));
      const auto base = (i * static_cast<std::size_t>(k) + static_cast<std::size_t>(j)) * d;
      for (auto f : missing[i]) {
        for (int c = 0; c < model.feature_width(f); ++c) hidden(static_cast<Eigen::Index>(base + f), c) = 1.0;
      }
    }
  }
  // A fresh distribution per trajectory: the cached second variate of a
  // shared one would couple trajectories.
  auto draw_noise = [&](Mat& m) {
    for (std::size_t tr = 0; tr < traj; ++tr) {
      auto& rng = rngs[tr];
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (std::size_t f = 0; f < d; ++f) {
        const auto r = static_cast<Eigen::Index>(tr * d + f);
        for (int c = 0; c < w; ++c) m(r, c) = hidden(r, c) != 0.0 ? gauss(rng) : 0.0;
      }
    }
  };

  const auto& sched = model.schedule();
  Mat x(rows, w);
  draw_noise(x);
  Mat z(rows, w);
  for (int t = sched.steps(); t >= 1; --t) {
    ag::Tape tape(false);
    const std::vector<int> steps(traj, t);
    const Mat eps = model.denoise(tape, tape.constant(x), steps, tape.constant(cond_tiled)).value();
    const double coef = sched.beta(t) / std::sqrt(1.0 - sched.alpha_bar(t));
    x = (x - coef * eps) / std::sqrt(sched.alpha(t));
    if (t > 1) {
      draw_noise(z);
      // sigma_t^2 = beta_t. The posterior variance is the other usual
      // choice, but over so few steps it shrinks a unit Gaussian to ~0.89.
      x += std::sqrt(sched.beta(t)) * z;
    }
    x = x.cwiseProduct(hidden);
  }

  for (std::size_t i = 0; i < n; ++i) {
    out[i].draws.reserve(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
      std::vector<Value> values = partials[i].values();
      const auto base = (i * static_cast<std::size_t>(k) + static_cast<std::size_t>(j)) * d;
      for (auto f : missing[i]) {
        const auto r = static_cast<Eigen::Index>(base + f);
        values[f] = model.decode_feature(f, std::span<const double>(x.row(r).data(), static_cast<std::size_t>(w)));
      }
      out[i].draws.emplace_back(std::move(values));
    }
  }
  return out;
}

void check_ready(const ImputerModel& model, int k) {
  if (!model.trained()) throw ModelError("model has not been trained");
  if (k < 1) throw ConfigError("number of samples K must be >= 1");
}

}  // namespace

SampleSet sample(const ImputerModel& model, const PartialDesign& partial, int k, std::uint64_t seed) {
  check_ready(model, k);
  const PartialDesign rows[] = {partial};
  const std::uint64_t seeds[] = {seed};
  return std::move(sample_chunk(model, rows, seeds, k).front());
}

std::vector<SampleSet> sample_many(const ImputerModel& model, std::span<const PartialDesign> partials, int k,
                                   std::uint64_t seed) {
  check_ready(model, k);
  constexpr std::size_t kTrajectoriesPerChunk = 512;
  const std::size_t chunk = std::max<std::size_t>(1, kTrajectoriesPerChunk / static_cast<std::size_t>(k));
  std::vector<SampleSet> out;
  out.reserve(partials.size());
  for (std::size_t start = 0; start < partials.size(); start += chunk) {
    const auto stop = std::min(partials.size(), start + chunk);
    std::vector<std::uint64_t> seeds;
    for (auto i = start; i < stop; ++i) seeds.push_back(derive_seed(seed, i));
    auto part = sample_chunk(model, partials.subspan(start, stop - start), seeds, k);
    for (auto& s : part) out.push_back(std::move(s));
  }
  return out;
}

CompleteDesign impute_point(const ImputerModel& model, const PartialDesign& partial, int k, std::uint64_t seed) {
  return aggregate(model.schema(), sample(model, partial, k, seed));
}

}  // namespace gdimpute
