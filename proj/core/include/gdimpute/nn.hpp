// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <string>

#include "gdimpute/autograd.hpp"
#include "gdimpute/rng.hpp"

namespace gdimpute::nn {

using ag::Mat;
using ag::Parameter;
using ag::ParameterSet;
using ag::Tape;
using ag::Var;

/// Uniform(-limit, limit) with limit = sqrt(6 / (fan_in + fan_out)).
Mat xavier_uniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Eigen::Index fan_out,
                   Rng& rng);
Mat normal_init(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng);

/// y = x W + b.
struct Linear {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;

  static Linear create(ParameterSet& params, const std::string& name, Eigen::Index in, Eigen::Index out,
                       bool with_bias, Rng& rng);
  /// Rebinds to parameters already present in `params`.
  static Linear bind(ParameterSet& params, const std::string& name, bool with_bias);
  Var operator()(Tape& tape, Var x) const;
};

/// One affine map per group; row r uses group r % groups.
struct GroupLinear {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;
  int groups = 0;

  static GroupLinear create(ParameterSet& params, const std::string& name, int groups, Eigen::Index in,
                            Eigen::Index out, bool with_bias, Rng& rng);
  Var operator()(Tape& tape, Var x) const;
};

struct LayerNorm {
  Parameter* gain = nullptr;
  Parameter* bias = nullptr;

  static LayerNorm create(ParameterSet& params, const std::string& name, Eigen::Index width);
  Var operator()(Tape& tape, Var x) const;
};

/// Adam with bias correction and optional global-norm gradient clipping.
class Adam {
 public:
  struct Options {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double clip_norm = 1.0;  // <= 0 disables clipping
  };

  Adam(ParameterSet& params, Options options);
  /// Applies one update from the accumulated gradients, then zeroes them.
  void step();
  long steps() const { return step_; }

 private:
  ParameterSet& params_;
  Options options_;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
  long step_ = 0;
};

/// Sinusoidal embedding of a scalar step: [sin(t w_k), cos(t w_k)] with
/// w_k = 10000^(-2k/dim).
Eigen::RowVectorXd timestep_embedding(double step, int dim);

}  // namespace gdimpute::nn
