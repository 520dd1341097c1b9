// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#include "gdimpute/nn.hpp"

#include <cmath>

#include "gdimpute/error.hpp"

namespace gdimpute::nn {

Mat xavier_uniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Eigen::Index fan_out,
                   Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

Mat normal_init(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

Linear Linear::create(ParameterSet& params, const std::string& name, Eigen::Index in, Eigen::Index out,
                      bool with_bias, Rng& rng) {
  Linear l;
  l.weight = &params.add(name + ".weight", xavier_uniform(in, out, in, out, rng));
  if (with_bias) l.bias = &params.add(name + ".bias", Mat::Zero(1, out));
  return l;
}

Linear Linear::bind(ParameterSet& params, const std::string& name, bool with_bias) {
  Linear l;
  l.weight = &params.at(name + ".weight");
  if (with_bias) l.bias = &params.at(name + ".bias");
  return l;
}

Var Linear::operator()(Tape& tape, Var x) const {
  Var y = ag::matmul(x, tape.parameter(*weight));
  if (bias) y = ag::add_row(y, tape.parameter(*bias));
  return y;
}

GroupLinear GroupLinear::create(ParameterSet& params, const std::string& name, int groups, Eigen::Index in,
                                Eigen::Index out, bool with_bias, Rng& rng) {
  GroupLinear l;
  l.groups = groups;
  l.weight = &params.add(name + ".weight", xavier_uniform(groups * in, out, in, out, rng));
  if (with_bias) l.bias = &params.add(name + ".bias", Mat::Zero(groups, out));
  return l;
}

Var GroupLinear::operator()(Tape& tape, Var x) const {
  Var b = bias ? tape.parameter(*bias) : Var();
  return ag::group_linear(x, tape.parameter(*weight), b, groups);
}

LayerNorm LayerNorm::create(ParameterSet& params, const std::string& name, Eigen::Index width) {
  LayerNorm ln;
  ln.gain = &params.add(name + ".gain", Mat::Ones(1, width));
  ln.bias = &params.add(name + ".bias", Mat::Zero(1, width));
  return ln;
}

Var LayerNorm::operator()(Tape& tape, Var x) const {
  return ag::layer_norm(x, tape.parameter(*gain), tape.parameter(*bias));
}

Adam::Adam(ParameterSet& params, Options options) : params_(params), options_(options) {
  for (const auto& p : params_.items()) {
    m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  ++step_;
  double scale = 1.0;
  if (options_.clip_norm > 0.0) {
    double sq = 0.0;
    for (const auto& p : params_.items()) {
      if (p->trainable) sq += p->grad.squaredNorm();
    }
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) throw ModelError("non-finite gradient norm");
    if (norm > options_.clip_norm) scale = options_.clip_norm / norm;
  }
  const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(step_));
  std::size_t i = 0;
  for (const auto& p : params_.items()) {
    if (p->trainable) {
      const Mat g = p->grad * scale;
      m_[i] = options_.beta1 * m_[i] + (1.0 - options_.beta1) * g;
      v_[i] = options_.beta2 * v_[i] + (1.0 - options_.beta2) * g.cwiseProduct(g);
      p->value.array() -= options_.learning_rate * (m_[i].array() / c1) /
                          ((v_[i].array() / c2).sqrt() + options_.epsilon);
    }
    p->grad.setZero();
    ++i;
  }
}

Eigen::RowVectorXd timestep_embedding(double step, int dim) {
  Eigen::RowVectorXd e(dim);
  const int half = dim / 2;
  for (int k = 0; k < half; ++k) {
    const double w = std::pow(10000.0, -2.0 * k / static_cast<double>(dim));
    e(2 * k) = std::sin(step * w);
    e(2 * k + 1) = std::cos(step * w);
  }
  if (dim % 2) e(dim - 1) = 0.0;
  return e;
}

}  // namespace gdimpute::nn
