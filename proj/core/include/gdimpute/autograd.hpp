// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace gdimpute::ag {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

/// Named trainable (or frozen) tensor with an accumulated gradient.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
  bool trainable = true;
};

/// Owns parameters with stable addresses, in registration order.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  Parameter& add(std::string name, Mat init, bool trainable = true);
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  Parameter* find(std::string_view name);
  bool contains(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  std::span<const std::unique_ptr<Parameter>> items() const { return params_; }

  void zero_grad();
  std::size_t scalar_count() const;
  /// Rounds every value to the nearest 32-bit float.
  void round_to_float();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, Parameter*, std::less<>> index_;
};

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode tape. A tape built with `record = false` evaluates values
/// only, which is what inference uses.
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Mat value);
  /// Leaf bound to `p`; backward accumulates into p.grad.
  Var parameter(Parameter& p);
  /// Leaf whose gradient is kept on the tape (used for input gradients).
  Var input(Mat value);

  using Backward = std::function<void(Tape&, int self)>;
  /// Records a node computed from `inputs`. The node requires a gradient iff
  /// any input does and the tape is recording.
  Var push(Mat value, std::initializer_list<Var> inputs, Backward backward);

  const Mat& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  /// Gradient buffer for node `id`, zero-initialised on first access.
  Mat& grad(int id);
  bool has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].has_grad; }

  /// Seeds d(root)/d(root) = 1 for a 1x1 root and runs the recorded closures.
  void backward(Var root);

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    bool has_grad = false;
    Parameter* param = nullptr;
    Backward backward;
  };
  bool record_;
  std::deque<Node> nodes_;
};

inline const Mat& Var::value() const { return tape_->value(id_); }

// -- Elementwise and linear algebra ----------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// a + row broadcast over every row of a; `row` is 1 x cols.
Var add_row(Var a, Var row);
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// Elementwise product with a constant of the same shape.
Var mul_const(Var a, const Mat& c);
/// Multiplies row r of `a` by weights[r].
Var row_scale(Var a, const Vec& weights);
Var silu(Var a);
Var leaky_relu(Var a, double slope);
Var tanh(Var a);

/// Row-wise layer normalisation with learned gain and bias (1 x cols).
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

/// Per-group affine map. Row r uses group g = r % groups:
/// out[r] = x[r] * W[g*in:(g+1)*in, :] + b[g].
Var group_linear(Var x, Var weight, Var bias, int groups);

/// out[r] = table[index[r]], or zeros where index[r] < 0.
Var gather_rows(Var table, const std::vector<int>& index);

/// Row `row` of the result is weights[r] * vector (vector is 1 x cols).
Var broadcast_row(Var vector, const Vec& weights);

/// Repeats each row of `x` `times` times consecutively.
Var repeat_rows(Var x, int times);

/// Copies `base` and writes table rows into column slices:
/// out[e.row, e.col : e.col + table.cols()] = table[e.table_row].
struct ScatterEntry {
  int row;
  int col;
  int table_row;
};
Var scatter_rows(const Mat& base, Var table, const std::vector<ScatterEntry>& entries);

// -- Structured ops --------------------------------------------------------

/// Multi-head scaled dot-product attention over independent blocks.
/// q is (blocks*lq x d), k and v are (blocks*lk x d). When `probs` is not
/// null it receives the (blocks*heads*lq x lk) attention matrix.
Var attention(Var q, Var k, Var v, int heads, int lq, int lk, Mat* probs = nullptr);

/// Applies a fixed (n x n) mixing matrix to each block of n rows.
Var block_mix(Var x, const Mat& mix);

/// GATv2 attention over each block of n rows. For target i and neighbour
/// j (self included) with head slice h:
///   e_ij = att_h . LeakyReLU(target[i]_h + source[j]_h)
///   out[i]_h = sum_j softmax_j(e_ij) source[j]_h
/// `neighbors[i]` must contain i. `alpha` (optional) receives per block,
/// per head, per target the coefficients in neighbour order, flattened.
Var gatv2_attend(Var source, Var target, Var att, const std::vector<std::vector<int>>& neighbors,
                 int heads, double slope, std::vector<double>* alpha = nullptr);

// -- Reductions ------------------------------------------------------------

Var sum(Var a);
/// sum(a .* weights) as a 1x1 node.
Var weighted_sum(Var a, const Mat& weights);
/// sum(mask .* (pred - target)^2) / sum(mask).
Var masked_mse(Var pred, const Mat& target, const Mat& mask);

}  // namespace gdimpute::ag
