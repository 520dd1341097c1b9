// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#include "gdimpute/autograd.hpp"

#include <cmath>
#include <limits>

#include "gdimpute/error.hpp"

namespace gdimpute::ag {

namespace {

using StridedConst = Eigen::Map<const Mat, 0, Eigen::OuterStride<>>;
using Strided = Eigen::Map<Mat, 0, Eigen::OuterStride<>>;

void require(bool ok, const char* what) {
  if (!ok) throw ModelError(std::string("shape mismatch in ") + what);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

// -- ParameterSet ----------------------------------------------------------

Parameter& ParameterSet::add(std::string name, Mat init, bool trainable) {
  if (index_.contains(name)) throw ModelError("duplicate parameter '" + name + "'");
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->grad = Mat::Zero(init.rows(), init.cols());
  p->value = std::move(init);
  p->trainable = trainable;
  Parameter& ref = *p;
  index_.emplace(ref.name, &ref);
  params_.push_back(std::move(p));
  return ref;
}

Parameter& ParameterSet::at(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ModelError("unknown parameter '" + std::string(name) + "'");
  return *it->second;
}

const Parameter& ParameterSet::at(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ModelError("unknown parameter '" + std::string(name) + "'");
  return *it->second;
}

Parameter* ParameterSet::find(std::string_view name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : it->second;
}

bool ParameterSet::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->grad.setZero();
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void ParameterSet::round_to_float() {
  for (auto& p : params_) p->value = p->value.cast<float>().cast<double>();
}

// -- Tape ------------------------------------------------------------------

Var Tape::constant(Mat value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::parameter(Parameter& p) {
  Node n;
  n.value = p.value;
  n.requires_grad = record_ && p.trainable;
  n.param = &p;
  if (n.requires_grad) {
    n.backward = [](Tape& t, int self) {
      auto& node = t.nodes_[static_cast<std::size_t>(self)];
      node.param->grad += node.grad;
    };
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::input(Mat value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = record_;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::push(Mat value, std::initializer_list<Var> inputs, Backward backward) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (const auto& v : inputs) {
      if (v.valid() && requires_grad(v.id())) {
        n.requires_grad = true;
        break;
      }
    }
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Mat& Tape::grad(int id) {
  auto& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.has_grad) {
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::backward(Var root) {
  if (!record_) throw ModelError("backward on a non-recording tape");
  if (root.rows() != 1 || root.cols() != 1) throw ModelError("backward root must be a scalar");
  if (!requires_grad(root.id())) return;
  grad(root.id())(0, 0) += 1.0;
  for (int id = root.id(); id >= 0; --id) {
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.requires_grad && n.has_grad && n.backward) n.backward(*this, id);
  }
}

namespace {

// Adds `delta` into the gradient of `v` when it participates in autodiff.
template <typename Expr>
void accumulate(Tape& t, const Var& v, const Expr& delta) {
  if (v.valid() && t.requires_grad(v.id())) t.grad(v.id()) += delta;
}

bool needs(Tape& t, const Var& v) { return v.valid() && t.requires_grad(v.id()); }

}  // namespace

// -- Elementwise and linear algebra ----------------------------------------

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), "matmul");
  Tape& t = *a.tape();
  Mat out = a.value() * b.value();
  return t.push(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Mat& g = t.grad(self);
    if (needs(t, a)) t.grad(a.id()).noalias() += g * b.value().transpose();
    if (needs(t, b)) t.grad(b.id()).noalias() += a.value().transpose() * g;
  });
}

Var add(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add");
  Tape& t = *a.tape();
  return t.push(a.value() + b.value(), {a, b}, [a, b](Tape& t, int self) {
    const Mat& g = t.grad(self);
    accumulate(t, a, g);
    accumulate(t, b, g);
  });
}

Var sub(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub");
  Tape& t = *a.tape();
  return t.push(a.value() - b.value(), {a, b}, [a, b](Tape& t, int self) {
    const Mat& g = t.grad(self);
    accumulate(t, a, g);
    accumulate(t, b, -g);
  });
}

Var add_row(Var a, Var row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row");
  Tape& t = *a.tape();
  Mat out = a.value().rowwise() + row.value().row(0);
  return t.push(std::move(out), {a, row}, [a, row](Tape& t, int self) {
    const Mat& g = t.grad(self);
    accumulate(t, a, g);
    if (needs(t, row)) t.grad(row.id()) += g.colwise().sum();
  });
}

Var mul(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mul");
  Tape& t = *a.tape();
  Mat out = a.value().cwiseProduct(b.value());
  return t.push(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Mat& g = t.grad(self);
    if (needs(t, a)) t.grad(a.id()) += g.cwiseProduct(b.value());
    if (needs(t, b)) t.grad(b.id()) += g.cwiseProduct(a.value());
  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape();
  return t.push(a.value() * s, {a}, [a, s](Tape& t, int self) { accumulate(t, a, t.grad(self) * s); });
}

Var mul_const(Var a, const Mat& c) {
  require(a.rows() == c.rows() && a.cols() == c.cols(), "mul_const");
  Tape& t = *a.tape();
  Mat out = a.value().cwiseProduct(c);
  auto held = std::make_shared<Mat>(c);
  return t.push(std::move(out), {a}, [a, held](Tape& t, int self) {
    accumulate(t, a, t.grad(self).cwiseProduct(*held));
  });
}

Var row_scale(Var a, const Vec& weights) {
  require(a.rows() == weights.size(), "row_scale");
  Tape& t = *a.tape();
  Mat out = weights.asDiagonal() * a.value();
  auto held = std::make_shared<Vec>(weights);
  return t.push(std::move(out), {a}, [a, held](Tape& t, int self) {
    accumulate(t, a, held->asDiagonal() * t.grad(self));
  });
}

Var silu(Var a) {
  Tape& t = *a.tape();
  Mat out = a.value().unaryExpr([](double x) { return x * sigmoid(x); });
  return t.push(std::move(out), {a}, [a](Tape& t, int self) {
    const Mat d = a.value().unaryExpr([](double x) {
      const double s = sigmoid(x);
      return s * (1.0 + x * (1.0 - s));
    });
    accumulate(t, a, t.grad(self).cwiseProduct(d));
  });
}

Var leaky_relu(Var a, double slope) {
  Tape& t = *a.tape();
  Mat out = a.value().unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
  return t.push(std::move(out), {a}, [a, slope](Tape& t, int self) {
    const Mat d = a.value().unaryExpr([slope](double x) { return x > 0.0 ? 1.0 : slope; });
    accumulate(t, a, t.grad(self).cwiseProduct(d));
  });
}

Var tanh(Var a) {
  Tape& t = *a.tape();
  Mat out = a.value().array().tanh().matrix();
  return t.push(std::move(out), {a}, [a](Tape& t, int self) {
    const Mat& y = t.value(self);
    const Mat d = (1.0 - y.array().square()).matrix();
    accumulate(t, a, t.grad(self).cwiseProduct(d));
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const auto n = x.cols();
  require(gain.rows() == 1 && gain.cols() == n && bias.rows() == 1 && bias.cols() == n, "layer_norm");
  Tape& t = *x.tape();
  const Mat& xv = x.value();
  auto xhat = std::make_shared<Mat>(xv.rows(), n);
  auto inv = std::make_shared<Vec>(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const double mean = xv.row(r).mean();
    const double var = (xv.row(r).array() - mean).square().mean();
    (*inv)(r) = 1.0 / std::sqrt(var + eps);
    xhat->row(r) = (xv.row(r).array() - mean) * (*inv)(r);
  }
  Mat out = (xhat->array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  return t.push(std::move(out), {x, gain, bias}, [x, gain, bias, xhat, inv, n](Tape& t, int self) {
    const Mat& g = t.grad(self);
    if (needs(t, gain)) t.grad(gain.id()) += g.cwiseProduct(*xhat).colwise().sum();
    if (needs(t, bias)) t.grad(bias.id()) += g.colwise().sum();
    if (needs(t, x)) {
      Mat dxhat = (g.array().rowwise() * gain.value().row(0).array()).matrix();
      Mat& dx = t.grad(x.id());
      const double nn = static_cast<double>(n);
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        const double s1 = dxhat.row(r).sum();
        const double s2 = dxhat.row(r).dot(xhat->row(r));
        dx.row(r).array() +=
            ((*inv)(r) / nn) * (nn * dxhat.row(r).array() - s1 - xhat->row(r).array() * s2);
      }
    }
  });
}

Var group_linear(Var x, Var weight, Var bias, int groups) {
  const auto rows = x.rows();
  const auto in = x.cols();
  const auto out_dim = weight.cols();
  require(groups > 0 && rows % groups == 0, "group_linear (rows)");
  require(weight.rows() == groups * in, "group_linear (weight)");
  require(!bias.valid() || (bias.rows() == groups && bias.cols() == out_dim), "group_linear (bias)");
  Tape& t = *x.tape();
  const auto per_group = rows / groups;
  Mat out(rows, out_dim);
  for (int g = 0; g < groups; ++g) {
    StridedConst xg(x.value().data() + g * in, per_group, in, Eigen::OuterStride<>(groups * in));
    Strided og(out.data() + g * out_dim, per_group, out_dim, Eigen::OuterStride<>(groups * out_dim));
    og.noalias() = xg * weight.value().middleRows(g * in, in);
    if (bias.valid()) og.rowwise() += bias.value().row(g);
  }
  return t.push(std::move(out), {x, weight, bias}, [x, weight, bias, groups, in, out_dim, per_group](Tape& t, int self) {
    const Mat& gout = t.grad(self);
    for (int g = 0; g < groups; ++g) {
      StridedConst dg(gout.data() + g * out_dim, per_group, out_dim, Eigen::OuterStride<>(groups * out_dim));
      if (needs(t, x)) {
        Strided dx(t.grad(x.id()).data() + g * in, per_group, in, Eigen::OuterStride<>(groups * in));
        dx.noalias() += dg * weight.value().middleRows(g * in, in).transpose();
      }
      if (needs(t, weight)) {
        StridedConst xg(x.value().data() + g * in, per_group, in, Eigen::OuterStride<>(groups * in));
        t.grad(weight.id()).middleRows(g * in, in).noalias() += xg.transpose() * dg;
      }
      if (needs(t, bias)) t.grad(bias.id()).row(g) += dg.colwise().sum();
    }
  });
}

Var gather_rows(Var table, const std::vector<int>& index) {
  Tape& t = *table.tape();
  Mat out = Mat::Zero(static_cast<Eigen::Index>(index.size()), table.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= 0) {
      require(index[r] < table.rows(), "gather_rows");
      out.row(static_cast<Eigen::Index>(r)) = table.value().row(index[r]);
    }
  }
  auto held = std::make_shared<std::vector<int>>(index);
  return t.push(std::move(out), {table}, [table, held](Tape& t, int self) {
    const Mat& g = t.grad(self);
    Mat& dt = t.grad(table.id());
    for (std::size_t r = 0; r < held->size(); ++r) {
      if ((*held)[r] >= 0) dt.row((*held)[r]) += g.row(static_cast<Eigen::Index>(r));
    }
  });
}

Var broadcast_row(Var vector, const Vec& weights) {
  require(vector.rows() == 1, "broadcast_row");
  Tape& t = *vector.tape();
  Mat out = weights * vector.value();
  auto held = std::make_shared<Vec>(weights);
  return t.push(std::move(out), {vector}, [vector, held](Tape& t, int self) {
    accumulate(t, vector, held->transpose() * t.grad(self));
  });
}

Var repeat_rows(Var x, int times) {
  require(times > 0, "repeat_rows");
  Tape& t = *x.tape();
  const auto rows = x.rows();
  Mat out(rows * times, x.cols());
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (int k = 0; k < times; ++k) out.row(r * times + k) = x.value().row(r);
  }
  return t.push(std::move(out), {x}, [x, times, rows](Tape& t, int self) {
    if (!needs(t, x)) return;
    const Mat& g = t.grad(self);
    Mat& dx = t.grad(x.id());
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (int k = 0; k < times; ++k) dx.row(r) += g.row(r * times + k);
    }
  });
}

Var scatter_rows(const Mat& base, Var table, const std::vector<ScatterEntry>& entries) {
  Tape& t = *table.tape();
  Mat out = base;
  const auto width = table.cols();
  for (const auto& e : entries) {
    require(e.row < out.rows() && e.col + width <= out.cols() && e.table_row < table.rows(), "scatter_rows");
    out.block(e.row, e.col, 1, width) = table.value().row(e.table_row);
  }
  auto held = std::make_shared<std::vector<ScatterEntry>>(entries);
  return t.push(std::move(out), {table}, [table, held, width](Tape& t, int self) {
    const Mat& g = t.grad(self);
    Mat& dt = t.grad(table.id());
    for (const auto& e : *held) dt.row(e.table_row) += g.block(e.row, e.col, 1, width);
  });
}

// -- Structured ops --------------------------------------------------------

Var attention(Var q, Var k, Var v, int heads, int lq, int lk, Mat* probs) {
  const auto d = q.cols();
  require(heads > 0 && d % heads == 0, "attention (heads)");
  require(k.cols() == d && v.cols() == d, "attention (width)");
  require(lq > 0 && lk > 0 && q.rows() % lq == 0 && k.rows() % lk == 0, "attention (blocks)");
  const auto blocks = q.rows() / lq;
  require(k.rows() / lk == blocks && v.rows() == k.rows(), "attention (block count)");
  Tape& t = *q.tape();
  const auto dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  auto saved = std::make_shared<std::vector<Mat>>(static_cast<std::size_t>(blocks * heads));
  Mat out(q.rows(), d);
  if (probs) probs->resize(blocks * heads * lq, lk);
  for (Eigen::Index b = 0; b < blocks; ++b) {
    for (int h = 0; h < heads; ++h) {
      const auto qb = q.value().block(b * lq, h * dh, lq, dh);
      const auto kb = k.value().block(b * lk, h * dh, lk, dh);
      const auto vb = v.value().block(b * lk, h * dh, lk, dh);
      Mat s = (qb * kb.transpose()) * inv_sqrt;
      for (Eigen::Index r = 0; r < s.rows(); ++r) {
        const double m = s.row(r).maxCoeff();
        s.row(r) = (s.row(r).array() - m).exp();
        s.row(r) /= s.row(r).sum();
      }
      out.block(b * lq, h * dh, lq, dh).noalias() = s * vb;
      if (probs) probs->block((b * heads + h) * lq, 0, lq, lk) = s;
      (*saved)[static_cast<std::size_t>(b * heads + h)] = std::move(s);
    }
  }
  return t.push(std::move(out), {q, k, v}, [q, k, v, heads, lq, lk, blocks, dh, inv_sqrt, saved](Tape& t, int self) {
    const Mat& g = t.grad(self);
    const bool gq = needs(t, q), gk = needs(t, k), gv = needs(t, v);
    for (Eigen::Index b = 0; b < blocks; ++b) {
      for (int h = 0; h < heads; ++h) {
        const Mat& p = (*saved)[static_cast<std::size_t>(b * heads + h)];
        const auto go = g.block(b * lq, h * dh, lq, dh);
        const auto qb = q.value().block(b * lq, h * dh, lq, dh);
        const auto kb = k.value().block(b * lk, h * dh, lk, dh);
        const auto vb = v.value().block(b * lk, h * dh, lk, dh);
        if (gv) t.grad(v.id()).block(b * lk, h * dh, lk, dh).noalias() += p.transpose() * go;
        if (!(gq || gk)) continue;
        Mat dp = go * vb.transpose();
        Mat ds = p.cwiseProduct(dp);
        const Vec rs = ds.rowwise().sum();
        ds -= p.cwiseProduct(rs * Eigen::RowVectorXd::Ones(lk));
        ds *= inv_sqrt;
        if (gq) t.grad(q.id()).block(b * lq, h * dh, lq, dh).noalias() += ds * kb;
        if (gk) t.grad(k.id()).block(b * lk, h * dh, lk, dh).noalias() += ds.transpose() * qb;
      }
    }
  });
}

Var block_mix(Var x, const Mat& mix) {
  const auto n = mix.rows();
  require(mix.cols() == n && n > 0 && x.rows() % n == 0, "block_mix");
  Tape& t = *x.tape();
  const auto blocks = x.rows() / n;
  Mat out(x.rows(), x.cols());
  for (Eigen::Index b = 0; b < blocks; ++b) {
    out.middleRows(b * n, n).noalias() = mix * x.value().middleRows(b * n, n);
  }
  auto held = std::make_shared<Mat>(mix);
  return t.push(std::move(out), {x}, [x, held, n, blocks](Tape& t, int self) {
    const Mat& g = t.grad(self);
    Mat& dx = t.grad(x.id());
    for (Eigen::Index b = 0; b < blocks; ++b) {
      dx.middleRows(b * n, n).noalias() += held->transpose() * g.middleRows(b * n, n);
    }
  });
}

Var gatv2_attend(Var source, Var target, Var att, const std::vector<std::vector<int>>& neighbors,
                 int heads, double slope, std::vector<double>* alpha) {
  const auto n = static_cast<Eigen::Index>(neighbors.size());
  const auto width = source.cols();
  require(n > 0 && source.rows() % n == 0, "gatv2_attend (blocks)");
  require(target.rows() == source.rows() && target.cols() == width, "gatv2_attend (target)");
  require(heads > 0 && width % heads == 0, "gatv2_attend (heads)");
  const auto dh = width / heads;
  require(att.rows() == heads && att.cols() == dh, "gatv2_attend (att)");
  Tape& t = *source.tape();
  const auto blocks = source.rows() / n;
  auto leaky = [slope](double x) { return x > 0.0 ? x : slope * x; };

  // Coefficients laid out per (block, head, target) in neighbour order.
  auto coeff = std::make_shared<std::vector<double>>();
  std::vector<std::size_t> offsets(static_cast<std::size_t>(n) + 1, 0);
  for (Eigen::Index i = 0; i < n; ++i) offsets[i + 1] = offsets[i] + neighbors[i].size();
  const std::size_t per_head = offsets.back();
  coeff->resize(static_cast<std::size_t>(blocks * heads) * per_head);

  Mat out = Mat::Zero(source.rows(), width);
  const Mat& sv = source.value();
  const Mat& tv = target.value();
  const Mat& av = att.value();
  std::vector<double> e;
  for (Eigen::Index b = 0; b < blocks; ++b) {
    for (int h = 0; h < heads; ++h) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto& nb = neighbors[static_cast<std::size_t>(i)];
        e.assign(nb.size(), 0.0);
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < nb.size(); ++k) {
          const auto j = b * n + nb[k];
          double s = 0.0;
          for (Eigen::Index c = 0; c < dh; ++c) {
            s += av(h, c) * leaky(tv(b * n + i, h * dh + c) + sv(j, h * dh + c));
          }
          e[k] = s;
          m = std::max(m, s);
        }
        double z = 0.0;
        for (auto& s : e) z += (s = std::exp(s - m));
        double* a = coeff->data() + static_cast<std::size_t>(b * heads + h) * per_head + offsets[i];
        for (std::size_t k = 0; k < nb.size(); ++k) {
          a[k] = e[k] / z;
          out.block(b * n + i, h * dh, 1, dh) += a[k] * sv.block(b * n + nb[k], h * dh, 1, dh);
        }
      }
    }
  }
  if (alpha) *alpha = *coeff;
  auto nbs = std::make_shared<std::vector<std::vector<int>>>(neighbors);
  return t.push(std::move(out), {source, target, att},
                [source, target, att, nbs, coeff, offsets, per_head, heads, dh, n, blocks, slope](Tape& t, int self) {
    const Mat& g = t.grad(self);
    const Mat& sv = source.value();
    const Mat& tv = target.value();
    const Mat& av = att.value();
    const bool gs = needs(t, source), gt = needs(t, target), ga = needs(t, att);
    Mat ds = Mat::Zero(sv.rows(), sv.cols());
    Mat dt = Mat::Zero(tv.rows(), tv.cols());
    Mat da = Mat::Zero(av.rows(), av.cols());
    std::vector<double> dalpha;
    for (Eigen::Index b = 0; b < blocks; ++b) {
      for (int h = 0; h < heads; ++h) {
        for (Eigen::Index i = 0; i < n; ++i) {
          const auto& nb = (*nbs)[static_cast<std::size_t>(i)];
          const double* a = coeff->data() + static_cast<std::size_t>(b * heads + h) * per_head + offsets[i];
          const Eigen::RowVectorXd gi = g.block(b * n + i, h * dh, 1, dh);
          dalpha.assign(nb.size(), 0.0);
          double weighted = 0.0;
          for (std::size_t k = 0; k < nb.size(); ++k) {
            const auto j = b * n + nb[k];
            dalpha[k] = gi.dot(sv.row(j).segment(h * dh, dh));
            weighted += a[k] * dalpha[k];
            ds.block(j, h * dh, 1, dh) += a[k] * gi;
          }
          for (std::size_t k = 0; k < nb.size(); ++k) {
            const double de = a[k] * (dalpha[k] - weighted);
            const auto j = b * n + nb[k];
            for (Eigen::Index c = 0; c < dh; ++c) {
              const double u = tv(b * n + i, h * dh + c) + sv(j, h * dh + c);
              const double lu = u > 0.0 ? u : slope * u;
              const double du = de * av(h, c) * (u > 0.0 ? 1.0 : slope);
              da(h, c) += de * lu;
              dt(b * n + i, h * dh + c) += du;
              ds(j, h * dh + c) += du;
            }
          }
        }
      }
    }
    if (gs) t.grad(source.id()) += ds;
    if (gt) t.grad(target.id()) += dt;
    if (ga) t.grad(att.id()) += da;
  });
}

// -- Reductions ------------------------------------------------------------

Var sum(Var a) {
  Tape& t = *a.tape();
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  return t.push(std::move(out), {a}, [a](Tape& t, int self) {
    const double g = t.grad(self)(0, 0);
    t.grad(a.id()).array() += g;
  });
}

Var weighted_sum(Var a, const Mat& weights) {
  require(a.rows() == weights.rows() && a.cols() == weights.cols(), "weighted_sum");
  Tape& t = *a.tape();
  Mat out(1, 1);
  out(0, 0) = a.value().cwiseProduct(weights).sum();
  auto held = std::make_shared<Mat>(weights);
  return t.push(std::move(out), {a}, [a, held](Tape& t, int self) {
    t.grad(a.id()) += t.grad(self)(0, 0) * *held;
  });
}

Var masked_mse(Var pred, const Mat& target, const Mat& mask) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), "masked_mse (target)");
  require(mask.rows() == target.rows() && mask.cols() == target.cols(), "masked_mse (mask)");
  const double count = mask.sum();
  if (!(count > 0.0)) throw ModelError("masked_mse with an empty mask");
  Tape& t = *pred.tape();
  auto diff = std::make_shared<Mat>((pred.value() - target).cwiseProduct(mask));
  Mat out(1, 1);
  out(0, 0) = diff->cwiseProduct(pred.value() - target).sum() / count;
  return t.push(std::move(out), {pred}, [pred, diff, count](Tape& t, int self) {
    t.grad(pred.id()) += (2.0 * t.grad(self)(0, 0) / count) * *diff;
  });
}

}  // namespace gdimpute::ag
