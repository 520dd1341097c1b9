// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#include "gdimpute/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "gdimpute/error.hpp"

namespace gdimpute {

using ag::Mat;

namespace {

void require_train(const Dataset& train) {
  if (train.empty() || !train.schema) throw DataError("baseline needs a non-empty training set");
}

std::vector<std::size_t> training_modes(const Dataset& train) {
  const auto& schema = *train.schema;
  std::vector<std::size_t> modes(schema.size(), 0);
  for (std::size_t f = 0; f < schema.size(); ++f) {
    const auto& spec = schema.feature(f);
    if (!spec.is_categorical()) continue;
    std::vector<std::size_t> counts(spec.category_count(), 0);
    for (const auto& row : train.rows) ++counts[*spec.category_index(row.label(f))];
    modes[f] = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }
  return modes;
}

}  // namespace

// -- Hot deck ------------------------------------------------------------------

double hotdeck_distance(const FeatureSchema& schema, const PartialDesign& partial, const CompleteDesign& donor) {
  double total = 0.0;
  std::size_t observed = 0;
  for (std::size_t f = 0; f < schema.size(); ++f) {
    if (partial.is_missing(f)) continue;
    ++observed;
    const auto& spec = schema.feature(f);
    if (spec.is_numeric()) {
      total += std::abs(spec.normalize(std::get<double>(partial[f])) - spec.normalize(donor.number(f)));
    } else {
      total += std::get<std::string>(partial[f]) == donor.label(f) ? 0.0 : 1.0;
    }
  }
  return observed == 0 ? 0.0 : total / static_cast<double>(observed);
}

std::size_t hotdeck_donor(const Dataset& train, const PartialDesign& partial) {
  require_train(train);
  validate(*train.schema, partial);
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < train.size(); ++i) {
    const double d = hotdeck_distance(*train.schema, partial, train.rows[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

CompleteDesign hotdeck_impute(const Dataset& train, const PartialDesign& partial) {
  const auto& donor = train.rows[hotdeck_donor(train, partial)];
  std::vector<Value> out = partial.values();
  for (std::size_t f = 0; f < out.size(); ++f) {
    if (is_missing(out[f])) out[f] = donor[f];
  }
  return CompleteDesign(std::move(out));
}

// -- PPCA ----------------------------------------------------------------------

Mat PpcaModel::covariance() const {
  Mat c = weight * weight.transpose();
  c.diagonal().array() += sigma2;
  return c;
}

namespace {

double ppca_log_likelihood(const Mat& s, const Mat& w, double sigma2, std::size_t n) {
  const auto d = s.rows();
  Mat c = w * w.transpose();
  c.diagonal().array() += sigma2;
  Eigen::LDLT<Mat> ldlt(c);
  const double logdet = ldlt.vectorD().array().log().sum();
  const double trace = ldlt.solve(s).trace();
  return -0.5 * static_cast<double>(n) *
         (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + logdet + trace);
}

}  // namespace

PpcaModel ppca_fit(const Dataset& train, const PpcaOptions& options) {
  require_train(train);
  if (options.max_iter < 1) throw ConfigError("ppca.max_iter must be >= 1");
  const auto& schema = *train.schema;
  PpcaModel m;
  m.schema = train.schema;
  m.category_mode = training_modes(train);
  for (std::size_t f = 0; f < schema.size(); ++f) {
    if (schema.feature(f).is_numeric()) m.numeric.push_back(f);
  }
  const auto d = static_cast<Eigen::Index>(m.numeric.size());
  if (d == 0) {
    m.converged = true;
    return m;
  }
  const auto n = train.size();
  Mat x(static_cast<Eigen::Index>(n), d);
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto f = m.numeric[static_cast<std::size_t>(j)];
      x(static_cast<Eigen::Index>(i), j) = schema.feature(f).normalize(train.rows[i].number(f));
    }
  }
  m.mean = x.colwise().mean().transpose();
  x.rowwise() -= m.mean.transpose();
  const Mat s = (x.transpose() * x) / static_cast<double>(n);

  const int q = std::clamp(options.latent_dim.value_or(std::min<int>(8, static_cast<int>(d) - 1)), 1,
                           static_cast<int>(d));
  const double scale = s.trace() / static_cast<double>(d);
  const double floor = std::max(1e-12 * scale, std::numeric_limits<double>::min());
  // Fixed-seed start keeps the fit a pure function of the data.
  Rng rng = make_rng(0, 0x70706361ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat w(d, q);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = gauss(rng) * std::sqrt(std::max(scale, floor));
  double sigma2 = std::max(scale, floor);

  double prev = ppca_log_likelihood(s, w, sigma2, n);
  for (int it = 0; it < options.max_iter; ++it) {
    Mat mm = w.transpose() * w;
    mm.diagonal().array() += sigma2;
    const Mat minv = mm.ldlt().solve(Mat::Identity(q, q));
    const Mat sw = s * w;
    // W' = S W (sigma2 I + M^-1 W^T S W)^-1; the bracket is not symmetric.
    Mat inner = minv * (w.transpose() * sw);
    inner.diagonal().array() += sigma2;
    const Mat w_new = inner.transpose().partialPivLu().solve(sw.transpose()).transpose();
    const double s2 = (s - sw * minv * w_new.transpose()).trace() / static_cast<double>(d);
    w = w_new;
    sigma2 = std::max(s2, floor);
    const double ll = ppca_log_likelihood(s, w, sigma2, n);
    m.log_likelihood.push_back(ll);
    if (!std::isfinite(ll)) break;
    if (std::abs(ll - prev) < options.tol) {
      m.converged = true;
      break;
    }
    prev = ll;
  }
  m.weight = std::move(w);
  m.sigma2 = sigma2;
  return m;
}

CompleteDesign ppca_impute(const PpcaModel& model, const PartialDesign& partial) {
  if (!model.schema) throw ModelError("PPCA model is not fitted");
  const auto& schema = *model.schema;
  validate(schema, partial);
  std::vector<Value> out = partial.values();
  for (std::size_t f = 0; f < schema.size(); ++f) {
    if (is_missing(out[f]) && schema.feature(f).is_categorical()) {
      out[f] = schema.feature(f).categories[model.category_mode[f]];
    }
  }
  std::vector<Eigen::Index> obs, mis;
  for (std::size_t j = 0; j < model.numeric.size(); ++j) {
    (partial.is_missing(model.numeric[j]) ? mis : obs).push_back(static_cast<Eigen::Index>(j));
  }
  if (!mis.empty()) {
    const Mat c = model.covariance();
    Eigen::VectorXd cond = model.mean(mis);
    if (!obs.empty()) {
      Eigen::VectorXd xo(static_cast<Eigen::Index>(obs.size()));
      for (std::size_t k = 0; k < obs.size(); ++k) {
        const auto f = model.numeric[static_cast<std::size_t>(obs[k])];
        xo(static_cast<Eigen::Index>(k)) =
            schema.feature(f).normalize(std::get<double>(partial[f])) - model.mean(obs[k]);
      }
      const Mat coo = c(obs, obs);
      const Mat cmo = c(mis, obs);
      cond += cmo * coo.ldlt().solve(xo);
    }
    for (std::size_t k = 0; k < mis.size(); ++k) {
      const auto f = model.numeric[static_cast<std::size_t>(mis[k])];
      const auto& spec = schema.feature(f);
      out[f] = std::clamp(spec.denormalize(cond(static_cast<Eigen::Index>(k))), spec.lo, spec.hi);
    }
  }
  return CompleteDesign(std::move(out));
}

// -- Iterative forest ------------------------------------------------------------

std::vector<CompleteDesign> forest_impute(const Dataset& train, std::span<const PartialDesign> partials,
                                          const ForestImputeOptions& options, std::uint64_t seed) {
  require_train(train);
  if (options.rounds < 1) throw ConfigError("forest rounds must be >= 1");
  options.forest.validate();
  const auto& schema = *train.schema;
  const auto d = schema.size();
  const auto nt = train.size();
  const auto n = nt + partials.size();

  // Encoded matrix: normalized numerics and category codes.
  Mat x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<std::vector<std::size_t>> missing_rows(d);
  for (std::size_t i = 0; i < nt; ++i) {
    const auto e = encode(schema, train.rows[i]);
    for (std::size_t f = 0; f < d; ++f) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = e.value[f];
  }
  for (std::size_t i = 0; i < partials.size(); ++i) {
    validate(schema, partials[i]);
    const auto e = encode(schema, partials[i]);
    for (std::size_t f = 0; f < d; ++f) {
      const auto r = static_cast<Eigen::Index>(nt + i);
      if (e.observed[f]) {
        x(r, static_cast<Eigen::Index>(f)) = e.value[f];
      } else {
        missing_rows[f].push_back(nt + i);
      }
    }
  }
  // Initial fill: column mean or mode over the observed cells.
  for (std::size_t f = 0; f < d; ++f) {
    if (missing_rows[f].empty()) continue;
    std::vector<bool> hole(n, false);
    for (auto r : missing_rows[f]) hole[r] = true;
    const auto& spec = schema.feature(f);
    double fill = 0.0;
    if (spec.is_numeric()) {
      double s = 0.0;
      std::size_t c = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!hole[i]) {
          s += x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f));
          ++c;
        }
      }
      fill = s / static_cast<double>(c);
    } else {
      std::vector<std::size_t> counts(spec.category_count(), 0);
      for (std::size_t i = 0; i < n; ++i) {
        if (!hole[i]) ++counts[static_cast<std::size_t>(x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)))];
      }
      fill = static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    }
    for (auto r : missing_rows[f]) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f)) = fill;
  }

  std::vector<std::size_t> order;
  for (std::size_t f = 0; f < d; ++f) {
    if (!missing_rows[f].empty()) order.push_back(f);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return missing_rows[a].size() < missing_rows[b].size(); });

  std::size_t total_missing = 0;
  for (auto f : order) total_missing += missing_rows[f].size();

  for (int round = 0; round < options.rounds && !order.empty(); ++round) {
    double change = 0.0;
    for (auto f : order) {
      const auto fi = static_cast<Eigen::Index>(f);
      std::vector<bool> hole(n, false);
      for (auto r : missing_rows[f]) hole[r] = true;
      const auto fit_rows = n - missing_rows[f].size();
      Mat xf(static_cast<Eigen::Index>(fit_rows), static_cast<Eigen::Index>(d - 1));
      std::vector<double> yf;
      yf.reserve(fit_rows);
      Eigen::Index k = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (hole[i]) continue;
        const auto r = static_cast<Eigen::Index>(i);
        xf.row(k).head(fi) = x.row(r).head(fi);
        xf.row(k).tail(static_cast<Eigen::Index>(d) - fi - 1) = x.row(r).tail(static_cast<Eigen::Index>(d) - fi - 1);
        yf.push_back(x(r, fi));
        ++k;
      }
      const auto& spec = schema.feature(f);
      const int classes = spec.is_categorical() ? static_cast<int>(spec.category_count()) : 0;
      const auto forest = RandomForest::fit(
          xf, yf, classes, options.forest,
          derive_seed(seed, static_cast<std::uint64_t>(round) * d + f));
      std::vector<double> row(d - 1);
      for (auto r : missing_rows[f]) {
        const auto ri = static_cast<Eigen::Index>(r);
        for (Eigen::Index c = 0, o = 0; c < static_cast<Eigen::Index>(d); ++c) {
          if (c != fi) row[static_cast<std::size_t>(o++)] = x(ri, c);
        }
        const double pred = forest.predict(row);
        const double old = x(ri, fi);
        change += classes > 0 ? (pred != old ? 1.0 : 0.0) : (pred - old) * (pred - old);
        x(ri, fi) = pred;
      }
    }
    if (change / static_cast<double>(total_missing) < options.tol) break;
  }

  std::vector<CompleteDesign> out;
  out.reserve(partials.size());
  for (std::size_t i = 0; i < partials.size(); ++i) {
    std::vector<Value> values = partials[i].values();
    for (std::size_t f = 0; f < d; ++f) {
      if (!is_missing(values[f])) continue;
      const auto& spec = schema.feature(f);
      const double v = x(static_cast<Eigen::Index>(nt + i), static_cast<Eigen::Index>(f));
      if (spec.is_numeric()) {
        values[f] = std::clamp(spec.denormalize(v), spec.lo, spec.hi);
      } else {
        values[f] = spec.categories[static_cast<std::size_t>(v)];
      }
    }
    out.emplace_back(std::move(values));
  }
  return out;
}

}  // namespace gdimpute
