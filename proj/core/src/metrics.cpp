// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#include "gdimpute/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "gdimpute/error.hpp"

namespace gdimpute {

using nlohmann::json;

namespace {

void check_aligned(std::size_t a, std::size_t b, std::size_t c) {
  if (a != b || a != c) throw DataError("predictions, truths and masks must have the same length");
}

double unit(const FeatureSpec& spec, const CompleteDesign& row, std::size_t f) {
  return normalized_scalar(spec, row[f]);
}

}  // namespace

double rmse(const FeatureSchema& schema, std::span<const CompleteDesign> predictions,
            std::span<const CompleteDesign> truths, std::span<const ObservationMask> masks) {
  check_aligned(predictions.size(), truths.size(), masks.size());
  double total = 0.0;
  std::size_t rows = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    double sq = 0.0;
    std::size_t m = 0;
    for (std::size_t f = 0; f < schema.size(); ++f) {
      const auto& spec = schema.feature(f);
      if (!spec.is_numeric() || masks[i].observed(f)) continue;
      const double e = unit(spec, predictions[i], f) - unit(spec, truths[i], f);
      sq += e * e;
      ++m;
    }
    if (m == 0) continue;
    total += std::sqrt(sq / static_cast<double>(m));
    ++rows;
  }
  if (rows == 0) throw DataError("rmse needs at least one missing numeric feature");
  return total / static_cast<double>(rows);
}

double error_rate(const FeatureSchema& schema, std::span<const CompleteDesign> predictions,
                  std::span<const CompleteDesign> truths, std::span<const ObservationMask> masks) {
  check_aligned(predictions.size(), truths.size(), masks.size());
  double total = 0.0;
  std::size_t rows = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    std::size_t wrong = 0, m = 0;
    for (std::size_t f = 0; f < schema.size(); ++f) {
      if (!schema.feature(f).is_categorical() || masks[i].observed(f)) continue;
      ++m;
      if (predictions[i].label(f) != truths[i].label(f)) ++wrong;
    }
    if (m == 0) continue;
    total += static_cast<double>(wrong) / static_cast<double>(m);
    ++rows;
  }
  if (rows == 0) throw DataError("error_rate needs at least one missing categorical feature");
  return total / static_cast<double>(rows);
}

namespace {

std::vector<std::pair<double, double>> pooled_numeric(const FeatureSchema& schema,
                                                      std::span<const CompleteDesign> predictions,
                                                      std::span<const CompleteDesign> truths,
                                                      std::span<const ObservationMask> masks) {
  check_aligned(predictions.size(), truths.size(), masks.size());
  std::vector<std::pair<double, double>> cells;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    for (std::size_t f = 0; f < schema.size(); ++f) {
      const auto& spec = schema.feature(f);
      if (!spec.is_numeric() || masks[i].observed(f)) continue;
      cells.emplace_back(unit(spec, predictions[i], f), unit(spec, truths[i], f));
    }
  }
  if (cells.empty()) throw DataError("metric needs at least one missing numeric feature");
  return cells;
}

}  // namespace

double mae(const FeatureSchema& schema, std::span<const CompleteDesign> predictions,
           std::span<const CompleteDesign> truths, std::span<const ObservationMask> masks) {
  const auto cells = pooled_numeric(schema, predictions, truths, masks);
  double s = 0.0;
  for (auto [p, t] : cells) s += std::abs(p - t);
  return s / static_cast<double>(cells.size());
}

std::optional<double> r_squared(const FeatureSchema& schema, std::span<const CompleteDesign> predictions,
                                std::span<const CompleteDesign> truths, std::span<const ObservationMask> masks) {
  const auto cells = pooled_numeric(schema, predictions, truths, masks);
  double mean = 0.0;
  for (auto [p, t] : cells) mean += t;
  mean /= static_cast<double>(cells.size());
  double sse = 0.0, sst = 0.0;
  for (auto [p, t] : cells) {
    sse += (p - t) * (p - t);
    sst += (t - mean) * (t - mean);
  }
  if (sst == 0.0) return std::nullopt;
  return 1.0 - sse / sst;
}

std::vector<double> mean_abs_correlation(const Dataset& train) {
  if (train.empty() || !train.schema) throw DataError("correlations need a non-empty dataset");
  const auto& schema = *train.schema;
  const auto d = schema.size();
  const auto n = static_cast<double>(train.size());
  std::vector<std::vector<double>> cols(d, std::vector<double>(train.size()));
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto e = encode(schema, train.rows[i]);
    for (std::size_t f = 0; f < d; ++f) cols[f][i] = e.value[f];
  }
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (std::size_t f = 0; f < d; ++f) {
    for (double v : cols[f]) mean[f] += v;
    mean[f] /= n;
    for (double v : cols[f]) sd[f] += (v - mean[f]) * (v - mean[f]);
    sd[f] = std::sqrt(sd[f]);
  }
  std::vector<double> out(d, 0.0);
  if (d < 2) return out;
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a + 1; b < d; ++b) {
      double r = 0.0;
      if (sd[a] > 0.0 && sd[b] > 0.0) {
        double cov = 0.0;
        for (std::size_t i = 0; i < train.size(); ++i) cov += (cols[a][i] - mean[a]) * (cols[b][i] - mean[b]);
        r = std::abs(cov / (sd[a] * sd[b]));
      }
      out[a] += r;
      out[b] += r;
    }
  }
  for (auto& v : out) v /= static_cast<double>(d - 1);
  return out;
}

std::vector<bool> diversity_eligible(const Dataset& train) {
  const auto means = mean_abs_correlation(train);
  std::vector<double> sorted = means;
  std::sort(sorted.begin(), sorted.end());
  const auto m = sorted.size();
  const double median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  std::vector<bool> out(means.size());
  for (std::size_t f = 0; f < means.size(); ++f) out[f] = means[f] > median;
  return out;
}

double max_pairwise_gap(std::span<const double> values) {
  if (values.size() < 2) throw DataError("pairwise gap needs at least two draws");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return *hi - *lo;
}

namespace {

std::vector<double> draws_of(const FeatureSchema& schema, const SampleSet& s, std::size_t f) {
  std::vector<double> v;
  v.reserve(s.draws.size());
  for (const auto& d : s.draws) v.push_back(normalized_scalar(schema.feature(f), d[f]));
  return v;
}

}  // namespace

double diversity_score(const FeatureSchema& schema, std::span<const SampleSet> samples,
                       const std::vector<bool>& eligible) {
  if (eligible.size() != schema.size()) throw DataError("eligibility mask does not match the schema");
  double total = 0.0;
  std::size_t rows = 0;
  for (const auto& s : samples) {
    if (s.draws.size() < 2) throw DataError("diversity needs K >= 2 draws per row");
    double row = 0.0;
    std::size_t m = 0;
    for (auto f : s.missing_positions()) {
      if (!eligible[f]) continue;
      row += max_pairwise_gap(draws_of(schema, s, f));
      ++m;
    }
    if (m == 0) continue;
    total += row / static_cast<double>(m);
    ++rows;
  }
  if (rows == 0) throw DataError("no eligible missing feature for the diversity score");
  return total / static_cast<double>(rows);
}

double diversity_score(std::span<const SampleSet> samples, const Dataset& train) {
  return diversity_score(*train.schema, samples, diversity_eligible(train));
}

double feature_diversity(const FeatureSchema& schema, std::span<const SampleSet> samples, std::size_t feature) {
  double total = 0.0;
  std::size_t rows = 0;
  for (const auto& s : samples) {
    if (!s.input.is_missing(feature)) continue;
    if (s.draws.size() < 2) throw DataError("diversity needs K >= 2 draws per row");
    total += max_pairwise_gap(draws_of(schema, s, feature));
    ++rows;
  }
  if (rows == 0) throw DataError("feature '" + schema.feature(feature).name + "' is never missing");
  return total / static_cast<double>(rows);
}

double smoothed_kl(std::span<const double> p_counts, std::span<const double> q_counts) {
  if (p_counts.size() != q_counts.size() || p_counts.empty()) throw DataError("histograms differ in length");
  const auto bins = static_cast<double>(p_counts.size());
  double np = bins, nq = bins;
  for (double c : p_counts) np += c;
  for (double c : q_counts) nq += c;
  double kl = 0.0;
  for (std::size_t b = 0; b < p_counts.size(); ++b) {
    const double p = (p_counts[b] + 1.0) / np;
    const double q = (q_counts[b] + 1.0) / nq;
    kl += p * std::log(p / q);
  }
  return std::max(0.0, kl);
}

double feature_kl(const FeatureSpec& spec, std::span<const Value> generated, std::span<const Value> dataset,
                  int bins) {
  if (bins < 2) throw ConfigError("KL needs at least 2 bins");
  if (generated.empty() || dataset.empty()) throw DataError("KL needs non-empty samples");
  const std::size_t nb = spec.is_numeric() ? static_cast<std::size_t>(bins) : spec.category_count();
  auto histogram = [&](std::span<const Value> values) {
    std::vector<double> h(nb, 0.0);
    for (const auto& v : values) {
      std::size_t b = 0;
      if (spec.is_numeric()) {
        const double u = spec.normalize(std::get<double>(v));
        b = static_cast<std::size_t>(std::clamp(static_cast<long>(std::floor(u * static_cast<double>(nb))), 0L,
                                                static_cast<long>(nb) - 1));
      } else {
        const auto idx = spec.category_index(std::get<std::string>(v));
        if (!idx) throw DataError("unknown label for feature '" + spec.name + "'");
        b = *idx;
      }
      h[b] += 1.0;
    }
    return h;
  };
  const auto p = histogram(generated);
  const auto q = histogram(dataset);
  return smoothed_kl(p, q);
}

double conditional_distance(const FeatureSchema& schema, std::span<const SampleSet> samples,
                            std::span<const CompleteDesign> truths, std::size_t feature) {
  if (samples.size() != truths.size() || samples.empty()) throw DataError("samples and truths must align");
  const auto& spec = schema.feature(feature);
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i].input.is_missing(feature)) {
      throw DataError("feature '" + spec.name + "' is observed in row " + std::to_string(i));
    }
    if (samples[i].draws.empty()) throw DataError("empty sample set");
    double mean = 0.0;
    for (const auto& d : samples[i].draws) mean += normalized_scalar(spec, d[feature]);
    mean /= static_cast<double>(samples[i].draws.size());
    total += std::abs(mean - normalized_scalar(spec, truths[i][feature]));
  }
  return total / static_cast<double>(samples.size());
}

json EvaluationReport::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json rows_j = json::array();
  for (const auto& r : rows) {
    rows_j.push_back({{"missing", r.missing},
                      {"missing_numeric", r.missing_numeric},
                      {"missing_categorical", r.missing_categorical}});
  }
  return json{{"report_version", kReportVersion},
              {"normalization",
               "numeric values min-max scaled by schema range; categorical codes scaled by 1/(C-1)"},
              {"method", method},
              {"n_test", n_test},
              {"k", k},
              {"rmse", opt(rmse)},
              {"error_rate", opt(error_rate)},
              {"mae", opt(mae)},
              {"r_squared", opt(r_squared)},
              {"diversity_score", opt(diversity_score)},
              {"feature_kl", feature_kl},
              {"feature_diversity", feature_diversity},
              {"conditional_distance", conditional_distance},
              {"rows", rows_j},
              {"config", config}};
}

std::string report_text(const EvaluationReport& report) { return report.to_json().dump(2) + "\n"; }

EvaluationReport evaluate(const Dataset& train, std::span<const MaskedCase> cases, std::span<const SampleSet> samples,
                          const std::string& method, const json& config) {
  if (!train.schema || train.empty()) throw DataError("evaluation needs the training set");
  if (cases.size() != samples.size()) throw DataError("one sample set per test case is required");
  if (cases.empty()) throw DataError("evaluation needs at least one test case");
  const auto& schema = *train.schema;
  EvaluationReport r;
  r.method = method;
  r.n_test = cases.size();
  r.k = static_cast<int>(samples.front().draws.size());
  r.config = config;

  std::vector<CompleteDesign> preds, truths;
  std::vector<ObservationMask> masks;
  std::size_t numeric_missing = 0, categorical_missing = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (!(samples[i].input == cases[i].partial)) throw DataError("sample set does not match test case " + std::to_string(i));
    preds.push_back(aggregate(schema, samples[i]));
    truths.push_back(cases[i].truth);
    masks.push_back(cases[i].partial.mask());
    RowBookkeeping b;
    for (auto f : masks.back().missing_positions()) {
      ++b.missing;
      if (schema.feature(f).is_numeric()) {
        ++b.missing_numeric;
      } else {
        ++b.missing_categorical;
      }
    }
    numeric_missing += b.missing_numeric;
    categorical_missing += b.missing_categorical;
    r.rows.push_back(b);
  }
  if (numeric_missing > 0) {
    r.rmse = rmse(schema, preds, truths, masks);
    r.mae = mae(schema, preds, truths, masks);
    r.r_squared = r_squared(schema, preds, truths, masks);
  }
  if (categorical_missing > 0) r.error_rate = error_rate(schema, preds, truths, masks);

  if (r.k >= 2) {
    const auto eligible = diversity_eligible(train);
    bool any = false;
    for (const auto& s : samples) {
      for (auto f : s.missing_positions()) any = any || eligible[f];
    }
    if (any) r.diversity_score = diversity_score(schema, samples, eligible);
  }

  for (std::size_t f = 0; f < schema.size(); ++f) {
    std::vector<Value> generated;
    bool all_missing = true;
    for (const auto& s : samples) {
      if (!s.input.is_missing(f)) {
        all_missing = false;
        continue;
      }
      for (const auto& d : s.draws) generated.push_back(d[f]);
    }
    if (generated.empty()) continue;
    const auto& name = schema.feature(f).name;
    std::vector<Value> reference;
    reference.reserve(train.size());
    for (const auto& row : train.rows) reference.push_back(row[f]);
    r.feature_kl[name] = feature_kl(schema.feature(f), generated, reference);
    if (r.k >= 2) r.feature_diversity[name] = feature_diversity(schema, samples, f);
    if (all_missing) r.conditional_distance[name] = conditional_distance(schema, samples, truths, f);
  }
  return r;
}

}  // namespace gdimpute
