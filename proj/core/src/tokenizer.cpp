// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#include "gdimpute/tokenizer.hpp"

#include <cmath>

#include "gdimpute/error.hpp"

namespace gdimpute {

using ag::Mat;
using ag::Var;
using nlohmann::json;

void FusionConfig::validate() const {
  if (d_token < 1 || fusion_heads < 1) throw ConfigError("fusion.d_token and fusion.fusion_heads must be >= 1");
  if (d_token % fusion_heads != 0) throw ConfigError("fusion.d_token must be divisible by fusion.fusion_heads");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("fusion.dropout must lie in [0, 1)");
}

json FusionConfig::to_json() const {
  return json{{"d_token", d_token}, {"fusion_heads", fusion_heads}, {"dropout", dropout}};
}

FusionConfig FusionConfig::from_json(const json& j) {
  FusionConfig c;
  c.d_token = j.value("d_token", c.d_token);
  c.fusion_heads = j.value("fusion_heads", c.fusion_heads);
  c.dropout = j.value("dropout", c.dropout);
  c.validate();
  return c;
}

Mat positional_encoding(std::size_t count, int width) {
  Mat pe(static_cast<Eigen::Index>(count), width);
  for (std::size_t p = 0; p < count; ++p) {
    for (int c = 0; c < width; ++c) {
      const int k = c / 2;
      const double w = std::pow(10000.0, -2.0 * k / static_cast<double>(width));
      const double angle = static_cast<double>(p) * w;
      pe(static_cast<Eigen::Index>(p), c) = (c % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

FeatureTokenizer FeatureTokenizer::create(const FeatureSchema& schema, int d_token, ag::ParameterSet& params,
                                          Rng& rng) {
  FeatureTokenizer t;
  t.schema_ = &schema;
  t.d_token_ = d_token;
  int rows = 0;
  t.category_offset_.assign(schema.size(), -1);
  for (std::size_t f = 0; f < schema.size(); ++f) {
    if (schema.feature(f).is_categorical()) {
      t.category_offset_[f] = rows;
      rows += static_cast<int>(schema.feature(f).category_count());
    }
  }
  const auto d = static_cast<int>(schema.size());
  t.numeric_ = nn::GroupLinear::create(params, "tokenizer.numeric", d, 1, d_token, true, rng);
  // The default xavier limit for a 1 -> d_token map is large; scale it down.
  t.numeric_.weight->value *= 1.0 / std::sqrt(static_cast<double>(d_token));
  t.numeric_.bias->value = nn::normal_init(d, d_token, 0.1, rng);
  if (rows > 0) {
    t.category_embedding_ = &params.add("tokenizer.category_embedding", nn::normal_init(rows, d_token, 0.5, rng));
  }
  t.mask_token_ = &params.add("tokenizer.mask_token", nn::normal_init(1, d_token, 0.5, rng));
  return t;
}

std::pair<int, int> FeatureTokenizer::category_rows(std::size_t f) const {
  const int first = category_offset_.at(f);
  if (first < 0) return {-1, -1};
  return {first, first + static_cast<int>(schema_->feature(f).category_count())};
}

Var FeatureTokenizer::tokenize(ag::Tape& tape, std::span<const EncodedRow> rows) const {
  const auto d = schema_->size();
  const auto total = static_cast<Eigen::Index>(rows.size() * d);
  Mat scalar = Mat::Zero(total, 1);
  ag::Vec numeric_on = ag::Vec::Zero(total);
  ag::Vec missing_on = ag::Vec::Zero(total);
  std::vector<int> category_index(static_cast<std::size_t>(total), -1);
  for (std::size_t b = 0; b < rows.size(); ++b) {
    const auto& row = rows[b];
    if (row.size() != d) throw SchemaError("row does not match the tokenizer's schema");
    for (std::size_t f = 0; f < d; ++f) {
      const auto r = static_cast<Eigen::Index>(b * d + f);
      if (!row.observed[f]) {
        missing_on(r) = 1.0;
        continue;
      }
      const auto& spec = schema_->feature(f);
      if (spec.is_numeric()) {
        scalar(r, 0) = row.value[f];
        numeric_on(r) = 1.0;
      } else {
        const auto code = static_cast<int>(row.value[f]);
        if (code < 0 || code >= static_cast<int>(spec.category_count())) {
          throw SchemaError("feature '" + spec.name + "' has an unknown category code");
        }
        category_index[static_cast<std::size_t>(r)] = category_offset_[f] + code;
      }
    }
  }
  Var tokens = ag::row_scale(numeric_(tape, tape.constant(std::move(scalar))), numeric_on);
  if (category_embedding_) {
    tokens = ag::add(tokens, ag::gather_rows(tape.parameter(*category_embedding_), category_index));
  }
  return ag::add(tokens, ag::broadcast_row(tape.parameter(*mask_token_), missing_on));
}

TokenSequence FeatureTokenizer::tokenize(const EncodedRow& row) const {
  ag::Tape tape(false);
  const EncodedRow rows[] = {row};
  return TokenSequence{tokenize(tape, rows).value(), row.observed};
}

CrossModalFusion CrossModalFusion::create(const FusionConfig& config, int graph_dim, ag::ParameterSet& params,
                                          Rng& rng) {
  config.validate();
  CrossModalFusion f;
  f.config_ = config;
  const int d = config.d_token;
  f.query_ = nn::Linear::create(params, "fusion.query", d, d, false, rng);
  f.key_ = nn::Linear::create(params, "fusion.key", graph_dim, d, false, rng);
  f.value_ = nn::Linear::create(params, "fusion.value", graph_dim, d, false, rng);
  f.output_ = nn::Linear::create(params, "fusion.output", d, d, false, rng);
  f.ffn_in_ = nn::Linear::create(params, "fusion.ffn_in", d, 2 * d, true, rng);
  f.ffn_out_ = nn::Linear::create(params, "fusion.ffn_out", 2 * d, d, true, rng);
  return f;
}

namespace {

Var dropout(Var x, double p, Rng* rng) {
  if (rng == nullptr || p <= 0.0) return x;
  std::bernoulli_distribution keep(1.0 - p);
  Mat mask(x.rows(), x.cols());
  const double s = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*rng) ? s : 0.0;
  return ag::mul_const(x, mask);
}

}  // namespace

Var CrossModalFusion::fuse(ag::Tape& tape, Var tokens, Var graph, int features, int nodes, Rng* dropout_rng,
                           Mat* attention_probs) const {
  if (tokens.cols() != config_.d_token || tokens.rows() % features != 0) {
    throw ModelError("token tensor does not match the fusion width");
  }
  const auto blocks = tokens.rows() / features;
  if (graph.rows() != blocks * nodes) throw ModelError("graph embedding rows do not match the token batch");
  const Mat pe = positional_encoding(static_cast<std::size_t>(features), config_.d_token);
  Mat tiled(tokens.rows(), tokens.cols());
  for (Eigen::Index b = 0; b < blocks; ++b) tiled.middleRows(b * features, features) = pe;
  Var queries_in = ag::add(tokens, tape.constant(std::move(tiled)));

  Var q = query_(tape, queries_in);
  Var k = key_(tape, graph);
  Var v = value_(tape, graph);
  Var attended = ag::attention(q, k, v, config_.fusion_heads, features, nodes, attention_probs);
  Var y = ag::add(queries_in, dropout(output_(tape, attended), config_.dropout, dropout_rng));
  Var ff = ffn_out_(tape, ag::silu(ffn_in_(tape, y)));
  return ag::add(y, dropout(ff, config_.dropout, dropout_rng));
}

ConditioningTensor CrossModalFusion::fuse(const TokenSequence& tokens, const GraphEmbedding& graph) const {
  ag::Tape tape(false);
  Var t = tape.constant(tokens.tokens);
  Var g = tape.constant(graph.nodes);
  return ConditioningTensor{
      fuse(tape, t, g, static_cast<int>(tokens.tokens.rows()), static_cast<int>(graph.nodes.rows())).value()};
}

}  // namespace gdimpute
