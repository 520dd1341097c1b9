// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "gdimpute/autograd.hpp"
#include "gdimpute/graph_encoder.hpp"
#include "gdimpute/nn.hpp"
#include "gdimpute/rng.hpp"
#include "gdimpute/schema.hpp"

namespace gdimpute {

struct FusionConfig {
  int d_token = 64;
  int fusion_heads = 4;
  double dropout = 0.1;

  void validate() const;
  nlohmann::json to_json() const;
  static FusionConfig from_json(const nlohmann::json& j);
};

/// One token per schema feature, in schema order.
struct TokenSequence {
  ag::Mat tokens;
  std::vector<std::uint8_t> observed;
};

/// Fused per-feature conditioning vectors.
struct ConditioningTensor {
  ag::Mat values;
};

/// Fixed sinusoidal encoding: row p holds sin/cos pairs
/// (sin(p w_k), cos(p w_k)) with w_k = 10000^(-2k/width).
ag::Mat positional_encoding(std::size_t count, int width);

/// Lifts every feature to a d_token vector: numeric features through a
/// per-feature affine map of the normalized value, categorical features
/// through an embedding lookup, and missing features to a shared learned
/// mask token.
class FeatureTokenizer {
 public:
  FeatureTokenizer() = default;

  /// Registers parameters under "tokenizer." in `params`.
  static FeatureTokenizer create(const FeatureSchema& schema, int d_token, ag::ParameterSet& params, Rng& rng);

  int width() const { return d_token_; }
  /// Rows of the embedding table owned by categorical feature `f`.
  std::pair<int, int> category_rows(std::size_t f) const;

  ag::Var tokenize(ag::Tape& tape, std::span<const EncodedRow> rows) const;
  TokenSequence tokenize(const EncodedRow& row) const;

 private:
  const FeatureSchema* schema_ = nullptr;
  int d_token_ = 0;
  std::vector<int> category_offset_;
  nn::GroupLinear numeric_;
  ag::Parameter* category_embedding_ = nullptr;
  ag::Parameter* mask_token_ = nullptr;
};

/// Cross-attention from position-encoded feature tokens (queries) onto graph
/// node embeddings (keys/values), a residual connection, and a residual
/// feed-forward layer. Key and value projections carry no bias, so an
/// all-zero graph embedding contributes nothing.
class CrossModalFusion {
 public:
  CrossModalFusion() = default;

  static CrossModalFusion create(const FusionConfig& config, int graph_dim, ag::ParameterSet& params, Rng& rng);

  const FusionConfig& config() const { return config_; }

  /// tokens: (rows * features) x d_token; graph: (rows * nodes) x graph_dim.
  /// Dropout is applied only when `dropout_rng` is non-null.
  ag::Var fuse(ag::Tape& tape, ag::Var tokens, ag::Var graph, int features, int nodes, Rng* dropout_rng = nullptr,
               ag::Mat* attention_probs = nullptr) const;
  ConditioningTensor fuse(const TokenSequence& tokens, const GraphEmbedding& graph) const;

 private:
  FusionConfig config_;
  nn::Linear query_;
  nn::Linear key_;
  nn::Linear value_;
  nn::Linear output_;
  nn::Linear ffn_in_;
  nn::Linear ffn_out_;
};

}  // namespace gdimpute
