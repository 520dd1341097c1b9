// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gdimpute/autograd.hpp"
#include "gdimpute/nn.hpp"
#include "gdimpute/rng.hpp"
#include "gdimpute/schema.hpp"

namespace gdimpute {

enum class GraphVariant { kGcn, kGatv2, kNone };

std::string_view to_string(GraphVariant v);
GraphVariant parse_graph_variant(std::string_view s);

struct GraphEncoderConfig {
  GraphVariant variant = GraphVariant::kGatv2;
  int hidden_dim = 64;
  int layers = 2;
  int heads = 4;
  double leaky_slope = 0.2;
  int category_embed_dim = 8;

  void validate() const;
  nlohmann::json to_json() const;
  static GraphEncoderConfig from_json(const nlohmann::json& j);
};

/// Per-component input vectors: for component c, its numeric features (one
/// slot each), then its categorical features (category_embed_dim slots
/// each), then one observed flag per feature, all in schema order.
/// Missing features contribute zeros.
struct NodeFeatures {
  std::vector<std::vector<double>> values;
  std::vector<std::vector<std::uint8_t>> observed;
};

/// Per-component context vectors, one row per node in graph order.
struct GraphEmbedding {
  ag::Mat nodes;
};

/// D^-1/2 (A + I) D^-1/2 with D the degree including the self-loop.
ag::Mat normalized_adjacency(const AssemblyGraph& graph);
/// Neighbour lists with the node itself prepended.
std::vector<std::vector<int>> self_loop_neighborhoods(const AssemblyGraph& graph);

/// act(A_hat h W); act is SiLU when `activate`.
ag::Var gcn_layer(ag::Var h, const ag::Mat& norm_adj, ag::Var weight, bool activate);

/// Multi-head GATv2 layer with source/target projections and attention
/// vector applied after the LeakyReLU. Heads are concatenated.
ag::Var gatv2_layer(ag::Var h, const std::vector<std::vector<int>>& neighborhoods, ag::Var w_source,
                    ag::Var w_target, ag::Var att, int heads, double slope, bool activate,
                    std::vector<double>* alpha = nullptr);

class GraphEncoder {
 public:
  GraphEncoder() = default;

  /// Registers parameters under "encoder." in `params`.
  static GraphEncoder create(const FeatureSchema& schema, const AssemblyGraph& graph,
                             const GraphEncoderConfig& config, ag::ParameterSet& params, Rng& rng);

  const GraphEncoderConfig& config() const { return config_; }
  int node_count() const { return static_cast<int>(node_width_.size()); }
  int node_width(int c) const { return node_width_[static_cast<std::size_t>(c)]; }

  NodeFeatures build_node_features(const EncodedRow& row) const;

  /// Embeds a batch of rows; result is (rows * nodes) x hidden_dim with each
  /// row's nodes contiguous. The `none` variant returns zeros.
  ag::Var encode(ag::Tape& tape, std::span<const EncodedRow> rows) const;
  GraphEmbedding encode(const EncodedRow& row) const;

  /// Padded (rows * nodes) x max-width input assembled from `rows`.
  ag::Var node_input(ag::Tape& tape, std::span<const EncodedRow> rows) const;

 private:
  struct Slot {
    std::size_t feature;
    int value_offset;
    int flag_offset;
  };

  const FeatureSchema* schema_ = nullptr;
  GraphEncoderConfig config_;
  std::vector<std::vector<Slot>> slots_;  // per component
  std::vector<int> node_width_;
  int max_width_ = 0;
  std::vector<int> category_offset_;  // per feature, row offset in the embedding table or -1
  ag::Mat norm_adj_;
  std::vector<std::vector<int>> neighborhoods_;

  ag::Parameter* category_embedding_ = nullptr;
  nn::GroupLinear input_;
  struct Layer {
    ag::Parameter* weight = nullptr;  // gcn
    ag::Parameter* source = nullptr;  // gatv2
    ag::Parameter* target = nullptr;
    ag::Parameter* att = nullptr;
  };
  std::vector<Layer> layers_;
};

}  // namespace gdimpute
