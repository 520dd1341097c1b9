// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#include "gdimpute/graph_encoder.hpp"

#include <algorithm>
#include <cmath>

#include "gdimpute/error.hpp"

namespace gdimpute {

using ag::Mat;
using ag::Var;
using nlohmann::json;

std::string_view to_string(GraphVariant v) {
  switch (v) {
    case GraphVariant::kGcn:
      return "gcn";
    case GraphVariant::kGatv2:
      return "gatv2";
    case GraphVariant::kNone:
      return "none";
  }
  return "none";
}

GraphVariant parse_graph_variant(std::string_view s) {
  if (s == "gcn") return GraphVariant::kGcn;
  if (s == "gatv2") return GraphVariant::kGatv2;
  if (s == "none") return GraphVariant::kNone;
  throw ConfigError("unknown graph variant '" + std::string(s) + "' (expected gcn, gatv2 or none)");
}

void GraphEncoderConfig::validate() const {
  if (layers < 1) throw ConfigError("encoder.layers must be >= 1");
  if (heads < 1) throw ConfigError("encoder.heads must be >= 1");
  if (hidden_dim < 1) throw ConfigError("encoder.hidden_dim must be >= 1");
  if (category_embed_dim < 1) throw ConfigError("encoder.category_embed_dim must be >= 1");
  if (variant == GraphVariant::kGatv2 && hidden_dim % heads != 0) {
    throw ConfigError("encoder.hidden_dim must be divisible by encoder.heads for gatv2");
  }
}

json GraphEncoderConfig::to_json() const {
  return json{{"variant", std::string(to_string(variant))},
              {"hidden_dim", hidden_dim},
              {"layers", layers},
              {"heads", heads},
              {"leaky_slope", leaky_slope},
              {"category_embed_dim", category_embed_dim}};
}

GraphEncoderConfig GraphEncoderConfig::from_json(const json& j) {
  GraphEncoderConfig c;
  if (j.contains("variant")) c.variant = parse_graph_variant(j["variant"].get<std::string>());
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
  c.category_embed_dim = j.value("category_embed_dim", c.category_embed_dim);
  c.validate();
  return c;
}

Mat normalized_adjacency(const AssemblyGraph& graph) {
  const auto n = static_cast<Eigen::Index>(graph.node_count());
  Mat a = Mat::Identity(n, n);
  for (auto [i, j] : graph.edges()) {
    a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
    a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = 1.0;
  }
  Eigen::VectorXd inv = a.rowwise().sum().cwiseSqrt().cwiseInverse();
  return inv.asDiagonal() * a * inv.asDiagonal();
}

std::vector<std::vector<int>> self_loop_neighborhoods(const AssemblyGraph& graph) {
  std::vector<std::vector<int>> out(graph.node_count());
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    out[i].push_back(static_cast<int>(i));
    for (auto j : graph.neighbors(i)) out[i].push_back(static_cast<int>(j));
  }
  return out;
}

Var gcn_layer(Var h, const Mat& norm_adj, Var weight, bool activate) {
  Var out = ag::block_mix(ag::matmul(h, weight), norm_adj);
  return activate ? ag::silu(out) : out;
}

Var gatv2_layer(Var h, const std::vector<std::vector<int>>& neighborhoods, Var w_source, Var w_target,
                Var att, int heads, double slope, bool activate, std::vector<double>* alpha) {
  Var src = ag::matmul(h, w_source);
  Var dst = ag::matmul(h, w_target);
  Var out = ag::gatv2_attend(src, dst, att, neighborhoods, heads, slope, alpha);
  return activate ? ag::silu(out) : out;
}

GraphEncoder GraphEncoder::create(const FeatureSchema& schema, const AssemblyGraph& graph,
                                  const GraphEncoderConfig& config, ag::ParameterSet& params, Rng& rng) {
  config.validate();
  if (graph.node_count() != schema.component_count()) {
    throw SchemaError("graph has " + std::to_string(graph.node_count()) + " nodes but the schema has " +
                      std::to_string(schema.component_count()) + " components");
  }
  GraphEncoder enc;
  enc.schema_ = &schema;
  enc.config_ = config;
  const int e = config.category_embed_dim;
  const auto n = schema.component_count();

  int category_rows = 0;
  enc.category_offset_.assign(schema.size(), -1);
  for (std::size_t f = 0; f < schema.size(); ++f) {
    if (schema.feature(f).is_categorical()) {
      enc.category_offset_[f] = category_rows;
      category_rows += static_cast<int>(schema.feature(f).category_count());
    }
  }

  enc.slots_.resize(n);
  enc.node_width_.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    const auto& feats = schema.component_features(c);
    int offset = 0;
    std::vector<Slot> slots;
    for (auto f : feats) {
      if (schema.feature(f).is_numeric()) slots.push_back({f, offset++, 0});
    }
    for (auto f : feats) {
      if (schema.feature(f).is_categorical()) {
        slots.push_back({f, offset, 0});
        offset += e;
      }
    }
    for (auto& s : slots) s.flag_offset = offset++;
    // Flags follow schema order within the component.
    std::sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) { return a.feature < b.feature; });
    int flag = offset - static_cast<int>(slots.size());
    for (auto& s : slots) s.flag_offset = flag++;
    enc.slots_[c] = std::move(slots);
    enc.node_width_[c] = offset;
    enc.max_width_ = std::max(enc.max_width_, offset);
  }
  enc.norm_adj_ = normalized_adjacency(graph);
  enc.neighborhoods_ = self_loop_neighborhoods(graph);

  if (config.variant == GraphVariant::kNone) return enc;

  const int hdim = config.hidden_dim;
  if (category_rows > 0) {
    enc.category_embedding_ =
        &params.add("encoder.category_embedding", nn::normal_init(category_rows, e, 1.0, rng));
  }
  enc.input_ = nn::GroupLinear::create(params, "encoder.input", static_cast<int>(n), enc.max_width_, hdim,
                                       true, rng);
  for (int l = 0; l < config.layers; ++l) {
    const std::string base = "encoder.layer" + std::to_string(l);
    Layer layer;
    if (config.variant == GraphVariant::kGcn) {
      layer.weight = &params.add(base + ".weight", nn::xavier_uniform(hdim, hdim, hdim, hdim, rng));
    } else {
      const int dh = hdim / config.heads;
      layer.source = &params.add(base + ".source", nn::xavier_uniform(hdim, hdim, hdim, hdim, rng));
      layer.target = &params.add(base + ".target", nn::xavier_uniform(hdim, hdim, hdim, hdim, rng));
      layer.att = &params.add(base + ".att", nn::xavier_uniform(config.heads, dh, dh, 1, rng));
    }
    enc.layers_.push_back(layer);
  }
  return enc;
}

NodeFeatures GraphEncoder::build_node_features(const EncodedRow& row) const {
  if (row.size() != schema_->size()) throw SchemaError("row does not match the encoder's schema");
  NodeFeatures nf;
  nf.values.resize(slots_.size());
  nf.observed.resize(slots_.size());
  const int e = config_.category_embed_dim;
  for (std::size_t c = 0; c < slots_.size(); ++c) {
    auto& v = nf.values[c];
    v.assign(static_cast<std::size_t>(node_width_[c]), 0.0);
    for (const auto& s : slots_[c]) {
      const bool obs = row.observed[s.feature] != 0;
      nf.observed[c].push_back(obs ? 1 : 0);
      if (!obs) continue;
      v[static_cast<std::size_t>(s.flag_offset)] = 1.0;
      const auto& spec = schema_->feature(s.feature);
      if (spec.is_numeric()) {
        v[static_cast<std::size_t>(s.value_offset)] = row.value[s.feature];
      } else if (category_embedding_) {
        const int r = category_offset_[s.feature] + static_cast<int>(row.value[s.feature]);
        for (int k = 0; k < e; ++k) {
          v[static_cast<std::size_t>(s.value_offset + k)] = category_embedding_->value(r, k);
        }
      }
    }
  }
  return nf;
}

Var GraphEncoder::node_input(ag::Tape& tape, std::span<const EncodedRow> rows) const {
  const auto n = static_cast<int>(slots_.size());
  Mat base = Mat::Zero(static_cast<Eigen::Index>(rows.size()) * n, max_width_);
  std::vector<ag::ScatterEntry> entries;
  for (std::size_t b = 0; b < rows.size(); ++b) {
    const auto& row = rows[b];
    if (row.size() != schema_->size()) throw SchemaError("row does not match the encoder's schema");
    for (int c = 0; c < n; ++c) {
      const int r = static_cast<int>(b) * n + c;
      for (const auto& s : slots_[static_cast<std::size_t>(c)]) {
        if (!row.observed[s.feature]) continue;
        base(r, s.flag_offset) = 1.0;
        if (schema_->feature(s.feature).is_numeric()) {
          base(r, s.value_offset) = row.value[s.feature];
        } else {
          entries.push_back({r, s.value_offset, category_offset_[s.feature] + static_cast<int>(row.value[s.feature])});
        }
      }
    }
  }
  if (entries.empty() || category_embedding_ == nullptr) return tape.constant(std::move(base));
  return ag::scatter_rows(base, tape.parameter(*category_embedding_), entries);
}

Var GraphEncoder::encode(ag::Tape& tape, std::span<const EncodedRow> rows) const {
  const auto n = static_cast<Eigen::Index>(slots_.size());
  if (config_.variant == GraphVariant::kNone) {
    return tape.constant(Mat::Zero(static_cast<Eigen::Index>(rows.size()) * n, config_.hidden_dim));
  }
  Var h = ag::silu(input_(tape, node_input(tape, rows)));
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const bool activate = l + 1 < layers_.size();
    const auto& layer = layers_[l];
    if (config_.variant == GraphVariant::kGcn) {
      h = gcn_layer(h, norm_adj_, tape.parameter(*layer.weight), activate);
    } else {
      h = gatv2_layer(h, neighborhoods_, tape.parameter(*layer.source), tape.parameter(*layer.target),
                      tape.parameter(*layer.att), config_.heads, config_.leaky_slope, activate);
    }
  }
  return h;
}

GraphEmbedding GraphEncoder::encode(const EncodedRow& row) const {
  ag::Tape tape(false);
  const EncodedRow rows[] = {row};
  return GraphEmbedding{encode(tape, rows).value()};
}

}  // namespace gdimpute
