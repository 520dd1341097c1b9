// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <algorithm>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "gdimpute/graph_encoder.hpp"
#include "gdimpute/tokenizer.hpp"
#include "test_support.hpp"

namespace gdimpute::testing {

/// Random schema over `nodes` components with 1-3 features each, roughly a
/// third of them categorical. Every component owns at least one feature.
inline FeatureSchema random_schema(int nodes, Rng& rng) {
  std::vector<std::string> comps;
  for (int c = 0; c < nodes; ++c) comps.push_back("n" + std::to_string(c));
  std::vector<FeatureSpec> feats;
  std::uniform_int_distribution<int> per(1, 3);
  std::uniform_int_distribution<int> ncat(2, 4);
  std::bernoulli_distribution categorical(0.33);
  std::uniform_real_distribution<double> lo(-5.0, 5.0);
  for (int c = 0; c < nodes; ++c) {
    const int count = per(rng);
    for (int k = 0; k < count; ++k) {
      FeatureSpec f;
      f.name = "f" + std::to_string(feats.size());
      f.component = comps[static_cast<std::size_t>(c)];
      if (categorical(rng)) {
        f.kind = FeatureKind::kCategorical;
        const int m = ncat(rng);
        for (int j = 0; j < m; ++j) f.categories.push_back("v" + std::to_string(j));
      } else {
        f.lo = lo(rng);
        f.hi = f.lo + 1.0 + std::abs(lo(rng));
      }
      feats.push_back(std::move(f));
    }
  }
  // Interleave components so schema order differs from component order.
  std::shuffle(feats.begin(), feats.end(), rng);
  for (std::size_t i = 0; i < feats.size(); ++i) feats[i].name = "f" + std::to_string(i);
  return FeatureSchema::create(std::move(comps), std::move(feats));
}

/// Erdos-Renyi edges with probability p over component names.
inline std::vector<std::pair<std::string, std::string>> random_edges(const FeatureSchema& s, double p, Rng& rng) {
  std::bernoulli_distribution keep(p);
  std::vector<std::pair<std::string, std::string>> edges;
  for (std::size_t a = 0; a < s.component_count(); ++a) {
    for (std::size_t b = a + 1; b < s.component_count(); ++b) {
      if (keep(rng)) edges.emplace_back(s.components()[a], s.components()[b]);
    }
  }
  return edges;
}

/// Encoded row with roughly a quarter of the features hidden.
inline EncodedRow random_encoded_row(const FeatureSchema& s, Rng& rng) {
  std::bernoulli_distribution hide(0.25);
  std::vector<Value> v = random_row(s, rng).values();
  for (auto& x : v) {
    if (hide(rng)) x = Missing{};
  }
  return encode(s, PartialDesign(std::move(v)));
}

inline GraphEncoderConfig small_encoder_config(GraphVariant variant) {
  GraphEncoderConfig c;
  c.variant = variant;
  c.hidden_dim = 8;
  c.layers = 2;
  c.heads = 2;
  c.category_embed_dim = 3;
  return c;
}

/// Relabels the components of `s` so that node k of the result is node
/// perm[k] of `s`, builds encoders for both with matched parameters, and
/// returns the largest |enc_b(x)[k] - enc_a(x)[perm[k]]| over a few rows.
inline double encoder_equivariance_deviation(GraphVariant variant, int nodes, Rng& rng) {
  const FeatureSchema a = random_schema(nodes, rng);
  const auto edges = random_edges(a, 0.4, rng);
  std::vector<std::size_t> perm(static_cast<std::size_t>(nodes));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::string> comps_b;
  for (auto k : perm) comps_b.push_back(a.components()[k]);
  std::vector<FeatureSpec> feats(a.features().begin(), a.features().end());
  const FeatureSchema b = FeatureSchema::create(comps_b, feats);
  const auto graph_a = AssemblyGraph::create(a, edges);
  const auto graph_b = AssemblyGraph::create(b, edges);

  const auto config = small_encoder_config(variant);
  ag::ParameterSet pa, pb;
  Rng init_a(rng()), init_b(rng());
  const auto enc_a = GraphEncoder::create(a, graph_a, config, pa, init_a);
  const auto enc_b = GraphEncoder::create(b, graph_b, config, pb, init_b);
  // Biases start at zero; randomise so the permuted copy is exercised.
  pa.at("encoder.input.bias").value = random_mat(nodes, config.hidden_dim, rng);
  for (const auto& p : pa.items()) {
    auto& q = pb.at(p->name);
    if (p->name == "encoder.input.weight") {
      const auto width = p->value.rows() / nodes;
      for (int k = 0; k < nodes; ++k) {
        q.value.middleRows(k * width, width) = p->value.middleRows(static_cast<Eigen::Index>(perm[k]) * width, width);
      }
    } else if (p->name == "encoder.input.bias") {
      for (int k = 0; k < nodes; ++k) q.value.row(k) = p->value.row(static_cast<Eigen::Index>(perm[k]));
    } else {
      q.value = p->value;
    }
  }
  double worst = 0.0;
  for (int r = 0; r < 3; ++r) {
    const auto row = random_encoded_row(a, rng);
    const ag::Mat ya = enc_a.encode(row).nodes;
    const ag::Mat yb = enc_b.encode(row).nodes;
    for (int k = 0; k < nodes; ++k) {
      worst = std::max(worst, (yb.row(k) - ya.row(static_cast<Eigen::Index>(perm[k]))).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

/// Zero-initialised biases put fully hidden nodes exactly on the LeakyReLU
/// kink, where central differences are meaningless; perturb them.
inline void randomize_biases(ag::ParameterSet& params, Rng& rng) {
  for (const auto& p : params.items()) {
    const auto& n = p->name;
    if (n.size() > 5 && n.compare(n.size() - 5, 5, ".bias") == 0) {
      p->value = random_mat(p->value.rows(), p->value.cols(), rng, 0.5);
    }
  }
}

/// Gradient check of every encoder parameter on a random configuration.
inline double encoder_gradient_error(GraphVariant variant, Rng& rng) {
  std::uniform_int_distribution<int> nn(2, 5);
  const FeatureSchema s = random_schema(nn(rng), rng);
  const auto graph = AssemblyGraph::create(s, random_edges(s, 0.5, rng));
  ag::ParameterSet params;
  const auto enc = GraphEncoder::create(s, graph, small_encoder_config(variant), params, rng);
  randomize_biases(params, rng);
  std::vector<EncodedRow> rows{random_encoded_row(s, rng), random_encoded_row(s, rng)};
  const ag::Mat probe = random_mat(static_cast<Eigen::Index>(2 * s.component_count()), 8, rng);
  return gradient_check(params, [&](ag::Tape& t) { return ag::weighted_sum(enc.encode(t, rows), probe); });
}

/// Gradient check of tokenizer and fusion parameters (graph embedding from a
/// GATv2 encoder, whose parameters are checked too) on a random
/// configuration.
inline double fusion_gradient_error(Rng& rng) {
  std::uniform_int_distribution<int> nn(2, 5);
  const FeatureSchema s = random_schema(nn(rng), rng);
  const auto graph = AssemblyGraph::create(s, random_edges(s, 0.5, rng));
  ag::ParameterSet params;
  const auto enc = GraphEncoder::create(s, graph, small_encoder_config(GraphVariant::kGatv2), params, rng);
  FusionConfig fc;
  fc.d_token = 8;
  fc.fusion_heads = 2;
  const auto tok = FeatureTokenizer::create(s, fc.d_token, params, rng);
  const auto fusion = CrossModalFusion::create(fc, 8, params, rng);
  randomize_biases(params, rng);
  std::vector<EncodedRow> rows{random_encoded_row(s, rng), random_encoded_row(s, rng)};
  const auto d = static_cast<int>(s.size());
  const auto n = static_cast<int>(s.component_count());
  const ag::Mat probe = random_mat(2 * d, fc.d_token, rng);
  return gradient_check(params, [&](ag::Tape& t) {
    return ag::weighted_sum(fusion.fuse(t, tok.tokenize(t, rows), enc.encode(t, rows), d, n), probe);
  });
}

}  // namespace gdimpute::testing
