// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#include <benchmark/benchmark.h>

#include "gdimpute/autograd.hpp"
#include "gdimpute/dataset.hpp"
#include "gdimpute/diffusion.hpp"
#include "gdimpute/graph_encoder.hpp"

namespace gdimpute {
namespace {

ag::Mat gaussian(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  ag::Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

ImputerConfig bench_config(GraphVariant variant) {
  ImputerConfig c;
  c.encoder.variant = variant;
  c.encoder.hidden_dim = 32;
  c.encoder.heads = 4;
  c.fusion.d_token = 32;
  c.fusion.fusion_heads = 4;
  c.denoiser.blocks = 2;
  c.denoiser.channels = 32;
  c.denoiser.time_dim = 32;
  return c;
}

// Forward and backward of batched multi-head attention; range(0) is the
// number of query positions per block (D), 64 blocks of width 32.
void BM_Attention(benchmark::State& state) {
  const int lq = static_cast<int>(state.range(0));
  const int blocks = 64, width = 32, heads = 4, lk = 6;
  Rng rng(1);
  ag::ParameterSet ps;
  auto& q = ps.add("q", gaussian(blocks * lq, width, rng));
  auto& k = ps.add("k", gaussian(blocks * lk, width, rng));
  auto& v = ps.add("v", gaussian(blocks * lk, width, rng));
  for (auto _ : state) {
    ag::Tape tape(true);
    auto out = ag::attention(tape.parameter(q), tape.parameter(k), tape.parameter(v), heads, lq, lk);
    auto loss = ag::sum(out);
    tape.backward(loss);
    benchmark::DoNotOptimize(q.grad.data());
  }
  state.SetItemsProcessed(state.iterations() * blocks);
}
BENCHMARK(BM_Attention)->Arg(20)->Arg(221);

void BM_EncoderForward(benchmark::State& state) {
  const auto variant = static_cast<GraphVariant>(state.range(0));
  SyntheticConfig sc;
  sc.rows = 64;
  const auto bundle = generate_synthetic(sc, 3);
  ag::ParameterSet params;
  Rng rng(2);
  const auto enc = GraphEncoder::create(*bundle.schema, bundle.graph, bench_config(variant).encoder, params, rng);
  std::vector<EncodedRow> rows;
  for (const auto& r : bundle.dataset.rows) rows.push_back(encode(*bundle.schema, r));
  for (auto _ : state) {
    ag::Tape tape(false);
    benchmark::DoNotOptimize(enc.encode(tape, rows).value().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows.size()));
}
BENCHMARK(BM_EncoderForward)
    ->Arg(static_cast<int>(GraphVariant::kGcn))
    ->Arg(static_cast<int>(GraphVariant::kGatv2));

void BM_TrainEpoch(benchmark::State& state) {
  SyntheticConfig sc;
  sc.rows = 256;
  const auto bundle = generate_synthetic(sc, 4);
  auto model = ImputerModel::create(bundle.schema, bundle.graph, bench_config(GraphVariant::kGatv2), 5);
  TrainingConfig tc;
  tc.epochs = 1;
  std::uint64_t seed = 0;
  for (auto _ : state) train(model, bundle.dataset, tc, ++seed);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(sc.rows));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

// K completions of one row with 10% of its features hidden.
void BM_SampleRow(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  SyntheticConfig sc;
  sc.rows = 128;
  const auto bundle = generate_synthetic(sc, 6);
  auto model = ImputerModel::create(bundle.schema, bundle.graph, bench_config(GraphVariant::kGatv2), 7);
  TrainingConfig tc;
  tc.epochs = 1;
  train(model, bundle.dataset, tc, 8);
  const auto d = bundle.schema->size();
  Rng rng(9);
  const auto partial = apply_mask(bundle.dataset.rows[0], random_mask(d, masked_count(d, 0.1), rng));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample(model, partial, k, ++seed).draws.data());
  state.SetItemsProcessed(state.iterations() * k);
}
BENCHMARK(BM_SampleRow)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace gdimpute

BENCHMARK_MAIN();
