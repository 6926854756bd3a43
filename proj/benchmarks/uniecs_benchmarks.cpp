// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "uniecs/data/synthetic.hpp"
#include "uniecs/model/encoder.hpp"
#include "uniecs/numerics/graph.hpp"
#include "uniecs/retrieval/index.hpp"
#include "uniecs/trainer/trainer.hpp"

namespace uniecs {
namespace {

Tensor<float> random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<float> g;
  Tensor<float> t(Shape{rows, cols});
  for (float& x : t.values()) x = g(rng);
  return t;
}

Tensor<float> unit_rows(Tensor<float> t) {
  for (std::size_t i = 0; i < t.rows(); ++i) {
    auto row = t.row(i);
    double norm = 0;
    for (float x : row) norm += double(x) * x;
    for (float& x : row) x = static_cast<float>(x / std::sqrt(norm));
  }
  return t;
}

ModelConfig desk_model() {
  ModelConfig m;
  m.dim_v = m.dim_t = 32;
  m.width = 64;
  m.heads = 4;
  m.embed_dim = 32;
  return m;
}

Dataset desk_data(std::size_t pairs) {
  SyntheticSpec s;
  s.pairs = pairs;
  s.latent_dim = 16;
  s.seed = 1;
  return generate(s);
}

void BM_MatMul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  GraphBuilder b;
  const NodeId x = b.input("a", Shape{n, n});
  const NodeId y = b.input("b", Shape{n, n});
  b.matmul(x, y);
  const Graph g = std::move(b).build();
  const TensorMap<float> inputs{{"a", random_matrix(n, n, rng)}, {"b", random_matrix(n, n, rng)}};
  const ParameterStore<float> none;
  for (auto _ : state) benchmark::DoNotOptimize(forward(g, none, inputs));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_MatMul)->Arg(64)->Arg(128)->Arg(256);

void BM_EncodeBatch(benchmark::State& state) {
  const ModelConfig m = desk_model();
  const auto params = init_parameters(m, 0);
  const Dataset d = desk_data(static_cast<std::size_t>(state.range(0)));
  std::vector<ModalityBundle> owned;
  for (const auto& r : d.records) owned.push_back(r.trigger.bundle());
  std::vector<const ModalityBundle*> bundles;
  for (const auto& b : owned) bundles.push_back(&b);
  for (auto _ : state) benchmark::DoNotOptimize(encode_batch(bundles, params, m));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncodeBatch)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

// One optimizer step with weight re-estimation, the costliest step kind.
void BM_TrainStep(benchmark::State& state) {
  const ModelConfig m = desk_model();
  const Dataset d = desk_data(256);
  TrainConfig tc;
  tc.batch_size = static_cast<std::size_t>(state.range(0));
  tc.steps = 1;
  tc.weight_stride = 1;
  const Checkpoint start = initial_checkpoint(m, tc);
  for (auto _ : state) benchmark::DoNotOptimize(train(d, start, tc, LossConfig{}));
}
BENCHMARK(BM_TrainStep)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_TopK(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  EmbeddingCorpus corpus;
  corpus.matrix = unit_rows(random_matrix(n, 32, rng));
  for (std::size_t i = 0; i < n; ++i) corpus.ids.push_back("c" + std::to_string(i));
  const Index index(corpus);
  const Tensor<float> query = unit_rows(random_matrix(1, 32, rng));
  for (auto _ : state) benchmark::DoNotOptimize(index.topk(query.row(0), 10));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_TopK)->Arg(1000)->Arg(100000);

}  // namespace
}  // namespace uniecs

BENCHMARK_MAIN();
