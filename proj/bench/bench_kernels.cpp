// Parallel kernels against their serial reference twins.
#include <benchmark/benchmark.h>

#include <random>

#include "o2cap/dataset.hpp"
#include "o2cap/eval.hpp"
#include "o2cap/metricspace.hpp"

namespace {

o2cap::Matrix unit_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  o2cap::Matrix m(n, d);
  for (double& v : m.flat()) v = g(rng);
  o2cap::normalize_rows(m);
  return m;
}

void BM_Cosine(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const o2cap::Matrix x = unit_rows(n, 32, 1);
  for (auto _ : state) benchmark::DoNotOptimize(o2cap::cosine_matrix(x, x));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n));
}

void BM_CosineReference(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const o2cap::Matrix x = unit_rows(n, 32, 1);
  for (auto _ : state) benchmark::DoNotOptimize(o2cap::reference::cosine_matrix(x, x));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n));
}

void BM_Jaccard(benchmark::State& state) {
  const o2cap::Matrix x = unit_rows(static_cast<std::size_t>(state.range(0)), 32, 2);
  for (auto _ : state) benchmark::DoNotOptimize(o2cap::jaccard_distance(x, o2cap::JaccardParams{}));
}

void BM_JaccardReference(benchmark::State& state) {
  const o2cap::Matrix x = unit_rows(static_cast<std::size_t>(state.range(0)), 32, 2);
  for (auto _ : state) benchmark::DoNotOptimize(o2cap::reference::jaccard_distance(x, o2cap::JaccardParams{}));
}

o2cap::QueryGallery holdout() { return o2cap::synthesize_holdout(o2cap::SynthesisConfig{}, 1, 2); }

void BM_Retrieval(benchmark::State& state) {
  const auto qg = holdout();
  for (auto _ : state) benchmark::DoNotOptimize(o2cap::evaluate_retrieval(qg.query, qg.gallery));
}

void BM_RetrievalReference(benchmark::State& state) {
  const auto qg = holdout();
  for (auto _ : state) benchmark::DoNotOptimize(o2cap::reference::evaluate_retrieval(qg.query, qg.gallery));
}

}  // namespace

BENCHMARK(BM_Cosine)->Arg(256)->Arg(1024);
BENCHMARK(BM_CosineReference)->Arg(256)->Arg(1024);
BENCHMARK(BM_Jaccard)->Arg(200)->Arg(800)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_JaccardReference)->Arg(200)->Arg(800)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Retrieval)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_RetrievalReference)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
