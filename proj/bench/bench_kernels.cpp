// Serial reference vs OpenMP kernels on model-sized and eval-sized shapes.

#include <benchmark/benchmark.h>

#include "dd/kernels.hpp"
#include "dd/rng.hpp"

namespace {

dd::Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  dd::Matrix m(r, c);
  dd::Rng rng(seed);
  for (auto& v : m.data) v = rng.normal();
  return m;
}

template <bool Parallel>
void BM_Affine(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random_matrix(n, 64, 1);
  const auto w = random_matrix(128, 64, 2);
  std::vector<double> b(128, 0.1);
  dd::Matrix y;
  for (auto _ : state) {
    if constexpr (Parallel)
      dd::kernels::omp::affine(x, w, b, y);
    else
      dd::kernels::serial::affine(x, w, b, y);
    benchmark::DoNotOptimize(y.data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}

template <bool Parallel>
void BM_WeightGrad(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random_matrix(n, 64, 3);
  const auto dy = random_matrix(n, 128, 4);
  dd::Matrix dw(128, 64);
  std::vector<double> db(128);
  for (auto _ : state) {
    if constexpr (Parallel)
      dd::kernels::omp::accumulate_weight_grad(dy, x, dw, db);
    else
      dd::kernels::serial::accumulate_weight_grad(dy, x, dw, db);
    benchmark::DoNotOptimize(dw.data.data());
  }
}

template <bool Parallel>
void BM_Pairwise(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto pts = random_matrix(n, 32, 5);
  for (auto _ : state) {
    auto d = Parallel ? dd::kernels::omp::pairwise_distances(pts) : dd::kernels::serial::pairwise_distances(pts);
    benchmark::DoNotOptimize(d.data());
  }
  state.counters["threads"] = dd::kernels::omp::max_threads();
}

}  // namespace

BENCHMARK(BM_Affine<false>)->Arg(16)->Arg(256)->Arg(4096);
BENCHMARK(BM_Affine<true>)->Arg(16)->Arg(256)->Arg(4096);
BENCHMARK(BM_WeightGrad<false>)->Arg(16)->Arg(1024);
BENCHMARK(BM_WeightGrad<true>)->Arg(16)->Arg(1024);
BENCHMARK(BM_Pairwise<false>)->Arg(300)->Arg(1200);
BENCHMARK(BM_Pairwise<true>)->Arg(300)->Arg(1200);

BENCHMARK_MAIN();
