// Serial reference vs OpenMP for each kernel. Run with OMP_NUM_THREADS set to
// compare thread counts.

#include <benchmark/benchmark.h>

#include "dslgen/kernels.hpp"
#include "dslgen/util.hpp"

namespace k = dslgen::kernels;

namespace {

constexpr std::size_t kDim = 256;

std::vector<double> random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  dslgen::SeededRng rng(seed);
  std::vector<double> m(rows * cols);
  for (auto& x : m) x = rng.unit() * 2.0 - 1.0;
  return m;
}

template <bool Parallel>
void BM_DotRows(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto data = random_matrix(rows, kDim, 1);
  const auto query = random_matrix(1, kDim, 2);
  std::vector<double> out(rows);
  const k::MatrixView m{data, rows, kDim};
  for (auto _ : state) {
    if constexpr (Parallel) k::dot_rows_omp(m, query, out); else k::dot_rows_serial(m, query, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(rows));
}

template <bool Parallel>
void BM_TopK(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto scores = random_matrix(1, n, 3);
  for (auto _ : state) {
    auto hits = Parallel ? k::top_k_omp(scores, 20) : k::top_k_serial(scores, 20);
    benchmark::DoNotOptimize(hits.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}

template <bool Parallel>
void BM_PairDots(benchmark::State& state) {
  const std::size_t rows = 2000;
  const auto n_pairs = static_cast<std::size_t>(state.range(0));
  const auto data = random_matrix(rows, kDim, 4);
  dslgen::SeededRng rng(5);
  std::vector<k::RowPair> pairs(n_pairs);
  for (auto& p : pairs) p = {rng.below(rows), rng.below(rows)};
  std::vector<double> out(n_pairs);
  const k::MatrixView m{data, rows, kDim};
  for (auto _ : state) {
    if constexpr (Parallel) k::pair_dots_omp(m, pairs, out); else k::pair_dots_serial(m, pairs, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n_pairs));
}

template <bool Parallel>
void BM_LcssBatch(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  dslgen::SeededRng rng(6);
  auto make = [&] {
    k::Sequence s(1 + rng.below(8));
    for (auto& x : s) x = static_cast<std::uint32_t>(rng.below(40));
    return s;
  };
  std::vector<k::Sequence> left(n), right(n);
  for (std::size_t i = 0; i < n; ++i) {
    left[i] = make();
    right[i] = make();
  }
  std::vector<std::size_t> out(n);
  for (auto _ : state) {
    if constexpr (Parallel) k::lcss_batch_omp(left, right, out); else k::lcss_batch_serial(left, right, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}

}  // namespace

BENCHMARK(BM_DotRows<false>)->Name("dot_rows/serial")->Arg(1000)->Arg(67000);
BENCHMARK(BM_DotRows<true>)->Name("dot_rows/omp")->Arg(1000)->Arg(67000);
BENCHMARK(BM_TopK<false>)->Name("top_k/serial")->Arg(1000)->Arg(67000);
BENCHMARK(BM_TopK<true>)->Name("top_k/omp")->Arg(1000)->Arg(67000);
BENCHMARK(BM_PairDots<false>)->Name("pair_dots/serial")->Arg(10000)->Arg(100000);
BENCHMARK(BM_PairDots<true>)->Name("pair_dots/omp")->Arg(10000)->Arg(100000);
BENCHMARK(BM_LcssBatch<false>)->Name("lcss_batch/serial")->Arg(1000)->Arg(50000);
BENCHMARK(BM_LcssBatch<true>)->Name("lcss_batch/omp")->Arg(1000)->Arg(50000);

BENCHMARK_MAIN();
