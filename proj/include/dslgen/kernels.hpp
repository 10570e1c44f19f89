#pragma once

// Data-parallel inner loops. Every kernel has a serial reference and an
// OpenMP version; the two must agree bit for bit; tests/test_kernels.cpp
// holds them to that. Each output element is computed by exactly one thread
// in the same operation order as the serial loop, so no reduction reorders
// floating-point sums.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace dslgen::kernels {

// Dense row-major matrix of doubles.
struct MatrixView {
  std::span<const double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::span<const double> row(std::size_t i) const { return data.subspan(i * cols, cols); }
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// out[i] = dot(m.row(i), query)
void dot_rows_serial(MatrixView m, std::span<const double> query, std::span<double> out);
void dot_rows_omp(MatrixView m, std::span<const double> query, std::span<double> out);

struct Hit {
  std::size_t row = 0;
  double score = 0.0;

  bool operator==(const Hit&) const = default;
};

// Ranking order: higher score first, then lower row index.
inline bool ranks_before(const Hit& a, const Hit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.row < b.row;
}

// First min(k, scores.size()) hits in ranking order.
std::vector<Hit> top_k_serial(std::span<const double> scores, std::size_t k);
std::vector<Hit> top_k_omp(std::span<const double> scores, std::size_t k);

using RowPair = std::pair<std::size_t, std::size_t>;

// out[p] = dot(m.row(pairs[p].first), m.row(pairs[p].second))
void pair_dots_serial(MatrixView m, std::span<const RowPair> pairs, std::span<double> out);
void pair_dots_omp(MatrixView m, std::span<const RowPair> pairs, std::span<double> out);

// Longest common subsequence length; classic two-row dynamic program.
template <typename T>
std::size_t lcss_length(std::span<const T> a, std::span<const T> b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

using Sequence = std::vector<std::uint32_t>;

// out[p] = lcss_length(left[p], right[p])
void lcss_batch_serial(std::span<const Sequence> left, std::span<const Sequence> right,
                       std::span<std::size_t> out);
void lcss_batch_omp(std::span<const Sequence> left, std::span<const Sequence> right,
                    std::span<std::size_t> out);

// Library entry points: OpenMP above a size where threading pays off.
inline constexpr std::size_t kParallelThreshold = 2048;

void dot_rows(MatrixView m, std::span<const double> query, std::span<double> out);
std::vector<Hit> top_k(std::span<const double> scores, std::size_t k);
void pair_dots(MatrixView m, std::span<const RowPair> pairs, std::span<double> out);
void lcss_batch(std::span<const Sequence> left, std::span<const Sequence> right,
                std::span<std::size_t> out);

int max_threads();

}  // namespace dslgen::kernels
