#include "dslgen/kernels.hpp"

#include <omp.h>

#include <cassert>
#include <cmath>
#include <cstdint>

namespace dslgen::kernels {

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

void dot_rows_serial(MatrixView m, std::span<const double> query, std::span<double> out) {
  assert(query.size() == m.cols && out.size() == m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) out[i] = dot(m.row(i), query);
}

void dot_rows_omp(MatrixView m, std::span<const double> query, std::span<double> out) {
  assert(query.size() == m.cols && out.size() == m.rows);
  const auto n = static_cast<std::int64_t>(m.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = dot(m.row(static_cast<std::size_t>(i)), query);
  }
}

namespace {

std::vector<Hit> select(std::vector<Hit> hits, std::size_t k) {
  k = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(),
                    ranks_before);
  hits.resize(k);
  return hits;
}

}  // namespace

std::vector<Hit> top_k_serial(std::span<const double> scores, std::size_t k) {
  std::vector<Hit> hits(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) hits[i] = {i, scores[i]};
  return select(std::move(hits), k);
}

std::vector<Hit> top_k_omp(std::span<const double> scores, std::size_t k) {
  if (k == 0 || scores.empty()) return {};
  const int threads = omp_get_max_threads();
  std::vector<std::vector<Hit>> partial(static_cast<std::size_t>(threads));
  const auto n = static_cast<std::int64_t>(scores.size());
#pragma omp parallel num_threads(threads)
  {
    const auto t = static_cast<std::size_t>(omp_get_thread_num());
    std::vector<Hit> local;
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < n; ++i) {
      local.push_back({static_cast<std::size_t>(i), scores[static_cast<std::size_t>(i)]});
    }
    partial[t] = select(std::move(local), k);
  }
  std::vector<Hit> merged;
  for (auto& p : partial) merged.insert(merged.end(), p.begin(), p.end());
  return select(std::move(merged), k);
}

void pair_dots_serial(MatrixView m, std::span<const RowPair> pairs, std::span<double> out) {
  assert(out.size() == pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    out[p] = dot(m.row(pairs[p].first), m.row(pairs[p].second));
  }
}

void pair_dots_omp(MatrixView m, std::span<const RowPair> pairs, std::span<double> out) {
  assert(out.size() == pairs.size());
  const auto n = static_cast<std::int64_t>(pairs.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < n; ++p) {
    const auto& [a, b] = pairs[static_cast<std::size_t>(p)];
    out[static_cast<std::size_t>(p)] = dot(m.row(a), m.row(b));
  }
}

void lcss_batch_serial(std::span<const Sequence> left, std::span<const Sequence> right,
                       std::span<std::size_t> out) {
  assert(left.size() == right.size() && out.size() == left.size());
  for (std::size_t p = 0; p < left.size(); ++p) {
    out[p] = lcss_length<std::uint32_t>(left[p], right[p]);
  }
}

void lcss_batch_omp(std::span<const Sequence> left, std::span<const Sequence> right,
                    std::span<std::size_t> out) {
  assert(left.size() == right.size() && out.size() == left.size());
  const auto n = static_cast<std::int64_t>(left.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t p = 0; p < n; ++p) {
    const auto i = static_cast<std::size_t>(p);
    out[i] = lcss_length<std::uint32_t>(left[i], right[i]);
  }
}

void dot_rows(MatrixView m, std::span<const double> query, std::span<double> out) {
  if (m.rows * m.cols >= kParallelThreshold * 64) {
    dot_rows_omp(m, query, out);
  } else {
    dot_rows_serial(m, query, out);
  }
}

std::vector<Hit> top_k(std::span<const double> scores, std::size_t k) {
  return scores.size() >= kParallelThreshold * 8 ? top_k_omp(scores, k) : top_k_serial(scores, k);
}

void pair_dots(MatrixView m, std::span<const RowPair> pairs, std::span<double> out) {
  if (pairs.size() * m.cols >= kParallelThreshold * 64) {
    pair_dots_omp(m, pairs, out);
  } else {
    pair_dots_serial(m, pairs, out);
  }
}

void lcss_batch(std::span<const Sequence> left, std::span<const Sequence> right,
                std::span<std::size_t> out) {
  if (left.size() >= kParallelThreshold) {
    lcss_batch_omp(left, right, out);
  } else {
    lcss_batch_serial(left, right, out);
  }
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace dslgen::kernels
