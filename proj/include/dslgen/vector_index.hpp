#pragma once

#include <span>
#include <string>
#include <vector>

#include "dslgen/embedding.hpp"
#include "dslgen/kernels.hpp"

namespace dslgen {

// Exact flat cosine index. Rows are unit vectors kept in ascending key
// order, so the row index doubles as the tie-break rank.
class VectorIndex {
 public:
  VectorIndex() = default;

  // `keys` must be strictly ascending and match `vectors` one to one.
  // Throws DegenerateVector for zero or non-finite vectors.
  static VectorIndex build(std::vector<std::string> keys, std::vector<Vector> vectors);

  // Same, for rows that are already unit length (a saved index). They are
  // stored as given so reloading is bit-exact; throws DegenerateVector if a
  // norm is off by more than 1e-9.
  static VectorIndex from_unit_rows(std::vector<std::string> keys, std::vector<Vector> rows);

  // Top-k rows by cosine with `query`, ties by ascending key. A zero query
  // scores every row 0.
  std::vector<kernels::Hit> search(std::span<const double> query, std::size_t k) const;

  std::size_t size() const { return keys_.size(); }
  std::size_t dimension() const { return dimension_; }
  const std::string& key(std::size_t row) const { return keys_[row]; }
  std::span<const double> row(std::size_t i) const { return view().row(i); }
  kernels::MatrixView view() const { return {matrix_, keys_.size(), dimension_}; }

 private:
  std::vector<std::string> keys_;
  std::vector<double> matrix_;
  std::size_t dimension_ = 0;
};

// Returns `v / |v|`; throws DegenerateVector for zero or non-finite norms.
Vector normalized(std::span<const double> v);

}  // namespace dslgen
