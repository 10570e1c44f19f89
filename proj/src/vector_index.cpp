#include "dslgen/vector_index.hpp"

#include <cmath>

#include "dslgen/errors.hpp"

namespace dslgen {

Vector normalized(std::span<const double> v) {
  const double norm = kernels::l2_norm(v);
  if (!(norm > 0.0) || !std::isfinite(norm)) throw DegenerateVector("vector has zero or non-finite norm");
  Vector out(v.begin(), v.end());
  for (double& x : out) x /= norm;
  return out;
}

VectorIndex VectorIndex::build(std::vector<std::string> keys, std::vector<Vector> vectors) {
  if (keys.size() != vectors.size()) throw std::invalid_argument("keys and vectors differ in length");
  VectorIndex index;
  index.dimension_ = vectors.empty() ? 0 : vectors.front().size();
  index.matrix_.reserve(keys.size() * index.dimension_);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (i > 0 && !(keys[i - 1] < keys[i])) throw std::invalid_argument("index keys must be strictly ascending");
    if (vectors[i].size() != index.dimension_) throw EmbedError("inconsistent embedding dimensions");
    Vector unit;
    try {
      unit = normalized(vectors[i]);
    } catch (const DegenerateVector&) {
      throw DegenerateVector("embedding of " + keys[i] + " has zero norm");
    }
    index.matrix_.insert(index.matrix_.end(), unit.begin(), unit.end());
  }
  index.keys_ = std::move(keys);
  return index;
}

VectorIndex VectorIndex::from_unit_rows(std::vector<std::string> keys, std::vector<Vector> rows) {
  if (keys.size() != rows.size()) throw std::invalid_argument("keys and vectors differ in length");
  VectorIndex index;
  index.dimension_ = rows.empty() ? 0 : rows.front().size();
  index.matrix_.reserve(keys.size() * index.dimension_);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (i > 0 && !(keys[i - 1] < keys[i])) throw std::invalid_argument("index keys must be strictly ascending");
    if (rows[i].size() != index.dimension_) throw EmbedError("inconsistent embedding dimensions");
    const double norm = kernels::l2_norm(rows[i]);
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > 1e-9) {
      throw DegenerateVector("stored vector for " + keys[i] + " is not unit length");
    }
    index.matrix_.insert(index.matrix_.end(), rows[i].begin(), rows[i].end());
  }
  index.keys_ = std::move(keys);
  return index;
}

std::vector<kernels::Hit> VectorIndex::search(std::span<const double> query, std::size_t k) const {
  if (query.size() != dimension_) throw EmbedError("query dimension does not match the index");
  std::vector<double> scores(size(), 0.0);
  const double norm = kernels::l2_norm(query);
  if (norm > 0.0 && std::isfinite(norm)) {
    kernels::dot_rows(view(), normalized(query), scores);
  }
  return kernels::top_k(scores, k);
}

}  // namespace dslgen
