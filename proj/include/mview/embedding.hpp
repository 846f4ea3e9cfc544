#pragma once

#include <cmath>
#include <random>
#include <unordered_map>
#include <vector>

#include "mview/common.hpp"

namespace mview {

/// Input ("v") and context ("v'") vectors of one view, one row per node.
template <typename Scalar>
struct EmbeddingTable {
  View view = View::item;
  Matrix<Scalar> input;
  Matrix<Scalar> context;

  Index rows() const { return input.rows(); }
  Index dim() const { return input.cols(); }
  bool all_finite() const { return input.allFinite() && context.allFinite(); }
};

/// Input rows uniform in [-0.5/d, 0.5/d], context rows zero.
template <typename Scalar>
EmbeddingTable<Scalar> make_table(View view, Index vocab_size, Index dim, std::mt19937_64& rng) {
  EmbeddingTable<Scalar> t;
  t.view = view;
  t.input.resize(vocab_size, dim);
  t.context = Matrix<Scalar>::Zero(vocab_size, dim);
  const double half = 0.5 / static_cast<double>(dim);
  std::uniform_real_distribution<double> uni(-half, half);
  for (Index r = 0; r < vocab_size; ++r)
    for (Index c = 0; c < dim; ++c) t.input(r, c) = static_cast<Scalar>(uni(rng));
  return t;
}

/// W maps a view embedding (dim d) into the relational space (dim d').
template <typename Scalar>
struct AlignmentTransform {
  View from_view = View::item;
  View to_view = View::category;
  Matrix<Scalar> matrix;  // d' x d

  Index out_dim() const { return matrix.rows(); }
  Index in_dim() const { return matrix.cols(); }
};

/// Fan-in scaled uniform init: U(-1/sqrt(d), 1/sqrt(d)).
template <typename Scalar>
AlignmentTransform<Scalar> make_transform(View from, View to, Index out_dim, Index in_dim,
                                          std::mt19937_64& rng) {
  AlignmentTransform<Scalar> t;
  t.from_view = from;
  t.to_view = to;
  t.matrix.resize(out_dim, in_dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  std::uniform_real_distribution<double> uni(-bound, bound);
  for (Index r = 0; r < out_dim; ++r)
    for (Index c = 0; c < in_dim; ++c) t.matrix(r, c) = static_cast<Scalar>(uni(rng));
  return t;
}

/// Gradient rows of a table, keyed by row index. Iteration follows first
/// touch order, so accumulation is deterministic for a deterministic batch.
template <typename Scalar>
class SparseRows {
 public:
  using RowMap = Eigen::Map<Vector<Scalar>>;
  using ConstRowMap = Eigen::Map<const Vector<Scalar>>;

  SparseRows() = default;
  explicit SparseRows(Index dim) : dim_(dim) {}

  Index dim() const { return dim_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }
  const std::vector<Index>& rows() const { return rows_; }

  /// Row `r`, zero-initialised on first touch. The map is invalidated by the
  /// next call that touches a new row.
  RowMap row(Index r) {
    auto [it, inserted] = slot_.emplace(r, rows_.size());
    if (inserted) {
      rows_.push_back(r);
      data_.resize(data_.size() + static_cast<std::size_t>(dim_), Scalar(0));
    }
    return RowMap(data_.data() + it->second * static_cast<std::size_t>(dim_), dim_);
  }

  ConstRowMap value(std::size_t k) const {
    return ConstRowMap(data_.data() + k * static_cast<std::size_t>(dim_), dim_);
  }

  bool contains(Index r) const { return slot_.count(r) != 0; }

  /// Value of row `r`, zero if untouched.
  Vector<Scalar> dense_row(Index r) const {
    auto it = slot_.find(r);
    if (it == slot_.end()) return Vector<Scalar>::Zero(dim_);
    return value(it->second);
  }

  void add_scaled(const SparseRows& other, Scalar w) {
    for (std::size_t k = 0; k < other.size(); ++k) row(other.rows_[k]) += w * other.value(k);
  }

  void scale(Scalar w) {
    for (auto& x : data_) x *= w;
  }

  Scalar squared_norm() const {
    Scalar s(0);
    for (auto x : data_) s += x * x;
    return s;
  }

  bool all_finite() const {
    for (auto x : data_)
      if (!std::isfinite(x)) return false;
    return true;
  }

 private:
  Index dim_ = 0;
  std::vector<Index> rows_;
  std::vector<Scalar> data_;
  std::unordered_map<Index, std::size_t> slot_;
};

}  // namespace mview
