#pragma once

#include <cmath>
#include <span>
#include <string>

#include "mview/embedding.hpp"
#include "mview/sampler.hpp"

namespace mview {

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

/// log(sigmoid(x)) without overflow for large |x|.
template <typename Scalar>
Scalar log_sigmoid(Scalar x) {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

template <typename Scalar>
void require_finite(Scalar loss, const char* what) {
  if (!std::isfinite(loss))
    throw NumericalError(std::string(what) + ": non-finite loss (training diverged)");
}

template <typename Scalar>
struct IntraGradient {
  Scalar loss = 0;
  SparseRows<Scalar> input;
  SparseRows<Scalar> context;
};

/// Negative-sampling skip-gram loss averaged over the batch:
///   -[log s(v'_ctx . v_ctr) + sum_neg log s(-v'_neg . v_ctr)]
/// Gradients touch only the rows referenced by the batch.
template <typename Scalar>
IntraGradient<Scalar> intra_loss_grad(const EmbeddingTable<Scalar>& table,
                                      std::span<const IntraExample> batch) {
  IntraGradient<Scalar> g{Scalar(0), SparseRows<Scalar>(table.dim()),
                          SparseRows<Scalar>(table.dim())};
  if (batch.empty()) return g;
  const Scalar inv_b = Scalar(1) / static_cast<Scalar>(batch.size());
  Vector<Scalar> d_center(table.dim());

  for (const auto& ex : batch) {
    const auto v = table.input.row(ex.center);
    d_center.setZero();

    const Scalar s_pos = table.context.row(ex.context).dot(v);
    g.loss -= log_sigmoid(s_pos);
    const Scalar c_pos = -(Scalar(1) - sigmoid(s_pos)) * inv_b;
    d_center.noalias() += c_pos * table.context.row(ex.context).transpose();
    g.context.row(ex.context) += c_pos * v.transpose();

    for (Index neg : ex.negatives) {
      const Scalar s_neg = table.context.row(neg).dot(v);
      g.loss -= log_sigmoid(-s_neg);
      const Scalar c_neg = sigmoid(s_neg) * inv_b;
      d_center.noalias() += c_neg * table.context.row(neg).transpose();
      g.context.row(neg) += c_neg * v.transpose();
    }
    g.input.row(ex.center) += d_center;
  }
  g.loss *= inv_b;
  require_finite(g.loss, "intra-view loss");
  return g;
}

enum class InterLossKind {
  raw_score,    // -(mean positive score - mean negative score)
  log_sigmoid,  // -(mean log s(score_pos) + mean log s(-score_neg))
};

template <typename Scalar>
struct InterGradient {
  Scalar loss = 0;
  SparseRows<Scalar> from_input;
  SparseRows<Scalar> to_input;
  Matrix<Scalar> transform;  // d' x d
};

/// Alignment score s(a, b) = sigmoid(W e_a) . sigmoid(W e_b), sigmoid element-wise.
template <typename Scalar>
Scalar alignment_score(const Matrix<Scalar>& w, const Vector<Scalar>& ea,
                       const Vector<Scalar>& eb) {
  const Vector<Scalar> ua = (w * ea).unaryExpr([](Scalar x) { return sigmoid(x); });
  const Vector<Scalar> ub = (w * eb).unaryExpr([](Scalar x) { return sigmoid(x); });
  return ua.dot(ub);
}

/// Relational-space representation sigmoid(W e).
template <typename Scalar, typename Derived>
Vector<Scalar> relational(const Matrix<Scalar>& w, const Eigen::MatrixBase<Derived>& e) {
  return (w * e).unaryExpr([](Scalar x) { return sigmoid(x); });
}

/// Cross-view alignment loss; gradients reach the input vectors of both
/// tables and the transform. Relational vectors are computed once per
/// distinct row of the batch.
template <typename Scalar>
InterGradient<Scalar> inter_loss_grad(const EmbeddingTable<Scalar>& from_table,
                                      const EmbeddingTable<Scalar>& to_table,
                                      const AlignmentTransform<Scalar>& transform,
                                      std::span<const InterExample> batch,
                                      InterLossKind kind = InterLossKind::raw_score) {
  const auto& w = transform.matrix;
  if (w.cols() != from_table.dim() || w.cols() != to_table.dim())
    throw ConfigError("alignment transform shape does not match embedding dims");
  InterGradient<Scalar> g{Scalar(0), SparseRows<Scalar>(from_table.dim()),
                          SparseRows<Scalar>(to_table.dim()),
                          Matrix<Scalar>::Zero(w.rows(), w.cols())};
  if (batch.empty()) return g;

  std::size_t n_neg = 0;
  for (const auto& ex : batch) n_neg += ex.to_negs.size();
  const Scalar inv_pos = Scalar(1) / static_cast<Scalar>(batch.size());
  const Scalar inv_neg = n_neg ? Scalar(1) / static_cast<Scalar>(n_neg) : Scalar(0);

  // Distinct rows, in first-touch order.
  std::unordered_map<Index, Index> from_slot, to_slot;
  std::vector<Index> from_rows, to_rows;
  auto slot_of = [](std::unordered_map<Index, Index>& m, std::vector<Index>& rows, Index r) {
    auto [it, inserted] = m.emplace(r, static_cast<Index>(rows.size()));
    if (inserted) rows.push_back(r);
    return it->second;
  };
  for (const auto& ex : batch) {
    slot_of(from_slot, from_rows, ex.from);
    slot_of(to_slot, to_rows, ex.to_pos);
    for (Index neg : ex.to_negs) slot_of(to_slot, to_rows, neg);
  }

  const Index d = w.cols();
  const Index dp = w.rows();
  Matrix<Scalar> ea(static_cast<Index>(from_rows.size()), d);
  Matrix<Scalar> eb(static_cast<Index>(to_rows.size()), d);
  for (Index k = 0; k < ea.rows(); ++k) ea.row(k) = from_table.input.row(from_rows[k]);
  for (Index k = 0; k < eb.rows(); ++k) eb.row(k) = to_table.input.row(to_rows[k]);
  auto squash = [](Scalar x) { return sigmoid(x); };
  const Matrix<Scalar> ua = (ea * w.transpose()).unaryExpr(squash);  // |F| x d'
  const Matrix<Scalar> ub = (eb * w.transpose()).unaryExpr(squash);  // |T| x d'

  Matrix<Scalar> gua = Matrix<Scalar>::Zero(ua.rows(), dp);
  Matrix<Scalar> gub = Matrix<Scalar>::Zero(ub.rows(), dp);
  auto pair = [&](Index a, Index b, bool positive) {
    const Scalar s = ua.row(a).dot(ub.row(b));
    Scalar coef;
    if (kind == InterLossKind::raw_score) {
      coef = positive ? -inv_pos : inv_neg;
      g.loss += coef * s;
    } else if (positive) {
      g.loss -= inv_pos * log_sigmoid(s);
      coef = -inv_pos * (Scalar(1) - sigmoid(s));
    } else {
      g.loss -= inv_neg * log_sigmoid(-s);
      coef = inv_neg * sigmoid(s);
    }
    gua.row(a) += coef * ub.row(b);
    gub.row(b) += coef * ua.row(a);
  };
  for (const auto& ex : batch) {
    const Index a = from_slot.at(ex.from);
    pair(a, to_slot.at(ex.to_pos), true);
    for (Index neg : ex.to_negs) pair(a, to_slot.at(neg), false);
  }
  require_finite(g.loss, "inter-view loss");

  // Back through the element-wise sigmoid, then through W.
  const Matrix<Scalar> pa = gua.cwiseProduct(ua.cwiseProduct((Scalar(1) - ua.array()).matrix()));
  const Matrix<Scalar> pb = gub.cwiseProduct(ub.cwiseProduct((Scalar(1) - ub.array()).matrix()));
  const Matrix<Scalar> ga = pa * w;  // |F| x d
  const Matrix<Scalar> gb = pb * w;
  for (Index k = 0; k < ga.rows(); ++k) g.from_input.row(from_rows[k]) += ga.row(k).transpose();
  for (Index k = 0; k < gb.rows(); ++k) g.to_input.row(to_rows[k]) += gb.row(k).transpose();
  g.transform.noalias() = pa.transpose() * ea;
  g.transform.noalias() += pb.transpose() * eb;
  return g;
}

}  // namespace mview
