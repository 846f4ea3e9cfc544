#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iosfwd>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "mview/eval.hpp"
#include "mview/losses.hpp"
#include "mview/optimizer.hpp"
#include "mview/trainer.hpp"

namespace mview {

/// Two Mahalanobis metrics, M = L^T L, over the instance space and the
/// instance-category relational space. PSD by construction.
template <typename Scalar>
struct MetricModel {
  Matrix<Scalar> l_item;        // d x d
  Matrix<Scalar> l_relational;  // d' x d'
  Scalar margin = 1;

  Matrix<Scalar> m_item() const { return l_item.transpose() * l_item; }
  Matrix<Scalar> m_relational() const { return l_relational.transpose() * l_relational; }
};

template <typename Scalar>
MetricModel<Scalar> identity_metric(Index dim, Index relation_dim, Scalar margin = Scalar(1)) {
  if (!(margin > 0)) throw ConfigError("margin must be > 0");
  return {Matrix<Scalar>::Identity(dim, dim), Matrix<Scalar>::Identity(relation_dim, relation_dim),
          margin};
}

template <typename Scalar>
struct PairDistance {
  Scalar item = 0;
  Scalar relational = 0;
  Scalar total = 0;
};

/// d_i = (a-b)^T M_i (a-b), d_ic likewise, d = d_i + d_ic. Each term is
/// evaluated as |L (a-b)|^2, which is exactly symmetric in (a, b).
template <typename Scalar, typename A, typename B, typename C, typename D>
PairDistance<Scalar> pair_distance(const MetricModel<Scalar>& model,
                                   const Eigen::MatrixBase<A>& item_a,
                                   const Eigen::MatrixBase<B>& item_b,
                                   const Eigen::MatrixBase<C>& rel_a,
                                   const Eigen::MatrixBase<D>& rel_b) {
  PairDistance<Scalar> d;
  d.item = (model.l_item * (item_a - item_b)).squaredNorm();
  d.relational = (model.l_relational * (rel_a - rel_b)).squaredNorm();
  d.total = d.item + d.relational;
  return d;
}

/// Per-item e_i (input vectors) and e_ic = sigmoid(W_ic e_i).
template <typename Scalar>
struct MetricEmbeddings {
  Matrix<Scalar> item;
  Matrix<Scalar> relational;

  Index rows() const { return item.rows(); }
};

template <typename Scalar>
MetricEmbeddings<Scalar> metric_embeddings(const Matrix<Scalar>& item_vectors,
                                           const Matrix<Scalar>& transform) {
  MetricEmbeddings<Scalar> e;
  e.item = item_vectors;
  e.relational = (item_vectors * transform.transpose()).unaryExpr([](Scalar x) {
    return sigmoid(x);
  });
  return e;
}

struct PairExample {
  Index a = 0;
  Index b = 0;
  int label = 0;  // 1 positive, 0 negative
};

template <typename Scalar>
PairDistance<Scalar> pair_distance(const MetricModel<Scalar>& model,
                                   const MetricEmbeddings<Scalar>& emb, Index a, Index b) {
  return pair_distance(model, emb.item.row(a).transpose(), emb.item.row(b).transpose(),
                       emb.relational.row(a).transpose(), emb.relational.row(b).transpose());
}

template <typename Scalar>
struct MetricGradient {
  Scalar loss = 0;
  Matrix<Scalar> l_item;
  Matrix<Scalar> l_relational;
};

/// L = 1/(2N) sum y d^2 + (1-y) max(margin - d, 0)^2 with d from pair_distance.
/// Embeddings are frozen; only the metric factors receive gradients.
template <typename Scalar>
MetricGradient<Scalar> contrastive_loss_grad(const MetricModel<Scalar>& model,
                                             std::span<const PairExample> batch,
                                             const MetricEmbeddings<Scalar>& emb) {
  if (batch.empty()) throw ConfigError("contrastive loss over an empty batch");
  MetricGradient<Scalar> g{Scalar(0), Matrix<Scalar>::Zero(model.l_item.rows(), model.l_item.cols()),
                           Matrix<Scalar>::Zero(model.l_relational.rows(),
                                                model.l_relational.cols())};
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(batch.size());
  for (const auto& p : batch) {
    const Vector<Scalar> di = (emb.item.row(p.a) - emb.item.row(p.b)).transpose();
    const Vector<Scalar> dr = (emb.relational.row(p.a) - emb.relational.row(p.b)).transpose();
    const Vector<Scalar> zi = model.l_item * di;
    const Vector<Scalar> zr = model.l_relational * dr;
    const Scalar d = zi.squaredNorm() + zr.squaredNorm();
    Scalar coef;  // dL/dd
    if (p.label) {
      g.loss += Scalar(0.5) * inv_n * d * d;
      coef = inv_n * d;
    } else {
      const Scalar gap = std::max(model.margin - d, Scalar(0));
      g.loss += Scalar(0.5) * inv_n * gap * gap;
      coef = -inv_n * gap;
    }
    if (coef != Scalar(0)) {
      g.l_item.noalias() += (Scalar(2) * coef) * zi * di.transpose();
      g.l_relational.noalias() += (Scalar(2) * coef) * zr * dr.transpose();
    }
  }
  require_finite(g.loss, "contrastive loss");
  return g;
}

struct MetricTrainConfig {
  std::size_t steps = 1000;
  std::size_t batch_size = 256;
  OptimizerConfig optimizer{OptimizerKind::adam, 0.01, 1.0};
  std::uint64_t seed = 1;
};

template <typename Scalar>
struct MetricTrainResult {
  MetricModel<Scalar> model;
  std::vector<Scalar> losses;  // per step, before the update
};

/// Mini-batch training over shuffled passes of `pairs`. `on_step`, if set,
/// sees the model after every update.
template <typename Scalar>
MetricTrainResult<Scalar> train_metric(
    MetricModel<Scalar> model, const MetricEmbeddings<Scalar>& emb,
    std::span<const PairExample> pairs, const MetricTrainConfig& config,
    const std::function<void(std::size_t, const MetricModel<Scalar>&)>& on_step = {}) {
  MetricTrainResult<Scalar> out{std::move(model), {}};
  if (config.steps == 0) return out;
  if (pairs.empty()) throw ConfigError("metric training without pairs");
  if (config.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  Optimizer<Scalar> opt(config.optimizer);
  std::mt19937_64 rng(config.seed);
  std::vector<PairExample> order(pairs.begin(), pairs.end());
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;
  std::vector<PairExample> batch;
  for (std::size_t s = 0; s < config.steps; ++s) {
    batch.clear();
    while (batch.size() < std::min(config.batch_size, order.size())) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }
    auto g = contrastive_loss_grad(out.model, std::span<const PairExample>(batch), emb);
    out.losses.push_back(g.loss);
    const Scalar scale = clip_scale(g.l_item.squaredNorm() + g.l_relational.squaredNorm(),
                                    Scalar(config.optimizer.clip_norm));
    opt.begin_step();
    opt.update_dense(0, out.model.l_item, g.l_item, scale);
    opt.update_dense(1, out.model.l_relational, g.l_relational, scale);
    if (!out.model.l_item.allFinite() || !out.model.l_relational.allFinite())
      throw NumericalError("metric training diverged");
    if (on_step) on_step(s, out.model);
  }
  return out;
}

/// Positives: item pairs within `window` positions of a session whose
/// categories differ. Negatives: uniformly random distinct pairs,
/// `negatives_per_positive` per positive.
std::vector<PairExample> generate_metric_pairs(std::span<const std::vector<Index>> sequences,
                                               std::span<const Index> item_category,
                                               std::size_t window,
                                               std::size_t negatives_per_positive,
                                               std::size_t max_positives, std::mt19937_64& rng);

/// Candidates ordered by -d(trigger, candidate), best first; ties by index.
template <typename Scalar>
std::vector<Scored<Scalar>> metric_rerank(const MetricModel<Scalar>& model,
                                          const MetricEmbeddings<Scalar>& emb, Index trigger,
                                          std::span<const Index> candidates, std::size_t k) {
  std::vector<Scored<Scalar>> out;
  out.reserve(candidates.size());
  for (Index c : candidates)
    if (c != trigger) out.push_back({c, -pair_distance(model, emb, trigger, c).total});
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.score > b.score || (a.score == b.score && a.index < b.index);
  });
  if (out.size() > k) out.resize(k);
  return out;
}

/// Share of recommended items (over all users) whose category is not in the
/// user's recent-history category set.
double novelty_at_k(std::span<const std::vector<Index>> recommendations,
                    std::span<const std::set<Index>> history_categories,
                    std::span<const Index> item_category);

/// Text dump: `name rows cols` header then one row per line, for L_i and L_ic.
void write_metric_model(std::ostream& out, const MetricModel<double>& model);
MetricModel<double> read_metric_model(std::istream& in);

/// `trigger_id<TAB>item:score,...`
void write_similarity_line(std::ostream& out, const NodeId& trigger,
                           std::span<const Scored<double>> items, const Vocab& vocab);

}  // namespace mview
