#pragma once

// Shared helpers for the unit and acceptance suites: finite-difference
// oracles, random instances and planted corpora.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mview/common.hpp"
#include "mview/diversity.hpp"
#include "mview/embedding.hpp"
#include "mview/ingest.hpp"
#include "mview/trainer.hpp"

namespace mview::testing {

/// |a - b| / max(|a|, |b|, floor). The floor keeps entries that are both
/// ~0 from dominating the check.
inline double rel_error(double analytic, double numeric, double floor = 1e-6) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

/// Central difference of f with respect to the scalar `x`, restoring it afterwards.
inline double central_diff(const std::function<double()>& f, double& x, double h = 1e-5) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2 * h);
}

inline Matrix<double> random_matrix(Index rows, Index cols, std::mt19937_64& rng,
                                    double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix<double> m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = n(rng);
  return m;
}

inline EmbeddingTable<double> random_table(View v, Index rows, Index dim, std::mt19937_64& rng,
                                           double scale = 0.7) {
  EmbeddingTable<double> t;
  t.view = v;
  t.input = random_matrix(rows, dim, rng, scale);
  t.context = random_matrix(rows, dim, rng, scale);
  return t;
}

inline Index uniform_index(Index n, std::mt19937_64& rng) {
  return std::uniform_int_distribution<Index>(0, n - 1)(rng);
}

/// Index in [0, n) different from `avoid`.
inline Index other_index(Index n, Index avoid, std::mt19937_64& rng) {
  Index x = uniform_index(n, rng);
  while (x == avoid) x = uniform_index(n, rng);
  return x;
}

/// Blocks of items that co-occur inside sessions; every item of block b has
/// category "c<b>". A session stays in one block with probability 1 - leak,
/// otherwise each step jumps to a random item.
struct PlantedCorpus {
  std::vector<Session> item_sessions;
  std::vector<Session> category_sessions;
  std::unordered_map<NodeId, NodeId> item_category;
  std::vector<std::size_t> home;  // block of each item session
  std::size_t blocks = 0;
  std::size_t items_per_block = 0;

  static std::string item(std::size_t block, std::size_t k) {
    return "b" + std::to_string(block) + "_i" + std::to_string(k);
  }
};

inline PlantedCorpus planted_corpus(std::size_t blocks, std::size_t items_per_block,
                                    std::size_t sessions, std::size_t length, double leak,
                                    std::mt19937_64& rng) {
  PlantedCorpus c;
  c.blocks = blocks;
  c.items_per_block = items_per_block;
  for (std::size_t b = 0; b < blocks; ++b)
    for (std::size_t k = 0; k < items_per_block; ++k)
      c.item_category[PlantedCorpus::item(b, k)] = "c" + std::to_string(b);
  std::uniform_int_distribution<std::size_t> pick_block(0, blocks - 1);
  std::uniform_int_distribution<std::size_t> pick_item(0, items_per_block - 1);
  std::bernoulli_distribution jump(leak);
  for (std::size_t s = 0; s < sessions; ++s) {
    Session sess;
    sess.user_id = "u" + std::to_string(s);
    const auto home = pick_block(rng);
    c.home.push_back(home);
    while (sess.nodes.size() < length) {
      const auto b = jump(rng) ? pick_block(rng) : home;
      auto id = PlantedCorpus::item(b, pick_item(rng));
      if (sess.nodes.empty() || sess.nodes.back() != id) sess.nodes.push_back(id);
    }
    Session cat = sess;
    cat.view = View::category;
    for (auto& n : cat.nodes) n = c.item_category.at(n);
    collapse_duplicates(cat.nodes);
    c.item_sessions.push_back(std::move(sess));
    if (cat.nodes.size() >= 2) c.category_sessions.push_back(std::move(cat));
  }
  return c;
}

/// Per-session ground truth: `n` items of the session's home block that the
/// session does not contain.
inline std::map<NodeId, std::vector<NodeId>> planted_test_items(const PlantedCorpus& c,
                                                                std::size_t n,
                                                                std::mt19937_64& rng) {
  std::map<NodeId, std::vector<NodeId>> test;
  for (std::size_t s = 0; s < c.item_sessions.size(); ++s) {
    const auto& sess = c.item_sessions[s];
    std::vector<NodeId> pool;
    for (std::size_t k = 0; k < c.items_per_block; ++k) {
      auto id = PlantedCorpus::item(c.home[s], k);
      if (std::find(sess.nodes.begin(), sess.nodes.end(), id) == sess.nodes.end())
        pool.push_back(id);
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(std::min(n, pool.size()));
    if (!pool.empty()) test[sess.user_id] = pool;
  }
  return test;
}

inline TrainingData single_view_data(const std::vector<Session>& sessions) {
  TrainingData d;
  d.views = {View::item};
  d.sessions[View::item] = sessions;
  return d;
}

inline TrainingData two_view_data(const PlantedCorpus& c) {
  TrainingData d;
  d.views = {View::item, View::category};
  d.relations = {{View::item, View::category}};
  d.sessions[View::item] = c.item_sessions;
  d.sessions[View::category] = c.category_sessions;
  d.attributes[View::category] = c.item_category;
  return d;
}

inline double cosine(const Eigen::Ref<const Vector<double>>& a,
                     const Eigen::Ref<const Vector<double>>& b) {
  const double n = a.norm() * b.norm();
  return n > 0 ? a.dot(b) / n : 0.0;
}

/// Means of non-overlapping windows of `values`.
inline std::vector<double> window_means(const std::vector<double>& values, std::size_t window) {
  std::vector<double> out;
  for (std::size_t b = 0; b + window <= values.size(); b += window) {
    double s = 0;
    for (std::size_t i = b; i < b + window; ++i) s += values[i];
    out.push_back(s / static_cast<double>(window));
  }
  return out;
}

/// Items in `clusters` tight groups. Positives pair items of one cluster,
/// negatives pair items of different clusters. Pairs are split 3:1 into
/// train and held-out.
struct PlantedPairs {
  MetricEmbeddings<double> emb;
  std::vector<PairExample> train;
  std::vector<PairExample> held_out;
};

inline PlantedPairs planted_pairs(std::size_t clusters, std::size_t per_cluster, Index dim,
                                  Index relation_dim, std::size_t n_pairs, std::mt19937_64& rng) {
  const auto n = static_cast<Index>(clusters * per_cluster);
  PlantedPairs p;
  const Matrix<double> centres = random_matrix(static_cast<Index>(clusters), dim, rng, 0.6);
  const Matrix<double> rel_centres = random_matrix(static_cast<Index>(clusters), relation_dim, rng, 0.6);
  p.emb.item = random_matrix(n, dim, rng, 0.15);
  p.emb.relational = random_matrix(n, relation_dim, rng, 0.15);
  for (Index i = 0; i < n; ++i) {
    const auto c = static_cast<Index>(static_cast<std::size_t>(i) / per_cluster);
    p.emb.item.row(i) += centres.row(c);
    p.emb.relational.row(i) += rel_centres.row(c);
  }
  const auto pc = static_cast<Index>(per_cluster);
  auto member = [&](Index c) { return c * pc + uniform_index(pc, rng); };
  std::vector<PairExample> all;
  for (std::size_t k = 0; k < n_pairs; ++k) {
    const Index ca = uniform_index(static_cast<Index>(clusters), rng);
    if (k % 2 == 0) {
      const Index a = member(ca);
      Index b = member(ca);
      while (b == a) b = member(ca);
      all.push_back({a, b, 1});
    } else {
      const Index cb = other_index(static_cast<Index>(clusters), ca, rng);
      all.push_back({member(ca), member(cb), 0});
    }
  }
  const auto cut = all.size() * 3 / 4;
  p.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(cut));
  p.held_out.assign(all.begin() + static_cast<std::ptrdiff_t>(cut), all.end());
  return p;
}

/// Mean total distance of the positive and of the negative pairs.
inline std::pair<double, double> mean_pair_distances(const MetricModel<double>& m,
                                                     const MetricEmbeddings<double>& emb,
                                                     const std::vector<PairExample>& pairs) {
  double pos = 0, neg = 0;
  int np = 0, nn = 0;
  for (const auto& e : pairs) {
    const double d = pair_distance(m, emb, e.a, e.b).total;
    if (e.label) {
      pos += d;
      ++np;
    } else {
      neg += d;
      ++nn;
    }
  }
  return {np ? pos / np : 0.0, nn ? neg / nn : 0.0};
}

}  // namespace mview::testing
