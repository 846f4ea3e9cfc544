#include <doctest.h>

#include <sstream>

#include <Eigen/Eigenvalues>

#include "mview/diversity.hpp"
#include "test_util.hpp"

using namespace mview;
using namespace mview::testing;

namespace {

MetricModel<double> random_metric(Index d, Index dp, std::mt19937_64& rng, double margin = 1.0) {
  return {random_matrix(d, d, rng, 0.6), random_matrix(dp, dp, rng, 0.6), margin};
}

double min_eigenvalue(const Matrix<double>& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  return es.eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("pair_distance: equal inputs give zero; identity gives squared Euclidean") {
  std::mt19937_64 rng(1);
  Vector<double> a = random_matrix(3, 1, rng).col(0), b = random_matrix(3, 1, rng).col(0);
  Vector<double> ra = random_matrix(2, 1, rng).col(0), rb = random_matrix(2, 1, rng).col(0);
  auto m = random_metric(3, 2, rng);
  auto zero = pair_distance(m, a, a, ra, ra);
  CHECK(zero.item == 0.0);
  CHECK(zero.relational == 0.0);
  auto id = identity_metric<double>(3, 2);
  auto d = pair_distance(id, a, b, ra, rb);
  CHECK(d.item == doctest::Approx((a - b).squaredNorm()).epsilon(1e-14));
  CHECK(d.relational == doctest::Approx((ra - rb).squaredNorm()).epsilon(1e-14));
  CHECK(d.total == d.item + d.relational);
}

TEST_CASE("pair_distance: matches an explicit quadratic form in M = L^T L") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    auto m = random_metric(3, 3, rng);
    Vector<double> a = random_matrix(3, 1, rng).col(0), b = random_matrix(3, 1, rng).col(0);
    Vector<double> ra = random_matrix(3, 1, rng).col(0), rb = random_matrix(3, 1, rng).col(0);
    auto quad = [](const Matrix<double>& l, const Vector<double>& x) {
      double s = 0;
      for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 3; ++j) {
          double mij = 0;
          for (Index k = 0; k < 3; ++k) mij += l(k, i) * l(k, j);
          s += x(i) * mij * x(j);
        }
      return s;
    };
    auto d = pair_distance(m, a, b, ra, rb);
    CHECK(d.item == doctest::Approx(quad(m.l_item, a - b)).epsilon(1e-12));
    CHECK(d.relational == doctest::Approx(quad(m.l_relational, ra - rb)).epsilon(1e-12));
    auto swapped = pair_distance(m, b, a, rb, ra);
    CHECK(swapped.total == d.total);  // exact symmetry
    CHECK(d.item >= 0.0);
    CHECK(d.relational >= 0.0);
  }
}

TEST_CASE("contrastive loss: satisfied pairs contribute nothing") {
  MetricEmbeddings<double> emb;
  emb.item = Matrix<double>(3, 2);
  emb.item << 0, 0, 0, 0, 3, 0;
  emb.relational = Matrix<double>::Zero(3, 1);
  auto m = identity_metric<double>(2, 1);
  std::vector<PairExample> pos{{0, 1, 1}};
  auto g = contrastive_loss_grad(m, std::span<const PairExample>(pos), emb);
  CHECK(g.loss == 0.0);
  std::vector<PairExample> neg{{0, 2, 0}};  // d = 9 >= margin 1
  g = contrastive_loss_grad(m, std::span<const PairExample>(neg), emb);
  CHECK(g.loss == 0.0);
  CHECK(g.l_item.isZero());
  CHECK(g.l_relational.isZero());
}

TEST_CASE("contrastive loss: hand value for one positive and one violated negative") {
  MetricEmbeddings<double> emb;
  emb.item = Matrix<double>(3, 1);
  emb.item << 0, 1, 0.5;
  emb.relational = Matrix<double>::Zero(3, 1);
  auto m = identity_metric<double>(1, 1, 1.0);
  std::vector<PairExample> batch{{0, 1, 1}, {0, 2, 0}};
  // positive: d = 1 -> 1; negative: d = 0.25 -> (0.75)^2; total / (2 * 2)
  auto g = contrastive_loss_grad(m, std::span<const PairExample>(batch), emb);
  CHECK(g.loss == doctest::Approx((1.0 + 0.5625) / 4.0).epsilon(1e-14));
}

TEST_CASE("contrastive loss: gradients match central differences") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    MetricEmbeddings<double> emb{random_matrix(8, 3, rng, 0.5), random_matrix(8, 2, rng, 0.5)};
    auto m = random_metric(3, 2, rng, 1.5);
    std::vector<PairExample> batch;
    for (int i = 0; i < 6; ++i) {
      const Index a = uniform_index(8, rng);
      batch.push_back({a, other_index(8, a, rng), i % 2});
    }
    auto g = contrastive_loss_grad(m, std::span<const PairExample>(batch), emb);
    auto f = [&] { return contrastive_loss_grad(m, std::span<const PairExample>(batch), emb).loss; };
    for (Index r = 0; r < 3; ++r)
      for (Index c = 0; c < 3; ++c)
        CHECK(rel_error(g.l_item(r, c), central_diff(f, m.l_item(r, c))) < 1e-4);
    for (Index r = 0; r < 2; ++r)
      for (Index c = 0; c < 2; ++c)
        CHECK(rel_error(g.l_relational(r, c), central_diff(f, m.l_relational(r, c))) < 1e-4);
  }
}

TEST_CASE("train_metric: zero steps return the initial model") {
  std::mt19937_64 rng(6);
  auto p = planted_pairs(3, 5, 3, 2, 40, rng);
  auto init = random_metric(3, 2, rng);
  MetricTrainConfig cfg;
  cfg.steps = 0;
  auto r = train_metric(init, p.emb, std::span<const PairExample>(p.train), cfg);
  CHECK(r.model.l_item == init.l_item);
  CHECK(r.model.l_relational == init.l_relational);
  CHECK(r.losses.empty());
}

TEST_CASE("train_metric: planted pairs separate and M stays PSD") {
  std::mt19937_64 rng(7);
  auto p = planted_pairs(4, 10, 4, 3, 400, rng);
  MetricTrainConfig cfg;
  cfg.steps = 300;
  cfg.batch_size = 64;
  auto r = train_metric(identity_metric<double>(4, 3), p.emb,
                        std::span<const PairExample>(p.train), cfg);
  auto [pos, neg] = mean_pair_distances(r.model, p.emb, p.held_out);
  CHECK(pos < neg);
  CHECK(min_eigenvalue(r.model.m_item()) >= -1e-10);
  CHECK(min_eigenvalue(r.model.m_relational()) >= -1e-10);
  auto means = window_means(std::vector<double>(r.losses.begin(), r.losses.end()), 100);
  REQUIRE(means.size() == 3);
  CHECK(means[2] <= means[0]);
}

TEST_CASE("train_metric: an all-positive stream shrinks trace(M) monotonically") {
  std::mt19937_64 rng(8);
  auto p = planted_pairs(2, 6, 3, 2, 60, rng);
  std::vector<PairExample> positives;
  for (const auto& e : p.train)
    if (e.label) positives.push_back(e);
  MetricTrainConfig cfg;
  cfg.batch_size = positives.size();
  cfg.steps = 1;
  cfg.optimizer.algorithm = OptimizerKind::sgd;
  cfg.optimizer.learning_rate = 0.05;
  auto model = identity_metric<double>(3, 2);
  double trace = model.m_item().trace() + model.m_relational().trace();
  for (int s = 0; s < 30; ++s) {
    model = train_metric(model, p.emb, std::span<const PairExample>(positives), cfg).model;
    const double t = model.m_item().trace() + model.m_relational().trace();
    CHECK(t < trace);
    trace = t;
  }
}

TEST_CASE("novelty_at_k: none, all, and the 0.75 hand count") {
  std::vector<Index> cat{0, 1, 2, 3};
  std::vector<std::set<Index>> hist{{0, 1}, {0}};
  std::vector<std::vector<Index>> seen{{0, 1}, {0, 0}};
  CHECK(novelty_at_k(seen, hist, cat) == 0.0);
  std::vector<std::vector<Index>> fresh{{2, 3}, {1, 2}};
  CHECK(novelty_at_k(fresh, hist, cat) == 1.0);
  std::vector<std::vector<Index>> mixed{{0, 2}, {1, 3}};
  CHECK(novelty_at_k(mixed, hist, cat) == doctest::Approx(0.75));
  std::vector<Index> partial{0, -1};
  std::vector<std::vector<Index>> uncategorised{{1}};
  std::vector<std::set<Index>> one{{0}};
  CHECK_THROWS_AS(novelty_at_k(uncategorised, one, partial), DataError);
}

TEST_CASE("generate_metric_pairs: positives cross categories inside the window") {
  std::vector<std::vector<Index>> seqs{{0, 1, 2, 3}, {3, 4}};
  std::vector<Index> cat{0, 0, 1, 1, 2};
  std::mt19937_64 rng(9);
  auto pairs = generate_metric_pairs(seqs, cat, 1, 2, 0, rng);
  std::size_t pos = 0, neg = 0;
  for (const auto& p : pairs) {
    CHECK(p.a != p.b);
    if (p.label) {
      ++pos;
      CHECK(cat[static_cast<std::size_t>(p.a)] != cat[static_cast<std::size_t>(p.b)]);
    } else {
      ++neg;
    }
  }
  CHECK(pos == 2);  // (1,2) and (3,4)
  CHECK(neg == 4);
}

TEST_CASE("metric_rerank orders by distance and skips the trigger") {
  MetricEmbeddings<double> emb;
  emb.item = Matrix<double>(4, 1);
  emb.item << 0, 3, 1, 2;
  emb.relational = Matrix<double>::Zero(4, 1);
  auto m = identity_metric<double>(1, 1);
  std::vector<Index> cands{0, 1, 2, 3};
  auto r = metric_rerank(m, emb, 0, cands, 2);
  REQUIRE(r.size() == 2);
  CHECK(r[0].index == 2);
  CHECK(r[1].index == 3);
}

TEST_CASE("metric model text round trip is exact") {
  std::mt19937_64 rng(10);
  auto m = random_metric(3, 2, rng, 1.25);
  std::stringstream buf;
  write_metric_model(buf, m);
  auto back = read_metric_model(buf);
  CHECK(back.l_item == m.l_item);
  CHECK(back.l_relational == m.l_relational);
  CHECK(back.margin == 1.25);
}
