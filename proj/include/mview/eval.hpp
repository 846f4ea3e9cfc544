#pragma once

#include <algorithm>
#include <iosfwd>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "mview/common.hpp"
#include "mview/ingest.hpp"
#include "mview/trainer.hpp"

namespace mview {

template <typename Scalar>
struct Scored {
  Index index = 0;
  Scalar score = 0;
  bool operator==(const Scored&) const = default;
};

/// The K rows of `table` with the highest inner product with `query`,
/// skipping `exclude`. Ordered by score descending, ties by ascending index.
template <typename Scalar, typename Derived>
std::vector<Scored<Scalar>> topk_similar(const Eigen::MatrixBase<Derived>& query,
                                         const Matrix<Scalar>& table, std::size_t k,
                                         std::span<const Index> exclude = {}) {
  if (table.rows() == 0) throw ConfigError("top-k over an empty table");
  std::vector<char> skip(static_cast<std::size_t>(table.rows()), 0);
  for (Index e : exclude)
    if (e >= 0 && e < table.rows()) skip[static_cast<std::size_t>(e)] = 1;

  std::vector<Scored<Scalar>> all;
  all.reserve(static_cast<std::size_t>(table.rows()));
  for (Index r = 0; r < table.rows(); ++r)
    if (!skip[static_cast<std::size_t>(r)]) all.push_back({r, table.row(r).dot(query.transpose())});

  auto better = [](const Scored<Scalar>& a, const Scored<Scalar>& b) {
    return a.score > b.score || (a.score == b.score && a.index < b.index);
  };
  const auto n = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), better);
  all.resize(n);
  return all;
}

struct EvalConfig {
  std::size_t k = 50;
  std::size_t trigger_window = 0;  // 0: the user's last training session; n: last n items
  bool exclude_seen = true;

  void validate() const {
    if (k < 1) throw ConfigError("K must be >= 1");
  }
};

struct UserMetrics {
  NodeId user;
  std::size_t hits = 0;
  double precision = 0;
  double recall = 0;
};

struct EvalResult {
  double hit_rate = 0;
  double recall = 0;
  double precision = 0;
  double f1 = 0;
  std::size_t k = 0;
  std::size_t users = 0;
  std::size_t skipped_users = 0;
  std::vector<UserMetrics> per_user;
};

/// Precision = |P∩G|/K and Recall = |P∩G|/|G|, macro-averaged over users;
/// HitRate = share of users with a hit; F1 from the averaged precision/recall.
EvalResult score_recommendations(std::span<const std::vector<NodeId>> recommended,
                                 std::span<const std::vector<NodeId>> truth, std::size_t k,
                                 std::span<const NodeId> users = {});

/// Mean input vector of the profile items, which must be vocabulary indices.
Vector<double> profile_vector(const EmbeddingTable<double>& table, std::span<const Index> items);

/// Recommends for every user in `test` from its most recent training items
/// and scores against the test items.
EvalResult evaluate(const TrainedModel& model, const std::map<NodeId, std::vector<NodeId>>& test,
                    std::span<const Session> train_sessions, const EvalConfig& config);

/// Splits parsed events at `cutoff`: earlier events stay for training; later
/// events that survive `rules` cleaning become per-user ground truth.
struct TimeSplit {
  ParsedEvents train;
  std::map<NodeId, std::vector<NodeId>> test;
};
TimeSplit time_split(const ParsedEvents& events, std::int64_t cutoff, const SessionRules& rules);

/// Timestamp at the given quantile of all event timestamps.
std::int64_t timestamp_quantile(const ParsedEvents& events, double q);

void write_test_file(std::ostream& out, const std::map<NodeId, std::vector<NodeId>>& test);
std::map<NodeId, std::vector<NodeId>> read_test_file(std::istream& in);

/// Aligned text table and `metric,value,K,N` CSV.
void print_report(std::ostream& out, const std::string& label, const EvalResult& r);
void write_metrics_csv(std::ostream& out, const EvalResult& r);

}  // namespace mview
