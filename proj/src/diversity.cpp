#include "mview/diversity.hpp"

#include <istream>
#include <ostream>

#include "mview/io.hpp"

namespace mview {

std::vector<PairExample> generate_metric_pairs(std::span<const std::vector<Index>> sequences,
                                               std::span<const Index> item_category,
                                               std::size_t window,
                                               std::size_t negatives_per_positive,
                                               std::size_t max_positives, std::mt19937_64& rng) {
  std::vector<PairExample> positives;
  for (const auto& seq : sequences) {
    for (const auto& [a, b] : gen_skipgram_pairs(seq, window)) {
      if (a >= b) continue;  // one orientation per unordered pair occurrence
      if (item_category[static_cast<std::size_t>(a)] != item_category[static_cast<std::size_t>(b)])
        positives.push_back({a, b, 1});
    }
  }
  std::shuffle(positives.begin(), positives.end(), rng);
  if (max_positives > 0 && positives.size() > max_positives) positives.resize(max_positives);

  const auto n = static_cast<Index>(item_category.size());
  if (n < 2) throw ConfigError("metric pairs need at least two items");
  std::uniform_int_distribution<Index> pick(0, n - 1);
  std::vector<PairExample> out = positives;
  for (std::size_t i = 0; i < positives.size() * negatives_per_positive; ++i) {
    Index a = pick(rng), b = pick(rng);
    while (b == a) b = pick(rng);
    out.push_back({a, b, 0});
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

double novelty_at_k(std::span<const std::vector<Index>> recommendations,
                    std::span<const std::set<Index>> history_categories,
                    std::span<const Index> item_category) {
  if (recommendations.size() != history_categories.size())
    throw ConfigError("recommendations and histories differ in length");
  std::size_t total = 0, novel = 0;
  for (std::size_t u = 0; u < recommendations.size(); ++u) {
    for (Index item : recommendations[u]) {
      if (item < 0 || static_cast<std::size_t>(item) >= item_category.size() ||
          item_category[static_cast<std::size_t>(item)] < 0)
        throw DataError("recommended item " + std::to_string(item) + " has no category");
      ++total;
      if (!history_categories[u].count(item_category[static_cast<std::size_t>(item)])) ++novel;
    }
  }
  return total ? static_cast<double>(novel) / static_cast<double>(total) : 0.0;
}

namespace {

void write_matrix(std::ostream& out, const char* name, const Matrix<double>& m) {
  out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << format_double(m(r, c));
    out << '\n';
  }
}

Matrix<double> read_matrix(std::istream& in, const std::string& expected) {
  std::string name;
  Index rows = 0, cols = 0;
  if (!(in >> name >> rows >> cols) || name != expected)
    throw ConfigError("metric checkpoint: expected " + expected);
  Matrix<double> m(rows, cols);
  std::string v;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      if (!(in >> v)) throw ConfigError("metric checkpoint truncated");
      m(r, c) = parse_double(v);
    }
  return m;
}

}  // namespace

void write_metric_model(std::ostream& out, const MetricModel<double>& model) {
  out << "margin " << format_double(model.margin) << '\n';
  write_matrix(out, "L_i", model.l_item);
  write_matrix(out, "L_ic", model.l_relational);
}

MetricModel<double> read_metric_model(std::istream& in) {
  MetricModel<double> m;
  std::string key, v;
  if (!(in >> key >> v) || key != "margin") throw ConfigError("metric checkpoint: no margin");
  m.margin = parse_double(v);
  m.l_item = read_matrix(in, "L_i");
  m.l_relational = read_matrix(in, "L_ic");
  return m;
}

void write_similarity_line(std::ostream& out, const NodeId& trigger,
                           std::span<const Scored<double>> items, const Vocab& vocab) {
  out << trigger << '\t';
  for (std::size_t i = 0; i < items.size(); ++i)
    out << (i ? "," : "") << vocab.id(items[i].index) << ':' << format_double(items[i].score);
  out << '\n';
}

}  // namespace mview
