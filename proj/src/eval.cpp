#include "mview/eval.hpp"

#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "mview/io.hpp"

namespace mview {

EvalResult score_recommendations(std::span<const std::vector<NodeId>> recommended,
                                 std::span<const std::vector<NodeId>> truth, std::size_t k,
                                 std::span<const NodeId> users) {
  if (recommended.size() != truth.size()) throw ConfigError("recommendation/truth size mismatch");
  EvalResult r;
  r.k = k;
  std::size_t hit_users = 0;
  double p_sum = 0, r_sum = 0;
  for (std::size_t u = 0; u < truth.size(); ++u) {
    std::unordered_set<NodeId> g(truth[u].begin(), truth[u].end());
    if (g.empty()) {
      ++r.skipped_users;
      continue;
    }
    std::size_t hits = 0;
    std::unordered_set<NodeId> seen;
    const auto n = std::min(k, recommended[u].size());
    for (std::size_t i = 0; i < n; ++i)
      if (seen.insert(recommended[u][i]).second && g.count(recommended[u][i])) ++hits;
    UserMetrics m;
    if (u < users.size()) m.user = users[u];
    m.hits = hits;
    m.precision = static_cast<double>(hits) / static_cast<double>(k);
    m.recall = static_cast<double>(hits) / static_cast<double>(g.size());
    p_sum += m.precision;
    r_sum += m.recall;
    if (hits > 0) ++hit_users;
    ++r.users;
    r.per_user.push_back(std::move(m));
  }
  if (r.users > 0) {
    const auto n = static_cast<double>(r.users);
    r.hit_rate = static_cast<double>(hit_users) / n;
    r.precision = p_sum / n;
    r.recall = r_sum / n;
    r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0;
  }
  return r;
}

Vector<double> profile_vector(const EmbeddingTable<double>& table, std::span<const Index> items) {
  Vector<double> v = Vector<double>::Zero(table.dim());
  for (Index i : items) v += table.input.row(i).transpose();
  if (!items.empty()) v /= static_cast<double>(items.size());
  return v;
}

EvalResult evaluate(const TrainedModel& model, const std::map<NodeId, std::vector<NodeId>>& test,
                    std::span<const Session> train_sessions, const EvalConfig& config) {
  config.validate();
  const View instance = model.views.front();
  const auto& table = model.table(instance);
  const auto& vocab = model.vocab(instance);

  std::map<NodeId, std::vector<const Session*>> by_user;
  for (const auto& s : train_sessions)
    if (s.view == instance) by_user[s.user_id].push_back(&s);

  std::vector<std::vector<NodeId>> recs, truth;
  std::vector<NodeId> users;
  std::size_t skipped = 0;
  for (const auto& [user, items] : test) {
    auto it = by_user.find(user);
    if (items.empty() || it == by_user.end()) {
      ++skipped;
      continue;
    }
    std::vector<NodeId> profile_ids;
    if (config.trigger_window == 0) {
      profile_ids = it->second.back()->nodes;
    } else {
      for (auto s = it->second.rbegin(); s != it->second.rend(); ++s) {
        for (auto n = (*s)->nodes.rbegin(); n != (*s)->nodes.rend(); ++n) {
          if (profile_ids.size() >= config.trigger_window) break;
          profile_ids.push_back(*n);
        }
        if (profile_ids.size() >= config.trigger_window) break;
      }
    }
    std::vector<Index> profile;
    for (const auto& id : profile_ids)
      if (auto idx = vocab.find(id)) profile.push_back(*idx);
    if (profile.empty()) {
      ++skipped;
      continue;
    }
    std::vector<Index> seen;
    if (config.exclude_seen) {
      std::set<Index> uniq;
      for (const auto* s : it->second)
        for (const auto& id : s->nodes)
          if (auto idx = vocab.find(id)) uniq.insert(*idx);
      seen.assign(uniq.begin(), uniq.end());
    }
    const auto q = profile_vector(table, profile);
    auto top = topk_similar<double>(q, table.input, config.k, seen);
    std::vector<NodeId> ids;
    ids.reserve(top.size());
    for (const auto& s : top) ids.push_back(vocab.id(s.index));
    recs.push_back(std::move(ids));
    truth.push_back(items);
    users.push_back(user);
  }
  auto r = score_recommendations(recs, truth, config.k, users);
  r.skipped_users += skipped;
  return r;
}

TimeSplit time_split(const ParsedEvents& events, std::int64_t cutoff, const SessionRules& rules) {
  TimeSplit out;
  out.train.skipped = events.skipped;
  for (const auto& [user, list] : events.by_user) {
    std::vector<Event> before, after;
    for (const auto& e : list) (e.timestamp < cutoff ? before : after).push_back(e);
    if (!before.empty()) out.train.by_user[user] = std::move(before);
    std::vector<NodeId> truth;
    std::unordered_set<NodeId> seen;
    for (const auto& e : clean_events(after, rules))
      if (seen.insert(e.item_id).second) truth.push_back(e.item_id);
    if (!truth.empty()) out.test[user] = std::move(truth);
  }
  return out;
}

std::int64_t timestamp_quantile(const ParsedEvents& events, double q) {
  std::vector<std::int64_t> ts;
  for (const auto& [user, list] : events.by_user)
    for (const auto& e : list) ts.push_back(e.timestamp);
  if (ts.empty()) throw ConfigError("no events to split");
  q = std::clamp(q, 0.0, 1.0);
  const auto pos = static_cast<std::size_t>(q * static_cast<double>(ts.size() - 1));
  std::nth_element(ts.begin(), ts.begin() + static_cast<std::ptrdiff_t>(pos), ts.end());
  return ts[pos];
}

void write_test_file(std::ostream& out, const std::map<NodeId, std::vector<NodeId>>& test) {
  for (const auto& [user, items] : test) {
    out << user << '\t';
    for (std::size_t i = 0; i < items.size(); ++i) out << (i ? "," : "") << items[i];
    out << '\n';
  }
}

std::map<NodeId, std::vector<NodeId>> read_test_file(std::istream& in) {
  std::map<NodeId, std::vector<NodeId>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ConfigError("bad test file line: " + line);
    auto& items = out[line.substr(0, tab)];
    std::stringstream ss(line.substr(tab + 1));
    std::string id;
    while (std::getline(ss, id, ','))
      if (!id.empty()) items.push_back(id);
  }
  return out;
}

void print_report(std::ostream& out, const std::string& label, const EvalResult& r) {
  const auto k = std::to_string(r.k);
  out << std::left << std::setw(16) << "Model" << std::right << std::setw(14)
      << ("HitRate@" + k) << std::setw(14) << ("Recall@" + k) << std::setw(14)
      << ("Precision@" + k) << std::setw(14) << ("F1@" + k) << std::setw(8) << "N" << '\n';
  out << std::left << std::setw(16) << label << std::right << std::fixed << std::setprecision(2);
  for (double v : {r.hit_rate, r.recall, r.precision, r.f1})
    out << std::setw(13) << v * 100 << '%';
  out << std::setw(8) << r.users << '\n';
  out.unsetf(std::ios::fixed);
}

void write_metrics_csv(std::ostream& out, const EvalResult& r) {
  out << "metric,value,K,N\n";
  const std::pair<const char*, double> rows[] = {
      {"HitRate", r.hit_rate}, {"Recall", r.recall}, {"Precision", r.precision}, {"F1", r.f1}};
  for (const auto& [name, v] : rows)
    out << name << ',' << format_double(v) << ',' << r.k << ',' << r.users << '\n';
}

}  // namespace mview
