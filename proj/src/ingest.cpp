#include "mview/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

namespace mview {

namespace {

std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  while (!s.empty() && (s.front() == ' ')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

}  // namespace

SessionRules SessionRules::movielens() {
  SessionRules r;
  r.mode = DatasetMode::movielens;
  r.max_len = 50;
  r.min_rating = 3.0;
  return r;
}

void SessionRules::validate() const {
  if (min_dwell_ms <= 0 || idle_split <= 0 || merge_gap <= 0 || movielens_idle_split <= 0)
    throw ConfigError("session durations must be positive");
  if (merge_gap >= idle_split) throw ConfigError("merge_gap must be smaller than idle_split");
  if (max_len && *max_len == 0) throw ConfigError("max_len must be positive");
}

ParsedEvents parse_events(std::istream& source, const EventSchema& schema) {
  ParsedEvents result;
  std::string line;
  if (!std::getline(source, line)) return result;

  auto header = split_fields(trim_cr(line), schema.delimiter);
  auto column = [&](const std::string& name, bool required) -> std::optional<std::size_t> {
    if (name.empty()) {
      if (required) throw ConfigError("required column name is empty");
      return std::nullopt;
    }
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ConfigError("missing column '" + name + "' in input header");
  };
  const auto c_user = *column(schema.user_id, true);
  const auto c_item = *column(schema.item_id, true);
  const auto c_ts = *column(schema.timestamp, true);
  const auto c_cat = column(schema.category_id, false);
  const auto c_shop = column(schema.shop_id, false);
  const auto c_dwell = column(schema.dwell_ms, false);
  const auto c_rating = column(schema.rating, false);

  while (std::getline(source, line)) {
    auto text = trim_cr(line);
    if (text.empty()) continue;
    auto f = split_fields(text, schema.delimiter);
    if (f.size() < header.size()) {
      ++result.skipped;
      continue;
    }
    Event e;
    e.user_id = std::string(f[c_user]);
    e.item_id = std::string(f[c_item]);
    if (c_cat) e.category_id = std::string(f[*c_cat]);
    if (c_shop) e.shop_id = std::string(f[*c_shop]);
    bool ok = parse_number(f[c_ts], e.timestamp) && e.timestamp >= 0;
    if (ok && c_dwell && !f[*c_dwell].empty()) {
      std::int64_t d = 0;
      ok = parse_number(f[*c_dwell], d) && d >= 0;
      e.dwell_ms = d;
    }
    if (ok && c_rating && !f[*c_rating].empty()) {
      double r = 0;
      ok = parse_number(f[*c_rating], r);
      e.rating = r;
    }
    if (!ok || e.user_id.empty() || e.item_id.empty()) {
      ++result.skipped;
      continue;
    }
    result.by_user[e.user_id].push_back(std::move(e));
  }
  for (auto& [user, events] : result.by_user)
    std::stable_sort(events.begin(), events.end(),
                     [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
  return result;
}

std::vector<Event> clean_events(std::span<const Event> events, const SessionRules& rules) {
  std::vector<Event> out;
  out.reserve(events.size());
  for (const auto& e : events) {
    if (rules.mode == DatasetMode::taobao) {
      if (e.dwell_ms && *e.dwell_ms < rules.min_dwell_ms) continue;
    } else if (rules.min_rating && e.rating && *e.rating < *rules.min_rating) {
      continue;
    }
    out.push_back(e);
  }
  return out;
}

void collapse_duplicates(std::vector<NodeId>& nodes) {
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
}

std::vector<Session> split_sessions(std::span<const Event> events, const SessionRules& rules,
                                    std::span<const std::int64_t> boundaries) {
  std::vector<Session> raw;
  if (events.empty()) return raw;

  const auto idle = rules.mode == DatasetMode::movielens ? rules.movielens_idle_split
                                                          : rules.idle_split;
  std::vector<std::int64_t> cuts(boundaries.begin(), boundaries.end());
  std::sort(cuts.begin(), cuts.end());

  auto crosses_boundary = [&](std::int64_t prev, std::int64_t next) {
    auto it = std::upper_bound(cuts.begin(), cuts.end(), prev);
    return it != cuts.end() && *it <= next;
  };

  Session current;
  current.user_id = events.front().user_id;
  current.start_ts = events.front().timestamp;
  std::int64_t last_ts = events.front().timestamp;
  std::vector<std::int64_t> stamps;

  auto flush = [&] {
    current.end_ts = last_ts;
    raw.push_back(std::move(current));
    current = Session{};
    current.user_id = events.front().user_id;
  };

  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (i > 0 && (e.timestamp - last_ts >= idle || crosses_boundary(last_ts, e.timestamp))) {
      flush();
      current.start_ts = e.timestamp;
    }
    current.nodes.push_back(e.item_id);
    last_ts = e.timestamp;
  }
  flush();

  // Length cap first, then duplicate collapse. Timestamps of the pieces are
  // tracked by position.
  std::vector<Session> out;
  std::size_t pos = 0;
  for (auto& s : raw) {
    const std::size_t n = s.nodes.size();
    if (rules.max_len && n > *rules.max_len) {
      const auto cap = *rules.max_len;
      for (std::size_t b = 0; b < n; b += cap) {
        Session piece;
        piece.user_id = s.user_id;
        const auto e = std::min(n, b + cap);
        piece.nodes.assign(s.nodes.begin() + static_cast<std::ptrdiff_t>(b),
                           s.nodes.begin() + static_cast<std::ptrdiff_t>(e));
        piece.start_ts = events[pos + b].timestamp;
        piece.end_ts = events[pos + e - 1].timestamp;
        out.push_back(std::move(piece));
      }
    } else {
      out.push_back(std::move(s));
    }
    pos += n;
  }
  for (auto& s : out) collapse_duplicates(s.nodes);
  return out;
}

std::vector<Session> merge_sessions(std::span<const Session> sessions, const SessionRules& rules) {
  std::vector<Session> out;
  for (const auto& s : sessions) {
    if (!out.empty() && out.back().user_id == s.user_id && out.back().view == s.view &&
        s.start_ts - out.back().end_ts < rules.merge_gap) {
      auto& prev = out.back();
      prev.nodes.insert(prev.nodes.end(), s.nodes.begin(), s.nodes.end());
      collapse_duplicates(prev.nodes);
      prev.end_ts = std::max(prev.end_ts, s.end_ts);
    } else {
      out.push_back(s);
    }
  }
  return out;
}

ViewSessions derive_view_sessions(
    std::span<const Session> item_sessions,
    const std::map<View, std::unordered_map<NodeId, NodeId>>& links, MissingLinkPolicy policy) {
  ViewSessions result;
  auto& items = result.by_view[View::item];
  items.assign(item_sessions.begin(), item_sessions.end());
  for (const auto& [view, map] : links) {
    if (view == View::item) continue;
    auto& dst = result.by_view[view];
    for (const auto& s : item_sessions) {
      Session aux;
      aux.user_id = s.user_id;
      aux.view = view;
      aux.start_ts = s.start_ts;
      aux.end_ts = s.end_ts;
      for (const auto& node : s.nodes) {
        auto it = map.find(node);
        if (it == map.end()) {
          if (policy == MissingLinkPolicy::fatal)
            throw DataError("item '" + node + "' has no " + std::string(to_string(view)));
          ++result.missing_links;
          continue;
        }
        aux.nodes.push_back(it->second);
      }
      collapse_duplicates(aux.nodes);
      if (!aux.nodes.empty()) dst.push_back(std::move(aux));
    }
  }
  return result;
}

std::vector<Session> drop_short(std::vector<Session> sessions, std::size_t min_len) {
  std::erase_if(sessions, [&](const Session& s) { return s.nodes.size() < min_len; });
  return sessions;
}

std::map<View, std::unordered_map<NodeId, NodeId>> collect_attributes(
    const ParsedEvents& events, std::span<const View> aux_views) {
  std::map<View, std::unordered_map<NodeId, NodeId>> out;
  for (View v : aux_views) {
    if (v == View::item) continue;
    auto& map = out[v];
    for (const auto& [user, list] : events.by_user) {
      for (const auto& e : list) {
        const NodeId* attr = nullptr;
        if (v == View::category) attr = &e.category_id;
        if (v == View::shop && e.shop_id) attr = &*e.shop_id;
        if (attr == nullptr || attr->empty()) continue;
        auto [it, inserted] = map.emplace(e.item_id, *attr);
        if (!inserted && it->second != *attr)
          throw DataError("item '" + e.item_id + "' has two " + std::string(to_string(v)) +
                          " values: '" + it->second + "' and '" + *attr + "'");
      }
    }
  }
  return out;
}

SessionizeResult sessionize(const ParsedEvents& events, const SessionRules& rules,
                            const std::map<View, std::unordered_map<NodeId, NodeId>>& links,
                            MissingLinkPolicy policy, const BoundaryMap& boundaries) {
  rules.validate();
  SessionizeResult result;
  std::vector<Session> item_sessions;
  for (const auto& [user, list] : events.by_user) {
    result.events_in += list.size();
    auto cleaned = clean_events(list, rules);
    result.events_kept += cleaned.size();
    auto b = boundaries.find(user);
    auto split = b == boundaries.end() ? split_sessions(cleaned, rules)
                                       : split_sessions(cleaned, rules, b->second);
    // Length-capped pieces must stay apart, so rating logs skip merging.
    if (rules.mode == DatasetMode::taobao) split = merge_sessions(split, rules);
    item_sessions.insert(item_sessions.end(), std::make_move_iterator(split.begin()),
                         std::make_move_iterator(split.end()));
  }
  auto views = derive_view_sessions(item_sessions, links, policy);
  result.missing_links = views.missing_links;
  for (auto& [view, list] : views.by_view)
    result.sessions[view] = drop_short(std::move(list), rules.min_session_len);
  return result;
}

BoundaryMap read_boundaries(std::istream& in) {
  BoundaryMap out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto text = trim_cr(line);
    if (text.empty()) continue;
    auto f = split_fields(text, '\t');
    std::int64_t ts = 0;
    if (f.size() != 2 || !parse_number(f[1], ts))
      throw ConfigError("boundary file line " + std::to_string(lineno) + ": expected user<TAB>ts");
    out[std::string(f[0])].push_back(ts);
  }
  return out;
}

void write_sessions(std::ostream& out, std::span<const Session> sessions) {
  for (const auto& s : sessions) {
    out << s.user_id << '\t' << to_string(s.view) << '\t';
    for (std::size_t i = 0; i < s.nodes.size(); ++i) {
      if (i) out << ',';
      out << s.nodes[i];
    }
    out << '\n';
  }
}

std::vector<Session> read_sessions(std::istream& in) {
  std::vector<Session> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto text = trim_cr(line);
    if (text.empty()) continue;
    auto f = split_fields(text, '\t');
    if (f.size() != 3)
      throw ConfigError("session file line " + std::to_string(lineno) + ": expected 3 fields");
    Session s;
    s.user_id = std::string(f[0]);
    s.view = view_from_string(f[1]);
    for (auto node : split_fields(f[2], ','))
      if (!node.empty()) s.nodes.emplace_back(node);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace mview
