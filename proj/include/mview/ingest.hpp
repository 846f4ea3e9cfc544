#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mview/common.hpp"

namespace mview {

struct Event {
  NodeId user_id;
  NodeId item_id;
  NodeId category_id;
  std::optional<NodeId> shop_id;
  std::int64_t timestamp = 0;
  std::optional<std::int64_t> dwell_ms;  // missing dwell is never filtered
  std::optional<double> rating;
};

struct Session {
  NodeId user_id;
  View view = View::item;
  std::vector<NodeId> nodes;
  std::int64_t start_ts = 0;
  std::int64_t end_ts = 0;
};

enum class DatasetMode { taobao, movielens };

struct SessionRules {
  DatasetMode mode = DatasetMode::taobao;
  std::int64_t min_dwell_ms = 2000;
  std::int64_t idle_split = 3600;
  std::int64_t merge_gap = 1800;
  std::optional<std::size_t> max_len;
  std::optional<double> min_rating;
  std::int64_t movielens_idle_split = 365LL * 24 * 3600;
  std::size_t min_session_len = 2;

  /// Defaults for rating logs: rating filter 3, one-year idle split, max length 50.
  static SessionRules movielens();
  void validate() const;
};

/// Column names in the input header. Empty optional columns are absent.
struct EventSchema {
  char delimiter = '\t';
  std::string user_id = "user_id";
  std::string item_id = "item_id";
  std::string category_id = "category_id";
  std::string shop_id;
  std::string timestamp = "timestamp";
  std::string dwell_ms;
  std::string rating;
};

struct ParsedEvents {
  /// Per-user events, time-sorted (stable w.r.t. input order on ties).
  std::map<NodeId, std::vector<Event>> by_user;
  std::size_t skipped = 0;
};

ParsedEvents parse_events(std::istream& source, const EventSchema& schema);

std::vector<Event> clean_events(std::span<const Event> events, const SessionRules& rules);

/// Item-view sessions for one user. `boundaries` are app open/close times;
/// an event at or after a boundary starts a new session.
std::vector<Session> split_sessions(std::span<const Event> events, const SessionRules& rules,
                                    std::span<const std::int64_t> boundaries = {});

std::vector<Session> merge_sessions(std::span<const Session> sessions, const SessionRules& rules);

/// Removes consecutive duplicates in place.
void collapse_duplicates(std::vector<NodeId>& nodes);

enum class MissingLinkPolicy { skip_item, fatal };

struct ViewSessions {
  std::map<View, std::vector<Session>> by_view;
  std::size_t missing_links = 0;
};

/// Item sessions mapped through each auxiliary view's item -> attribute map.
ViewSessions derive_view_sessions(
    std::span<const Session> item_sessions,
    const std::map<View, std::unordered_map<NodeId, NodeId>>& links,
    MissingLinkPolicy policy = MissingLinkPolicy::skip_item);

/// Drops sessions with fewer than `min_len` nodes.
std::vector<Session> drop_short(std::vector<Session> sessions, std::size_t min_len);

/// Item -> attribute maps collected from events. Throws DataError when an
/// item carries two distinct attributes.
std::map<View, std::unordered_map<NodeId, NodeId>> collect_attributes(
    const ParsedEvents& events, std::span<const View> aux_views);

/// Full per-user pipeline: clean, split, merge, derive views, drop short.
struct SessionizeResult {
  std::map<View, std::vector<Session>> sessions;
  std::size_t events_in = 0;
  std::size_t events_kept = 0;
  std::size_t missing_links = 0;
};

/// Per-user app open/close timestamps.
using BoundaryMap = std::map<NodeId, std::vector<std::int64_t>>;

SessionizeResult sessionize(const ParsedEvents& events, const SessionRules& rules,
                            const std::map<View, std::unordered_map<NodeId, NodeId>>& links,
                            MissingLinkPolicy policy = MissingLinkPolicy::skip_item,
                            const BoundaryMap& boundaries = {});

/// `user_id<TAB>timestamp` lines.
BoundaryMap read_boundaries(std::istream& in);

/// `user_id<TAB>view<TAB>node1,node2,...`
void write_sessions(std::ostream& out, std::span<const Session> sessions);
std::vector<Session> read_sessions(std::istream& in);

}  // namespace mview
