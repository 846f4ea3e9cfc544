#pragma once

#include <iosfwd>
#include <map>
#include <random>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mview/common.hpp"
#include "mview/ingest.hpp"

namespace mview {

/// Bijection node_id <-> dense index, assigned in first-seen order.
class Vocab {
 public:
  Index add(const NodeId& id);
  std::optional<Index> find(const NodeId& id) const;
  Index at(const NodeId& id) const;  // throws DataError if absent
  const NodeId& id(Index i) const { return ids_[static_cast<std::size_t>(i)]; }
  Index size() const { return static_cast<Index>(ids_.size()); }
  bool empty() const { return ids_.empty(); }
  const std::vector<NodeId>& ids() const { return ids_; }

 private:
  std::unordered_map<NodeId, Index> index_;
  std::vector<NodeId> ids_;
};

struct EdgeKey {
  Index src;
  Index dst;
  auto operator<=>(const EdgeKey&) const = default;
};

/// Weighted co-occurrence graph of one view. Immutable once built.
struct ViewGraph {
  View view = View::item;
  Vocab vocab;
  std::map<EdgeKey, std::int64_t> edges;
  std::vector<std::int64_t> node_freq;
  bool undirected = false;

  std::int64_t total_weight() const;
  std::size_t num_edges() const { return edges.size(); }
};

ViewGraph build_view_graph(std::span<const Session> sessions, bool undirected = false);

/// Folds the counts of `shard` into `into`; vocabularies are merged by node id.
void merge_graph(ViewGraph& into, const ViewGraph& shard);

/// Attribute mapping from one view onto another (many-to-one).
struct CrossViewLinks {
  View from_view = View::item;
  View to_view = View::category;
  std::map<Index, Index> pairs;                       // from index -> to index
  std::map<std::pair<Index, Index>, std::int64_t> observed_pairs;

  bool empty() const { return pairs.empty(); }
};

/// Indices refer to `from_vocab`/`to_vocab`. Items absent from
/// `attribute_map` are skipped; nodes absent from a vocab raise DataError.
CrossViewLinks build_cross_links(std::span<const Session> item_sessions,
                                 const std::unordered_map<NodeId, NodeId>& attribute_map,
                                 const Vocab& from_vocab, const Vocab& to_vocab, View to_view);

/// Raw (item, attribute) records variant; a repeated item with a different
/// attribute is a DataError.
std::unordered_map<NodeId, NodeId> attribute_map_from_pairs(
    std::span<const std::pair<NodeId, NodeId>> records);

/// Weighted random walks over the graph; transition probability is
/// proportional to edge weight. Nodes without out-edges end a walk.
std::vector<std::vector<Index>> random_walks(const ViewGraph& graph, std::size_t walk_length,
                                             std::size_t walks_per_node, std::mt19937_64& rng);

void dump_graph(std::ostream& out, const ViewGraph& g);   // src<TAB>dst<TAB>weight
void dump_vocab(std::ostream& out, const ViewGraph& g);   // id<TAB>index<TAB>freq
void dump_links(std::ostream& out, const CrossViewLinks& links, const Vocab& from,
                const Vocab& to);                          // from<TAB>to<TAB>count

}  // namespace mview
