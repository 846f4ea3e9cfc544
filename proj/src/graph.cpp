#include "mview/graph.hpp"

#include <algorithm>
#include <ostream>

namespace mview {

Index Vocab::add(const NodeId& id) {
  auto [it, inserted] = index_.emplace(id, static_cast<Index>(ids_.size()));
  if (inserted) ids_.push_back(id);
  return it->second;
}

std::optional<Index> Vocab::find(const NodeId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Index Vocab::at(const NodeId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw DataError("unknown node '" + id + "'");
  return it->second;
}

std::int64_t ViewGraph::total_weight() const {
  std::int64_t w = 0;
  for (const auto& [k, v] : edges) w += v;
  return w;
}

ViewGraph build_view_graph(std::span<const Session> sessions, bool undirected) {
  ViewGraph g;
  g.undirected = undirected;
  if (!sessions.empty()) g.view = sessions.front().view;
  for (const auto& s : sessions) {
    Index prev = -1;
    for (const auto& node : s.nodes) {
      const Index idx = g.vocab.add(node);
      if (static_cast<std::size_t>(idx) >= g.node_freq.size()) g.node_freq.push_back(0);
      ++g.node_freq[static_cast<std::size_t>(idx)];
      if (prev >= 0 && prev != idx) {
        EdgeKey key{prev, idx};
        if (undirected && key.dst < key.src) std::swap(key.src, key.dst);
        ++g.edges[key];
      }
      prev = idx;
    }
  }
  return g;
}

void merge_graph(ViewGraph& into, const ViewGraph& shard) {
  std::vector<Index> remap(static_cast<std::size_t>(shard.vocab.size()));
  for (Index i = 0; i < shard.vocab.size(); ++i) {
    const Index j = into.vocab.add(shard.vocab.id(i));
    if (static_cast<std::size_t>(j) >= into.node_freq.size()) into.node_freq.push_back(0);
    into.node_freq[static_cast<std::size_t>(j)] += shard.node_freq[static_cast<std::size_t>(i)];
    remap[static_cast<std::size_t>(i)] = j;
  }
  for (const auto& [key, w] : shard.edges) {
    EdgeKey k{remap[static_cast<std::size_t>(key.src)], remap[static_cast<std::size_t>(key.dst)]};
    if (into.undirected && k.dst < k.src) std::swap(k.src, k.dst);
    into.edges[k] += w;
  }
}

CrossViewLinks build_cross_links(std::span<const Session> item_sessions,
                                 const std::unordered_map<NodeId, NodeId>& attribute_map,
                                 const Vocab& from_vocab, const Vocab& to_vocab, View to_view) {
  CrossViewLinks links;
  links.from_view = View::item;
  links.to_view = to_view;
  for (const auto& s : item_sessions) {
    for (const auto& item : s.nodes) {
      auto it = attribute_map.find(item);
      if (it == attribute_map.end()) continue;
      const Index from = from_vocab.at(item);
      const auto to_opt = to_vocab.find(it->second);
      if (!to_opt) continue;  // attribute only occurs in dropped sessions
      const Index to = *to_opt;
      auto [p, inserted] = links.pairs.emplace(from, to);
      if (!inserted && p->second != to)
        throw DataError("item '" + item + "' maps to two attributes");
      ++links.observed_pairs[{from, to}];
    }
  }
  return links;
}

std::unordered_map<NodeId, NodeId> attribute_map_from_pairs(
    std::span<const std::pair<NodeId, NodeId>> records) {
  std::unordered_map<NodeId, NodeId> out;
  for (const auto& [item, attr] : records) {
    auto [it, inserted] = out.emplace(item, attr);
    if (!inserted && it->second != attr)
      throw DataError("item '" + item + "' has two attributes: '" + it->second + "' and '" +
                      attr + "'");
  }
  return out;
}

std::vector<std::vector<Index>> random_walks(const ViewGraph& graph, std::size_t walk_length,
                                             std::size_t walks_per_node, std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(graph.vocab.size());
  std::vector<std::vector<std::pair<Index, double>>> adj(n);
  for (const auto& [key, w] : graph.edges) {
    adj[static_cast<std::size_t>(key.src)].emplace_back(key.dst, static_cast<double>(w));
    if (graph.undirected)
      adj[static_cast<std::size_t>(key.dst)].emplace_back(key.src, static_cast<double>(w));
  }
  std::vector<std::vector<double>> cdf(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0;
    for (const auto& [dst, w] : adj[i]) cdf[i].push_back(acc += w);
  }

  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<std::vector<Index>> walks;
  walks.reserve(n * walks_per_node);
  for (std::size_t r = 0; r < walks_per_node; ++r) {
    for (std::size_t start = 0; start < n; ++start) {
      std::vector<Index> walk{static_cast<Index>(start)};
      while (walk.size() < walk_length) {
        const auto cur = static_cast<std::size_t>(walk.back());
        if (adj[cur].empty()) break;
        const double u = uni(rng) * cdf[cur].back();
        auto it = std::upper_bound(cdf[cur].begin(), cdf[cur].end(), u);
        const auto k = std::min<std::size_t>(static_cast<std::size_t>(it - cdf[cur].begin()),
                                             adj[cur].size() - 1);
        walk.push_back(adj[cur][k].first);
      }
      walks.push_back(std::move(walk));
    }
  }
  return walks;
}

void dump_graph(std::ostream& out, const ViewGraph& g) {
  for (const auto& [key, w] : g.edges)
    out << g.vocab.id(key.src) << '\t' << g.vocab.id(key.dst) << '\t' << w << '\n';
}

void dump_vocab(std::ostream& out, const ViewGraph& g) {
  for (Index i = 0; i < g.vocab.size(); ++i)
    out << g.vocab.id(i) << '\t' << i << '\t' << g.node_freq[static_cast<std::size_t>(i)] << '\n';
}

void dump_links(std::ostream& out, const CrossViewLinks& links, const Vocab& from,
                const Vocab& to) {
  for (const auto& [pair, count] : links.observed_pairs)
    out << from.id(pair.first) << '\t' << to.id(pair.second) << '\t' << count << '\n';
}

}  // namespace mview
