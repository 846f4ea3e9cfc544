#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "mview/graph.hpp"

using namespace mview;

namespace {

std::vector<Session> sessions_of(std::vector<std::vector<NodeId>> lists, View v = View::item) {
  std::vector<Session> out;
  for (auto& l : lists) {
    Session s;
    s.user_id = "u";
    s.view = v;
    s.nodes = std::move(l);
    out.push_back(std::move(s));
  }
  return out;
}

std::map<std::pair<NodeId, NodeId>, std::int64_t> named_edges(const ViewGraph& g) {
  std::map<std::pair<NodeId, NodeId>, std::int64_t> out;
  for (const auto& [k, w] : g.edges) out[{g.vocab.id(k.src), g.vocab.id(k.dst)}] = w;
  return out;
}

}  // namespace

TEST_CASE("build_view_graph: [[A,B,C],[A,B]] gives A->B:2, B->C:1") {
  auto g = build_view_graph(sessions_of({{"A", "B", "C"}, {"A", "B"}}));
  CHECK(named_edges(g) == std::map<std::pair<NodeId, NodeId>, std::int64_t>{
                              {{"A", "B"}, 2}, {{"B", "C"}, 1}});
  CHECK(g.vocab.ids() == std::vector<NodeId>{"A", "B", "C"});
  CHECK(g.node_freq == std::vector<std::int64_t>{2, 2, 1});
  CHECK(g.total_weight() == 3);
  CHECK(g.num_edges() == 2);
}

TEST_CASE("build_view_graph: single node and empty input") {
  auto g = build_view_graph(sessions_of({{"A"}}));
  CHECK(g.edges.empty());
  CHECK(g.node_freq == std::vector<std::int64_t>{1});
  CHECK(build_view_graph({}).vocab.empty());
}

TEST_CASE("build_view_graph: category graph has fewer nodes than the item graph") {
  auto items = sessions_of({{"I1", "I2", "I3"}, {"I4", "I2"}});
  std::unordered_map<NodeId, NodeId> cat{{"I1", "C1"}, {"I2", "C1"}, {"I3", "C2"}, {"I4", "C2"}};
  auto cats = items;
  for (auto& s : cats) {
    for (auto& n : s.nodes) n = cat.at(n);
    collapse_duplicates(s.nodes);
  }
  CHECK(build_view_graph(cats).vocab.size() < build_view_graph(items).vocab.size());
}

TEST_CASE("build_view_graph: undirected flag folds both directions into one edge") {
  auto g = build_view_graph(sessions_of({{"A", "B"}, {"B", "A"}}), true);
  CHECK(g.num_edges() == 1);
  CHECK(g.total_weight() == 2);
}

TEST_CASE("property: permuting sessions keeps edges; total weight is sum(len - 1)") {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> node(0, 9), len(1, 7);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<NodeId>> lists;
    std::int64_t expected = 0, occurrences = 0;
    for (int s = 0; s < 12; ++s) {
      std::vector<NodeId> l;
      const int n = len(rng);
      while (static_cast<int>(l.size()) < n) {
        auto id = "n" + std::to_string(node(rng));
        if (l.empty() || l.back() != id) l.push_back(id);
      }
      expected += static_cast<std::int64_t>(l.size()) - 1;
      occurrences += static_cast<std::int64_t>(l.size());
      lists.push_back(l);
    }
    auto a = build_view_graph(sessions_of(lists));
    std::shuffle(lists.begin(), lists.end(), rng);
    auto b = build_view_graph(sessions_of(lists));
    CHECK(named_edges(a) == named_edges(b));
    CHECK(a.total_weight() == expected);
    std::int64_t freq = 0;
    for (auto f : a.node_freq) freq += f;
    CHECK(freq == occurrences);
    for (const auto& [k, w] : a.edges) {
      CHECK(w >= 1);
      CHECK(k.src != k.dst);
    }
  }
}

TEST_CASE("merge_graph: sharded counting equals a single build") {
  auto lists = std::vector<std::vector<NodeId>>{{"A", "B", "C"}, {"C", "D"}, {"D", "A", "B"}};
  auto whole = build_view_graph(sessions_of(lists));
  auto shard1 = build_view_graph(sessions_of({lists[0]}));
  auto shard2 = build_view_graph(sessions_of({lists[1], lists[2]}));
  merge_graph(shard1, shard2);
  CHECK(named_edges(shard1) == named_edges(whole));
  CHECK(shard1.total_weight() == whole.total_weight());
}

TEST_CASE("build_cross_links: three pairs, two categories, counts per occurrence") {
  auto items = sessions_of({{"I1", "I2", "I3"}, {"I1", "I3"}, {"I1", "I2"}, {"I1"}, {"I1"}});
  std::unordered_map<NodeId, NodeId> attr{{"I1", "C2"}, {"I2", "C2"}, {"I3", "C1"}};
  auto ig = build_view_graph(items);
  auto cg = build_view_graph(sessions_of({{"C2", "C1"}}, View::category));
  auto links = build_cross_links(items, attr, ig.vocab, cg.vocab, View::category);
  CHECK(links.pairs.size() == 3);
  std::set<Index> distinct;
  for (const auto& [from, to] : links.pairs) distinct.insert(to);
  CHECK(distinct.size() == 2);
  CHECK(links.observed_pairs.at({ig.vocab.at("I1"), cg.vocab.at("C2")}) == 5);

  std::stringstream dump;
  dump_links(dump, links, ig.vocab, cg.vocab);
  CHECK(dump.str().find("I1\tC2\t5\n") != std::string::npos);
}

TEST_CASE("build_cross_links: no items give empty links") {
  Vocab v;
  CHECK(build_cross_links({}, {}, v, v, View::category).empty());
}

TEST_CASE("attribute_map_from_pairs: two attributes for one item is a data error") {
  std::vector<std::pair<NodeId, NodeId>> ok{{"I1", "C1"}, {"I1", "C1"}, {"I2", "C1"}};
  CHECK(attribute_map_from_pairs(ok).size() == 2);
  std::vector<std::pair<NodeId, NodeId>> bad{{"I1", "C1"}, {"I1", "C2"}};
  CHECK_THROWS_AS(attribute_map_from_pairs(bad), DataError);
}

TEST_CASE("dumps use the documented tab-separated layouts") {
  auto g = build_view_graph(sessions_of({{"A", "B"}}));
  std::stringstream edges, vocab;
  dump_graph(edges, g);
  dump_vocab(vocab, g);
  CHECK(edges.str() == "A\tB\t1\n");
  CHECK(vocab.str() == "A\t0\t1\nB\t1\t1\n");
}

TEST_CASE("random_walks follow existing edges") {
  auto g = build_view_graph(sessions_of({{"A", "B", "C"}, {"B", "A"}}));
  std::mt19937_64 rng(1);
  auto walks = random_walks(g, 6, 3, rng);
  CHECK(walks.size() == 9);
  for (const auto& w : walks)
    for (std::size_t i = 1; i < w.size(); ++i) CHECK(g.edges.count({w[i - 1], w[i]}) == 1);
}
