#include <filesystem>
#include <sstream>
#include <set>

#include <gtest/gtest.h>

#include "hyperdet/diffusion.hpp"
#include "hyperdet/hypergraph.hpp"

using namespace hyperdet;

namespace {

// Dense H read off the edge lists, row = node.
std::vector<std::vector<int>> dense(const IncidenceView& h) {
  std::vector<std::vector<int>> m(h.num_nodes, std::vector<int>(h.num_edges, 0));
  for (EdgeId e = 0; e < h.num_edges; ++e)
    for (NodeId v : h.edge_nodes[e]) m[v][e] = 1;
  return m;
}

}  // namespace

TEST(Incidence, PathOfTwoEdges) {
  const Hypergraph g(3, {{0, 1}, {1, 2}});
  const auto h = build_incidence(g);
  EXPECT_EQ(dense(h), (std::vector<std::vector<int>>{{1, 0}, {1, 1}, {0, 1}}));
  EXPECT_TRUE(h.contains(1, 0));
  EXPECT_FALSE(h.contains(0, 1));
}

TEST(Incidence, SingleEdge) {
  const auto h = build_incidence(Hypergraph(2, {{0, 1}}));
  EXPECT_EQ(dense(h), (std::vector<std::vector<int>>{{1}, {1}}));
}

TEST(Incidence, MembershipRow) {
  const auto h = build_incidence(Hypergraph(4, {{0, 1, 2}, {1, 2, 3}}));
  EXPECT_EQ(h.node_edges[1], (std::vector<EdgeId>{0, 1}));
}

TEST(Incidence, BothOrientationsAgreeOnRandomGraphs) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = random_hypergraph(40, 60, {2, 6}, seed);
    const auto h = build_incidence(g);
    std::size_t pairs = 0;
    for (NodeId v = 0; v < h.num_nodes; ++v)
      for (EdgeId e : h.node_edges[v]) {
        ++pairs;
        EXPECT_TRUE(std::binary_search(h.edge_nodes[e].begin(), h.edge_nodes[e].end(), v));
      }
    std::size_t cols = 0;
    for (const auto& e : h.edge_nodes) cols += e.size();
    EXPECT_EQ(pairs, cols);
    EXPECT_EQ(build_incidence(g).node_edges, h.node_edges);  // idempotent
  }
}

TEST(Degrees, HandCounts) {
  const Hypergraph g(3, {{0, 1}, {1, 2}});
  const auto d = degrees(g);
  EXPECT_EQ(d.node, (std::vector<double>{1, 2, 1}));
  EXPECT_EQ(d.edge, (std::vector<double>{2, 2}));
  const auto dw = degrees(Hypergraph(3, {{0, 1}, {1, 2}}, {2.0, 1.0}));
  EXPECT_EQ(dw.node, (std::vector<double>{2, 3, 1}));
  EXPECT_EQ(degrees(Hypergraph(4, {{0, 1, 2, 3}})).edge, (std::vector<double>{4}));
}

TEST(Degrees, HandshakeIdentityAndIncidenceSums) {
  Rng rng(3);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t n = 10 + seed * 3, m = 20 + seed * 6;
    auto g0 = random_hypergraph(n, m, {2, 5}, seed);
    std::vector<double> w(g0.num_edges());
    // dyadic weights keep every partial sum exact
    for (auto& x : w) x = static_cast<double>(rng() % 8) / 4.0;
    const Hypergraph g(n, g0.edges(), w);
    const auto d = degrees(g);
    double lhs = 0.0, rhs = 0.0;
    for (double x : d.node) lhs += x;
    for (EdgeId e = 0; e < g.num_edges(); ++e) rhs += w[e] * d.edge[e];
    EXPECT_EQ(lhs, rhs);
    const auto h = build_incidence(g0);
    const auto d1 = degrees(g0);
    for (NodeId v = 0; v < n; ++v) EXPECT_EQ(static_cast<double>(h.node_edges[v].size()), d1.node[v]);
    for (EdgeId e = 0; e < g0.num_edges(); ++e) EXPECT_EQ(static_cast<double>(h.edge_nodes[e].size()), d1.edge[e]);
  }
}

TEST(CliqueExpansion, Examples) {
  using P = std::vector<std::pair<NodeId, NodeId>>;
  EXPECT_EQ(clique_expansion(Hypergraph(3, {{0, 1, 2}})), (P{{0, 1}, {0, 2}, {1, 2}}));
  EXPECT_EQ(clique_expansion(Hypergraph(3, {{0, 1}, {1, 2}})), (P{{0, 1}, {1, 2}}));
  EXPECT_EQ(clique_expansion(Hypergraph(3, {{0, 1, 2}, {1, 2}})), (P{{0, 1}, {0, 2}, {1, 2}}));
}

TEST(CliqueExpansion, EveryCoMemberPairExactlyOnce) {
  const auto g = random_hypergraph(30, 40, {2, 5}, 11);
  const auto pairs = clique_expansion(g);
  std::set<std::pair<NodeId, NodeId>> expected;
  for (const auto& e : g.edges())
    for (NodeId a : e)
      for (NodeId b : e)
        if (a < b) expected.insert({a, b});
  EXPECT_EQ(pairs.size(), expected.size());
  EXPECT_TRUE(std::equal(pairs.begin(), pairs.end(), expected.begin()));
  const auto ce = clique_expansion_hypergraph(g);
  for (const auto& e : ce.edges()) EXPECT_EQ(e.size(), 2u);
}

TEST(Hypergraph, ValidationErrors) {
  EXPECT_THROW(Hypergraph(3, {{0, 5}}), ConfigError);
  EXPECT_THROW(Hypergraph(3, {{1}}), ConfigError);
  EXPECT_THROW(Hypergraph(3, {{1, 1}}), ConfigError);
  EXPECT_THROW(Hypergraph(3, {{0, 1}}, {-1.0}), ConfigError);
  EXPECT_NO_THROW(Hypergraph(3, {{0, 1}, {1, 0}}));  // duplicates allowed
}

TEST(Hypergraph, LabeledEdges) {
  const auto lg = from_labeled_edges({{"alice", "bob"}, {"bob", "carol", "dave"}});
  EXPECT_EQ(lg.graph.num_nodes(), 4u);
  EXPECT_EQ(lg.labels[2], "carol");
  EXPECT_EQ(lg.graph.edge(1), (Edge{1, 2, 3}));
}

TEST(HypergraphIo, TextFormat) {
  std::istringstream in("3 2\n0 1\n1 2");
  const auto g = parse_hypergraph(in);
  EXPECT_EQ(g, Hypergraph(3, {{0, 1}, {1, 2}}, {1.0, 1.0}));
}

TEST(HypergraphIo, CommentsAndWeights) {
  std::istringstream in("# header\n4 2\n# edge list\nw=2.5 0 1 2\n3 2\n");
  const auto g = parse_hypergraph(in);
  EXPECT_EQ(g.weights(), (std::vector<double>{2.5, 1.0}));
  EXPECT_EQ(g.edge(1), (Edge{2, 3}));
}

TEST(HypergraphIo, OutOfRangeReportsLine) {
  std::istringstream in("3 1\n0 5\n");
  try {
    parse_hypergraph(in);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("out of range"), std::string::npos);
  }
}

TEST(HypergraphIo, RejectsSingletonsAndNegativeWeights) {
  std::istringstream a("3 1\n1\n"), b("3 1\nw=-1 0 1\n"), c("3 2\n0 1\n"), d("3 1\n0 x\n");
  EXPECT_THROW(parse_hypergraph(a), ParseError);
  EXPECT_THROW(parse_hypergraph(b), ParseError);
  EXPECT_THROW(parse_hypergraph(c), ParseError);
  EXPECT_THROW(parse_hypergraph(d), ParseError);
}

TEST(HypergraphIo, JsonForm) {
  std::istringstream in(R"({"n": 3, "edges": [[2, 0], [1, 2]], "weights": [1, 0.5]})");
  const auto g = parse_hypergraph(in);
  EXPECT_EQ(g.edge(0), (Edge{0, 2}));
  EXPECT_EQ(g.weight(1), 0.5);
  EXPECT_EQ(hypergraph_from_json(hypergraph_to_json(g)), g);
}

TEST(HypergraphIo, RoundTripRandom) {
  const auto dir = std::filesystem::path(HYPERDET_TEST_TMP);
  std::filesystem::create_directories(dir);
  auto g0 = random_hypergraph(50, 80, {2, 5}, 5);
  std::vector<double> w(g0.num_edges());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.1 * static_cast<double>(i % 7) + 1.0 / 3.0;
  const Hypergraph g(50, g0.edges(), w);
  const auto path = (dir / "roundtrip.txt").string();
  save_hypergraph(g, path);
  EXPECT_EQ(load_hypergraph(path), g);
  EXPECT_THROW(load_hypergraph((dir / "missing.txt").string()), IoError);
}
