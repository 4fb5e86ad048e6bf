#include <gtest/gtest.h>

#include <sstream>

#include "asymgraph/graph.hpp"
#include "test_util.hpp"

using namespace asymgraph;

namespace {

std::vector<NodeId> list(std::span<const NodeId> s) { return {s.begin(), s.end()}; }

constexpr NodeId A = 0, B = 1, C = 2;

}  // namespace

TEST(BuildGraph, SingleCoPurchaseEdge) {
  const auto g = build_graph(2, {{A, B}}, {});
  EXPECT_EQ(list(g.neighbors(A, RelationKind::CoPurchase, Direction::Out)), std::vector<NodeId>{B});
  EXPECT_EQ(list(g.neighbors(B, RelationKind::CoPurchase, Direction::In)), std::vector<NodeId>{A});
  EXPECT_TRUE(g.neighbors(A, RelationKind::CoPurchase, Direction::In).empty());
  EXPECT_TRUE(g.cv_edges().empty());
}

TEST(BuildGraph, CoViewIsSymmetrized) {
  const auto g = build_graph(2, {}, {{A, B}});
  EXPECT_EQ(list(g.neighbors(A, RelationKind::CoView, Direction::Out)), std::vector<NodeId>{B});
  EXPECT_EQ(list(g.neighbors(B, RelationKind::CoView, Direction::Out)), std::vector<NodeId>{A});
  EXPECT_EQ(g.cv_pairs().size(), 1u);
}

TEST(BuildGraph, DuplicatesMergedAndSelfLoopsDropped) {
  const auto g = build_graph(2, {{A, B}, {A, B}, {A, A}}, {{B, B}, {A, B}, {B, A}});
  EXPECT_EQ(g.cp_edges(), (EdgeList{{A, B}}));
  EXPECT_EQ(g.cv_edges(), (EdgeList{{A, B}, {B, A}}));
}

TEST(BuildGraph, OutOfRangeEndpointIsDataError) {
  EXPECT_THROW(build_graph(2, {{A, 5}}, {}), DataError);
}

TEST(Neighbors, OutOfRangeIdIsError) {
  const auto g = build_graph(2, {{A, B}}, {});
  EXPECT_THROW(g.neighbors(2, RelationKind::CoPurchase, Direction::Out), UsageError);
}

TEST(OneWayEdges, ReciprocalPairExcluded) {
  EXPECT_EQ(one_way_cp_edges(build_graph(3, {{A, B}, {B, A}, {A, C}}, {})), (EdgeList{{A, C}}));
}

TEST(OneWayEdges, EmptyGraph) { EXPECT_TRUE(one_way_cp_edges(build_graph(3, {}, {})).empty()); }

TEST(OneWayEdges, CycleIsAllOneWay) {
  EXPECT_EQ(one_way_cp_edges(build_graph(3, {{A, B}, {B, C}, {C, A}}, {})), (EdgeList{{A, B}, {B, C}, {C, A}}));
}

TEST(GraphProperties, OutAndInViewsEncodeTheSameEdges) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto g = testutil::random_graph(30, 0.1, 0.08, seed);
    for (auto kind : {RelationKind::CoPurchase, RelationKind::CoView}) {
      EdgeList from_out, from_in;
      for (NodeId u = 0; u < g.num_nodes(); ++u) {
        for (NodeId v : g.neighbors(u, kind, Direction::Out)) from_out.push_back({u, v});
        for (NodeId v : g.neighbors(u, kind, Direction::In)) from_in.push_back({v, u});
      }
      std::sort(from_in.begin(), from_in.end());
      EXPECT_EQ(from_out, from_in);
      for (const auto& e : from_out) EXPECT_NE(e.src, e.dst);
    }
    for (const auto& e : g.cv_edges()) EXPECT_TRUE(g.has_edge(e.dst, e.src, RelationKind::CoView));
  }
}

TEST(GraphProperties, OneWayPlusReciprocalIsEveryCoPurchaseEdge) {
  const auto g = testutil::random_graph(40, 0.1, 0.0, 3);
  auto edges = one_way_cp_edges(g);
  for (const auto& e : g.cp_edges())
    if (g.has_edge(e.dst, e.src, RelationKind::CoPurchase)) edges.push_back(e);
  std::sort(edges.begin(), edges.end());
  EXPECT_EQ(edges, g.cp_edges());
}

TEST(GraphProperties, RebuildFromDumpIsIdentical) {
  const auto g = testutil::random_graph(25, 0.15, 0.1, 9);
  KeyMap keys;
  for (NodeId i = 0; i < g.num_nodes(); ++i) keys.insert("p" + std::to_string(i));
  std::stringstream dump;
  write_edge_file(dump, g, keys);
  const auto first = dump.str();
  const auto parsed = read_edge_file(dump, keys, false);
  const DirectedProductGraph rebuilt(g.num_nodes(), parsed.cp, parsed.cv);
  EXPECT_EQ(rebuilt, g);
  std::stringstream again;
  write_edge_file(again, rebuilt, keys);
  EXPECT_EQ(again.str(), first);
}

TEST(GraphStats, CountsAndShares) {
  // (0,1) reciprocal pair, (0,2) one-way, one co-view pair.
  const auto s = graph_stats(build_graph(4, {{0, 1}, {1, 0}, {0, 2}}, {{2, 3}}));
  EXPECT_EQ(s.num_nodes, 4u);
  EXPECT_EQ(s.cp_edges, 3u);
  EXPECT_EQ(s.cv_pairs, 1u);
  EXPECT_EQ(s.one_way_cp, 1u);
  EXPECT_EQ(s.reciprocal_cp_pairs, 1u);
  EXPECT_DOUBLE_EQ(s.avg_degree, 4.0 / 4.0);
  EXPECT_DOUBLE_EQ(s.directed_share, 0.5);
}

TEST(KeyMapTest, Bijection) {
  KeyMap k;
  EXPECT_EQ(k.insert("x"), 0u);
  EXPECT_EQ(k.insert("y"), 1u);
  EXPECT_EQ(k.insert("x"), 0u);
  EXPECT_EQ(k.key(1), "y");
  EXPECT_EQ(k.id("y"), 1u);
  EXPECT_THROW(k.id("z"), DataError);
  EXPECT_THROW(k.key(2), UsageError);
}

TEST(EdgeFile, ParsesCommentsAndCarriageReturns) {
  std::istringstream in("# header\nA\tB\tcp\r\n\nB\tC\tcv\n");
  KeyMap keys;
  const auto e = read_edge_file(in, keys, true);
  EXPECT_EQ(keys.size(), 3u);
  EXPECT_EQ(e.cp, (EdgeList{{0, 1}}));
  EXPECT_EQ(e.cv, (EdgeList{{1, 2}}));
}

TEST(EdgeFile, MalformedLinesReportLineNumbers) {
  std::istringstream in("A\tB\tcp\nA\tB\nA\tB\tbuy\nA\tB\tcv\n");
  KeyMap keys;
  try {
    read_edge_file(in, keys, true);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("2,3"), std::string::npos) << e.what();
  }
}

TEST(EdgeFile, UnknownKeysReportLineNumbers) {
  KeyMap keys({"A", "B"});
  std::istringstream in("A\tB\tcp\nA\tZ\tcp\nQ\tB\tcv\n");
  try {
    read_edge_file(in, keys, false);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("2,3"), std::string::npos) << e.what();
  }
}

TEST(GraphTransforms, WithoutCoViewKeepsCoPurchase) {
  const auto g = build_graph(3, {{0, 1}}, {{1, 2}});
  const auto h = without_cv(g);
  EXPECT_EQ(h.cp_edges(), g.cp_edges());
  EXPECT_TRUE(h.cv_edges().empty());
}
