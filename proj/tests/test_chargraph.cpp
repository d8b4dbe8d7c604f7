#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "sgcn/chargraph/graph.hpp"
#include "sgcn/numcore/gradcheck.hpp"
#include "sgcn/numcore/ops.hpp"
#include "support.hpp"

using namespace sgcn::chargraph;
using sgcn::ink::Stroke;
using sgcn::ink::Trajectory;
using sgcn::numcore::Rng;
using sgcn::numcore::Tape;
using sgcn::numcore::Var;

namespace {

Stroke line(std::size_t n, double y = 0.5) {
  Stroke s;
  for (std::size_t i = 0; i < n; ++i) s.push_back({0.1 * static_cast<double>(i), y});
  return s;
}

std::size_t count_self_loops(const CharGraph& g) {
  return static_cast<std::size_t>(std::count_if(g.edges.begin(), g.edges.end(), [](const Edge& e) { return e.src == e.dst; }));
}

}  // namespace

TEST_SUITE_BEGIN("chargraph");

TEST_CASE("build_graph: counting") {
  const CharGraph chain = build_graph(Trajectory{{line(5)}});
  CHECK(chain.num_nodes() == 5);
  CHECK(chain.edges.size() == 4);
  CHECK(chain.directed);

  const Trajectory two{{line(3, 0.2), line(4, 0.8)}};
  const CharGraph on = build_graph(two, true);
  CHECK(on.num_nodes() == 7);
  CHECK(on.edges.size() == 6);
  CHECK(std::count(on.stroke_start.begin(), on.stroke_start.end(), 1) == 1);

  const CharGraph off = build_graph(two, false);
  CHECK(off.edges.size() == 5);
  CHECK(std::count(off.stroke_start.begin(), off.stroke_start.end(), 1) == 2);
  CHECK(off.stroke_start[3] == 1);

  CHECK_THROWS_AS(build_graph(Trajectory{}), std::invalid_argument);
}

TEST_CASE("build_graph: one predecessor per non-start node") {
  Rng rng(1);
  for (bool penup : {true, false}) {
    Trajectory t = sgcn::test::random_polyline(6, rng);
    t.strokes.push_back(sgcn::test::random_polyline(4, rng).strokes[0]);
    t.strokes.push_back(sgcn::test::random_polyline(3, rng).strokes[0]);
    const CharGraph g = build_graph(t, penup);
    CHECK(g.num_nodes() == t.num_points());
    CHECK(g.edges.size() == g.num_nodes() - (penup ? 1 : t.strokes.size()));
    std::vector<int> incoming(g.num_nodes());
    for (const auto& e : g.edges) ++incoming[e.dst];
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
      CHECK(incoming[i] == (g.stroke_start[i] ? 0 : 1));
      CHECK((g.predecessor[i] == kNoPredecessor) == static_cast<bool>(g.stroke_start[i]));
    }
  }
}

TEST_CASE("node_features: horizontal motion, stroke start, diagonal") {
  const CharGraph g = build_graph(Trajectory{{{{0.5, 0.5}}, {{0.2, 0.2}, {0.3, 0.2}}, {{0.1, 0.1}, {0.4, 0.4}}}}, false);
  const auto f = node_features(g);
  REQUIRE(f.cols() == 6);
  const std::vector<double> start = {0.5, 0.5, 0, 0, 0, 0};
  const std::vector<double> horizontal = {0.3, 0.2, 0.1, 0, 0, 1};
  for (std::size_t c = 0; c < 6; ++c) {
    CHECK(f(0, c) == doctest::Approx(start[c]));
    CHECK(f(2, c) == doctest::Approx(horizontal[c]));
  }
  CHECK(f(4, 4) == doctest::Approx(std::sqrt(0.5)));
  CHECK(f(4, 5) == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("node_features: invariants on random graphs") {
  Rng rng(2);
  const CharGraph g = to_undirected_self_loops(build_graph(sgcn::ink::resample(sgcn::ink::normalize(
      Trajectory{{sgcn::test::random_polyline(10, rng).strokes[0], sgcn::test::random_polyline(5, rng).strokes[0]}}))));
  const auto f = node_features(g);
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    CHECK(f(i, 0) == g.coords(i, 0));
    CHECK(f(i, 1) == g.coords(i, 1));
    const double n2 = f(i, 4) * f(i, 4) + f(i, 5) * f(i, 5);
    CHECK((std::abs(n2) < 1e-6 || std::abs(n2 - 1) < 1e-6));
    const auto p = g.predecessor[i];
    if (p == kNoPredecessor) {
      CHECK(f(i, 2) == 0);
      CHECK(f(i, 3) == 0);
    } else {
      CHECK(f(i, 2) == g.coords(i, 0) - g.coords(static_cast<std::size_t>(p), 0));
      CHECK(f(i, 3) == g.coords(i, 1) - g.coords(static_cast<std::size_t>(p), 1));
    }
  }
}

TEST_CASE("node_features: gradient matches finite differences") {
  Rng rng(3);
  const CharGraph g = build_graph(sgcn::test::random_polyline(9, rng));
  const auto r = sgcn::test::random_tensor({g.num_nodes(), 6}, rng);
  auto fn = [&](Tape<double>& t, std::span<const Var> in) {
    return sgcn::numcore::sum(t, sgcn::numcore::mul(t, node_features(t, in[0], g.predecessor), t.leaf(r)));
  };
  CHECK(sgcn::numcore::gradcheck(fn, {g.coords}).max_rel_error < 1e-4);
}

TEST_CASE("to_undirected_self_loops") {
  const CharGraph chain = build_graph(Trajectory{{line(3)}});
  const CharGraph u = to_undirected_self_loops(chain);
  CHECK(u.edges.size() == 7);
  CHECK_FALSE(u.directed);
  CHECK(u.coords == chain.coords);
  CHECK(to_undirected_self_loops(u).edges == u.edges);

  const CharGraph long_chain = to_undirected_self_loops(build_graph(Trajectory{{line(6)}}));
  int degree = 0;
  for (const auto& e : long_chain.edges) degree += e.dst == 2;
  CHECK(degree == 3);
}

TEST_CASE("to_undirected_self_loops: closed, duplicate-free, N self-loops") {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const CharGraph g = to_undirected_self_loops(
        build_graph(sgcn::ink::resample(sgcn::ink::normalize(sgcn::test::random_polyline(7, rng)), 0.05)));
    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    for (const auto& e : g.edges) CHECK(seen.insert({e.src, e.dst}).second);
    for (const auto& e : g.edges) CHECK(seen.count({e.dst, e.src}) == 1);
    CHECK(count_self_loops(g) == g.num_nodes());
    CHECK(g.edges.size() <= 4 * g.num_nodes());
  }
}

TEST_CASE("batch_graphs") {
  const CharGraph a = to_undirected_self_loops(build_graph(Trajectory{{line(3)}}));
  const CharGraph b = to_undirected_self_loops(build_graph(Trajectory{{line(4, 0.1)}}));

  const CharGraph just_a[] = {a};
  const BatchedGraph one = batch_graphs(just_a);
  CHECK(one.coords == a.coords);
  CHECK(one.edges == a.edges);
  CHECK(one.predecessor == a.predecessor);

  const CharGraph both[] = {a, b};
  const BatchedGraph ab = batch_graphs(both);
  CHECK(ab.num_nodes() == 7);
  CHECK(ab.graph_sizes == std::vector<std::size_t>{3, 4});
  CHECK(ab.batch_id == std::vector<std::uint32_t>{0, 0, 0, 1, 1, 1, 1});
  for (std::size_t k = 0; k < b.edges.size(); ++k) {
    CHECK(ab.edges[a.edges.size() + k].src == b.edges[k].src + 3);
    CHECK(ab.edges[a.edges.size() + k].dst == b.edges[k].dst + 3);
  }
  for (const auto& e : ab.edges) CHECK(ab.batch_id[e.src] == ab.batch_id[e.dst]);
  CHECK(ab.predecessor[4] == 3);

  const CharGraph mixed[] = {a, build_graph(Trajectory{{line(2)}})};
  CHECK_THROWS_AS(batch_graphs(mixed), std::invalid_argument);
}

TEST_CASE("conv_cost_ratio") {
  const CostReport r = conv_cost_ratio(64, 64, 100, 3);
  CHECK(r.image_cost == 36864);
  CHECK(r.graph_cost == 300);
  CHECK(r.ratio == 122.88);
  CHECK(conv_cost_ratio(1, 1, 1, 9).ratio == 1);
  CHECK(conv_cost_ratio(64, 64, 200, 3).ratio == r.ratio / 2);
  CHECK_THROWS_AS(conv_cost_ratio(64, 64, 0, 3), std::invalid_argument);
}

TEST_SUITE_END();
