#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "sgcn/coarsen/pool.hpp"
#include "sgcn/numcore/gradcheck.hpp"
#include "sgcn/numcore/ops.hpp"
#include "support.hpp"

using namespace sgcn::coarsen;
using sgcn::numcore::Rng;
using sgcn::test::random_graph;
using sgcn::test::random_tensor;

TEST_SUITE_BEGIN("coarsen");

TEST_CASE("grid_cluster: small cases") {
  const auto four = Tensor<double>::matrix({{0.11, 0.12}, {0.13, 0.14}, {0.12, 0.11}, {0.14, 0.13}});
  const std::vector<std::uint32_t> ids4(4, 0);
  CHECK(grid_cluster(four, ids4, 0.05).num_clusters == 1);

  const auto apart = Tensor<double>::matrix({{0.01, 0.01}, {0.51, 0.01}, {0.01, 0.51}, {0.51, 0.51}});
  const auto a = grid_cluster(apart, ids4, 0.25);
  CHECK(a.num_clusters == 4);
  CHECK(a.cluster == std::vector<std::uint32_t>{0, 1, 2, 3});

  const std::vector<std::uint32_t> two_graphs = {0, 0, 1, 1};
  const auto whole = grid_cluster(apart, two_graphs, 1.0);
  CHECK(whole.num_clusters == 2);
  CHECK(whole.cluster == std::vector<std::uint32_t>{0, 0, 1, 1});
  CHECK(whole.batch_id == std::vector<std::uint32_t>{0, 1});
}

TEST_CASE("grid_cluster: first-occurrence ids, graphs never merge") {
  Rng rng(1);
  const auto c = random_tensor({40, 2}, rng, 0, 1);
  std::vector<std::uint32_t> ids(40);
  for (std::size_t i = 0; i < 40; ++i) ids[i] = i < 25 ? 0 : 1;
  const auto a = grid_cluster(c, ids, 0.2);
  std::uint32_t next = 0;
  std::map<std::tuple<std::uint32_t, long, long>, std::uint32_t> seen;
  for (std::size_t i = 0; i < 40; ++i) {
    const auto key = std::make_tuple(ids[i], static_cast<long>(std::floor(c(i, 0) / 0.2)),
                                     static_cast<long>(std::floor(c(i, 1) / 0.2)));
    auto [it, fresh] = seen.emplace(key, next);
    if (fresh) ++next;
    CHECK(a.cluster[i] == it->second);
    CHECK(a.batch_id[a.cluster[i]] == ids[i]);
  }
  CHECK(a.num_clusters == next);
}

TEST_CASE("pool_graph: singleton clusters leave the graph unchanged") {
  Rng rng(2);
  const auto g = random_graph(10, rng);
  const auto f = random_tensor({10, 3}, rng);
  const std::vector<std::uint32_t> ids(10, 0);
  const auto a = grid_cluster(g.coords, ids, 1e-6);
  REQUIRE(a.num_clusters == 10);
  const auto [cg, cf] = pool_graph(g, f, a);
  CHECK(cg.coords == g.coords);
  CHECK(cf == f);
  CHECK(cg.edges == g.edges);
}

TEST_CASE("pool_graph: mean coordinates, max features") {
  sgcn::chargraph::CharGraph g;
  g.coords = Tensor<double>::matrix({{0.1, 0.1}, {0.3, 0.1}});
  g.edges = {{1, 0}, {0, 1}, {0, 0}, {1, 1}};
  g.stroke_start = {1, 0};
  g.predecessor = {-1, 0};
  g.directed = false;
  const auto f = Tensor<double>::matrix({{1, -2}, {0, 5}});
  const std::vector<std::uint32_t> ids(2, 0);
  const auto [cg, cf] = pool_graph(g, f, grid_cluster(g.coords, ids, 0.5));
  REQUIRE(cg.num_nodes() == 1);
  CHECK(cg.coords(0, 0) == doctest::Approx(0.2));
  CHECK(cg.coords(0, 1) == doctest::Approx(0.1));
  CHECK(cf == Tensor<double>::matrix({{1, 5}}));
  CHECK(cg.edges == std::vector<Edge>{{0, 0}});
  const auto [mg, mf] = pool_graph(g, f, grid_cluster(g.coords, ids, 0.5), Reduce::mean);
  CHECK(mf == Tensor<double>::matrix({{0.5, 1.5}}));
}

TEST_CASE("pool_graph: properties on random graphs") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5 + static_cast<std::size_t>(rng.uniform() * 30);
    const auto g = random_graph(n, rng);
    const auto f = random_tensor({n, 2}, rng);
    const std::vector<std::uint32_t> ids(n, 0);
    const auto a = grid_cluster(g.coords, ids, 0.3);
    const auto [cg, cf] = pool_graph(g, f, a);
    CHECK(cg.num_nodes() == a.num_clusters);
    CHECK(cg.num_nodes() <= n);
    std::vector<int> members(a.num_clusters);
    for (auto c : a.cluster) ++members[c];
    if (*std::max_element(members.begin(), members.end()) >= 2) CHECK(cg.num_nodes() < n);

    for (std::uint32_t c = 0; c < a.num_clusters; ++c) {
      double lo[2] = {1e9, 1e9}, hi[2] = {-1e9, -1e9};
      for (std::size_t i = 0; i < n; ++i) {
        if (a.cluster[i] != c) continue;
        for (std::size_t d = 0; d < 2; ++d) {
          lo[d] = std::min(lo[d], g.coords(i, d));
          hi[d] = std::max(hi[d], g.coords(i, d));
          CHECK(cf(c, d) >= f(i, d));
        }
      }
      for (std::size_t d = 0; d < 2; ++d) {
        CHECK(cg.coords(c, d) >= lo[d] - 1e-12);
        CHECK(cg.coords(c, d) <= hi[d] + 1e-12);
      }
    }

    std::set<std::pair<std::uint32_t, std::uint32_t>> oracle;
    for (const auto& e : g.edges) {
      if (a.cluster[e.src] != a.cluster[e.dst]) oracle.insert({a.cluster[e.src], a.cluster[e.dst]});
    }
    for (std::uint32_t c = 0; c < a.num_clusters; ++c) oracle.insert({c, c});
    std::set<std::pair<std::uint32_t, std::uint32_t>> got;
    for (const auto& e : cg.edges) CHECK(got.insert({e.src, e.dst}).second);
    CHECK(got == oracle);
  }
}

TEST_CASE("pool: no cross-graph edges in a batch") {
  Rng rng(4);
  const sgcn::chargraph::CharGraph gs[] = {random_graph(12, rng), random_graph(9, rng)};
  const auto b = sgcn::chargraph::batch_graphs(gs);
  const auto a = grid_cluster(b.coords, b.batch_id, 1.0);
  CHECK(a.num_clusters == 2);
  for (const auto& e : coarse_edges(b.edges, a)) CHECK(a.batch_id[e.src] == a.batch_id[e.dst]);
}

TEST_CASE("pool: differentiable through coordinates and features") {
  Rng rng(5);
  const auto g = random_graph(12, rng);
  const std::vector<std::uint32_t> ids(12, 0);
  const auto a = grid_cluster(g.coords, ids, 0.4);
  const auto rc = random_tensor({a.num_clusters, 2}, rng);
  const auto rf = random_tensor({a.num_clusters, 3}, rng);
  for (Reduce mode : {Reduce::max, Reduce::mean}) {
    auto fn = [&](sgcn::numcore::Tape<double>& t, std::span<const sgcn::numcore::Var> in) {
      const auto p = pool(t, in[0], in[1], a, mode);
      return sgcn::numcore::add(t, sgcn::numcore::sum(t, sgcn::numcore::mul(t, p.coords, t.leaf(rc))),
                                sgcn::numcore::sum(t, sgcn::numcore::mul(t, p.features, t.leaf(rf))));
    };
    CHECK(sgcn::numcore::gradcheck(fn, {g.coords, random_tensor({12, 3}, rng)}).max_rel_error < 1e-4);
  }
}

TEST_SUITE_END();
