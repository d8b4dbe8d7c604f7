#include "sgcn/coarsen/pool.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>

namespace sgcn::coarsen {
namespace {

struct CellKey {
  std::uint32_t graph;
  std::int64_t cx;
  std::int64_t cy;
  friend bool operator==(const CellKey&, const CellKey&) = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    std::uint64_t h = k.graph;
    h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint64_t>(k.cx);
    h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint64_t>(k.cy);
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

}  // namespace

template <typename Real>
ClusterAssignment grid_cluster(const Tensor<Real>& coords, std::span<const std::uint32_t> batch_id,
                               double cell_size) {
  if (!(cell_size > 0)) throw std::invalid_argument("grid_cluster: cell size must be positive");
  if (coords.cols() != 2 || coords.rows() != batch_id.size()) {
    throw std::invalid_argument("grid_cluster: coords must be [N x 2] with one graph id per row");
  }
  ClusterAssignment a;
  a.cell_size = cell_size;
  a.cluster.resize(batch_id.size());
  std::unordered_map<CellKey, std::uint32_t, CellHash> ids;
  ids.reserve(batch_id.size());
  for (std::size_t i = 0; i < batch_id.size(); ++i) {
    const CellKey key{batch_id[i],
                      static_cast<std::int64_t>(std::floor(static_cast<double>(coords(i, 0)) / cell_size)),
                      static_cast<std::int64_t>(std::floor(static_cast<double>(coords(i, 1)) / cell_size))};
    auto [it, inserted] = ids.try_emplace(key, static_cast<std::uint32_t>(a.batch_id.size()));
    if (inserted) a.batch_id.push_back(batch_id[i]);
    a.cluster[i] = it->second;
  }
  a.num_clusters = a.batch_id.size();
  return a;
}

std::vector<Edge> coarse_edges(std::span<const Edge> edges, const ClusterAssignment& assignment) {
  std::vector<Edge> out;
  out.reserve(edges.size() + assignment.num_clusters);
  for (const Edge& e : edges) {
    if (e.src >= assignment.cluster.size() || e.dst >= assignment.cluster.size()) {
      throw std::out_of_range("coarse_edges: edge endpoint outside assignment");
    }
    const std::uint32_t a = assignment.cluster[e.src];
    const std::uint32_t b = assignment.cluster[e.dst];
    if (a != b) out.push_back({a, b});
  }
  for (std::uint32_t c = 0; c < assignment.num_clusters; ++c) out.push_back({c, c});
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

template <typename Real>
PooledVars pool(Tape<Real>& tape, Var coords, Var features, const ClusterAssignment& assignment,
                Reduce feature_mode) {
  if (feature_mode == Reduce::sum) throw std::invalid_argument("pool: feature mode must be max or mean");
  PooledVars out;
  out.coords = numcore::segment_reduce(tape, coords, assignment.cluster, assignment.num_clusters,
                                       Reduce::mean);
  out.features = numcore::segment_reduce(tape, features, assignment.cluster,
                                         assignment.num_clusters, feature_mode);
  return out;
}

std::pair<CharGraph, Tensor<double>> pool_graph(const CharGraph& graph,
                                                const Tensor<double>& features,
                                                const ClusterAssignment& assignment,
                                                Reduce feature_mode) {
  graph.validate();
  if (assignment.cluster.size() != graph.num_nodes() || features.rows() != graph.num_nodes()) {
    throw std::invalid_argument("pool_graph: assignment covers " +
                                std::to_string(assignment.cluster.size()) + " nodes, graph has " +
                                std::to_string(graph.num_nodes()));
  }
  Tape<double> tape;
  const PooledVars v = pool(tape, tape.leaf(graph.coords), tape.leaf(features), assignment,
                            feature_mode);
  CharGraph coarse;
  coarse.coords = tape.value(v.coords);
  coarse.edges = coarse_edges(graph.edges, assignment);
  coarse.stroke_start.assign(assignment.num_clusters, 0);
  coarse.predecessor.assign(assignment.num_clusters, chargraph::kNoPredecessor);
  coarse.directed = false;
  return {std::move(coarse), tape.value(v.features)};
}

template ClusterAssignment grid_cluster<float>(const Tensor<float>&, std::span<const std::uint32_t>, double);
template ClusterAssignment grid_cluster<double>(const Tensor<double>&, std::span<const std::uint32_t>, double);
template PooledVars pool<float>(Tape<float>&, Var, Var, const ClusterAssignment&, Reduce);
template PooledVars pool<double>(Tape<double>&, Var, Var, const ClusterAssignment&, Reduce);

}  // namespace sgcn::coarsen
