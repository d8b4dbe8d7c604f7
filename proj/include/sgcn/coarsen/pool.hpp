#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "sgcn/chargraph/graph.hpp"
#include "sgcn/numcore/ops.hpp"

namespace sgcn::coarsen {

using chargraph::CharGraph;
using chargraph::Edge;
using numcore::Reduce;
using numcore::Tape;
using numcore::Tensor;
using numcore::Var;

struct ClusterAssignment {
  std::vector<std::uint32_t> cluster;   // per fine node
  std::size_t num_clusters = 0;
  double cell_size = 0;
  std::vector<std::uint32_t> batch_id;  // per cluster
};

/// Nodes sharing (graph, floor(x / cell), floor(y / cell)) share a cluster.
/// Ids follow first occurrence in node order.
template <typename Real>
ClusterAssignment grid_cluster(const Tensor<Real>& coords, std::span<const std::uint32_t> batch_id,
                               double cell_size);

/// Cluster-level edges: (a, b) for every fine edge crossing clusters a != b,
/// plus one self-loop per cluster, sorted by (dst, src) and deduplicated.
std::vector<Edge> coarse_edges(std::span<const Edge> edges, const ClusterAssignment& assignment);

struct PooledVars {
  Var coords;    // cluster mean of member coordinates
  Var features;  // cluster max (or mean) of member features
};

template <typename Real>
PooledVars pool(Tape<Real>& tape, Var coords, Var features, const ClusterAssignment& assignment,
                Reduce feature_mode = Reduce::max);

/// Pools a single graph. The coarse graph is undirected and carries no
/// predecessors.
std::pair<CharGraph, Tensor<double>> pool_graph(const CharGraph& graph,
                                                const Tensor<double>& features,
                                                const ClusterAssignment& assignment,
                                                Reduce feature_mode = Reduce::max);

}  // namespace sgcn::coarsen
