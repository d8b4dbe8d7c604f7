#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sgcn/ink/trajectory.hpp"
#include "sgcn/numcore/tape.hpp"

namespace sgcn::chargraph {

using numcore::Tensor;

/// Directed edge v_src -> v_dst.
struct Edge {
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge& a, const Edge& b) {
    // Destination-major, so incoming edges of a node are contiguous.
    if (auto c = a.dst <=> b.dst; c != 0) return c;
    return a.src <=> b.src;
  }
};

inline constexpr std::int32_t kNoPredecessor = -1;

/// Geometric character graph: one node per resampled point, coordinates P,
/// trajectory edges E. The writing-order predecessor of each node survives
/// the undirected conversion so temporal features stay computable.
struct CharGraph {
  Tensor<double> coords;  // [N x 2]
  std::vector<Edge> edges;
  std::vector<std::uint8_t> stroke_start;
  std::vector<std::int32_t> predecessor;
  bool directed = true;

  std::size_t num_nodes() const { return predecessor.size(); }
  /// Throws when an endpoint is out of range or per-node arrays disagree.
  void validate() const;
};

/// One node per point in writing order with an edge to each in-stroke
/// successor. With `penup_edges`, each stroke's last point also links to the
/// next stroke's first point, and only the first node is a stroke start.
CharGraph build_graph(const ink::Trajectory& resampled, bool penup_edges = true);

/// Closes the edge set under reversal, adds one self-loop per node and drops
/// duplicates. Edges come out sorted by (dst, src). Idempotent.
CharGraph to_undirected_self_loops(const CharGraph& graph);

/// normalize -> resample -> build_graph -> to_undirected_self_loops.
CharGraph prepare_graph(const ink::Trajectory& raw, double interval = ink::kDefaultInterval,
                        bool penup_edges = true);

/// Node features [x, y, dx, dy, sin(theta), cos(theta)] from coordinates and
/// predecessors, recorded on the tape so gradients reach the coordinates.
/// Nodes without predecessor (or with a zero-length offset) get zero offset
/// and direction.
template <typename Real>
numcore::Var node_features(numcore::Tape<Real>& tape, numcore::Var coords,
                           std::span<const std::int32_t> predecessor);

/// Convenience evaluation of node_features outside any training graph.
Tensor<double> node_features(const CharGraph& graph);

/// Disjoint union of graphs with node offsets applied.
struct BatchedGraph {
  Tensor<double> coords;
  std::vector<Edge> edges;
  std::vector<std::int32_t> predecessor;
  std::vector<std::uint8_t> stroke_start;
  std::vector<std::uint32_t> batch_id;
  std::vector<std::size_t> graph_sizes;
  /// Concatenated per-graph features when supplied to batch_graphs.
  Tensor<double> features;
  bool directed = false;

  std::size_t num_nodes() const { return batch_id.size(); }
  std::size_t num_graphs() const { return graph_sizes.size(); }
};

/// Rejects mixed directedness and features whose widths disagree.
BatchedGraph batch_graphs(std::span<const CharGraph> graphs,
                          std::span<const Tensor<double>> features = {});

struct CostReport {
  double height = 0;
  double width = 0;
  double num_nodes = 0;
  double avg_edges = 0;
  double image_cost = 0;
  double graph_cost = 0;
  double ratio = 0;
};

/// Single-channel convolution cost of an H x W image (9 neighbours incl.
/// itself per pixel) against a graph with `num_nodes` nodes averaging
/// `avg_edges` incident edges.
CostReport conv_cost_ratio(double height, double width, double num_nodes, double avg_edges);

}  // namespace sgcn::chargraph
