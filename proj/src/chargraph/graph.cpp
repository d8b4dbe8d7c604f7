#include "sgcn/chargraph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sgcn::chargraph {

void CharGraph::validate() const {
  const std::size_t n = num_nodes();
  if (coords.size() != 2 * n || stroke_start.size() != n) {
    throw std::invalid_argument("char graph: per-node arrays disagree on node count");
  }
  for (const Edge& e : edges) {
    if (e.src >= n || e.dst >= n) {
      throw std::out_of_range("char graph: edge (" + std::to_string(e.src) + ", " +
                              std::to_string(e.dst) + ") outside [0, " + std::to_string(n) +
                              ")");
    }
  }
  for (std::int32_t p : predecessor) {
    if (p != kNoPredecessor && (p < 0 || static_cast<std::size_t>(p) >= n)) {
      throw std::out_of_range("char graph: predecessor outside node range");
    }
  }
}

CharGraph build_graph(const ink::Trajectory& resampled, bool penup_edges) {
  if (resampled.strokes.empty() || resampled.num_points() == 0) {
    throw std::invalid_argument("empty trajectory");
  }
  resampled.validate();
  const std::size_t n = resampled.num_points();
  CharGraph g;
  g.coords = Tensor<double>({n, 2});
  g.stroke_start.assign(n, 0);
  g.predecessor.assign(n, kNoPredecessor);
  g.directed = true;

  std::uint32_t node = 0;
  for (std::size_t s = 0; s < resampled.strokes.size(); ++s) {
    const auto& stroke = resampled.strokes[s];
    for (std::size_t k = 0; k < stroke.size(); ++k, ++node) {
      g.coords(node, 0) = stroke[k].x;
      g.coords(node, 1) = stroke[k].y;
      const bool first_in_stroke = k == 0;
      if (!first_in_stroke || (penup_edges && node > 0)) {
        g.predecessor[node] = static_cast<std::int32_t>(node - 1);
        g.edges.push_back({node - 1, node});
      } else {
        g.stroke_start[node] = 1;
      }
    }
  }
  return g;
}

CharGraph to_undirected_self_loops(const CharGraph& graph) {
  graph.validate();
  CharGraph out = graph;
  out.directed = false;
  out.edges.clear();
  out.edges.reserve(2 * graph.edges.size() + graph.num_nodes());
  for (const Edge& e : graph.edges) {
    if (e.src == e.dst) continue;
    out.edges.push_back(e);
    out.edges.push_back({e.dst, e.src});
  }
  for (std::uint32_t i = 0; i < graph.num_nodes(); ++i) out.edges.push_back({i, i});
  std::sort(out.edges.begin(), out.edges.end());
  out.edges.erase(std::unique(out.edges.begin(), out.edges.end()), out.edges.end());
  return out;
}

CharGraph prepare_graph(const ink::Trajectory& raw, double interval, bool penup_edges) {
  return to_undirected_self_loops(
      build_graph(ink::resample(ink::normalize(raw), interval), penup_edges));
}

namespace {
constexpr double kMinLength = 1e-12;
}  // namespace

template <typename Real>
numcore::Var node_features(numcore::Tape<Real>& tape, numcore::Var coords,
                           std::span<const std::int32_t> predecessor) {
  const auto& p = tape.value(coords);
  const std::size_t n = predecessor.size();
  if (p.rows() != n || p.cols() != 2) {
    throw std::invalid_argument("node_features: coords " + numcore::shape_string(p.shape()) +
                                " for " + std::to_string(n) + " nodes");
  }
  Tensor<Real> f({n, 6});
  for (std::size_t i = 0; i < n; ++i) {
    f(i, 0) = p(i, 0);
    f(i, 1) = p(i, 1);
    const std::int32_t j = predecessor[i];
    if (j == kNoPredecessor) continue;
    const Real dx = p(i, 0) - p(j, 0);
    const Real dy = p(i, 1) - p(j, 1);
    const Real len = std::sqrt(dx * dx + dy * dy);
    f(i, 2) = dx;
    f(i, 3) = dy;
    if (len == 0) continue;
    const Real l = std::max(len, static_cast<Real>(kMinLength));
    f(i, 4) = dy / l;
    f(i, 5) = dx / l;
  }

  std::vector<std::int32_t> pred(predecessor.begin(), predecessor.end());
  return tape.record(
      std::move(f), tape.requires_grad(coords),
      [coords, pred = std::move(pred)](numcore::Tape<Real>& t, const Tensor<Real>& g) {
        const auto& p = t.value(coords);
        auto& gp = t.grad(coords);
        for (std::size_t i = 0; i < pred.size(); ++i) {
          gp(i, 0) += g(i, 0);
          gp(i, 1) += g(i, 1);
          const std::int32_t j = pred[i];
          if (j == kNoPredecessor) continue;
          const Real dx = p(i, 0) - p(j, 0);
          const Real dy = p(i, 1) - p(j, 1);
          Real gdx = g(i, 2);
          Real gdy = g(i, 3);
          const Real len = std::sqrt(dx * dx + dy * dy);
          if (len != 0) {
            const Real l = std::max(len, static_cast<Real>(kMinLength));
            const Real l3 = l * l * l;
            // sin = dy / l, cos = dx / l
            const Real gs = g(i, 4);
            const Real gc = g(i, 5);
            gdx += gs * (-dx * dy / l3) + gc * (dy * dy / l3);
            gdy += gs * (dx * dx / l3) + gc * (-dx * dy / l3);
          }
          gp(i, 0) += gdx;
          gp(i, 1) += gdy;
          gp(j, 0) -= gdx;
          gp(j, 1) -= gdy;
        }
      });
}

template numcore::Var node_features<float>(numcore::Tape<float>&, numcore::Var,
                                           std::span<const std::int32_t>);
template numcore::Var node_features<double>(numcore::Tape<double>&, numcore::Var,
                                            std::span<const std::int32_t>);

Tensor<double> node_features(const CharGraph& graph) {
  numcore::Tape<double> tape;
  const auto c = tape.leaf(graph.coords);
  return tape.value(node_features(tape, c, graph.predecessor));
}

BatchedGraph batch_graphs(std::span<const CharGraph> graphs,
                          std::span<const Tensor<double>> features) {
  if (graphs.empty()) throw std::invalid_argument("batch_graphs: no graphs");
  if (!features.empty() && features.size() != graphs.size()) {
    throw std::invalid_argument("batch_graphs: feature count does not match graph count");
  }
  const bool directed = graphs.front().directed;
  std::size_t total = 0;
  std::size_t total_edges = 0;
  for (const auto& g : graphs) {
    if (g.directed != directed) throw std::invalid_argument("batch_graphs: mixed directedness");
    g.validate();
    total += g.num_nodes();
    total_edges += g.edges.size();
  }
  const std::size_t width = features.empty() ? 0 : features.front().cols();
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].cols() != width || features[i].rows() != graphs[i].num_nodes()) {
      throw std::invalid_argument("batch_graphs: feature width mismatch");
    }
  }

  BatchedGraph b;
  b.directed = directed;
  b.coords = Tensor<double>({total, 2});
  if (width) b.features = Tensor<double>({total, width});
  b.edges.reserve(total_edges);
  b.predecessor.reserve(total);
  b.stroke_start.reserve(total);
  b.batch_id.reserve(total);

  std::uint32_t offset = 0;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const auto& g = graphs[gi];
    std::copy(g.coords.values().begin(), g.coords.values().end(),
              b.coords.data() + 2 * static_cast<std::size_t>(offset));
    if (width) {
      std::copy(features[gi].values().begin(), features[gi].values().end(),
                b.features.data() + width * static_cast<std::size_t>(offset));
    }
    for (const Edge& e : g.edges) b.edges.push_back({e.src + offset, e.dst + offset});
    for (std::int32_t p : g.predecessor) {
      b.predecessor.push_back(p == kNoPredecessor ? kNoPredecessor
                                                  : p + static_cast<std::int32_t>(offset));
    }
    b.stroke_start.insert(b.stroke_start.end(), g.stroke_start.begin(), g.stroke_start.end());
    b.batch_id.insert(b.batch_id.end(), g.num_nodes(), static_cast<std::uint32_t>(gi));
    b.graph_sizes.push_back(g.num_nodes());
    offset += static_cast<std::uint32_t>(g.num_nodes());
  }
  return b;
}

CostReport conv_cost_ratio(double height, double width, double num_nodes, double avg_edges) {
  if (!(num_nodes > 0)) throw std::invalid_argument("conv_cost_ratio: node count must be positive");
  if (!(height > 0) || !(width > 0) || !(avg_edges > 0)) {
    throw std::invalid_argument("conv_cost_ratio: all arguments must be positive");
  }
  CostReport r;
  r.height = height;
  r.width = width;
  r.num_nodes = num_nodes;
  r.avg_edges = avg_edges;
  r.image_cost = height * width * 9.0;
  r.graph_cost = num_nodes * avg_edges;
  r.ratio = r.image_cost / r.graph_cost;
  return r;
}

}  // namespace sgcn::chargraph
