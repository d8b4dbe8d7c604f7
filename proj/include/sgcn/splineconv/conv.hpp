#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sgcn/chargraph/graph.hpp"
#include "sgcn/numcore/tape.hpp"
#include "sgcn/splineconv/basis.hpp"

namespace sgcn::splineconv {

using chargraph::Edge;
using numcore::Tape;
using numcore::Tensor;
using numcore::Var;

/// Edge pseudo-coordinates on the tape plus the per-graph normalizer.
struct PseudoCoordsVar {
  Var u;                     // [E x 2]
  std::vector<double> scale;  // rho per graph
};

/// u = clamp((p_src - p_dst) / (2 rho) + 0.5, 0, 1), where rho is the largest
/// max-norm offset over the edges of the edge's graph (1e-12 if all zero).
/// Self-loops land on (0.5, 0.5). With `differentiable`, gradients reach
/// `coords` through both the offsets and rho.
template <typename Real>
PseudoCoordsVar pseudo_coords(Tape<Real>& tape, Var coords, std::span<const Edge> edges,
                              std::span<const std::uint32_t> batch_id, std::size_t num_graphs,
                              bool differentiable = true);

struct PseudoCoords {
  Tensor<double> u;
  std::vector<double> scale;
};

/// Pseudo-coordinates of a single graph's edges.
PseudoCoords pseudo_coords(const chargraph::CharGraph& graph);

/// Spline convolution: out[i] = mean over incoming edges (j -> i) of
/// f(v_j) * g(u(i, j)), g(u) = sum_p w_p B_p(u). `weights` is
/// [k^2 x Cin x Cout]. Gradients flow to features, weights and `u`.
/// Rejects nodes without incoming edges.
template <typename Real>
Var spline_conv(Tape<Real>& tape, Var features, std::span<const Edge> edges, Var u, Var weights,
                const SplineSpec& spec);

/// Literal double loop over nodes and incident edges that materialises the
/// dense Cin x Cout kernel at every edge from all k^2 basis functions, each
/// evaluated by the Cox-de Boor recursion. For verification on small inputs.
Tensor<double> naive_conv_oracle(const Tensor<double>& features, std::span<const Edge> edges,
                                 const Tensor<double>& u, const Tensor<double>& weights,
                                 const SplineSpec& spec);

/// Single basis function N_{i,degree}(t) by the recursive definition.
double cox_de_boor(int i, int degree, double t, const SplineSpec& spec);

}  // namespace sgcn::splineconv
