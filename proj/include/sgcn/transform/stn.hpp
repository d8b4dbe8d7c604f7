#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sgcn/numcore/parameters.hpp"

namespace sgcn::transform {

using numcore::Dense;
using numcore::Parameter;
using numcore::ParameterStore;
using numcore::Rng;
using numcore::Tape;
using numcore::Tensor;
using numcore::Var;

/// Encoder widths of the per-node perceptron; the last one is the pooled
/// embedding width.
inline constexpr std::array<std::size_t, 3> kEncoderWidths = {64, 128, 128};

/// Shared-weight per-node MLP (affine + PReLU, three layers), max-pooled per
/// graph, followed by an affine head that starts at zero.
template <typename Real>
struct StnParams {
  std::size_t input_dim = 0;
  std::size_t head_width = 0;
  std::vector<Dense<Real>> encoder;
  std::vector<Parameter<Real>*> slopes;
  Dense<Real> head;

  /// Per-graph max of the encoder output: [num_graphs x kEncoderWidths.back()].
  Var encode(Tape<Real>& t, Var x, std::span<const std::uint32_t> batch_id,
             std::size_t num_graphs) const;
};

/// Head of width 4: (theta~, s~, dx, dy).
template <typename Real>
StnParams<Real> make_input_stn(ParameterStore<Real>& store, const std::string& prefix, Rng& rng);

/// Head of width d^2, reshaped row-major to a d x d matrix.
template <typename Real>
StnParams<Real> make_feature_stn(ParameterStore<Real>& store, const std::string& prefix,
                                 std::size_t dim, Rng& rng);

/// theta = pi tanh(theta~), s = exp(tanh(s~)); T = [s R(theta) | (dx, dy)].
struct SimilarityTransform {
  double theta = 0;
  double scale = 1;
  double dx = 0;
  double dy = 0;
  std::array<std::array<double, 3>, 2> matrix{};
};

SimilarityTransform similarity_from_head(double theta_raw, double scale_raw, double dx, double dy);

/// Applies each graph's similarity transform (from its head row [B x 4]) to
/// its node coordinates [N x 2]: p' = [p 1] T^T.
template <typename Real>
Var apply_similarity(Tape<Real>& t, Var head, Var coords, std::span<const std::uint32_t> batch_id);

/// F~[i] = F[i] (reshape(head[g]) + I) for the graph g owning row i.
template <typename Real>
Var apply_feature_transform(Tape<Real>& t, Var head, Var features,
                            std::span<const std::uint32_t> batch_id);

/// Aligns coordinates [N x 2] with a similarity transform predicted per graph.
template <typename Real>
Var input_stn(Tape<Real>& t, Var coords, std::span<const std::uint32_t> batch_id,
              std::size_t num_graphs, const StnParams<Real>& params);

/// Aligns features [N x d] with an unconstrained d x d transform per graph.
template <typename Real>
Var feature_stn(Tape<Real>& t, Var features, std::span<const std::uint32_t> batch_id,
                std::size_t num_graphs, const StnParams<Real>& params);

}  // namespace sgcn::transform
