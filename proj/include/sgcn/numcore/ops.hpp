#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sgcn/numcore/rng.hpp"
#include "sgcn/numcore/tape.hpp"

namespace sgcn::numcore {

enum class Mode { train, eval };
enum class Reduce { sum, mean, max };

/// Running statistics of one batch-norm layer. Not trainable.
template <typename Real>
struct BatchNormState {
  std::vector<Real> running_mean;
  std::vector<Real> running_var;

  BatchNormState() = default;
  explicit BatchNormState(std::size_t channels)
      : running_mean(channels, Real(0)), running_var(channels, Real(1)) {}
};

/// out = a * b for matrices [N x K] * [K x M].
template <typename Real>
Var matmul(Tape<Real>& t, Var a, Var b);

/// out = a * b^T for [N x C] and [M x C].
template <typename Real>
Var matmul_nt(Tape<Real>& t, Var a, Var b);

/// out[i, j] = sum_k x[i, k] W[k, j] + b[j].
template <typename Real>
Var linear(Tape<Real>& t, Var x, Var w, Var b);

template <typename Real>
Var add(Tape<Real>& t, Var a, Var b);

template <typename Real>
Var mul(Tape<Real>& t, Var a, Var b);

template <typename Real>
Var scale(Tape<Real>& t, Var x, Real factor);

/// Sum of all elements, as a one-element tensor.
template <typename Real>
Var sum(Tape<Real>& t, Var x);

/// Row-wise reduction of values [M x C] into [num_segments x C]. Empty
/// segments produce zero rows. Max routes the gradient to the first maximal row.
template <typename Real>
Var segment_reduce(Tape<Real>& t, Var values, std::span<const std::uint32_t> segment_ids,
                   std::size_t num_segments, Reduce mode);

/// out[r] = x[index[r]].
template <typename Real>
Var gather_rows(Tape<Real>& t, Var x, std::span<const std::uint32_t> index);

template <typename Real>
Var select_columns(Tape<Real>& t, Var x, std::span<const std::size_t> columns);

/// Per-channel normalization over all rows. Train mode uses the biased batch
/// variance and updates `state`; eval mode uses `state` as is.
template <typename Real>
Var batch_norm(Tape<Real>& t, Var x, Var gamma, Var beta, BatchNormState<Real>& state,
               Mode mode, Real momentum = Real(0.1), Real eps = Real(1e-5));

/// out = x if x > 0 else slope[c] * x, with one slope per column.
template <typename Real>
Var prelu(Tape<Real>& t, Var x, Var slope);

/// Inverted dropout: survivors are scaled by 1 / (1 - p) in train mode.
template <typename Real>
Var dropout(Tape<Real>& t, Var x, double p, Mode mode, Rng& rng);

/// Divides each row by max(||row||, eps).
template <typename Real>
Var l2_normalize_rows(Tape<Real>& t, Var x, Real eps = Real(1e-12));

/// Mean softmax cross-entropy of logits [B x K] against labels.
template <typename Real>
Var softmax_cross_entropy(Tape<Real>& t, Var logits, std::span<const std::uint32_t> labels);

}  // namespace sgcn::numcore
