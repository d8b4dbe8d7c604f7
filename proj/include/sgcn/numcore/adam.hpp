#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sgcn/numcore/tensor.hpp"

namespace sgcn::numcore {

template <typename Real>
struct AdamState {
  std::uint64_t step = 0;
  double lr = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<Tensor<Real>> m;
  std::vector<Tensor<Real>> v;

  void validate() const {
    if (!(lr >= 0.0)) throw std::invalid_argument("adam: lr must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
      throw std::invalid_argument("adam: betas must lie in [0, 1)");
    }
    if (!(eps > 0.0)) throw std::invalid_argument("adam: eps must be positive");
  }
};

/// One bias-corrected ADAM update of every parameter from its accumulated
/// gradient. Moments are allocated lazily on the first step.
template <typename Real>
void adam_step(std::span<Parameter<Real>* const> params, AdamState<Real>& state) {
  state.validate();
  if (state.m.empty() && state.v.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->value.shape());
      state.v.emplace_back(p->value.shape());
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("adam: state holds " + std::to_string(state.m.size()) +
                                " moments for " + std::to_string(params.size()) +
                                " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = *params[i];
    if (p.grad.shape() != p.value.shape() || state.m[i].shape() != p.value.shape() ||
        state.v[i].shape() != p.value.shape()) {
      throw std::invalid_argument("adam: shape mismatch for parameter '" + p.name + "' " +
                                  shape_string(p.value.shape()));
    }
  }

  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const Real b1 = static_cast<Real>(state.beta1);
  const Real b2 = static_cast<Real>(state.beta2);
  const Real step_size = static_cast<Real>(state.lr / bc1);
  const Real inv_sqrt_bc2 = static_cast<Real>(1.0 / std::sqrt(bc2));
  const Real eps = static_cast<Real>(state.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    Real* w = p.value.data();
    const Real* g = p.grad.data();
    Real* m = state.m[i].data();
    Real* v = state.v[i].data();
    for (std::size_t k = 0, n = p.value.size(); k < n; ++k) {
      m[k] = b1 * m[k] + (Real(1) - b1) * g[k];
      v[k] = b2 * v[k] + (Real(1) - b2) * g[k] * g[k];
      w[k] -= step_size * m[k] / (std::sqrt(v[k]) * inv_sqrt_bc2 + eps);
    }
  }
}

}  // namespace sgcn::numcore
