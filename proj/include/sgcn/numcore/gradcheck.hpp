#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sgcn/numcore/tape.hpp"

namespace sgcn::numcore {

struct GradcheckOptions {
  double eps = 1e-4;
  /// 0 probes every coordinate; otherwise a seeded sample per input.
  std::size_t max_probes_per_input = 0;
  std::uint64_t seed = 0;
};

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t probes = 0;
  bool finite = true;
  /// Where the worst error occurred, e.g. "conv1.weight[17]".
  std::string worst;
};

/// Scalar function of its leaves, evaluated on a fresh double-precision tape.
using LeafFunction = std::function<Var(Tape<double>&, std::span<const Var>)>;

/// Scalar function that binds its own parameters to the tape.
using ParamFunction = std::function<Var(Tape<double>&)>;

/// Compares reverse-mode gradients against central differences:
/// max over coordinates of |analytic - numeric| / max(1, |numeric|).
GradcheckResult gradcheck(const LeafFunction& fn, std::vector<Tensor<double>> inputs,
                          const GradcheckOptions& options = {});

GradcheckResult gradcheck_parameters(const ParamFunction& fn,
                                     std::span<Parameter<double>* const> params,
                                     const GradcheckOptions& options = {});

}  // namespace sgcn::numcore
