#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgcn/numcore/gradcheck.hpp"

namespace sgcn::cli {

struct GradcheckEntry {
  std::string op;
  double tolerance = 1e-4;
  numcore::GradcheckResult result;
  bool passed() const { return result.finite && result.max_rel_error < tolerance; }
};

/// Finite-difference checks of every differentiable op and of one composed
/// residual block, in double precision on small random inputs kept away from
/// spline knots and activation kinks.
std::vector<GradcheckEntry> run_gradcheck_suite(std::uint64_t seed);

}  // namespace sgcn::cli
