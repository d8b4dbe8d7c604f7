#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace sgcn::splineconv {

inline constexpr int kMaxDegree = 2;

/// Kernel geometry: `kernel_size` control points per dimension and the
/// B-spline degree. Control point (ix, iy) has flat index ix + kernel_size * iy.
struct SplineSpec {
  int kernel_size = 3;
  int degree = 1;

  int num_weights() const { return kernel_size * kernel_size; }
  /// Throws unless kernel_size >= 2, degree in {1, 2} and kernel_size > degree.
  void validate() const;
};

/// Nonzero basis functions of one dimension at a point: functions
/// first..first+degree, with values and first derivatives.
struct Basis1D {
  int first = 0;
  std::array<double, kMaxDegree + 1> value{};
  std::array<double, kMaxDegree + 1> deriv{};
};

/// Open uniform (clamped) B-spline basis on [0, 1] with `kernel_size` control
/// points; for degree 1 these are hat functions centred at i / (k - 1).
Basis1D basis_1d(double t, const SplineSpec& spec);

struct BasisTerm {
  int ix = 0;
  int iy = 0;
  std::uint32_t index = 0;
  double weight = 0;
};

/// Tensor-product basis at u in [0,1]^2: (degree+1)^2 terms whose weights sum
/// to one. Zero-weight terms are dropped. Rejects u outside the unit square.
std::vector<BasisTerm> spline_basis(double u0, double u1, const SplineSpec& spec);

}  // namespace sgcn::splineconv
