#include "sgcn/splineconv/basis.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sgcn::splineconv {
namespace {

// Clamped uniform knot vector entry j of k + m + 1 knots.
double knot(int j, int k, int m) {
  if (j <= m) return 0.0;
  if (j >= k) return 1.0;
  return static_cast<double>(j - m) / static_cast<double>(k - m);
}

int find_span(double t, int k, int m) {
  if (t >= 1.0) return k - 1;
  int span = m;
  while (span < k - 1 && t >= knot(span + 1, k, m)) ++span;
  return span;
}

// Nonzero degree-p functions N_{span-p..span} at t (triangular scheme).
void basis_funs(int span, double t, int p, int k, int m, double* out) {
  std::array<double, kMaxDegree + 1> left{}, right{};
  out[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = t - knot(span + 1 - j, k, m);
    right[j] = knot(span + j, k, m) - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = out[r] / (right[r + 1] + left[j - r]);
      out[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    out[j] = saved;
  }
}

}  // namespace

void SplineSpec::validate() const {
  if (kernel_size < 2 || degree < 1 || degree > kMaxDegree || kernel_size <= degree) {
    throw std::invalid_argument("spline kernel: need kernel_size >= 2 and degree in {1, 2} "
                                "below kernel_size, got k=" +
                                std::to_string(kernel_size) + " m=" + std::to_string(degree));
  }
}

Basis1D basis_1d(double t, const SplineSpec& spec) {
  const int k = spec.kernel_size;
  const int m = spec.degree;
  if (!(t >= 0.0 && t <= 1.0)) {
    throw std::out_of_range("spline basis: coordinate " + std::to_string(t) +
                            " outside [0, 1]");
  }
  const int span = find_span(t, k, m);
  Basis1D b;
  b.first = span - m;
  basis_funs(span, t, m, k, m, b.value.data());

  // N'_{i,m} = m / (t_{i+m} - t_i) N_{i,m-1} - m / (t_{i+m+1} - t_{i+1}) N_{i+1,m-1}
  std::array<double, kMaxDegree + 1> lower{};
  basis_funs(span, t, m - 1, k, m, lower.data());
  auto lower_at = [&](int i) {  // N_{i,m-1}, nonzero for i in [span-m+1, span]
    const int r = i - (span - m + 1);
    return (r >= 0 && r < m) ? lower[r] : 0.0;
  };
  for (int r = 0; r <= m; ++r) {
    const int i = b.first + r;
    double d = 0.0;
    const double den_a = knot(i + m, k, m) - knot(i, k, m);
    const double den_b = knot(i + m + 1, k, m) - knot(i + 1, k, m);
    if (den_a > 0) d += m * lower_at(i) / den_a;
    if (den_b > 0) d -= m * lower_at(i + 1) / den_b;
    b.deriv[r] = d;
  }
  return b;
}

std::vector<BasisTerm> spline_basis(double u0, double u1, const SplineSpec& spec) {
  spec.validate();
  const Basis1D bx = basis_1d(u0, spec);
  const Basis1D by = basis_1d(u1, spec);
  std::vector<BasisTerm> terms;
  for (int ry = 0; ry <= spec.degree; ++ry) {
    for (int rx = 0; rx <= spec.degree; ++rx) {
      const double w = bx.value[rx] * by.value[ry];
      if (w == 0.0) continue;
      BasisTerm term;
      term.ix = bx.first + rx;
      term.iy = by.first + ry;
      term.index = static_cast<std::uint32_t>(term.ix + spec.kernel_size * term.iy);
      term.weight = w;
      terms.push_back(term);
    }
  }
  return terms;
}

}  // namespace sgcn::splineconv
