#include "sgcn/splineconv/conv.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sgcn::splineconv {
namespace {

template <typename Real>
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using MatMap = Eigen::Map<RowMat<Real>>;
template <typename Real>
using ConstMatMap = Eigen::Map<const RowMat<Real>>;

constexpr double kMinScale = 1e-12;

}  // namespace

template <typename Real>
PseudoCoordsVar pseudo_coords(Tape<Real>& tape, Var coords, std::span<const Edge> edges,
                              std::span<const std::uint32_t> batch_id, std::size_t num_graphs,
                              bool differentiable) {
  const auto& p = tape.value(coords);
  if (p.cols() != 2 || p.rows() != batch_id.size()) {
    throw std::invalid_argument("pseudo_coords: coords " + numcore::shape_string(p.shape()) +
                                " for " + std::to_string(batch_id.size()) + " nodes");
  }
  if (edges.empty()) throw std::invalid_argument("pseudo_coords: graph has no edges");
  const std::size_t ne = edges.size();

  Tensor<Real> offset({ne, 2});
  std::vector<Real> rho(num_graphs, Real(0));
  std::vector<std::int64_t> arg(num_graphs, -1);  // flat (edge, component) of rho
  for (std::size_t e = 0; e < ne; ++e) {
    const Edge& ed = edges[e];
    const std::uint32_t g = batch_id[ed.dst];
    if (g >= num_graphs || batch_id[ed.src] != g) {
      throw std::invalid_argument("pseudo_coords: edge crosses graphs or graph id out of range");
    }
    for (int c = 0; c < 2; ++c) {
      const Real o = p(ed.src, c) - p(ed.dst, c);
      offset(e, c) = o;
      if (std::abs(o) > rho[g]) {
        rho[g] = std::abs(o);
        arg[g] = static_cast<std::int64_t>(2 * e + c);
      }
    }
  }
  for (auto& r : rho) r = std::max(r, static_cast<Real>(kMinScale));

  Tensor<Real> u({ne, 2});
  std::vector<std::uint8_t> clamped(2 * ne, 0);
  for (std::size_t e = 0; e < ne; ++e) {
    const Real r = rho[batch_id[edges[e].dst]];
    for (int c = 0; c < 2; ++c) {
      Real v = offset(e, c) / (Real(2) * r) + Real(0.5);
      if (v < Real(0) || v > Real(1)) {
        v = std::clamp(v, Real(0), Real(1));
        clamped[2 * e + c] = 1;
      }
      u(e, c) = v;
    }
  }

  PseudoCoordsVar out;
  out.scale.assign(rho.begin(), rho.end());
  std::vector<Edge> ev(edges.begin(), edges.end());
  std::vector<std::uint32_t> gid(ne);
  for (std::size_t e = 0; e < ne; ++e) gid[e] = batch_id[ev[e].dst];
  out.u = tape.record(
      std::move(u), differentiable && tape.requires_grad(coords),
      [coords, ev = std::move(ev), gid = std::move(gid), offset = std::move(offset),
       rho = std::move(rho), arg = std::move(arg),
       clamped = std::move(clamped)](Tape<Real>& t, const Tensor<Real>& g) {
        const std::size_t ne = ev.size();
        Tensor<Real> d_offset({ne, 2});
        std::vector<Real> d_rho(rho.size(), Real(0));
        for (std::size_t e = 0; e < ne; ++e) {
          const Real r = rho[gid[e]];
          for (int c = 0; c < 2; ++c) {
            if (clamped[2 * e + c]) continue;
            d_offset(e, c) = g(e, c) / (Real(2) * r);
            d_rho[gid[e]] -= g(e, c) * offset(e, c) / (Real(2) * r * r);
          }
        }
        for (std::size_t gi = 0; gi < rho.size(); ++gi) {
          if (arg[gi] < 0) continue;
          const std::size_t e = static_cast<std::size_t>(arg[gi]) / 2;
          const int c = static_cast<int>(arg[gi] % 2);
          d_offset(e, c) += d_rho[gi] * (offset(e, c) > 0 ? Real(1) : Real(-1));
        }
        auto& gp = t.grad(coords);
        for (std::size_t e = 0; e < ne; ++e) {
          for (int c = 0; c < 2; ++c) {
            gp(ev[e].src, c) += d_offset(e, c);
            gp(ev[e].dst, c) -= d_offset(e, c);
          }
        }
      });
  return out;
}

PseudoCoords pseudo_coords(const chargraph::CharGraph& graph) {
  Tape<double> tape;
  const Var c = tape.leaf(graph.coords);
  const std::vector<std::uint32_t> batch(graph.num_nodes(), 0);
  auto pc = pseudo_coords(tape, c, graph.edges, batch, 1, false);
  return {tape.value(pc.u), pc.scale};
}

template <typename Real>
Var spline_conv(Tape<Real>& tape, Var features, std::span<const Edge> edges, Var u, Var weights,
                const SplineSpec& spec) {
  spec.validate();
  const auto& f = tape.value(features);
  const auto& uv = tape.value(u);
  const auto& w = tape.value(weights);
  const std::size_t n = f.rows();
  const std::size_t cin = f.cols();
  const std::size_t kk = static_cast<std::size_t>(spec.num_weights());
  if (w.rank() != 3 || w.shape()[0] != kk || w.shape()[1] != cin) {
    throw std::invalid_argument("spline_conv: weights " + numcore::shape_string(w.shape()) +
                                " do not match " + std::to_string(kk) + " control points x " +
                                std::to_string(cin) + " input channels");
  }
  const std::size_t cout = w.shape()[2];
  if (uv.rows() != edges.size() || uv.cols() != 2) {
    throw std::invalid_argument("spline_conv: pseudo-coordinates do not align with edges");
  }

  std::vector<Real> inv_deg(n, Real(0));
  for (const Edge& e : edges) {
    if (e.src >= n || e.dst >= n) throw std::out_of_range("spline_conv: edge endpoint out of range");
    inv_deg[e.dst] += 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (inv_deg[i] == 0) {
      throw std::invalid_argument("spline_conv: node " + std::to_string(i) +
                                  " has no incoming edges");
    }
    inv_deg[i] = Real(1) / inv_deg[i];
  }

  // Per edge: (m+1)^2 terms of (control index, weight, dweight/du0, dweight/du1).
  const std::size_t terms = static_cast<std::size_t>((spec.degree + 1) * (spec.degree + 1));
  std::vector<std::uint32_t> t_index(edges.size() * terms);
  std::vector<Real> t_weight(edges.size() * terms), t_du0(edges.size() * terms),
      t_du1(edges.size() * terms);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const Basis1D bx = basis_1d(static_cast<double>(uv(e, 0)), spec);
    const Basis1D by = basis_1d(static_cast<double>(uv(e, 1)), spec);
    std::size_t s = e * terms;
    for (int ry = 0; ry <= spec.degree; ++ry) {
      for (int rx = 0; rx <= spec.degree; ++rx, ++s) {
        t_index[s] = static_cast<std::uint32_t>((bx.first + rx) + spec.kernel_size * (by.first + ry));
        t_weight[s] = static_cast<Real>(bx.value[rx] * by.value[ry]);
        t_du0[s] = static_cast<Real>(bx.deriv[rx] * by.value[ry]);
        t_du1[s] = static_cast<Real>(bx.value[rx] * by.deriv[ry]);
      }
    }
  }

  // z[p] = F * W_p for every control point.
  Tensor<Real> z({kk, n, cout});
  const ConstMatMap<Real> fm(f.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cin));
  for (std::size_t p = 0; p < kk; ++p) {
    MatMap<Real> zp(z.data() + p * n * cout, static_cast<Eigen::Index>(n),
                    static_cast<Eigen::Index>(cout));
    zp.noalias() = fm * ConstMatMap<Real>(w.data() + p * cin * cout,
                                          static_cast<Eigen::Index>(cin),
                                          static_cast<Eigen::Index>(cout));
  }

  Tensor<Real> out({n, cout});
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const Edge ed = edges[e];
    Real* o = out.data() + static_cast<std::size_t>(ed.dst) * cout;
    for (std::size_t s = e * terms; s < (e + 1) * terms; ++s) {
      const Real b = t_weight[s] * inv_deg[ed.dst];
      if (b == 0) continue;
      const Real* zr = z.data() + (t_index[s] * n + ed.src) * cout;
      for (std::size_t c = 0; c < cout; ++c) o[c] += b * zr[c];
    }
  }

  const bool rg =
      tape.requires_grad(features) || tape.requires_grad(weights) || tape.requires_grad(u);
  std::vector<Edge> ev(edges.begin(), edges.end());
  return tape.record(
      std::move(out), rg,
      [features, weights, u, kk, terms, ev = std::move(ev), inv_deg = std::move(inv_deg),
       t_index = std::move(t_index), t_weight = std::move(t_weight), t_du0 = std::move(t_du0),
       t_du1 = std::move(t_du1), z = std::move(z)](Tape<Real>& t, const Tensor<Real>& g) {
        const auto& f = t.value(features);
        const auto& w = t.value(weights);
        const std::size_t n = f.rows();
        const std::size_t cin = f.cols();
        const std::size_t cout = g.cols();
        const bool need_z = t.requires_grad(features) || t.requires_grad(weights);
        const bool need_u = t.requires_grad(u);

        Tensor<Real> dz;
        if (need_z) dz = Tensor<Real>({kk, n, cout});
        Tensor<Real>* du = need_u ? &t.grad(u) : nullptr;
        for (std::size_t e = 0; e < ev.size(); ++e) {
          const Edge ed = ev[e];
          const Real* gi = g.data() + static_cast<std::size_t>(ed.dst) * cout;
          const Real scale = inv_deg[ed.dst];
          for (std::size_t s = e * terms; s < (e + 1) * terms; ++s) {
            const std::size_t zoff = (t_index[s] * n + ed.src) * cout;
            if (need_z && t_weight[s] != 0) {
              const Real b = t_weight[s] * scale;
              Real* dzr = dz.data() + zoff;
              for (std::size_t c = 0; c < cout; ++c) dzr[c] += b * gi[c];
            }
            if (need_u && (t_du0[s] != 0 || t_du1[s] != 0)) {
              const Real* zr = z.data() + zoff;
              Real dot = 0;
              for (std::size_t c = 0; c < cout; ++c) dot += zr[c] * gi[c];
              dot *= scale;
              (*du)(e, 0) += dot * t_du0[s];
              (*du)(e, 1) += dot * t_du1[s];
            }
          }
        }
        if (!need_z) return;
        const ConstMatMap<Real> fm(f.data(), static_cast<Eigen::Index>(n),
                                   static_cast<Eigen::Index>(cin));
        for (std::size_t p = 0; p < kk; ++p) {
          const ConstMatMap<Real> dzp(dz.data() + p * n * cout, static_cast<Eigen::Index>(n),
                                      static_cast<Eigen::Index>(cout));
          if (t.requires_grad(weights)) {
            MatMap<Real>(t.grad(weights).data() + p * cin * cout, static_cast<Eigen::Index>(cin),
                         static_cast<Eigen::Index>(cout))
                .noalias() += fm.transpose() * dzp;
          }
          if (t.requires_grad(features)) {
            MatMap<Real>(t.grad(features).data(), static_cast<Eigen::Index>(n),
                         static_cast<Eigen::Index>(cin))
                .noalias() += dzp * ConstMatMap<Real>(w.data() + p * cin * cout,
                                                      static_cast<Eigen::Index>(cin),
                                                      static_cast<Eigen::Index>(cout))
                                        .transpose();
          }
        }
      });
}

double cox_de_boor(int i, int degree, double t, const SplineSpec& spec) {
  const int k = spec.kernel_size;
  const int m = spec.degree;
  auto knot = [&](int j) {
    if (j <= m) return 0.0;
    if (j >= k) return 1.0;
    return static_cast<double>(j - m) / static_cast<double>(k - m);
  };
  if (degree == 0) {
    const double a = knot(i);
    const double b = knot(i + 1);
    if (a < b && a <= t && t < b) return 1.0;
    // The right end belongs to the last non-empty interval.
    return (t == 1.0 && b == 1.0 && a < b) ? 1.0 : 0.0;
  }
  double value = 0.0;
  const double den_a = knot(i + degree) - knot(i);
  const double den_b = knot(i + degree + 1) - knot(i + 1);
  if (den_a > 0) value += (t - knot(i)) / den_a * cox_de_boor(i, degree - 1, t, spec);
  if (den_b > 0) {
    value += (knot(i + degree + 1) - t) / den_b * cox_de_boor(i + 1, degree - 1, t, spec);
  }
  return value;
}

Tensor<double> naive_conv_oracle(const Tensor<double>& features, std::span<const Edge> edges,
                                 const Tensor<double>& u, const Tensor<double>& weights,
                                 const SplineSpec& spec) {
  spec.validate();
  const std::size_t n = features.rows();
  const std::size_t cin = features.cols();
  const int k = spec.kernel_size;
  const std::size_t cout = weights.shape()[2];
  Tensor<double> out({n, cout});
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t count = 0;
    std::vector<double> acc(cout, 0.0);
    for (std::size_t e = 0; e < edges.size(); ++e) {
      if (edges[e].dst != i) continue;
      ++count;
      // Dense kernel g(u) = sum_p w_p B_p(u).
      std::vector<double> kernel(cin * cout, 0.0);
      for (int iy = 0; iy < k; ++iy) {
        for (int ix = 0; ix < k; ++ix) {
          const double b = cox_de_boor(ix, spec.degree, u(e, 0), spec) *
                           cox_de_boor(iy, spec.degree, u(e, 1), spec);
          const std::size_t p = static_cast<std::size_t>(ix + k * iy);
          for (std::size_t a = 0; a < cin * cout; ++a) {
            kernel[a] += b * weights[p * cin * cout + a];
          }
        }
      }
      const std::size_t j = edges[e].src;
      for (std::size_t a = 0; a < cin; ++a) {
        for (std::size_t c = 0; c < cout; ++c) acc[c] += features(j, a) * kernel[a * cout + c];
      }
    }
    if (count == 0) throw std::invalid_argument("naive_conv_oracle: isolated node");
    for (std::size_t c = 0; c < cout; ++c) out(i, c) = acc[c] / static_cast<double>(count);
  }
  return out;
}

template PseudoCoordsVar pseudo_coords<float>(Tape<float>&, Var, std::span<const Edge>,
                                              std::span<const std::uint32_t>, std::size_t, bool);
template PseudoCoordsVar pseudo_coords<double>(Tape<double>&, Var, std::span<const Edge>,
                                               std::span<const std::uint32_t>, std::size_t, bool);
template Var spline_conv<float>(Tape<float>&, Var, std::span<const Edge>, Var, Var,
                                const SplineSpec&);
template Var spline_conv<double>(Tape<double>&, Var, std::span<const Edge>, Var, Var,
                                 const SplineSpec&);

}  // namespace sgcn::splineconv
