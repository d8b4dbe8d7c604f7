#include "sgcn/transform/stn.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sgcn::transform {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInitialSlope = 0.25;

template <typename Real>
StnParams<Real> make_stn(ParameterStore<Real>& store, const std::string& prefix,
                         std::size_t input_dim, std::size_t head_width, Rng& rng) {
  StnParams<Real> p;
  p.input_dim = input_dim;
  p.head_width = head_width;
  std::size_t in = input_dim;
  for (std::size_t l = 0; l < kEncoderWidths.size(); ++l) {
    const std::string name = prefix + ".mlp" + std::to_string(l);
    p.encoder.push_back(Dense<Real>::create(store, name, in, kEncoderWidths[l], rng));
    p.slopes.push_back(&store.add(name + ".slope",
                                  Tensor<Real>({kEncoderWidths[l]}, Real(kInitialSlope))));
    in = kEncoderWidths[l];
  }
  p.head = Dense<Real>::create(store, prefix + ".head", in, head_width, rng, /*zero_init=*/true);
  return p;
}

}  // namespace

template <typename Real>
Var StnParams<Real>::encode(Tape<Real>& t, Var x, std::span<const std::uint32_t> batch_id,
                            std::size_t num_graphs) const {
  if (t.value(x).cols() != input_dim) {
    throw std::invalid_argument("stn: expected " + std::to_string(input_dim) +
                                " input columns, got " + std::to_string(t.value(x).cols()));
  }
  Var h = x;
  for (std::size_t l = 0; l < encoder.size(); ++l) {
    h = numcore::prelu(t, encoder[l](t, h), t.param(*slopes[l]));
  }
  return numcore::segment_reduce(t, h, batch_id, num_graphs, numcore::Reduce::max);
}

template <typename Real>
StnParams<Real> make_input_stn(ParameterStore<Real>& store, const std::string& prefix, Rng& rng) {
  return make_stn(store, prefix, 2, 4, rng);
}

template <typename Real>
StnParams<Real> make_feature_stn(ParameterStore<Real>& store, const std::string& prefix,
                                 std::size_t dim, Rng& rng) {
  return make_stn(store, prefix, dim, dim * dim, rng);
}

SimilarityTransform similarity_from_head(double theta_raw, double scale_raw, double dx, double dy) {
  SimilarityTransform s;
  s.theta = kPi * std::tanh(theta_raw);
  s.scale = std::exp(std::tanh(scale_raw));
  s.dx = dx;
  s.dy = dy;
  const double c = s.scale * std::cos(s.theta);
  const double n = s.scale * std::sin(s.theta);
  s.matrix = {{{c, -n, dx}, {n, c, dy}}};
  return s;
}

template <typename Real>
Var apply_similarity(Tape<Real>& t, Var head, Var coords, std::span<const std::uint32_t> batch_id) {
  const auto& h = t.value(head);
  const auto& p = t.value(coords);
  if (h.cols() != 4) throw std::invalid_argument("input stn: head width must be 4");
  if (p.cols() != 2 || p.rows() != batch_id.size()) {
    throw std::invalid_argument("input stn: coords must be [N x 2] with one graph id per row");
  }
  const std::size_t b = h.rows();
  // Per graph: theta, s, cos, sin, tanh(theta~), tanh(s~).
  std::vector<std::array<Real, 6>> geo(b);
  for (std::size_t g = 0; g < b; ++g) {
    const Real ta = std::tanh(h(g, 0));
    const Real tb = std::tanh(h(g, 1));
    const Real theta = static_cast<Real>(kPi) * ta;
    geo[g] = {theta, std::exp(tb), std::cos(theta), std::sin(theta), ta, tb};
  }
  Tensor<Real> out({p.rows(), 2});
  for (std::size_t i = 0; i < p.rows(); ++i) {
    const std::uint32_t g = batch_id[i];
    if (g >= b) throw std::out_of_range("input stn: graph id out of range");
    const auto& q = geo[g];
    const Real x = p(i, 0);
    const Real y = p(i, 1);
    out(i, 0) = q[1] * (q[2] * x - q[3] * y) + h(g, 2);
    out(i, 1) = q[1] * (q[3] * x + q[2] * y) + h(g, 3);
  }
  const bool rg = t.requires_grad(head) || t.requires_grad(coords);
  std::vector<std::uint32_t> bid(batch_id.begin(), batch_id.end());
  return t.record(
      std::move(out), rg,
      [head, coords, bid = std::move(bid), geo = std::move(geo)](Tape<Real>& t,
                                                                 const Tensor<Real>& g) {
        const auto& p = t.value(coords);
        std::vector<std::array<Real, 4>> dh(geo.size(), {Real(0), Real(0), Real(0), Real(0)});
        const bool need_p = t.requires_grad(coords);
        Tensor<Real>* gp = need_p ? &t.grad(coords) : nullptr;
        for (std::size_t i = 0; i < bid.size(); ++i) {
          const auto& q = geo[bid[i]];
          const Real s = q[1], c = q[2], n = q[3];
          const Real x = p(i, 0), y = p(i, 1);
          const Real gx = g(i, 0), gy = g(i, 1);
          auto& d = dh[bid[i]];
          d[0] += gx * s * (-n * x - c * y) + gy * s * (c * x - n * y);  // d theta
          d[1] += gx * (c * x - n * y) + gy * (n * x + c * y);          // d s
          d[2] += gx;
          d[3] += gy;
          if (need_p) {
            (*gp)(i, 0) += s * (c * gx + n * gy);
            (*gp)(i, 1) += s * (-n * gx + c * gy);
          }
        }
        if (!t.requires_grad(head)) return;
        auto& gh = t.grad(head);
        for (std::size_t b = 0; b < geo.size(); ++b) {
          const auto& q = geo[b];
          gh(b, 0) += dh[b][0] * static_cast<Real>(kPi) * (Real(1) - q[4] * q[4]);
          gh(b, 1) += dh[b][1] * q[1] * (Real(1) - q[5] * q[5]);
          gh(b, 2) += dh[b][2];
          gh(b, 3) += dh[b][3];
        }
      });
}

template <typename Real>
Var apply_feature_transform(Tape<Real>& t, Var head, Var features,
                            std::span<const std::uint32_t> batch_id) {
  const auto& h = t.value(head);
  const auto& f = t.value(features);
  const std::size_t d = f.cols();
  if (h.cols() != d * d) {
    throw std::invalid_argument("feature stn: head width " + std::to_string(h.cols()) +
                                " is not " + std::to_string(d) + "^2");
  }
  if (f.rows() != batch_id.size()) throw std::invalid_argument("feature stn: graph ids mismatch");
  Tensor<Real> out({f.rows(), d});
  for (std::size_t i = 0; i < f.rows(); ++i) {
    const std::uint32_t g = batch_id[i];
    if (g >= h.rows()) throw std::out_of_range("feature stn: graph id out of range");
    const Real* tm = h.data() + g * d * d;
    Real* o = out.data() + i * d;
    for (std::size_t r = 0; r < d; ++r) {
      const Real fr = f(i, r);
      o[r] += fr;  // identity part
      for (std::size_t c = 0; c < d; ++c) o[c] += fr * tm[r * d + c];
    }
  }
  const bool rg = t.requires_grad(head) || t.requires_grad(features);
  std::vector<std::uint32_t> bid(batch_id.begin(), batch_id.end());
  return t.record(
      std::move(out), rg, [head, features, d, bid = std::move(bid)](Tape<Real>& t,
                                                                     const Tensor<Real>& g) {
        const auto& h = t.value(head);
        const auto& f = t.value(features);
        if (t.requires_grad(features)) {
          auto& gf = t.grad(features);
          for (std::size_t i = 0; i < bid.size(); ++i) {
            const Real* tm = h.data() + bid[i] * d * d;
            const Real* gi = g.data() + i * d;
            for (std::size_t r = 0; r < d; ++r) {
              Real acc = gi[r];
              for (std::size_t c = 0; c < d; ++c) acc += gi[c] * tm[r * d + c];
              gf(i, r) += acc;
            }
          }
        }
        if (t.requires_grad(head)) {
          auto& gh = t.grad(head);
          for (std::size_t i = 0; i < bid.size(); ++i) {
            Real* dt = gh.data() + bid[i] * d * d;
            const Real* gi = g.data() + i * d;
            for (std::size_t r = 0; r < d; ++r) {
              const Real fr = f(i, r);
              for (std::size_t c = 0; c < d; ++c) dt[r * d + c] += fr * gi[c];
            }
          }
        }
      });
}

template <typename Real>
Var input_stn(Tape<Real>& t, Var coords, std::span<const std::uint32_t> batch_id,
              std::size_t num_graphs, const StnParams<Real>& params) {
  if (params.head_width != 4) throw std::invalid_argument("input stn: head width must be 4");
  const Var h = params.encode(t, coords, batch_id, num_graphs);
  return apply_similarity(t, params.head(t, h), coords, batch_id);
}

template <typename Real>
Var feature_stn(Tape<Real>& t, Var features, std::span<const std::uint32_t> batch_id,
                std::size_t num_graphs, const StnParams<Real>& params) {
  const std::size_t d = t.value(features).cols();
  if (params.head_width != d * d) {
    throw std::invalid_argument("feature stn: head width " + std::to_string(params.head_width) +
                                " does not match " + std::to_string(d) + "^2");
  }
  const Var h = params.encode(t, features, batch_id, num_graphs);
  return apply_feature_transform(t, params.head(t, h), features, batch_id);
}

#define SGCN_INSTANTIATE_STN(Real)                                                               \
  template struct StnParams<Real>;                                                               \
  template StnParams<Real> make_input_stn<Real>(ParameterStore<Real>&, const std::string&, Rng&); \
  template StnParams<Real> make_feature_stn<Real>(ParameterStore<Real>&, const std::string&,      \
                                                  std::size_t, Rng&);                             \
  template Var apply_similarity<Real>(Tape<Real>&, Var, Var, std::span<const std::uint32_t>);    \
  template Var apply_feature_transform<Real>(Tape<Real>&, Var, Var,                              \
                                             std::span<const std::uint32_t>);                    \
  template Var input_stn<Real>(Tape<Real>&, Var, std::span<const std::uint32_t>, std::size_t,    \
                               const StnParams<Real>&);                                          \
  template Var feature_stn<Real>(Tape<Real>&, Var, std::span<const std::uint32_t>, std::size_t,  \
                                 const StnParams<Real>&);

SGCN_INSTANTIATE_STN(float)
SGCN_INSTANTIATE_STN(double)

#undef SGCN_INSTANTIATE_STN

}  // namespace sgcn::transform
