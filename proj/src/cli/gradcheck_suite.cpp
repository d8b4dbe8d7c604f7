#include "sgcn/cli/gradcheck_suite.hpp"

#include <cmath>

#include "sgcn/chargraph/graph.hpp"
#include "sgcn/network/model.hpp"
#include "sgcn/numcore/ops.hpp"
#include "sgcn/numcore/parameters.hpp"
#include "sgcn/splineconv/conv.hpp"
#include "sgcn/transform/stn.hpp"

namespace sgcn::cli {
namespace {

using numcore::GradcheckOptions;
using numcore::Parameter;
using numcore::ParameterStore;
using numcore::Reduce;
using numcore::Rng;
using numcore::Tape;
using numcore::Tensor;
using numcore::Var;

Tensor<double> random_tensor(numcore::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

/// Values with magnitude in [0.1, 1] and random sign.
Tensor<double> off_zero(numcore::Shape shape, Rng& rng) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 1.0);
  return t;
}

/// Pseudo-coordinates inside the open knot spans of a degree-1, size-3 basis.
Tensor<double> interior_u(std::size_t edges, Rng& rng) {
  Tensor<double> u({edges, 2});
  for (auto& v : u.values()) {
    v = rng.uniform(0.05, 0.45) + (rng.uniform() < 0.5 ? 0.0 : 0.5);
  }
  return u;
}

/// The STN encoders stack PReLU and a segment max over hundreds of hidden
/// units, so a 1e-4 step routinely straddles a kink.
constexpr double kKinkEps = 1e-6;

/// sum(out * R) for a fixed random R, so every output entry matters.
Var project(Tape<double>& t, Var out, const Tensor<double>& r) {
  return numcore::sum(t, numcore::mul(t, out, t.leaf(r)));
}

chargraph::CharGraph random_chain(std::size_t n, Rng& rng) {
  ink::Trajectory traj;
  ink::Stroke s;
  for (std::size_t i = 0; i < n; ++i) s.push_back({rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)});
  traj.strokes.push_back(s);
  return chargraph::to_undirected_self_loops(chargraph::build_graph(traj));
}

GradcheckEntry leaf_check(std::string op, const numcore::LeafFunction& fn,
                          std::vector<Tensor<double>> inputs, std::uint64_t seed,
                          double tolerance = 1e-4) {
  GradcheckOptions opt;
  opt.seed = seed;
  return {std::move(op), tolerance, numcore::gradcheck(fn, std::move(inputs), opt)};
}

GradcheckEntry param_check(std::string op, const numcore::ParamFunction& fn,
                           ParameterStore<double>& store, std::uint64_t seed,
                           double tolerance = 1e-4, double eps = 1e-4, std::size_t max_probes = 0) {
  GradcheckOptions opt;
  opt.seed = seed;
  opt.max_probes_per_input = max_probes;
  opt.eps = eps;
  auto params = store.parameters();
  return {std::move(op), tolerance, numcore::gradcheck_parameters(fn, params, opt)};
}

}  // namespace

std::vector<GradcheckEntry> run_gradcheck_suite(std::uint64_t seed) {
  std::vector<GradcheckEntry> out;
  Rng rng(seed);

  {
    const auto r = random_tensor({5, 3}, rng);
    out.push_back(leaf_check(
        "linear_affine",
        [&](Tape<double>& t, std::span<const Var> in) {
          return project(t, numcore::linear(t, in[0], in[1], in[2]), r);
        },
        {random_tensor({5, 4}, rng), random_tensor({4, 3}, rng), random_tensor({3}, rng)}, seed));
  }

  for (Reduce mode : {Reduce::sum, Reduce::mean, Reduce::max}) {
    const std::vector<std::uint32_t> ids = {0, 2, 0, 1, 2, 2, 0};
    const auto r = random_tensor({3, 3}, rng);
    const char* name = mode == Reduce::sum ? "segment_reduce.sum"
                       : mode == Reduce::mean ? "segment_reduce.mean"
                                              : "segment_reduce.max";
    out.push_back(leaf_check(
        name,
        [&, mode](Tape<double>& t, std::span<const Var> in) {
          return project(t, numcore::segment_reduce(t, in[0], ids, 3, mode), r);
        },
        {random_tensor({7, 3}, rng)}, seed));
  }

  {
    const auto r = random_tensor({8, 3}, rng);
    out.push_back(leaf_check(
        "batch_norm",
        [&](Tape<double>& t, std::span<const Var> in) {
          numcore::BatchNormState<double> state(3);
          return project(t, numcore::batch_norm(t, in[0], in[1], in[2], state, numcore::Mode::train), r);
        },
        {random_tensor({8, 3}, rng), random_tensor({3}, rng, 0.5, 1.5), random_tensor({3}, rng)},
        seed));
  }

  {
    const auto r = random_tensor({6, 4}, rng);
    out.push_back(leaf_check(
        "prelu",
        [&](Tape<double>& t, std::span<const Var> in) {
          return project(t, numcore::prelu(t, in[0], in[1]), r);
        },
        {off_zero({6, 4}, rng), random_tensor({4}, rng, 0.0, 0.5)}, seed));
  }

  const chargraph::CharGraph graph = random_chain(7, rng);
  const std::size_t n = graph.num_nodes();
  const std::size_t e = graph.edges.size();
  const std::vector<std::uint32_t> batch_id(n, 0);

  {
    const auto r = random_tensor({n, 6}, rng);
    out.push_back(leaf_check(
        "node_features",
        [&](Tape<double>& t, std::span<const Var> in) {
          return project(t, chargraph::node_features(t, in[0], graph.predecessor), r);
        },
        {graph.coords}, seed));
  }

  {
    const auto r = random_tensor({e, 2}, rng);
    out.push_back(leaf_check(
        "pseudo_coords",
        [&](Tape<double>& t, std::span<const Var> in) {
          return project(t, splineconv::pseudo_coords(t, in[0], graph.edges, batch_id, 1).u, r);
        },
        {graph.coords}, seed));
  }

  const splineconv::SplineSpec spec;
  const auto kk = static_cast<std::size_t>(spec.num_weights());
  {
    const auto r = random_tensor({n, 3}, rng);
    out.push_back(leaf_check(
        "spline_conv",
        [&](Tape<double>& t, std::span<const Var> in) {
          return project(t, splineconv::spline_conv(t, in[0], graph.edges, in[2], in[1], spec), r);
        },
        {random_tensor({n, 4}, rng), random_tensor({kk, 4, 3}, rng), interior_u(e, rng)}, seed));
  }

  {
    ParameterStore<double> store;
    Rng init = rng.split(1);
    auto stn = transform::make_input_stn<double>(store, "stn", init);
    for (auto* p : {stn.head.weight, stn.head.bias}) p->value = random_tensor(p->value.shape(), rng, -0.3, 0.3);
    auto& coords = store.add("coords", graph.coords);
    const auto r = random_tensor({n, 2}, rng);
    out.push_back(param_check(
        "input_stn",
        [&](Tape<double>& t) {
          return project(t, transform::input_stn(t, t.param(coords), batch_id, 1, stn), r);
        },
        store, seed, 1e-4, kKinkEps));
  }

  {
    ParameterStore<double> store;
    Rng init = rng.split(2);
    auto stn = transform::make_feature_stn<double>(store, "stn", 3, init);
    for (auto* p : {stn.head.weight, stn.head.bias}) p->value = random_tensor(p->value.shape(), rng, -0.3, 0.3);
    auto& features = store.add("features", random_tensor({n, 3}, rng));
    const auto r = random_tensor({n, 3}, rng);
    out.push_back(param_check(
        "feature_stn",
        [&](Tape<double>& t) {
          return project(t, transform::feature_stn(t, t.param(features), batch_id, 1, stn), r);
        },
        store, seed, 1e-4, kKinkEps));
  }

  {
    ParameterStore<double> store;
    Rng init = rng.split(3);
    auto block = network::RsGcb<double>::create(store, "block", 3, 4, spec, 0.2, init);
    for (auto* p : {block.gamma1, block.beta1, block.gamma2, block.beta2}) {
      p->value = random_tensor(p->value.shape(), rng, 0.5, 1.5);
    }
    auto& x = store.add("x", random_tensor({n, 3}, rng));
    const auto u = interior_u(e, rng);
    const auto r = random_tensor({n, 4}, rng);
    const std::uint64_t drop_seed = seed ^ 0xd509;
    out.push_back(param_check(
        "rs_gcb",
        [&](Tape<double>& t) {
          Rng drop(drop_seed);
          return project(t, network::rs_gcb_forward(t, t.param(x), graph.edges, t.leaf(u), block,
                                                    spec, numcore::Mode::train, drop),
                         r);
        },
        store, seed, 1e-3));
  }

  {
    const std::vector<std::uint32_t> labels = {0, 2, 1, 2};
    out.push_back(leaf_check(
        "cos_loss",
        [&](Tape<double>& t, std::span<const Var> in) {
          return network::cos_loss(t, in[0], in[1], labels, 16.0, 0.2);
        },
        {random_tensor({4, 5}, rng), random_tensor({3, 5}, rng)}, seed));
  }

  return out;
}

}  // namespace sgcn::cli
