#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "sgcn/ink/dataset.hpp"
#include "sgcn/network/model.hpp"
#include "sgcn/splineconv/conv.hpp"
#include "sgcn/numcore/gradcheck.hpp"
#include "sgcn/numcore/ops.hpp"
#include "support.hpp"

using namespace sgcn::network;
using sgcn::chargraph::CharGraph;
using sgcn::numcore::Rng;
using sgcn::test::permuted;
using sgcn::test::random_tensor;

namespace {

CharGraph digit_graph(std::size_t digit, double angle = 0.0) {
  auto traj = sgcn::ink::digit_template(digit);
  for (auto& s : traj.strokes) {
    for (auto& p : s) {
      p = {std::cos(angle) * p.x - std::sin(angle) * p.y, std::sin(angle) * p.x + std::cos(angle) * p.y};
    }
  }
  return sgcn::chargraph::prepare_graph(traj);
}

template <typename Real>
Tensor<Real> predict_one(SgcnModel<Real>& m, const CharGraph& g) {
  const CharGraph one[] = {g};
  return m.predict(sgcn::chargraph::batch_graphs(one));
}

}  // namespace

TEST_SUITE_BEGIN("network");

TEST_CASE("rs_gcb: zero convolutions reduce to PReLU of the input") {
  Rng rng(1);
  sgcn::numcore::ParameterStore<double> store;
  const sgcn::splineconv::SplineSpec spec;
  auto block = RsGcb<double>::create(store, "b", 4, 4, spec, 0.2, rng);
  block.conv1->value.fill(0);
  block.conv2->value.fill(0);
  CHECK(block.shortcut == nullptr);
  const CharGraph g = sgcn::test::random_graph(9, rng);
  const auto x = random_tensor({9, 4}, rng);
  const auto u = sgcn::splineconv::pseudo_coords(g).u;
  for (Mode mode : {Mode::train, Mode::eval}) {
    Tape<double> t;
    Rng drop(3);
    const auto y = t.value(rs_gcb_forward(t, t.leaf(x), g.edges, t.leaf(u), block, spec, mode, drop));
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == doctest::Approx(x[i] > 0 ? x[i] : 0.25 * x[i]));
  }
}

TEST_CASE("rs_gcb: eval mode is deterministic, channel mismatch rejected") {
  Rng rng(2);
  sgcn::numcore::ParameterStore<float> store;
  const sgcn::splineconv::SplineSpec spec;
  auto block = RsGcb<float>::create(store, "b", 3, 5, spec, 0.2, rng);
  CHECK(block.shortcut != nullptr);
  const CharGraph g = sgcn::test::random_graph(11, rng);
  const auto x = random_tensor<float>({11, 3}, rng);
  const auto u = sgcn::splineconv::pseudo_coords(g).u.template cast<float>();
  auto run = [&] {
    Tape<float> t;
    Rng drop(9);
    return t.value(rs_gcb_forward(t, t.leaf(x), g.edges, t.leaf(u), block, spec, Mode::eval, drop));
  };
  CHECK(run() == run());
  Tape<float> t;
  Rng drop(9);
  CHECK_THROWS_AS(rs_gcb_forward(t, t.leaf(random_tensor<float>({11, 4}, rng)), g.edges, t.leaf(u), block, spec,
                                 Mode::eval, drop),
                  std::invalid_argument);
}

TEST_CASE("cos_loss: closed forms") {
  SUBCASE("uniform cosines give ln K") {
    const std::size_t k = 3755;
    Tape<double> t;
    auto emb = t.leaf(Tensor<double>::matrix({{0.3, -0.4}}));
    auto w = t.leaf(Tensor<double>({k, 2}, 1.0));
    const std::vector<std::uint32_t> labels = {17};
    const double loss = t.value(cos_loss(t, emb, w, labels, 16.0, 0.0))[0];
    CHECK(loss == doctest::Approx(std::log(3755.0)).epsilon(1e-12));
    CHECK(loss == doctest::Approx(8.2309).epsilon(1e-5));
  }
  SUBCASE("opposite classes") {
    Tape<double> t;
    auto emb = t.leaf(Tensor<double>::matrix({{2, 0}}));
    auto w = t.leaf(Tensor<double>::matrix({{1, 0}, {-1, 0}}));
    const std::vector<std::uint32_t> labels = {0};
    const double loss = t.value(cos_loss(t, emb, w, labels, 16.0, 0.0))[0];
    CHECK(loss == doctest::Approx(std::log1p(std::exp(-32.0))).epsilon(1e-9));
    CHECK(loss == doctest::Approx(1.27e-14).epsilon(0.01));
  }
  SUBCASE("margin increases the loss") {
    Rng rng(3);
    const auto e = random_tensor({4, 5}, rng);
    const auto w = random_tensor({3, 5}, rng);
    const std::vector<std::uint32_t> labels = {0, 1, 2, 1};
    double prev = -1;
    for (double m : {0.0, 0.1, 0.2, 0.35}) {
      Tape<double> t;
      const double loss = t.value(cos_loss(t, t.leaf(e), t.leaf(w), labels, 16.0, m))[0];
      CHECK(loss > prev);
      CHECK(loss >= 0);
      prev = loss;
    }
  }
  SUBCASE("label out of range") {
    Tape<double> t;
    const std::vector<std::uint32_t> labels = {3};
    CHECK_THROWS_AS(cos_loss(t, t.leaf(Tensor<double>({1, 2}, 1.0)), t.leaf(Tensor<double>({3, 2}, 1.0)), labels,
                             16.0, 0.0),
                    std::out_of_range);
  }
}

TEST_CASE("cosine logits: argmax ignores embedding scale") {
  Rng rng(4);
  const auto e = random_tensor({6, 8}, rng);
  const auto w = random_tensor({5, 8}, rng);
  Tensor<double> scaled = e;
  for (auto& v : scaled.values()) v *= 37.5;
  Tape<double> t;
  const auto a = t.value(cosine_similarity(t, t.leaf(e), t.leaf(w)));
  const auto b = t.value(cosine_similarity(t, t.leaf(scaled), t.leaf(w)));
  for (std::size_t r = 0; r < 6; ++r) {
    auto ra = a.row(r), rb = b.row(r);
    CHECK(std::max_element(ra.begin(), ra.end()) - ra.begin() == std::max_element(rb.begin(), rb.end()) - rb.begin());
  }
}

TEST_CASE("param_count") {
  SUBCASE("dense layer") {
    sgcn::numcore::ParameterStore<float> store;
    Rng rng(0);
    sgcn::numcore::Dense<float>::create(store, "fc", 10, 5, rng);
    std::size_t n = 0;
    for (const auto* p : store.parameters()) n += p->value.size();
    CHECK(n == 55);
  }
  SUBCASE("small config, layer by layer") {
    Rng rng(0);
    const SgcnModel<float> m(ModelConfig::small(10), rng);
    const std::size_t stn_in = (2 * 64 + 64 + 64) + (64 * 128 + 128 + 128) + (128 * 128 + 128 + 128) + (128 * 4 + 4);
    const std::size_t gcb1 = 9 * 6 * 32 + 9 * 32 * 32 + 4 * 32 + 2 * 32 + 6 * 32;
    const std::size_t stn_feat = (32 * 64 + 64 + 64) + (64 * 128 + 128 + 128) + (128 * 128 + 128 + 128) + (128 * 1024 + 1024);
    const std::size_t gcb2 = 9 * 32 * 64 + 9 * 64 * 64 + 4 * 64 + 2 * 64 + 32 * 64;
    const std::size_t fc = 64 * 128 + 128;
    const std::size_t head = 10 * 128;
    const auto c = m.param_count();
    CHECK(c.num_params == stn_in + gcb1 + stn_feat + gcb2 + fc + head);
    CHECK(c.storage_bytes == 4 * (c.num_params + 2 * 2 * 32 + 2 * 2 * 64));
  }
  SUBCASE("width multiplier scales convolutions quadratically") {
    Rng a(0), b(0);
    ModelConfig wide = ModelConfig::small(10);
    wide.width_multiplier = 2;
    SgcnModel<float> m1(ModelConfig::small(10), a);
    SgcnModel<float> m2(wide, b);
    const auto find_conv2 = [](SgcnModel<float>& m) {
      for (auto* p : m.store().parameters()) {
        if (p->name.ends_with("conv2")) return p->value.size();
      }
      return std::size_t{0};
    };
    CHECK(find_conv2(m2) == 4 * find_conv2(m1));
  }
}

TEST_CASE("model config: presets, validation, JSON round trip") {
  for (const auto& c : {ModelConfig::small(10), ModelConfig::large(3755)}) {
    CHECK_NOTHROW(c.validate());
    const ModelConfig back = ModelConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
  }
  ModelConfig bad = ModelConfig::small(10);
  bad.blocks.erase(bad.blocks.begin() + 1);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  ModelConfig no_head = ModelConfig::small(10);
  no_head.blocks.pop_back();
  CHECK_THROWS_AS(no_head.validate(), std::invalid_argument);
  CHECK(feature_set_from_string(to_string(FeatureSet::temporal)) == FeatureSet::temporal);
  CHECK_THROWS(feature_set_from_string("bogus"));
}

TEST_CASE("model: single-node graph") {
  Rng rng(5);
  SgcnModel<float> m(ModelConfig::small(7), rng);
  const auto logits = predict_one(m, sgcn::chargraph::prepare_graph(sgcn::ink::Trajectory{{{{3, 4}}}}));
  CHECK(logits.shape() == sgcn::numcore::Shape{1, 7});
  for (float v : logits.values()) CHECK(std::isfinite(v));
}

TEST_CASE("model: eval forward is a pure function") {
  Rng rng(6);
  SgcnModel<float> m(ModelConfig::small(10), rng);
  const CharGraph gs[] = {digit_graph(3), digit_graph(8, 0.2)};
  const auto batch = sgcn::chargraph::batch_graphs(gs);
  CHECK(m.predict(batch) == m.predict(batch));
}

TEST_CASE("model: node permutation leaves logits unchanged") {
  Rng rng(12);
  SgcnModel<double> m(ModelConfig::small(10), rng);
  for (std::size_t d = 0; d < 10; ++d) {
    const CharGraph g = digit_graph(d, 0.05 * static_cast<double>(d));
    CHECK(sgcn::test::max_abs_diff(predict_one(m, permuted(g, rng)), predict_one(m, g)) < 1e-6);
  }
}

TEST_CASE("model: batching leaves logits unchanged") {
  Rng rng(12);
  SgcnModel<float> m(ModelConfig::small(10), rng);
  const CharGraph a = digit_graph(2, 0.15);
  const CharGraph b = digit_graph(5, -0.1);
  const auto la = predict_one(m, a);
  const auto lb = predict_one(m, b);
  const CharGraph both[] = {a, b};
  const auto lab = m.predict(sgcn::chargraph::batch_graphs(both));
  for (std::size_t k = 0; k < 10; ++k) {
    CHECK(std::abs(lab(0, k) - la[k]) < 1e-5);
    CHECK(std::abs(lab(1, k) - lb[k]) < 1e-5);
  }
}

TEST_CASE("model: the feature set fixes the first convolution width") {
  ModelConfig c = ModelConfig::small(4);
  c.features = FeatureSet::spatial;
  Rng rng(7);
  SgcnModel<float> m(c, rng);
  CHECK(m.store().parameter("b2.conv1").value.shape()[1] == 2);
}

TEST_CASE("model: the large config gradchecks end to end on a 3-class toy batch") {
  ModelConfig c = ModelConfig::large(3);
  Rng rng(8);
  SgcnModel<double> m(c, rng);
  // Normalized coordinates touch 0 and 1, which are grid cell edges; a small
  // input transform moves every node off them so pooling is locally constant.
  m.store().parameter("b0.stn.head.bias").value = Tensor<double>::vector({0.013, -0.021, 0.007, 0.011});
  const CharGraph gs[] = {digit_graph(0, 0.1), digit_graph(1, -0.2), digit_graph(7, 0.3)};
  const auto batch = sgcn::chargraph::batch_graphs(gs);
  const std::vector<std::uint32_t> labels = {0, 1, 2};
  auto fn = [&](Tape<double>& t) {
    Rng drop(11);
    return m.loss(t, m.forward(t, batch, Mode::train, drop), labels);
  };
  sgcn::numcore::GradcheckOptions opt;
  opt.eps = 1e-6;
  opt.max_probes_per_input = 2;
  opt.seed = 8;
  auto params = m.store().parameters();
  const auto r = sgcn::numcore::gradcheck_parameters(fn, params, opt);
  CHECK_MESSAGE(r.max_rel_error < 1e-3, r.worst);
  CHECK(r.finite);
}

TEST_SUITE_END();
