#include "sgcn/network/model.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>

#include "json.hpp"
#include "sgcn/coarsen/pool.hpp"
#include "sgcn/splineconv/conv.hpp"

namespace sgcn::network {
namespace {

using json = nlohmann::json;

constexpr double kInitialSlope = 0.25;

BlockSpec block(BlockType type, std::size_t channels = 0, double cell = 0) {
  return BlockSpec{type, channels, cell};
}

BlockType block_type_from_string(const std::string& s) {
  for (BlockType t : {BlockType::input_stn, BlockType::feat_layer, BlockType::rs_gcb,
                      BlockType::pool, BlockType::feature_stn, BlockType::global_avg,
                      BlockType::fc}) {
    if (to_string(t) == s) return t;
  }
  throw std::invalid_argument("model config: unknown block type '" + s + "'");
}

template <typename Real>
Tensor<Real> spline_init(std::size_t kk, std::size_t in, std::size_t out, Rng& rng) {
  return numcore::glorot_uniform<Real>({kk, in, out}, in, out, rng);
}

}  // namespace

std::string to_string(BlockType type) {
  switch (type) {
    case BlockType::input_stn: return "input_stn";
    case BlockType::feat_layer: return "feat_layer";
    case BlockType::rs_gcb: return "rs_gcb";
    case BlockType::pool: return "pool";
    case BlockType::feature_stn: return "feature_stn";
    case BlockType::global_avg: return "global_avg";
    case BlockType::fc: return "fc";
  }
  return "?";
}

std::string to_string(FeatureSet set) {
  switch (set) {
    case FeatureSet::full: return "full";
    case FeatureSet::spatial: return "spatial";
    case FeatureSet::temporal: return "temporal";
    case FeatureSet::constant: return "constant";
  }
  return "?";
}

FeatureSet feature_set_from_string(const std::string& name) {
  for (FeatureSet f : {FeatureSet::full, FeatureSet::spatial, FeatureSet::temporal,
                       FeatureSet::constant}) {
    if (to_string(f) == name) return f;
  }
  throw std::invalid_argument("unknown feature set '" + name +
                              "' (expected full, spatial, temporal or constant)");
}

ModelConfig ModelConfig::small(std::size_t num_classes) {
  ModelConfig c;
  c.num_classes = num_classes;
  c.blocks = {block(BlockType::input_stn),   block(BlockType::feat_layer),
              block(BlockType::rs_gcb, 32),  block(BlockType::pool, 0, 0.05),
              block(BlockType::feature_stn), block(BlockType::rs_gcb, 64),
              block(BlockType::pool, 0, 0.1), block(BlockType::global_avg),
              block(BlockType::fc, 128)};
  return c;
}

ModelConfig ModelConfig::large(std::size_t num_classes) {
  ModelConfig c;
  c.num_classes = num_classes;
  c.blocks = {block(BlockType::input_stn),    block(BlockType::feat_layer),
              block(BlockType::rs_gcb, 32),   block(BlockType::pool, 0, 0.05),
              block(BlockType::feature_stn),  block(BlockType::rs_gcb, 64),
              block(BlockType::pool, 0, 0.1), block(BlockType::rs_gcb, 96),
              block(BlockType::pool, 0, 0.2), block(BlockType::global_avg),
              block(BlockType::fc, 160)};
  return c;
}

std::size_t ModelConfig::feature_width() const {
  switch (features) {
    case FeatureSet::full: return 6;
    case FeatureSet::spatial: return 2;
    case FeatureSet::temporal: return 4;
    case FeatureSet::constant: return 1;
  }
  return 0;
}

std::size_t ModelConfig::scaled(std::size_t channels) const {
  return static_cast<std::size_t>(std::lround(static_cast<double>(channels) * width_multiplier));
}

void ModelConfig::validate() const {
  if (num_classes < 2) throw std::invalid_argument("model config: need at least 2 classes");
  if (!(width_multiplier > 0)) throw std::invalid_argument("model config: width multiplier must be positive");
  if (!(sigma > 0)) throw std::invalid_argument("model config: sigma must be positive");
  if (!(margin >= 0)) throw std::invalid_argument("model config: margin must be non-negative");
  if (!(dropout >= 0 && dropout < 1)) throw std::invalid_argument("model config: dropout must be in [0, 1)");
  if (!(interval > 0)) throw std::invalid_argument("model config: interval must be positive");
  if (pool_features == Reduce::sum) throw std::invalid_argument("model config: pool features must be max or mean");
  spline.validate();
  if (!class_names.empty() && class_names.size() != num_classes) {
    throw std::invalid_argument("model config: " + std::to_string(class_names.size()) +
                                " class names for " + std::to_string(num_classes) + " classes");
  }
  int feat = 0;
  bool pooled_globally = false;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const BlockSpec& b = blocks[i];
    const std::string where = "model config: block " + std::to_string(i) + " (" + to_string(b.type) + ")";
    switch (b.type) {
      case BlockType::input_stn:
        if (feat) throw std::invalid_argument(where + " must precede feat_layer");
        break;
      case BlockType::feat_layer:
        ++feat;
        break;
      case BlockType::rs_gcb:
      case BlockType::pool:
      case BlockType::feature_stn:
        if (!feat) throw std::invalid_argument(where + " must follow feat_layer");
        if (pooled_globally) throw std::invalid_argument(where + " must precede global_avg");
        if (b.type == BlockType::rs_gcb && scaled(b.channels) == 0) {
          throw std::invalid_argument(where + " needs positive channels");
        }
        if (b.type == BlockType::pool && !(b.cell > 0)) {
          throw std::invalid_argument(where + " needs a positive cell size");
        }
        break;
      case BlockType::global_avg:
        if (!feat || pooled_globally) throw std::invalid_argument(where + " must appear once, after feat_layer");
        pooled_globally = true;
        break;
      case BlockType::fc:
        if (!pooled_globally) throw std::invalid_argument(where + " must follow global_avg");
        if (b.channels == 0) throw std::invalid_argument(where + " needs positive channels");
        break;
    }
  }
  if (feat != 1) throw std::invalid_argument("model config: exactly one feat_layer required");
  if (blocks.empty() || blocks.back().type != BlockType::fc) {
    throw std::invalid_argument("model config: last block must be fc");
  }
}

std::string ModelConfig::to_json() const {
  json j;
  j["num_classes"] = num_classes;
  j["width_multiplier"] = width_multiplier;
  j["sigma"] = sigma;
  j["margin"] = margin;
  j["kernel_size"] = spline.kernel_size;
  j["degree"] = spline.degree;
  j["dropout"] = dropout;
  j["features"] = to_string(features);
  j["pool_features"] = pool_features == Reduce::mean ? "mean" : "max";
  j["penup_edges"] = penup_edges;
  j["interval"] = interval;
  j["class_names"] = class_names;
  json blocks_json = json::array();
  for (const BlockSpec& b : blocks) {
    json e{{"type", to_string(b.type)}};
    if (b.type == BlockType::rs_gcb || b.type == BlockType::fc) e["channels"] = b.channels;
    if (b.type == BlockType::pool) e["cell"] = b.cell;
    blocks_json.push_back(std::move(e));
  }
  j["blocks"] = std::move(blocks_json);
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("model config: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("model config: expected a JSON object");
  ModelConfig c;
  try {
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.width_multiplier = j.value("width_multiplier", c.width_multiplier);
    c.sigma = j.value("sigma", c.sigma);
    c.margin = j.value("margin", c.margin);
    c.spline.kernel_size = j.value("kernel_size", c.spline.kernel_size);
    c.spline.degree = j.value("degree", c.spline.degree);
    c.dropout = j.value("dropout", c.dropout);
    c.features = feature_set_from_string(j.value("features", std::string("full")));
    const std::string pf = j.value("pool_features", std::string("max"));
    if (pf == "max") {
      c.pool_features = Reduce::max;
    } else if (pf == "mean") {
      c.pool_features = Reduce::mean;
    } else {
      throw std::invalid_argument("model config: pool_features must be max or mean");
    }
    c.penup_edges = j.value("penup_edges", c.penup_edges);
    c.interval = j.value("interval", c.interval);
    c.class_names = j.value("class_names", std::vector<std::string>{});
    if (j.contains("blocks")) {
      for (const auto& e : j.at("blocks")) {
        BlockSpec b;
        b.type = block_type_from_string(e.at("type").get<std::string>());
        b.channels = e.value("channels", std::size_t{0});
        b.cell = e.value("cell", 0.0);
        c.blocks.push_back(b);
      }
    } else {
      c.blocks = small(c.num_classes).blocks;
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

template <typename Real>
RsGcb<Real> RsGcb<Real>::create(ParameterStore<Real>& store, const std::string& prefix,
                                std::size_t in, std::size_t out,
                                const splineconv::SplineSpec& spec, double dropout, Rng& rng) {
  const auto kk = static_cast<std::size_t>(spec.num_weights());
  RsGcb b;
  b.in = in;
  b.out = out;
  b.dropout = dropout;
  b.conv1 = &store.add(prefix + ".conv1", spline_init<Real>(kk, in, out, rng));
  b.gamma1 = &store.add(prefix + ".bn1.gamma", Tensor<Real>({out}, Real(1)));
  b.beta1 = &store.add(prefix + ".bn1.beta", Tensor<Real>({out}));
  b.slope1 = &store.add(prefix + ".act1.slope", Tensor<Real>({out}, Real(kInitialSlope)));
  b.conv2 = &store.add(prefix + ".conv2", spline_init<Real>(kk, out, out, rng));
  b.gamma2 = &store.add(prefix + ".bn2.gamma", Tensor<Real>({out}, Real(1)));
  b.beta2 = &store.add(prefix + ".bn2.beta", Tensor<Real>({out}));
  b.slope2 = &store.add(prefix + ".act2.slope", Tensor<Real>({out}, Real(kInitialSlope)));
  if (in != out) {
    b.shortcut = &store.add(prefix + ".shortcut",
                            numcore::glorot_uniform<Real>({in, out}, in, out, rng));
  }
  b.bn1 = &store.add_buffer(prefix + ".bn1", out);
  b.bn2 = &store.add_buffer(prefix + ".bn2", out);
  return b;
}

template <typename Real>
Var rs_gcb_forward(Tape<Real>& t, Var x, std::span<const Edge> edges, Var u,
                   const RsGcb<Real>& b, const splineconv::SplineSpec& spec, Mode mode,
                   Rng& rng) {
  if (t.value(x).cols() != b.in) {
    throw std::invalid_argument("rs_gcb: expected " + std::to_string(b.in) + " channels, got " +
                                std::to_string(t.value(x).cols()));
  }
  Var h = splineconv::spline_conv(t, x, edges, u, t.param(*b.conv1), spec);
  h = numcore::batch_norm(t, h, t.param(*b.gamma1), t.param(*b.beta1), *b.bn1, mode);
  h = numcore::prelu(t, h, t.param(*b.slope1));
  h = numcore::dropout(t, h, b.dropout, mode, rng);
  h = splineconv::spline_conv(t, h, edges, u, t.param(*b.conv2), spec);
  h = numcore::batch_norm(t, h, t.param(*b.gamma2), t.param(*b.beta2), *b.bn2, mode);
  const Var skip = b.shortcut ? numcore::matmul(t, x, t.param(*b.shortcut)) : x;
  return numcore::prelu(t, numcore::add(t, h, skip), t.param(*b.slope2));
}

template <typename Real>
Var cosine_similarity(Tape<Real>& t, Var embedding, Var class_weights) {
  return numcore::matmul_nt(t, numcore::l2_normalize_rows(t, embedding),
                            numcore::l2_normalize_rows(t, class_weights));
}

template <typename Real>
Var cosine_margin_loss(Tape<Real>& t, Var cosine, std::span<const std::uint32_t> labels,
                       double sigma, double margin) {
  const auto& c = t.value(cosine);
  if (labels.size() != c.rows()) throw std::invalid_argument("cos_loss: one label per row required");
  Var logits = numcore::scale(t, cosine, static_cast<Real>(sigma));
  if (margin != 0) {
    Tensor<Real> shift(c.shape());
    for (std::size_t b = 0; b < labels.size(); ++b) {
      if (labels[b] >= c.cols()) {
        throw std::out_of_range("cos_loss: label " + std::to_string(labels[b]) + " out of range");
      }
      shift(b, labels[b]) = static_cast<Real>(-sigma * margin);
    }
    logits = numcore::add(t, logits, t.leaf(std::move(shift)));
  }
  return numcore::softmax_cross_entropy(t, logits, labels);
}

template <typename Real>
Var cos_loss(Tape<Real>& t, Var embedding, Var class_weights,
             std::span<const std::uint32_t> labels, double sigma, double margin) {
  return cosine_margin_loss(t, cosine_similarity(t, embedding, class_weights), labels, sigma,
                            margin);
}

template <typename Real>
SgcnModel<Real>::SgcnModel(ModelConfig config, Rng& rng) : config_(std::move(config)) {
  config_.validate();
  std::size_t width = 0;  // channels of the current node features
  for (std::size_t i = 0; i < config_.blocks.size(); ++i) {
    Layer layer;
    layer.spec = config_.blocks[i];
    const std::string prefix = "b" + std::to_string(i);
    switch (layer.spec.type) {
      case BlockType::input_stn:
        layer.stn = transform::make_input_stn<Real>(store_, prefix + ".stn", rng);
        break;
      case BlockType::feat_layer:
        width = config_.feature_width();
        break;
      case BlockType::rs_gcb: {
        const std::size_t out = config_.scaled(layer.spec.channels);
        layer.block = RsGcb<Real>::create(store_, prefix, width, out, config_.spline,
                                          config_.dropout, rng);
        width = out;
        break;
      }
      case BlockType::feature_stn:
        layer.stn = transform::make_feature_stn<Real>(store_, prefix + ".stn", width, rng);
        break;
      case BlockType::pool:
      case BlockType::global_avg:
        break;
      case BlockType::fc:
        layer.fc = numcore::Dense<Real>::create(store_, prefix + ".fc", width, layer.spec.channels, rng);
        width = layer.spec.channels;
        break;
    }
    layers_.push_back(std::move(layer));
  }
  class_weights_ = &store_.add("head.weight", numcore::glorot_uniform<Real>(
                                                  {config_.num_classes, width}, width,
                                                  config_.num_classes, rng));
}

template <typename Real>
typename SgcnModel<Real>::Output SgcnModel<Real>::forward(Tape<Real>& t, const BatchedGraph& batch,
                                                          Mode mode, Rng& dropout_rng) {
  if (batch.directed) throw std::invalid_argument("model: batch must be undirected with self-loops");
  if (batch.num_graphs() == 0) throw std::invalid_argument("model: empty batch");
  const std::size_t num_graphs = batch.num_graphs();

  Tensor<Real> coords0 = batch.coords.template cast<Real>();
  Var coords = t.leaf(std::move(coords0));
  Var features;
  std::vector<Edge> edges = batch.edges;
  std::vector<std::uint32_t> batch_id = batch.batch_id;
  std::optional<Var> u;
  Var pooled;

  for (const Layer& layer : layers_) {
    switch (layer.spec.type) {
      case BlockType::input_stn:
        coords = transform::input_stn(t, coords, batch_id, num_graphs, layer.stn);
        u.reset();
        break;
      case BlockType::feat_layer: {
        if (config_.features == FeatureSet::constant) {
          features = t.leaf(Tensor<Real>({batch_id.size(), 1}, Real(1)));
          break;
        }
        const Var all = chargraph::node_features(t, coords, batch.predecessor);
        static constexpr std::size_t spatial[] = {0, 1};
        static constexpr std::size_t temporal[] = {2, 3, 4, 5};
        if (config_.features == FeatureSet::full) {
          features = all;
        } else if (config_.features == FeatureSet::spatial) {
          features = numcore::select_columns(t, all, std::span<const std::size_t>(spatial));
        } else {
          features = numcore::select_columns(t, all, std::span<const std::size_t>(temporal));
        }
        break;
      }
      case BlockType::rs_gcb:
        if (!u) u = splineconv::pseudo_coords(t, coords, edges, batch_id, num_graphs).u;
        features = rs_gcb_forward(t, features, edges, *u, layer.block, config_.spline, mode,
                                  dropout_rng);
        break;
      case BlockType::pool: {
        const auto assignment = coarsen::grid_cluster(t.value(coords), batch_id, layer.spec.cell);
        const auto p = coarsen::pool(t, coords, features, assignment, config_.pool_features);
        edges = coarsen::coarse_edges(edges, assignment);
        batch_id = assignment.batch_id;
        coords = p.coords;
        features = p.features;
        u.reset();
        break;
      }
      case BlockType::feature_stn:
        features = transform::feature_stn(t, features, batch_id, num_graphs, layer.stn);
        break;
      case BlockType::global_avg:
        pooled = numcore::segment_reduce(t, features, batch_id, num_graphs, Reduce::mean);
        break;
      case BlockType::fc:
        pooled = layer.fc(t, pooled);
        break;
    }
  }
  Output out;
  out.embedding = pooled;
  out.cosine = cosine_similarity(t, pooled, t.param(*class_weights_));
  out.logits = numcore::scale(t, out.cosine, static_cast<Real>(config_.sigma));
  return out;
}

template <typename Real>
Tensor<Real> SgcnModel<Real>::predict(const BatchedGraph& batch) {
  Tape<Real> t;
  Rng unused(0);
  return t.value(forward(t, batch, Mode::eval, unused).logits);
}

template <typename Real>
Var SgcnModel<Real>::loss(Tape<Real>& t, const Output& out,
                          std::span<const std::uint32_t> labels) const {
  return cosine_margin_loss(t, out.cosine, labels, config_.sigma, config_.margin);
}

template <typename Real>
ParamCount SgcnModel<Real>::param_count() const {
  ParamCount c;
  for (const auto* p : store_.parameters()) c.num_params += p->value.size();
  std::size_t buffers = 0;
  for (std::size_t i = 0; i < store_.num_buffers(); ++i) {
    buffers += store_.buffer(i).running_mean.size() + store_.buffer(i).running_var.size();
  }
  c.storage_bytes = 4 * (c.num_params + buffers);
  return c;
}

#define SGCN_INSTANTIATE_NETWORK(Real)                                                          \
  template struct RsGcb<Real>;                                                                  \
  template Var rs_gcb_forward<Real>(Tape<Real>&, Var, std::span<const Edge>, Var,               \
                                    const RsGcb<Real>&, const splineconv::SplineSpec&, Mode,    \
                                    Rng&);                                                      \
  template Var cosine_similarity<Real>(Tape<Real>&, Var, Var);                                  \
  template Var cosine_margin_loss<Real>(Tape<Real>&, Var, std::span<const std::uint32_t>,       \
                                        double, double);                                        \
  template Var cos_loss<Real>(Tape<Real>&, Var, Var, std::span<const std::uint32_t>, double,    \
                              double);                                                          \
  template class SgcnModel<Real>;

SGCN_INSTANTIATE_NETWORK(float)
SGCN_INSTANTIATE_NETWORK(double)

#undef SGCN_INSTANTIATE_NETWORK

}  // namespace sgcn::network
