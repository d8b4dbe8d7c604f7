#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sgcn/chargraph/graph.hpp"
#include "sgcn/numcore/parameters.hpp"
#include "sgcn/splineconv/basis.hpp"
#include "sgcn/transform/stn.hpp"

namespace sgcn::network {

using chargraph::BatchedGraph;
using chargraph::Edge;
using numcore::Mode;
using numcore::Parameter;
using numcore::ParameterStore;
using numcore::Reduce;
using numcore::Rng;
using numcore::Tape;
using numcore::Tensor;
using numcore::Var;

enum class BlockType { input_stn, feat_layer, rs_gcb, pool, feature_stn, global_avg, fc };

/// Which node feature columns the feature layer emits. `constant` gives every
/// node the same single value.
enum class FeatureSet { full, spatial, temporal, constant };

struct BlockSpec {
  BlockType type = BlockType::fc;
  std::size_t channels = 0;  // rs_gcb, fc
  double cell = 0;           // pool
};

struct ModelConfig {
  std::vector<BlockSpec> blocks;
  std::size_t num_classes = 0;
  double width_multiplier = 1.0;  // scales rs_gcb channels
  double sigma = 16.0;
  double margin = 0.0;
  splineconv::SplineSpec spline;
  double dropout = 0.2;
  FeatureSet features = FeatureSet::full;
  Reduce pool_features = Reduce::max;
  bool penup_edges = true;
  double interval = 0.02;
  std::vector<std::string> class_names;

  /// input_stn, feat_layer, rs_gcb(32), pool(0.05), feature_stn, rs_gcb(64),
  /// pool(0.1), global_avg, fc(128).
  static ModelConfig small(std::size_t num_classes);
  /// Adds rs_gcb(96) and pool(0.2) to the small chain and ends in fc(160).
  static ModelConfig large(std::size_t num_classes);

  /// Throws on structural errors: feat_layer count != 1, STN or conv blocks on
  /// the wrong side of it, missing final fc, non-positive widths.
  void validate() const;
  std::size_t feature_width() const;
  std::size_t scaled(std::size_t channels) const;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

std::string to_string(BlockType type);
std::string to_string(FeatureSet set);
FeatureSet feature_set_from_string(const std::string& name);

/// Residual graph-convolution block with its own parameters and BN buffers.
template <typename Real>
struct RsGcb {
  std::size_t in = 0;
  std::size_t out = 0;
  double dropout = 0.2;
  Parameter<Real>* conv1 = nullptr;  // [k^2 x in x out]
  Parameter<Real>* conv2 = nullptr;  // [k^2 x out x out]
  Parameter<Real>* gamma1 = nullptr;
  Parameter<Real>* beta1 = nullptr;
  Parameter<Real>* gamma2 = nullptr;
  Parameter<Real>* beta2 = nullptr;
  Parameter<Real>* slope1 = nullptr;
  Parameter<Real>* slope2 = nullptr;
  Parameter<Real>* shortcut = nullptr;  // [in x out], only when in != out
  numcore::BatchNormState<Real>* bn1 = nullptr;
  numcore::BatchNormState<Real>* bn2 = nullptr;

  static RsGcb create(ParameterStore<Real>& store, const std::string& prefix, std::size_t in,
                      std::size_t out, const splineconv::SplineSpec& spec, double dropout, Rng& rng);
};

/// y = PReLU(BN(conv2(Dropout(PReLU(BN(conv1 x))))) + shortcut(x)); both
/// convolutions use the pseudo-coordinates `u` of `edges`.
template <typename Real>
Var rs_gcb_forward(Tape<Real>& t, Var x, std::span<const Edge> edges, Var u,
                   const RsGcb<Real>& block, const splineconv::SplineSpec& spec, Mode mode,
                   Rng& rng);

/// Cosine of every embedding row with every class-weight row: [B x K].
template <typename Real>
Var cosine_similarity(Tape<Real>& t, Var embedding, Var class_weights);

/// Mean cross-entropy of sigma * (cos - m [k == label]).
template <typename Real>
Var cosine_margin_loss(Tape<Real>& t, Var cosine, std::span<const std::uint32_t> labels,
                       double sigma, double margin);

template <typename Real>
Var cos_loss(Tape<Real>& t, Var embedding, Var class_weights,
             std::span<const std::uint32_t> labels, double sigma, double margin);

struct ParamCount {
  std::size_t num_params = 0;
  std::size_t storage_bytes = 0;
};

template <typename Real>
class SgcnModel {
 public:
  struct Output {
    Var embedding;  // [B x C]
    Var cosine;     // [B x K]
    Var logits;     // sigma * cosine
  };

  SgcnModel(ModelConfig config, Rng& init_rng);

  const ModelConfig& config() const { return config_; }
  ParameterStore<Real>& store() { return store_; }
  const ParameterStore<Real>& store() const { return store_; }
  Parameter<Real>& class_weights() { return *class_weights_; }

  /// `batch` must be undirected with self-loops and keep its predecessors.
  Output forward(Tape<Real>& t, const BatchedGraph& batch, Mode mode, Rng& dropout_rng);

  /// Eval-mode logits as a plain tensor [B x K].
  Tensor<Real> predict(const BatchedGraph& batch);

  Var loss(Tape<Real>& t, const Output& out, std::span<const std::uint32_t> labels) const;

  ParamCount param_count() const;

 private:
  struct Layer {
    BlockSpec spec;
    transform::StnParams<Real> stn;
    RsGcb<Real> block;
    numcore::Dense<Real> fc;
  };

  ModelConfig config_;
  ParameterStore<Real> store_;
  std::vector<Layer> layers_;
  Parameter<Real>* class_weights_ = nullptr;
};

}  // namespace sgcn::network
