#pragma once

#include <cmath>
#include <deque>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sgcn/numcore/ops.hpp"
#include "sgcn/numcore/rng.hpp"

namespace sgcn::numcore {

/// Owns named parameters and batch-norm buffers with stable addresses, in
/// registration order.
template <typename Real>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  Parameter<Real>& add(const std::string& name, Tensor<Real> init) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
    params_.emplace_back(name, std::move(init));
    index_[name] = params_.size() - 1;
    return params_.back();
  }

  BatchNormState<Real>& add_buffer(const std::string& name, std::size_t channels) {
    if (buffer_index_.count(name)) throw std::invalid_argument("duplicate buffer '" + name + "'");
    buffers_.emplace_back(channels);
    buffer_names_.push_back(name);
    buffer_index_[name] = buffers_.size() - 1;
    return buffers_.back();
  }

  std::vector<Parameter<Real>*> parameters() {
    std::vector<Parameter<Real>*> out;
    for (auto& p : params_) out.push_back(&p);
    return out;
  }
  std::vector<const Parameter<Real>*> parameters() const {
    std::vector<const Parameter<Real>*> out;
    for (const auto& p : params_) out.push_back(&p);
    return out;
  }

  Parameter<Real>& parameter(const std::string& name) { return params_.at(index_.at(name)); }
  bool has_parameter(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t num_buffers() const { return buffers_.size(); }
  const std::string& buffer_name(std::size_t i) const { return buffer_names_.at(i); }
  BatchNormState<Real>& buffer(std::size_t i) { return buffers_.at(i); }
  const BatchNormState<Real>& buffer(std::size_t i) const { return buffers_.at(i); }
  BatchNormState<Real>& buffer(const std::string& name) { return buffers_.at(buffer_index_.at(name)); }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

 private:
  std::deque<Parameter<Real>> params_;
  std::map<std::string, std::size_t> index_;
  std::deque<BatchNormState<Real>> buffers_;
  std::vector<std::string> buffer_names_;
  std::map<std::string, std::size_t> buffer_index_;
};

/// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
template <typename Real>
Tensor<Real> glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Tensor<Real> t(std::move(shape));
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.values()) v = static_cast<Real>(rng.uniform(-a, a));
  return t;
}

/// Affine layer parameters: weight [in x out], bias [out].
template <typename Real>
struct Dense {
  Parameter<Real>* weight = nullptr;
  Parameter<Real>* bias = nullptr;

  static Dense create(ParameterStore<Real>& store, const std::string& prefix, std::size_t in,
                      std::size_t out, Rng& rng, bool zero_init = false) {
    Dense d;
    d.weight = &store.add(prefix + ".weight", zero_init ? Tensor<Real>({in, out})
                                                        : glorot_uniform<Real>({in, out}, in, out, rng));
    d.bias = &store.add(prefix + ".bias", Tensor<Real>({out}));
    return d;
  }

  Var operator()(Tape<Real>& t, Var x) const {
    return linear(t, x, t.param(*weight), t.param(*bias));
  }
};

}  // namespace sgcn::numcore
