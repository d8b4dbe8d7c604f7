#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sgcn/numcore/tensor.hpp"

namespace sgcn::numcore {

/// Handle to a value recorded on a Tape.
struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const { return id != UINT32_MAX; }
};

/// Reverse-mode autodiff tape. Operations are appended in evaluation order,
/// so the recorded list is topologically sorted by construction; backward()
/// walks it once in reverse.
///
/// A tape is confined to one thread. Parameters bound with param() may be
/// shared read-only between tapes; their gradients are accumulated into
/// Parameter::grad at the end of backward().
template <typename Real>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor<Real>& out_grad)>;

  Var leaf(Tensor<Real> value, bool requires_grad = false) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.is_leaf = true;
    return push(std::move(n));
  }

  Var param(Parameter<Real>& p) {
    Node n;
    n.value = p.value;
    n.requires_grad = true;
    n.is_leaf = true;
    n.param = &p;
    return push(std::move(n));
  }

  /// Appends an operation result. `backward` is dropped when no input needs
  /// a gradient.
  Var record(Tensor<Real> value, bool requires_grad, BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backward = std::move(backward);
    return push(std::move(n));
  }

  const Tensor<Real>& value(Var v) const { return node(v).value; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }

  /// Gradient slot of `v`, allocated as zeros on first access.
  Tensor<Real>& grad(Var v) {
    Node& n = node(v);
    if (n.grad.size() != n.value.size()) n.grad = Tensor<Real>(n.value.shape());
    return n.grad;
  }

  bool has_grad(Var v) const { return node(v).grad.size() == node(v).value.size(); }

  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and propagates. Gradients of plain leaves and
  /// of bound parameters accumulate across calls; intermediate gradients are
  /// recomputed from scratch each call.
  void backward(Var loss) {
    const Node& l = node(loss);
    if (l.value.size() != 1) {
      throw std::invalid_argument("backward requires a scalar loss, got shape " +
                                  shape_string(l.value.shape()));
    }
    for (std::uint32_t i = 0; i <= loss.id; ++i) {
      Node& n = nodes_[i];
      if (!n.is_leaf || n.param) n.grad = Tensor<Real>();
    }
    grad(loss)[0] = Real(1);
    for (std::uint32_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.size() == 0) continue;
      if (n.backward) {
        // Callbacks only touch gradients of earlier nodes.
        Tensor<Real> g = std::move(n.grad);
        n.backward(*this, g);
        nodes_[i].grad = std::move(g);
      } else if (n.param) {
        auto& pg = n.param->grad;
        if (pg.size() != n.grad.size()) pg = Tensor<Real>(n.value.shape());
        for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
      }
    }
  }

 private:
  struct Node {
    Tensor<Real> value;
    Tensor<Real> grad;
    BackwardFn backward;
    Parameter<Real>* param = nullptr;
    bool requires_grad = false;
    bool is_leaf = false;
  };

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  Node& node(Var v) {
    if (v.id >= nodes_.size()) throw std::out_of_range("var not on this tape");
    return nodes_[v.id];
  }
  const Node& node(Var v) const {
    if (v.id >= nodes_.size()) throw std::out_of_range("var not on this tape");
    return nodes_[v.id];
  }

  std::vector<Node> nodes_;
};

}  // namespace sgcn::numcore
