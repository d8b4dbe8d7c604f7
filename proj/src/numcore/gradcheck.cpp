#include "sgcn/numcore/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sgcn/numcore/rng.hpp"

namespace sgcn::numcore {
namespace {

double evaluate(const ParamFunction& fn) {
  Tape<double> tape;
  const Var loss = fn(tape);
  return tape.value(loss)[0];
}

std::vector<std::size_t> probe_indices(std::size_t n, std::size_t limit, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (limit == 0 || limit >= n) return idx;
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradcheckResult gradcheck_parameters(const ParamFunction& fn,
                                     std::span<Parameter<double>* const> params,
                                     const GradcheckOptions& options) {
  for (auto* p : params) p->zero_grad();
  {
    Tape<double> tape;
    const Var loss = fn(tape);
    if (!std::isfinite(tape.value(loss)[0])) return {std::numeric_limits<double>::infinity(), 0, false, "loss"};
    tape.backward(loss);
  }

  GradcheckResult result;
  Rng rng(options.seed);
  for (auto* p : params) {
    const auto probes = probe_indices(p->value.size(), options.max_probes_per_input, rng);
    for (std::size_t k : probes) {
      const double original = p->value[k];
      p->value[k] = original + options.eps;
      const double up = evaluate(fn);
      p->value[k] = original - options.eps;
      const double down = evaluate(fn);
      p->value[k] = original;
      const std::string where = p->name + "[" + std::to_string(k) + "]";
      if (!std::isfinite(up) || !std::isfinite(down) || !std::isfinite(p->grad[k])) {
        result.finite = false;
        result.max_rel_error = std::numeric_limits<double>::infinity();
        result.worst = where;
        continue;
      }
      const double numeric = (up - down) / (2.0 * options.eps);
      const double err = std::abs(p->grad[k] - numeric) / std::max(1.0, std::abs(numeric));
      ++result.probes;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst = where;
      }
    }
  }
  return result;
}

GradcheckResult gradcheck(const LeafFunction& fn, std::vector<Tensor<double>> inputs,
                          const GradcheckOptions& options) {
  std::vector<Parameter<double>> params;
  params.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    params.emplace_back("input" + std::to_string(i), std::move(inputs[i]));
  }
  std::vector<Parameter<double>*> ptrs;
  for (auto& p : params) ptrs.push_back(&p);
  const ParamFunction bound = [&](Tape<double>& tape) {
    std::vector<Var> leaves;
    leaves.reserve(params.size());
    for (auto& p : params) leaves.push_back(tape.param(p));
    return fn(tape, leaves);
  };
  return gradcheck_parameters(bound, ptrs, options);
}

}  // namespace sgcn::numcore
