#include "sgcn/numcore/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace sgcn::numcore {
namespace {

template <typename Real>
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using MatMap = Eigen::Map<RowMat<Real>>;
template <typename Real>
using ConstMatMap = Eigen::Map<const RowMat<Real>>;

template <typename Real>
ConstMatMap<Real> as_matrix(const Tensor<Real>& x) {
  return ConstMatMap<Real>(x.data(), static_cast<Eigen::Index>(x.rows()),
                           static_cast<Eigen::Index>(x.cols()));
}

template <typename Real>
MatMap<Real> as_matrix(Tensor<Real>& x) {
  return MatMap<Real>(x.data(), static_cast<Eigen::Index>(x.rows()),
                      static_cast<Eigen::Index>(x.cols()));
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                              shape_string(a) + " and " + shape_string(b));
}

void require_matrix(const char* op, const Shape& s) {
  if (s.size() != 2) {
    throw std::invalid_argument(std::string(op) + ": expected a matrix, got " +
                                shape_string(s));
  }
}

template <typename Real>
void accumulate(Tensor<Real>& dst, const Tensor<Real>& src) {
  Real* d = dst.data();
  const Real* s = src.data();
  for (std::size_t i = 0, n = dst.size(); i < n; ++i) d[i] += s[i];
}

}  // namespace

template <typename Real>
Var matmul(Tape<Real>& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  require_matrix("matmul", av.shape());
  require_matrix("matmul", bv.shape());
  if (av.cols() != bv.rows()) shape_error("matmul", av.shape(), bv.shape());
  Tensor<Real> out({av.rows(), bv.cols()});
  as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv);
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  return t.record(std::move(out), rg, [a, b](Tape<Real>& t, const Tensor<Real>& g) {
    if (t.requires_grad(a)) {
      as_matrix(t.grad(a)).noalias() += as_matrix(g) * as_matrix(t.value(b)).transpose();
    }
    if (t.requires_grad(b)) {
      as_matrix(t.grad(b)).noalias() += as_matrix(t.value(a)).transpose() * as_matrix(g);
    }
  });
}

template <typename Real>
Var matmul_nt(Tape<Real>& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  require_matrix("matmul_nt", av.shape());
  require_matrix("matmul_nt", bv.shape());
  if (av.cols() != bv.cols()) shape_error("matmul_nt", av.shape(), bv.shape());
  Tensor<Real> out({av.rows(), bv.rows()});
  as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv).transpose();
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  return t.record(std::move(out), rg, [a, b](Tape<Real>& t, const Tensor<Real>& g) {
    if (t.requires_grad(a)) {
      as_matrix(t.grad(a)).noalias() += as_matrix(g) * as_matrix(t.value(b));
    }
    if (t.requires_grad(b)) {
      as_matrix(t.grad(b)).noalias() += as_matrix(g).transpose() * as_matrix(t.value(a));
    }
  });
}

template <typename Real>
Var linear(Tape<Real>& t, Var x, Var w, Var b) {
  const auto& xv = t.value(x);
  const auto& wv = t.value(w);
  const auto& bv = t.value(b);
  require_matrix("linear", xv.shape());
  require_matrix("linear", wv.shape());
  if (xv.cols() != wv.rows()) shape_error("linear", xv.shape(), wv.shape());
  if (bv.size() != wv.cols()) shape_error("linear", wv.shape(), bv.shape());
  Tensor<Real> out({xv.rows(), wv.cols()});
  auto om = as_matrix(out);
  om.noalias() = as_matrix(xv) * as_matrix(wv);
  const Eigen::Map<const Eigen::Matrix<Real, 1, Eigen::Dynamic>> bias(
      bv.data(), static_cast<Eigen::Index>(bv.size()));
  om.rowwise() += bias;
  const bool rg = t.requires_grad(x) || t.requires_grad(w) || t.requires_grad(b);
  return t.record(std::move(out), rg, [x, w, b](Tape<Real>& t, const Tensor<Real>& g) {
    const auto gm = as_matrix(g);
    if (t.requires_grad(x)) {
      as_matrix(t.grad(x)).noalias() += gm * as_matrix(t.value(w)).transpose();
    }
    if (t.requires_grad(w)) {
      as_matrix(t.grad(w)).noalias() += as_matrix(t.value(x)).transpose() * gm;
    }
    if (t.requires_grad(b)) {
      auto& gb = t.grad(b);
      const std::size_t c = g.cols();
      for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < c; ++j) gb[j] += g(i, j);
      }
    }
  });
}

template <typename Real>
Var add(Tape<Real>& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.shape() != bv.shape()) shape_error("add", av.shape(), bv.shape());
  Tensor<Real> out = av;
  accumulate(out, bv);
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  return t.record(std::move(out), rg, [a, b](Tape<Real>& t, const Tensor<Real>& g) {
    if (t.requires_grad(a)) accumulate(t.grad(a), g);
    if (t.requires_grad(b)) accumulate(t.grad(b), g);
  });
}

template <typename Real>
Var mul(Tape<Real>& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.shape() != bv.shape()) shape_error("mul", av.shape(), bv.shape());
  Tensor<Real> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  return t.record(std::move(out), rg, [a, b](Tape<Real>& t, const Tensor<Real>& g) {
    // a and b may be the same var; read values before touching gradients.
    const auto& av = t.value(a);
    const auto& bv = t.value(b);
    if (t.requires_grad(a)) {
      auto& ga = t.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(b)) {
      auto& gb = t.grad(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

template <typename Real>
Var scale(Tape<Real>& t, Var x, Real factor) {
  Tensor<Real> out = t.value(x);
  for (auto& v : out.values()) v *= factor;
  return t.record(std::move(out), t.requires_grad(x),
                  [x, factor](Tape<Real>& t, const Tensor<Real>& g) {
                    auto& gx = t.grad(x);
                    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
                  });
}

template <typename Real>
Var sum(Tape<Real>& t, Var x) {
  Real total = 0;
  for (Real v : t.value(x).values()) total += v;
  return t.record(Tensor<Real>::scalar(total), t.requires_grad(x),
                  [x](Tape<Real>& t, const Tensor<Real>& g) {
                    for (auto& v : t.grad(x).values()) v += g[0];
                  });
}

template <typename Real>
Var segment_reduce(Tape<Real>& t, Var values, std::span<const std::uint32_t> segment_ids,
                   std::size_t num_segments, Reduce mode) {
  const auto& v = t.value(values);
  require_matrix("segment_reduce", v.shape());
  const std::size_t m = v.rows();
  const std::size_t c = v.cols();
  if (segment_ids.size() != m) {
    throw std::invalid_argument("segment_reduce: " + std::to_string(segment_ids.size()) +
                                " segment ids for " + std::to_string(m) + " rows");
  }
  for (std::size_t r = 0; r < m; ++r) {
    if (segment_ids[r] >= num_segments) {
      throw std::out_of_range("segment_reduce: segment id " +
                              std::to_string(segment_ids[r]) + " at row " +
                              std::to_string(r) + " outside [0, " +
                              std::to_string(num_segments) + ")");
    }
  }

  Tensor<Real> out({num_segments, c});
  std::vector<std::uint32_t> ids(segment_ids.begin(), segment_ids.end());
  std::vector<Real> counts(num_segments, Real(0));
  for (std::uint32_t s : ids) counts[s] += 1;

  std::vector<std::uint32_t> argmax;
  if (mode == Reduce::max) {
    argmax.assign(num_segments * c, UINT32_MAX);
    for (std::size_t r = 0; r < m; ++r) {
      const std::size_t s = ids[r];
      for (std::size_t j = 0; j < c; ++j) {
        std::uint32_t& a = argmax[s * c + j];
        // Strict comparison keeps the first row on ties.
        if (a == UINT32_MAX || v(r, j) > v(a, j)) a = static_cast<std::uint32_t>(r);
      }
    }
    for (std::size_t s = 0; s < num_segments; ++s) {
      for (std::size_t j = 0; j < c; ++j) {
        const std::uint32_t a = argmax[s * c + j];
        if (a != UINT32_MAX) out(s, j) = v(a, j);
      }
    }
  } else {
    for (std::size_t r = 0; r < m; ++r) {
      const Real* src = &v(r, 0);
      Real* dst = &out(ids[r], 0);
      for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
    }
    if (mode == Reduce::mean) {
      for (std::size_t s = 0; s < num_segments; ++s) {
        if (counts[s] == 0) continue;
        for (std::size_t j = 0; j < c; ++j) out(s, j) /= counts[s];
      }
    }
  }

  return t.record(
      std::move(out), t.requires_grad(values),
      [values, mode, c, ids = std::move(ids), counts = std::move(counts),
       argmax = std::move(argmax)](Tape<Real>& t, const Tensor<Real>& g) {
        auto& gv = t.grad(values);
        if (mode == Reduce::max) {
          for (std::size_t s = 0; s < counts.size(); ++s) {
            for (std::size_t j = 0; j < c; ++j) {
              const std::uint32_t a = argmax[s * c + j];
              if (a != UINT32_MAX) gv(a, j) += g(s, j);
            }
          }
          return;
        }
        for (std::size_t r = 0; r < ids.size(); ++r) {
          const std::size_t s = ids[r];
          const Real w = mode == Reduce::mean ? Real(1) / counts[s] : Real(1);
          for (std::size_t j = 0; j < c; ++j) gv(r, j) += w * g(s, j);
        }
      });
}

template <typename Real>
Var gather_rows(Tape<Real>& t, Var x, std::span<const std::uint32_t> index) {
  const auto& xv = t.value(x);
  require_matrix("gather_rows", xv.shape());
  const std::size_t c = xv.cols();
  Tensor<Real> out({index.size(), c});
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= xv.rows()) throw std::out_of_range("gather_rows: index out of range");
    std::copy_n(&xv(index[r], 0), c, &out(r, 0));
  }
  std::vector<std::uint32_t> idx(index.begin(), index.end());
  return t.record(std::move(out), t.requires_grad(x),
                  [x, c, idx = std::move(idx)](Tape<Real>& t, const Tensor<Real>& g) {
                    auto& gx = t.grad(x);
                    for (std::size_t r = 0; r < idx.size(); ++r) {
                      for (std::size_t j = 0; j < c; ++j) gx(idx[r], j) += g(r, j);
                    }
                  });
}

template <typename Real>
Var select_columns(Tape<Real>& t, Var x, std::span<const std::size_t> columns) {
  const auto& xv = t.value(x);
  require_matrix("select_columns", xv.shape());
  for (std::size_t col : columns) {
    if (col >= xv.cols()) throw std::out_of_range("select_columns: column out of range");
  }
  const std::size_t n = xv.rows();
  Tensor<Real> out({n, columns.size()});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < columns.size(); ++j) out(r, j) = xv(r, columns[j]);
  }
  std::vector<std::size_t> cols(columns.begin(), columns.end());
  return t.record(std::move(out), t.requires_grad(x),
                  [x, cols = std::move(cols)](Tape<Real>& t, const Tensor<Real>& g) {
                    auto& gx = t.grad(x);
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                      for (std::size_t j = 0; j < cols.size(); ++j) gx(r, cols[j]) += g(r, j);
                    }
                  });
}

template <typename Real>
Var batch_norm(Tape<Real>& t, Var x, Var gamma, Var beta, BatchNormState<Real>& state,
               Mode mode, Real momentum, Real eps) {
  const auto& xv = t.value(x);
  require_matrix("batch_norm", xv.shape());
  const std::size_t n = xv.rows();
  const std::size_t c = xv.cols();
  const auto& gv = t.value(gamma);
  const auto& bv = t.value(beta);
  if (gv.size() != c || bv.size() != c || state.running_mean.size() != c ||
      state.running_var.size() != c) {
    throw std::invalid_argument("batch_norm: channel count mismatch for input " +
                                shape_string(xv.shape()));
  }

  std::vector<Real> mean(c), inv_std(c);
  if (mode == Mode::train) {
    std::vector<double> s(c, 0.0), s2(c, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < c; ++j) s[j] += xv(r, j);
    }
    for (std::size_t j = 0; j < c; ++j) s[j] /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < c; ++j) {
        const double d = xv(r, j) - s[j];
        s2[j] += d * d;
      }
    }
    for (std::size_t j = 0; j < c; ++j) {
      const double var = s2[j] / static_cast<double>(n);
      mean[j] = static_cast<Real>(s[j]);
      inv_std[j] = static_cast<Real>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      state.running_mean[j] = (Real(1) - momentum) * state.running_mean[j] + momentum * mean[j];
      state.running_var[j] =
          (Real(1) - momentum) * state.running_var[j] + momentum * static_cast<Real>(var);
    }
  } else {
    for (std::size_t j = 0; j < c; ++j) {
      mean[j] = state.running_mean[j];
      inv_std[j] = Real(1) / std::sqrt(state.running_var[j] + eps);
    }
  }

  Tensor<Real> xhat({n, c});
  Tensor<Real> out({n, c});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < c; ++j) {
      const Real h = (xv(r, j) - mean[j]) * inv_std[j];
      xhat(r, j) = h;
      out(r, j) = gv[j] * h + bv[j];
    }
  }

  const bool rg = t.requires_grad(x) || t.requires_grad(gamma) || t.requires_grad(beta);
  return t.record(
      std::move(out), rg,
      [x, gamma, beta, mode, inv_std = std::move(inv_std), xhat = std::move(xhat)](
          Tape<Real>& t, const Tensor<Real>& g) {
        const std::size_t n = g.rows();
        const std::size_t c = g.cols();
        const auto& gam = t.value(gamma);
        std::vector<Real> sum_g(c, Real(0)), sum_gh(c, Real(0));
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t j = 0; j < c; ++j) {
            sum_g[j] += g(r, j);
            sum_gh[j] += g(r, j) * xhat(r, j);
          }
        }
        if (t.requires_grad(gamma)) {
          auto& gg = t.grad(gamma);
          for (std::size_t j = 0; j < c; ++j) gg[j] += sum_gh[j];
        }
        if (t.requires_grad(beta)) {
          auto& gb = t.grad(beta);
          for (std::size_t j = 0; j < c; ++j) gb[j] += sum_g[j];
        }
        if (!t.requires_grad(x)) return;
        auto& gx = t.grad(x);
        if (mode == Mode::eval) {
          for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t j = 0; j < c; ++j) gx(r, j) += g(r, j) * gam[j] * inv_std[j];
          }
          return;
        }
        const Real inv_n = Real(1) / static_cast<Real>(n);
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t j = 0; j < c; ++j) {
            gx(r, j) += gam[j] * inv_std[j] *
                        (g(r, j) - inv_n * sum_g[j] - xhat(r, j) * inv_n * sum_gh[j]);
          }
        }
      });
}

template <typename Real>
Var prelu(Tape<Real>& t, Var x, Var slope) {
  const auto& xv = t.value(x);
  const auto& av = t.value(slope);
  require_matrix("prelu", xv.shape());
  const std::size_t c = xv.cols();
  if (av.size() != c) shape_error("prelu", xv.shape(), av.shape());
  Tensor<Real> out(xv.shape());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    for (std::size_t j = 0; j < c; ++j) {
      const Real v = xv(r, j);
      out(r, j) = v > 0 ? v : av[j] * v;
    }
  }
  const bool rg = t.requires_grad(x) || t.requires_grad(slope);
  return t.record(std::move(out), rg, [x, slope](Tape<Real>& t, const Tensor<Real>& g) {
    const auto& xv = t.value(x);
    const auto& av = t.value(slope);
    const std::size_t c = xv.cols();
    if (t.requires_grad(x)) {
      auto& gx = t.grad(x);
      for (std::size_t r = 0; r < xv.rows(); ++r) {
        for (std::size_t j = 0; j < c; ++j) {
          gx(r, j) += xv(r, j) > 0 ? g(r, j) : av[j] * g(r, j);
        }
      }
    }
    if (t.requires_grad(slope)) {
      auto& ga = t.grad(slope);
      for (std::size_t r = 0; r < xv.rows(); ++r) {
        for (std::size_t j = 0; j < c; ++j) {
          if (!(xv(r, j) > 0)) ga[j] += xv(r, j) * g(r, j);
        }
      }
    }
  });
}

template <typename Real>
Var dropout(Tape<Real>& t, Var x, double p, Mode mode, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw std::invalid_argument("dropout probability must lie in [0, 1), got " +
                                std::to_string(p));
  }
  const auto& xv = t.value(x);
  if (mode == Mode::eval || p == 0.0) {
    return t.record(xv, t.requires_grad(x), [x](Tape<Real>& t, const Tensor<Real>& g) {
      accumulate(t.grad(x), g);
    });
  }
  const Real keep_scale = static_cast<Real>(1.0 / (1.0 - p));
  std::vector<Real> mask(xv.size());
  for (auto& m : mask) m = rng.uniform() < p ? Real(0) : keep_scale;
  Tensor<Real> out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  return t.record(std::move(out), t.requires_grad(x),
                  [x, mask = std::move(mask)](Tape<Real>& t, const Tensor<Real>& g) {
                    auto& gx = t.grad(x);
                    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
                  });
}

template <typename Real>
Var l2_normalize_rows(Tape<Real>& t, Var x, Real eps) {
  const auto& xv = t.value(x);
  require_matrix("l2_normalize_rows", xv.shape());
  const std::size_t n = xv.rows();
  const std::size_t c = xv.cols();
  std::vector<Real> norms(n);
  Tensor<Real> out({n, c});
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0;
    for (std::size_t j = 0; j < c; ++j) s += static_cast<double>(xv(r, j)) * xv(r, j);
    norms[r] = std::max(static_cast<Real>(std::sqrt(s)), eps);
    for (std::size_t j = 0; j < c; ++j) out(r, j) = xv(r, j) / norms[r];
  }
  const Var y_id{static_cast<std::uint32_t>(t.size())};
  return t.record(std::move(out), t.requires_grad(x),
                  [x, y_id, eps, norms = std::move(norms)](Tape<Real>& t, const Tensor<Real>& g) {
                    const auto& y = t.value(y_id);
                    auto& gx = t.grad(x);
                    const std::size_t c = g.cols();
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                      Real dot = 0;
                      if (norms[r] > eps) {
                        for (std::size_t j = 0; j < c; ++j) dot += y(r, j) * g(r, j);
                      }
                      for (std::size_t j = 0; j < c; ++j) {
                        gx(r, j) += (g(r, j) - y(r, j) * dot) / norms[r];
                      }
                    }
                  });
}

template <typename Real>
Var softmax_cross_entropy(Tape<Real>& t, Var logits, std::span<const std::uint32_t> labels) {
  const auto& z = t.value(logits);
  require_matrix("softmax_cross_entropy", z.shape());
  const std::size_t b = z.rows();
  const std::size_t k = z.cols();
  if (labels.size() != b) {
    throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(b) + " rows");
  }
  Tensor<Real> prob({b, k});
  double total = 0;
  for (std::size_t r = 0; r < b; ++r) {
    if (labels[r] >= k) {
      throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(labels[r]) +
                              " outside [0, " + std::to_string(k) + ")");
    }
    std::size_t arg = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (z(r, j) > z(r, arg)) arg = j;
    }
    const double mx = static_cast<double>(z(r, arg));
    // log(sum exp) = mx + log1p(rest) keeps tiny losses accurate.
    double rest = 0;
    for (std::size_t j = 0; j < k; ++j) {
      if (j != arg) rest += std::exp(static_cast<double>(z(r, j)) - mx);
    }
    const double log1p_rest = std::log1p(rest);
    const double log_denom = log1p_rest + mx;
    for (std::size_t j = 0; j < k; ++j) {
      prob(r, j) = static_cast<Real>(std::exp(static_cast<double>(z(r, j)) - log_denom));
    }
    total += (mx - static_cast<double>(z(r, labels[r]))) + log1p_rest;
  }
  std::vector<std::uint32_t> lab(labels.begin(), labels.end());
  return t.record(Tensor<Real>::scalar(static_cast<Real>(total / static_cast<double>(b))),
                  t.requires_grad(logits),
                  [logits, prob = std::move(prob), lab = std::move(lab)](
                      Tape<Real>& t, const Tensor<Real>& g) {
                    auto& gz = t.grad(logits);
                    const Real w = g[0] / static_cast<Real>(prob.rows());
                    for (std::size_t r = 0; r < prob.rows(); ++r) {
                      for (std::size_t j = 0; j < prob.cols(); ++j) {
                        const Real target = j == lab[r] ? Real(1) : Real(0);
                        gz(r, j) += w * (prob(r, j) - target);
                      }
                    }
                  });
}

#define SGCN_INSTANTIATE_OPS(Real)                                                       \
  template Var matmul<Real>(Tape<Real>&, Var, Var);                                      \
  template Var matmul_nt<Real>(Tape<Real>&, Var, Var);                                   \
  template Var linear<Real>(Tape<Real>&, Var, Var, Var);                                 \
  template Var add<Real>(Tape<Real>&, Var, Var);                                         \
  template Var mul<Real>(Tape<Real>&, Var, Var);                                         \
  template Var scale<Real>(Tape<Real>&, Var, Real);                                      \
  template Var sum<Real>(Tape<Real>&, Var);                                              \
  template Var segment_reduce<Real>(Tape<Real>&, Var, std::span<const std::uint32_t>,    \
                                    std::size_t, Reduce);                                \
  template Var gather_rows<Real>(Tape<Real>&, Var, std::span<const std::uint32_t>);      \
  template Var select_columns<Real>(Tape<Real>&, Var, std::span<const std::size_t>);     \
  template Var batch_norm<Real>(Tape<Real>&, Var, Var, Var, BatchNormState<Real>&, Mode, \
                                Real, Real);                                             \
  template Var prelu<Real>(Tape<Real>&, Var, Var);                                       \
  template Var dropout<Real>(Tape<Real>&, Var, double, Mode, Rng&);                      \
  template Var l2_normalize_rows<Real>(Tape<Real>&, Var, Real);                          \
  template Var softmax_cross_entropy<Real>(Tape<Real>&, Var, std::span<const std::uint32_t>);

SGCN_INSTANTIATE_OPS(float)
SGCN_INSTANTIATE_OPS(double)

#undef SGCN_INSTANTIATE_OPS

}  // namespace sgcn::numcore
