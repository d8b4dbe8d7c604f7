#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <string>

#include "sgcn/chargraph/graph.hpp"
#include "sgcn/numcore/rng.hpp"
#include "sgcn/numcore/tensor.hpp"

namespace sgcn::test {

template <typename Real = double>
numcore::Tensor<Real> random_tensor(numcore::Shape shape, numcore::Rng& rng, double lo = -1.0,
                                    double hi = 1.0) {
  numcore::Tensor<Real> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<Real>(rng.uniform(lo, hi));
  return t;
}

template <typename A, typename B>
double max_abs_diff(const A& a, const B& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

/// Relative to max(1, |b|) per entry.
template <typename A, typename B>
double max_rel_diff(const A& a, const B& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
    m = std::max(m, d / std::max(1.0, std::abs(static_cast<double>(b[i]))));
  }
  return m;
}

/// Single-stroke polyline through random points of the unit square.
inline ink::Trajectory random_polyline(std::size_t points, numcore::Rng& rng) {
  ink::Stroke s;
  for (std::size_t i = 0; i < points; ++i) s.push_back({rng.uniform(), rng.uniform()});
  return ink::Trajectory{{s}};
}

/// Undirected graph on `n` random unit-square nodes: a random spanning chain,
/// a few extra chords, reversal closure and self-loops. No predecessors.
inline chargraph::CharGraph random_graph(std::size_t n, numcore::Rng& rng) {
  chargraph::CharGraph g;
  g.coords = random_tensor({n, 2}, rng, 0.0, 1.0);
  g.stroke_start.assign(n, 1);
  g.predecessor.assign(n, chargraph::kNoPredecessor);
  for (std::uint32_t i = 1; i < n; ++i) {
    g.edges.push_back({static_cast<std::uint32_t>(rng.uniform() * i), i});
  }
  for (std::size_t k = 0; k < n / 2; ++k) {
    g.edges.push_back({static_cast<std::uint32_t>(rng.uniform() * static_cast<double>(n)),
                       static_cast<std::uint32_t>(rng.uniform() * static_cast<double>(n))});
  }
  g = chargraph::to_undirected_self_loops(g);
  g.stroke_start.assign(n, 1);
  g.predecessor.assign(n, chargraph::kNoPredecessor);
  return g;
}

/// Relabels nodes by a random permutation, keeping edges and predecessors
/// consistent.
inline chargraph::CharGraph permuted(const chargraph::CharGraph& g, numcore::Rng& rng) {
  const std::size_t n = g.num_nodes();
  std::vector<std::uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  chargraph::CharGraph h = g;
  for (std::size_t i = 0; i < n; ++i) {
    h.coords(perm[i], 0) = g.coords(i, 0);
    h.coords(perm[i], 1) = g.coords(i, 1);
    h.stroke_start[perm[i]] = g.stroke_start[i];
    h.predecessor[perm[i]] =
        g.predecessor[i] < 0 ? g.predecessor[i]
                             : static_cast<std::int32_t>(perm[static_cast<std::size_t>(g.predecessor[i])]);
  }
  for (auto& e : h.edges) e = {perm[e.src], perm[e.dst]};
  std::sort(h.edges.begin(), h.edges.end());
  return h;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    numcore::Rng rng(std::hash<std::string>{}(tag) ^ reinterpret_cast<std::uintptr_t>(this));
    path_ = std::filesystem::temp_directory_path() /
            ("sgcn-" + tag + "-" + std::to_string(rng.engine()()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace sgcn::test
