#pragma once

// Dense reference implementations used as independent oracles. None of them
// call into the sparse code paths they check.

#include <cmath>
#include <random>
#include <vector>

#include "ghnet/autodiff.hpp"
#include "ghnet/dense.hpp"
#include "ghnet/graph.hpp"

namespace ghnet::testing {

inline std::vector<Edge> random_edges(std::size_t n, double p, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (unif(rng) < p) edges.push_back({i, j});
  return edges;
}

inline DenseMatrix random_dense(std::size_t rows, std::size_t cols, Rng& rng, double lo = -2.0,
                                double hi = 2.0) {
  std::uniform_real_distribution<double> unif(lo, hi);
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = unif(rng);
  return m;
}

inline DenseMatrix dense_adjacency(const std::vector<Edge>& edges, std::size_t n) {
  DenseMatrix a(n, n);
  for (const auto& e : edges) {
    if (e.src == e.dst) continue;
    a(e.src, e.dst) = 1.0;
    a(e.dst, e.src) = 1.0;
  }
  return a;
}

// D^{-1/2} (A [+ I]) D^{-1/2} with zero coefficients for zero degrees.
inline DenseMatrix dense_normalize(DenseMatrix a, bool self_loop) {
  const std::size_t n = a.rows();
  if (self_loop)
    for (std::size_t i = 0; i < n; ++i) a(i, i) += 1.0;
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d[i] += a(i, j);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double ci = d[i] > 0 ? 1.0 / std::sqrt(d[i]) : 0.0;
      const double cj = d[j] > 0 ? 1.0 / std::sqrt(d[j]) : 0.0;
      a(i, j) *= ci * cj;
    }
  return a;
}

inline DenseMatrix naive_matmul(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  return out;
}

inline DenseMatrix dense_matpow(const DenseMatrix& s, std::size_t k) {
  DenseMatrix out = DenseMatrix::identity(s.rows());
  for (std::size_t i = 0; i < k; ++i) out = naive_matmul(out, s);
  return out;
}

}  // namespace ghnet::testing
