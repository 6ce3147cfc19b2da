#include "ghnet/dense.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ghnet {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("DenseMatrix: data length " + std::to_string(data_.size()) +
                                " does not match shape " + std::to_string(rows_) + "x" +
                                std::to_string(cols_));
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

// Input feature matrices are mostly zeros, so the i-k-j kernels skip zero
// left-hand entries. Accumulation order is fixed, so results are reproducible.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions " + std::to_string(a.cols()) + " and " +
                                std::to_string(b.rows()) + " disagree");
  }
  DenseMatrix out(a.rows(), b.cols());
  const std::size_t m = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* dst = out.data().data() + i * m;
    auto arow = a.row(i);
    for (std::size_t k = 0; k < arow.size(); ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* src = b.data().data() + k * m;
      for (std::size_t j = 0; j < m; ++j) dst[j] += aik * src[j];
    }
  }
  return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) {
    throw std::invalid_argument("matmul_tn: row counts " + std::to_string(a.rows()) + " and " +
                                std::to_string(b.rows()) + " disagree");
  }
  DenseMatrix out(a.cols(), b.cols());
  const std::size_t m = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    const double* src = b.data().data() + i * m;
    for (std::size_t p = 0; p < arow.size(); ++p) {
      const double aip = arow[p];
      if (aip == 0.0) continue;
      double* dst = out.data().data() + p * m;
      for (std::size_t j = 0; j < m; ++j) dst[j] += aip * src[j];
    }
  }
  return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("matmul_nt: column counts " + std::to_string(a.cols()) + " and " +
                                std::to_string(b.cols()) + " disagree");
  }
  DenseMatrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < arow.size(); ++k) acc += arow[k] * brow[k];
      out(i, j) = acc;
    }
  }
  return out;
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

bool all_finite(const DenseMatrix& a) {
  return std::all_of(a.data().begin(), a.data().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace ghnet
