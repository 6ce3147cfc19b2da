#include "ghnet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "ghnet/errors.hpp"

namespace ghnet {

CsrMatrix::CsrMatrix(std::size_t num_rows, std::size_t num_cols,
                     std::vector<std::size_t> row_offsets, std::vector<std::size_t> col_indices,
                     std::vector<double> values)
    : num_rows_(num_rows),
      num_cols_(num_cols),
      row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)),
      values_(std::move(values)) {
  if (row_offsets_.size() != num_rows_ + 1 || row_offsets_.front() != 0) {
    throw GraphError("CsrMatrix: row_offsets must have num_rows+1 entries starting at 0");
  }
  if (row_offsets_.back() != col_indices_.size() || col_indices_.size() != values_.size()) {
    throw GraphError("CsrMatrix: row_offsets, col_indices and values lengths disagree");
  }
  for (std::size_t r = 0; r < num_rows_; ++r) {
    if (row_offsets_[r + 1] < row_offsets_[r]) {
      throw GraphError("CsrMatrix: row_offsets decreases at row " + std::to_string(r));
    }
    for (std::size_t p = row_offsets_[r]; p < row_offsets_[r + 1]; ++p) {
      if (col_indices_[p] >= num_cols_) {
        throw GraphError("CsrMatrix: column index " + std::to_string(col_indices_[p]) +
                         " out of range in row " + std::to_string(r));
      }
      if (p > row_offsets_[r] && col_indices_[p] <= col_indices_[p - 1]) {
        throw GraphError("CsrMatrix: column indices not strictly increasing in row " +
                         std::to_string(r));
      }
    }
  }
}

CsrMatrix CsrMatrix::identity(std::size_t n) {
  std::vector<std::size_t> offsets(n + 1);
  std::vector<std::size_t> cols(n);
  for (std::size_t i = 0; i < n; ++i) {
    offsets[i + 1] = i + 1;
    cols[i] = i;
  }
  return CsrMatrix(n, n, std::move(offsets), std::move(cols), std::vector<double>(n, 1.0));
}

double CsrMatrix::at(std::size_t r, std::size_t c) const {
  auto cols = row_cols(r);
  auto it = std::lower_bound(cols.begin(), cols.end(), c);
  if (it == cols.end() || *it != c) return 0.0;
  return values_[row_offsets_[r] + static_cast<std::size_t>(it - cols.begin())];
}

DenseMatrix CsrMatrix::to_dense() const {
  DenseMatrix out(num_rows_, num_cols_);
  for (std::size_t r = 0; r < num_rows_; ++r) {
    for (std::size_t p = row_offsets_[r]; p < row_offsets_[r + 1]; ++p) {
      out(r, col_indices_[p]) = values_[p];
    }
  }
  return out;
}

CsrMatrix build_csr(std::span<const Edge> edges, std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(edges.size() * 2);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [src, dst] = edges[e];
    if (src >= n || dst >= n) {
      throw GraphError("build_csr: edge #" + std::to_string(e) + " (" + std::to_string(src) +
                       ", " + std::to_string(dst) + ") has an index >= n = " + std::to_string(n));
    }
    if (src == dst) continue;
    pairs.emplace_back(src, dst);
    pairs.emplace_back(dst, src);
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  std::vector<std::size_t> offsets(n + 1, 0);
  std::vector<std::size_t> cols;
  cols.reserve(pairs.size());
  for (const auto& [r, c] : pairs) {
    ++offsets[r + 1];
    cols.push_back(c);
  }
  for (std::size_t r = 0; r < n; ++r) offsets[r + 1] += offsets[r];
  std::vector<double> values(cols.size(), 1.0);
  return CsrMatrix(n, n, std::move(offsets), std::move(cols), std::move(values));
}

std::vector<double> degrees(const CsrMatrix& a) {
  std::vector<double> d(a.num_rows(), 0.0);
  for (std::size_t r = 0; r < a.num_rows(); ++r) {
    for (double v : a.row_values(r)) d[r] += v;
  }
  return d;
}

CsrMatrix sym_normalize(const CsrMatrix& a, bool with_self_loop) {
  if (!a.is_square()) {
    throw GraphError("sym_normalize: matrix is " + std::to_string(a.num_rows()) + "x" +
                     std::to_string(a.num_cols()) + ", expected square");
  }
  const std::size_t n = a.num_rows();
  std::vector<double> d = degrees(a);
  std::vector<double> inv_sqrt(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double di = d[i] + (with_self_loop ? 1.0 : 0.0);
    if (di > 0.0) inv_sqrt[i] = 1.0 / std::sqrt(di);
  }

  std::vector<std::size_t> offsets(n + 1, 0);
  std::vector<std::size_t> cols;
  std::vector<double> values;
  cols.reserve(a.nnz() + (with_self_loop ? n : 0));
  values.reserve(cols.capacity());
  for (std::size_t r = 0; r < n; ++r) {
    bool diag_pending = with_self_loop;
    auto rc = a.row_cols(r);
    auto rv = a.row_values(r);
    for (std::size_t p = 0; p < rc.size(); ++p) {
      const std::size_t c = rc[p];
      if (diag_pending && c >= r) {
        // Input has a zero diagonal, so c == r never occurs here.
        cols.push_back(r);
        values.push_back(inv_sqrt[r] * inv_sqrt[r]);
        diag_pending = false;
      }
      cols.push_back(c);
      values.push_back(rv[p] * inv_sqrt[r] * inv_sqrt[c]);
    }
    if (diag_pending) {
      cols.push_back(r);
      values.push_back(inv_sqrt[r] * inv_sqrt[r]);
    }
    offsets[r + 1] = cols.size();
  }
  return CsrMatrix(n, n, std::move(offsets), std::move(cols), std::move(values));
}

DenseMatrix spmm(const CsrMatrix& s, const DenseMatrix& h) {
  if (s.num_cols() != h.rows()) {
    throw ShapeError("spmm: filter has " + std::to_string(s.num_cols()) + " columns but input has " +
                     std::to_string(h.rows()) + " rows");
  }
  const std::size_t m = h.cols();
  DenseMatrix out(s.num_rows(), m);
  const auto& offsets = s.row_offsets();
  const auto& cols = s.col_indices();
  const auto& vals = s.values();
  for (std::size_t r = 0; r < s.num_rows(); ++r) {
    double* dst = out.data().data() + r * m;
    for (std::size_t p = offsets[r]; p < offsets[r + 1]; ++p) {
      const double coef = vals[p];
      const double* src = h.data().data() + cols[p] * m;
      for (std::size_t j = 0; j < m; ++j) dst[j] += coef * src[j];
    }
  }
  return out;
}

DenseMatrix k_hop_propagate(const CsrMatrix& s, const DenseMatrix& h, std::size_t k) {
  if (k == 0) throw ConfigError("k_hop_propagate: k must be >= 1");
  DenseMatrix out = spmm(s, h);
  for (std::size_t i = 1; i < k; ++i) out = spmm(s, out);
  return out;
}

}  // namespace ghnet
