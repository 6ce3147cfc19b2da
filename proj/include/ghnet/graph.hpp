#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ghnet/dense.hpp"

namespace ghnet {

struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
};

// Immutable sparse matrix in compressed-sparse-row form. Within a row the
// column indices are strictly increasing.
class CsrMatrix {
 public:
  CsrMatrix() = default;
  // Validates the CSR invariants and throws GraphError on violation.
  CsrMatrix(std::size_t num_rows, std::size_t num_cols, std::vector<std::size_t> row_offsets,
            std::vector<std::size_t> col_indices, std::vector<double> values);

  static CsrMatrix identity(std::size_t n);

  std::size_t num_rows() const { return num_rows_; }
  std::size_t num_cols() const { return num_cols_; }
  std::size_t nnz() const { return col_indices_.size(); }

  const std::vector<std::size_t>& row_offsets() const { return row_offsets_; }
  const std::vector<std::size_t>& col_indices() const { return col_indices_; }
  const std::vector<double>& values() const { return values_; }

  std::span<const std::size_t> row_cols(std::size_t r) const {
    return {col_indices_.data() + row_offsets_[r], row_offsets_[r + 1] - row_offsets_[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values_.data() + row_offsets_[r], row_offsets_[r + 1] - row_offsets_[r]};
  }

  // Entry lookup by binary search; 0 for structural zeros.
  double at(std::size_t r, std::size_t c) const;
  bool is_square() const { return num_rows_ == num_cols_; }

  DenseMatrix to_dense() const;

  bool operator==(const CsrMatrix&) const = default;

 private:
  std::size_t num_rows_ = 0;
  std::size_t num_cols_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::size_t> col_indices_;
  std::vector<double> values_;
};

// Symmetrized, deduplicated, self-loop-free binary adjacency of n nodes.
CsrMatrix build_csr(std::span<const Edge> edges, std::size_t n);

// d_i = Σ_j a_ij
std::vector<double> degrees(const CsrMatrix& a);

// D^{-1/2} A D^{-1/2}, over A + I when with_self_loop is set. Nodes with zero
// degree get a zero coefficient, so their rows stay empty.
CsrMatrix sym_normalize(const CsrMatrix& a, bool with_self_loop);

// Exact sparse-dense product, accumulated per row in CSR order.
DenseMatrix spmm(const CsrMatrix& s, const DenseMatrix& h);

// s applied k >= 1 times in sequence; s^k is never formed.
DenseMatrix k_hop_propagate(const CsrMatrix& s, const DenseMatrix& h, std::size_t k);

}  // namespace ghnet
