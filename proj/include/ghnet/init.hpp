#pragma once

#include <cmath>
#include <cstddef>

#include "ghnet/autodiff.hpp"
#include "ghnet/dense.hpp"

namespace ghnet {

inline double glorot_bound(std::size_t rows, std::size_t cols) {
  return std::sqrt(6.0 / static_cast<double>(rows + cols));
}

// Uniform on [−a, a] with a = sqrt(6 / (rows + cols)).
DenseMatrix glorot_init(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace ghnet
