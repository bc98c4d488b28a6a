#pragma once

#include <cmath>

#include "bgcl/rng.hpp"
#include "bgcl/types.hpp"

namespace bgcl {

// Glorot/Xavier uniform: U(-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))).
inline Matrix xavier_init(int rows, int cols, RngStream& rng) {
  require(rows >= 1 && cols >= 1, "xavier_init: dimensions must be positive");
  const Scalar bound = std::sqrt(6.0 / static_cast<Scalar>(rows + cols));
  Matrix w(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) w(r, c) = (2.0 * rng.uniform() - 1.0) * bound;
  return w;
}

}  // namespace bgcl
