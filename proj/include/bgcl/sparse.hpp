#pragma once

#include <vector>

#include "bgcl/types.hpp"

namespace bgcl {

// Compressed sparse row structure with fixed support. Column indices are
// sorted within each row, which pins the accumulation order of every
// sparse product for bit-reproducibility.
struct Csr {
  int n = 0;
  std::vector<int> row_ptr;  // size n+1
  std::vector<int> col_idx;  // size nnz
  Vector values;             // size nnz

  int nnz() const { return static_cast<int>(col_idx.size()); }

  // index of entry (r, c), or -1 when outside the support
  int find(int r, int c) const {
    for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
      if (col_idx[k] == c) return k;
    return -1;
  }

  Matrix dense() const {
    Matrix d = Matrix::Zero(n, n);
    for (int r = 0; r < n; ++r)
      for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) d(r, col_idx[k]) = values[k];
    return d;
  }
};

}  // namespace bgcl
