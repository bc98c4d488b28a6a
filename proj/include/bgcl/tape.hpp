#pragma once

#include <deque>
#include <functional>
#include <map>
#include <vector>

#include "bgcl/types.hpp"

namespace bgcl {

class Tape;

// Lightweight handle to a node on a tape. Copying a Var copies the handle,
// never the matrix behind it.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Scalar scalar() const;

  int id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

using GradMap = std::map<int, Matrix>;

// Reverse-mode tape over dense row-major matrices. Every primitive records
// its output plus an adjoint closure; backward() replays them once, in
// reverse recording order, so gradient accumulation order is fixed per run.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Var input(Matrix value, bool requires_grad = false);
  Var constant(Matrix value) { return input(std::move(value), false); }
  Var constant_scalar(Scalar v);
  Var parameter(Matrix value) { return input(std::move(value), true); }

  // dRoot/dParam for every registered parameter. Parameters the root does
  // not reach map to zero tensors. One backward pass per tape.
  GradMap backward(Var root);

  const Matrix& val(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  const Matrix& adjoint(int id) const { return nodes_[id].adj; }
  void accumulate(int id, const Matrix& g);

  Var emplace(Matrix value, bool requires_grad, BackwardFn fn);

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }
  const std::vector<int>& parameters() const { return params_; }

 private:
  struct Node {
    Matrix value;
    Matrix adj;
    bool has_adj = false;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;
  std::vector<int> params_;
  bool consumed_ = false;
};

// ---- primitives --------------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var div(Var a, Var b);  // elementwise
Var affine(Var x, Scalar alpha, Scalar beta);  // alpha*x + beta
Var neg(Var x);

Var matmul(Var a, Var b);
Var transpose(Var x);

Var add_scalar_bcast(Var s, Var x);  // s is 1x1
Var mul_scalar_bcast(Var s, Var x);
Var add_row_bcast(Var x, Var row);   // row is 1xC
Var mul_row_bcast(Var x, Var row);

Var sigmoid(Var x);
Var relu(Var x);
Var prelu(Var x, Var slope);  // slope is 1x1, shared
Var elu(Var x);
Var exp(Var x);
Var log(Var x);
Var sqrt(Var x);
Var digamma_of(Var x);

Var sum(Var x);          // 1x1
Var sum_squares(Var x);  // 1x1
Var row_sum(Var x);      // Nx1
Var col_sum(Var x);      // Cx1
Var mean(Var x);         // 1x1
Var row_softmax(Var x);
Var row_log_softmax(Var x);
Var row_lse(Var x);      // Nx1
Var rows_normalize(Var x, Scalar floor = 1e-8);
Var diag_vec(Var x);     // NxN -> Nx1
Var gather_cols(Var x, const std::vector<int>& col_of_row);  // Nx1
Var slice_cols(Var x, int lo, int hi);
Var hconcat(const std::vector<Var>& xs);

// exp(scale * A * B^T); fused so only the output matrix is retained.
Var exp_scaled_gram(Var a, Var b, Scalar scale);

// L2 norm as a composite of primitives.
Var l2_norm(Var x);

}  // namespace bgcl
