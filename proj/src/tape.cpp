#include "bgcl/tape.hpp"

#include <cmath>

#include "bgcl/special.hpp"

namespace bgcl {

const Matrix& Var::value() const {
  require(tape_ != nullptr, "Var: empty handle");
  return tape_->val(id_);
}

Scalar Var::scalar() const {
  const Matrix& v = value();
  require(v.size() == 1, "Var: scalar() on non-scalar");
  return v(0, 0);
}

Var Tape::input(Matrix value, bool requires_grad) {
  require(all_finite(value), "Tape::input: non-finite values");
  nodes_.push_back(Node{std::move(value), {}, false, requires_grad, {}});
  const int id = static_cast<int>(nodes_.size()) - 1;
  if (requires_grad) params_.push_back(id);
  return Var(this, id);
}

Var Tape::constant_scalar(Scalar v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Var Tape::emplace(Matrix value, bool requires_grad, BackwardFn fn) {
  nodes_.push_back(Node{std::move(value), {}, false, requires_grad,
                        requires_grad ? std::move(fn) : BackwardFn{}});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(int id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (!n.has_adj) {
    n.adj = Matrix::Zero(n.value.rows(), n.value.cols());
    n.has_adj = true;
  }
  n.adj += g;
}

GradMap Tape::backward(Var root) {
  require(root.tape() == this, "backward: root from another tape");
  require(!consumed_, "backward: tape already consumed");
  require(root.value().size() == 1, "backward: root must be scalar");
  consumed_ = true;

  if (nodes_[root.id()].requires_grad) {
    accumulate(root.id(), Matrix::Ones(1, 1));
    for (int i = root.id(); i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.has_adj && n.backward) n.backward(*this, i);
    }
  }

  GradMap out;
  for (int p : params_) {
    const Node& n = nodes_[p];
    out.emplace(p, n.has_adj ? n.adj : Matrix::Zero(n.value.rows(), n.value.cols()));
  }
  return out;
}

namespace {

Tape& tape_of(Var a, Var b) {
  require(a.valid() && b.valid(), "op: empty Var");
  require(a.tape() == b.tape(), "op: operands from different tapes");
  return *a.tape();
}

void require_same_shape(Var a, Var b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), std::string(op) + ": shape mismatch");
}

}  // namespace

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "add");
  const bool rg = t.requires_grad(a.id()) || t.requires_grad(b.id());
  const int ia = a.id(), ib = b.id();
  return t.emplace(t.val(ia) + t.val(ib), rg, [ia, ib](Tape& t, int self) {
    t.accumulate(ia, t.adjoint(self));
    t.accumulate(ib, t.adjoint(self));
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "sub");
  const bool rg = t.requires_grad(a.id()) || t.requires_grad(b.id());
  const int ia = a.id(), ib = b.id();
  return t.emplace(t.val(ia) - t.val(ib), rg, [ia, ib](Tape& t, int self) {
    t.accumulate(ia, t.adjoint(self));
    t.accumulate(ib, -t.adjoint(self));
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "mul");
  const bool rg = t.requires_grad(a.id()) || t.requires_grad(b.id());
  const int ia = a.id(), ib = b.id();
  return t.emplace(t.val(ia).cwiseProduct(t.val(ib)), rg, [ia, ib](Tape& t, int self) {
    t.accumulate(ia, t.adjoint(self).cwiseProduct(t.val(ib)));
    t.accumulate(ib, t.adjoint(self).cwiseProduct(t.val(ia)));
  });
}

Var div(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "div");
  const bool rg = t.requires_grad(a.id()) || t.requires_grad(b.id());
  const int ia = a.id(), ib = b.id();
  return t.emplace(t.val(ia).cwiseQuotient(t.val(ib)), rg, [ia, ib](Tape& t, int self) {
    t.accumulate(ia, t.adjoint(self).cwiseQuotient(t.val(ib)));
    t.accumulate(ib, -(t.adjoint(self).cwiseProduct(t.val(self)).cwiseQuotient(t.val(ib))));
  });
}

Var affine(Var x, Scalar alpha, Scalar beta) {
  Tape& t = *x.tape();
  const int ix = x.id();
  Matrix out = (alpha * t.val(ix).array() + beta).matrix();
  return t.emplace(std::move(out), t.requires_grad(ix), [ix, alpha](Tape& t, int self) {
    t.accumulate(ix, alpha * t.adjoint(self));
  });
}

Var neg(Var x) { return affine(x, -1.0, 0.0); }

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require(a.cols() == b.rows(), "matmul: inner dimension mismatch");
  const bool rg = t.requires_grad(a.id()) || t.requires_grad(b.id());
  const int ia = a.id(), ib = b.id();
  return t.emplace(t.val(ia) * t.val(ib), rg, [ia, ib](Tape& t, int self) {
    t.accumulate(ia, t.adjoint(self) * t.val(ib).transpose());
    t.accumulate(ib, t.val(ia).transpose() * t.adjoint(self));
  });
}

Var transpose(Var x) {
  Tape& t = *x.tape();
  const int ix = x.id();
  return t.emplace(t.val(ix).transpose(), t.requires_grad(ix), [ix](Tape& t, int self) {
    t.accumulate(ix, t.adjoint(self).transpose());
  });
}

Var add_scalar_bcast(Var s, Var x) {
  Tape& t = tape_of(s, x);
  require(s.value().size() == 1, "add_scalar_bcast: s must be 1x1");
  const bool rg = t.requires_grad(s.id()) || t.requires_grad(x.id());
  const int is = s.id(), ix = x.id();
  Matrix out = (t.val(ix).array() + t.val(is)(0, 0)).matrix();
  return t.emplace(std::move(out), rg, [is, ix](Tape& t, int self) {
    Matrix gs(1, 1);
    gs(0, 0) = t.adjoint(self).sum();
    t.accumulate(is, gs);
    t.accumulate(ix, t.adjoint(self));
  });
}

Var mul_scalar_bcast(Var s, Var x) {
  Tape& t = tape_of(s, x);
  require(s.value().size() == 1, "mul_scalar_bcast: s must be 1x1");
  const bool rg = t.requires_grad(s.id()) || t.requires_grad(x.id());
  const int is = s.id(), ix = x.id();
  return t.emplace(t.val(is)(0, 0) * t.val(ix), rg, [is, ix](Tape& t, int self) {
    Matrix gs(1, 1);
    gs(0, 0) = t.adjoint(self).cwiseProduct(t.val(ix)).sum();
    t.accumulate(is, gs);
    t.accumulate(ix, t.val(is)(0, 0) * t.adjoint(self));
  });
}

Var add_row_bcast(Var x, Var row) {
  Tape& t = tape_of(x, row);
  require(row.rows() == 1 && row.cols() == x.cols(), "add_row_bcast: row must be 1xC");
  const bool rg = t.requires_grad(x.id()) || t.requires_grad(row.id());
  const int ix = x.id(), ir = row.id();
  Matrix out = t.val(ix);
  out.rowwise() += t.val(ir).row(0);
  return t.emplace(std::move(out), rg, [ix, ir](Tape& t, int self) {
    t.accumulate(ix, t.adjoint(self));
    t.accumulate(ir, t.adjoint(self).colwise().sum());
  });
}

Var mul_row_bcast(Var x, Var row) {
  Tape& t = tape_of(x, row);
  require(row.rows() == 1 && row.cols() == x.cols(), "mul_row_bcast: row must be 1xC");
  const bool rg = t.requires_grad(x.id()) || t.requires_grad(row.id());
  const int ix = x.id(), ir = row.id();
  Matrix out = (t.val(ix).array().rowwise() * t.val(ir).row(0).array()).matrix();
  return t.emplace(std::move(out), rg, [ix, ir](Tape& t, int self) {
    t.accumulate(ix, (t.adjoint(self).array().rowwise() * t.val(ir).row(0).array()).matrix());
    t.accumulate(ir, t.adjoint(self).cwiseProduct(t.val(ix)).colwise().sum());
  });
}

Var sigmoid(Var x) {
  Tape& t = *x.tape();
  const int ix = x.id();
  Matrix out = (1.0 / (1.0 + (-t.val(ix).array()).exp())).matrix();
  return t.emplace(std::move(out), t.requires_grad(ix), [ix](Tape& t, int self) {
    const auto& s = t.val(self).array();
    t.accumulate(ix, (t.adjoint(self).array() * s * (1.0 - s)).matrix());
  });
}

Var relu(Var x) {
  Tape& t = *x.tape();
  const int ix = x.id();
  return t.emplace(t.val(ix).cwiseMax(0.0), t.requires_grad(ix), [ix](Tape& t, int self) {
    t.accumulate(ix, (t.adjoint(self).array() * (t.val(ix).array() > 0.0).cast<Scalar>()).matrix());
  });
}

Var prelu(Var x, Var slope) {
  Tape& t = tape_of(x, slope);
  require(slope.value().size() == 1, "prelu: slope must be 1x1");
  const bool rg = t.requires_grad(x.id()) || t.requires_grad(slope.id());
  const int ix = x.id(), is = slope.id();
  const Scalar a = t.val(is)(0, 0);
  Matrix out = (t.val(ix).array().max(0.0) + a * t.val(ix).array().min(0.0)).matrix();
  return t.emplace(std::move(out), rg, [ix, is](Tape& t, int self) {
    const Scalar a = t.val(is)(0, 0);
    const auto xv = t.val(ix).array();
    const auto g = t.adjoint(self).array();
    const auto pos = (xv > 0.0).cast<Scalar>();
    t.accumulate(ix, (g * (pos + a * (1.0 - pos))).matrix());
    Matrix gs(1, 1);
    gs(0, 0) = (g * xv.min(0.0)).sum();
    t.accumulate(is, gs);
  });
}

Var elu(Var x) {
  Tape& t = *x.tape();
  const int ix = x.id();
  Matrix out = t.val(ix).unaryExpr([](Scalar v) { return v > 0.0 ? v : std::expm1(v); });
  return t.emplace(std::move(out), t.requires_grad(ix), [ix](Tape& t, int self) {
    const Matrix d = t.val(ix).binaryExpr(
        t.val(self), [](Scalar x, Scalar o) { return x > 0.0 ? 1.0 : o + 1.0; });
    t.accumulate(ix, t.adjoint(self).cwiseProduct(d));
  });
}

Var exp(Var x) {
  Tape& t = *x.tape();
  const int ix = x.id();
  return t.emplace(t.val(ix).array().exp().matrix(), t.requires_grad(ix), [ix](Tape& t, int self) {
    t.accumulate(ix, t.adjoint(self).cwiseProduct(t.val(self)));
  });
}

Var log(Var x) {
  Tape& t = *x.tape();
  const int ix = x.id();
  return t.emplace(t.val(ix).array().log().matrix(), t.requires_grad(ix), [ix](Tape& t, int self) {
    t.accumulate(ix, t.adjoint(self).cwiseQuotient(t.val(ix)));
  });
}

Var sqrt(Var x) {
  Tape& t = *x.tape();
  const int ix = x.id();
  return t.emplace(t.val(ix).array().sqrt().matrix(), t.requires_grad(ix), [ix](Tape& t, int self) {
    t.accumulate(ix, (t.adjoint(self).array() * 0.5 / t.val(self).array()).matrix());
  });
}

Var digamma_of(Var x) {
  Tape& t = *x.tape();
  const int ix = x.id();
  Matrix out = t.val(ix).unaryExpr([](Scalar v) { return digamma(v); });
  return t.emplace(std::move(out), t.requires_grad(ix), [ix](Tape& t, int self) {
    Matrix d = t.val(ix).unaryExpr([](Scalar v) { return trigamma(v); });
    t.accumulate(ix, t.adjoint(self).cwiseProduct(d));
  });
}

Var sum(Var x) {
  Tape& t = *x.tape();
  const int ix = x.id();
  Matrix out(1, 1);
  out(0, 0) = t.val(ix).sum();
  return t.emplace(std::move(out), t.requires_grad(ix), [ix](Tape& t, int self) {
    const Scalar g = t.adjoint(self)(0, 0);
    t.accumulate(ix, Matrix::Constant(t.val(ix).rows(), t.val(ix).cols(), g));
  });
}

Var sum_squares(Var x) {
  Tape& t = *x.tape();
  const int ix = x.id();
  Matrix out(1, 1);
  out(0, 0) = t.val(ix).squaredNorm();
  return t.emplace(std::move(out), t.requires_grad(ix), [ix](Tape& t, int self) {
    t.accumulate(ix, 2.0 * t.adjoint(self)(0, 0) * t.val(ix));
  });
}

Var row_sum(Var x) {
  Tape& t = *x.tape();
  const int ix = x.id();
  Matrix out = t.val(ix).rowwise().sum();
  return t.emplace(std::move(out), t.requires_grad(ix), [ix](Tape& t, int self) {
    t.accumulate(ix, t.adjoint(self) * Matrix::Ones(1, t.val(ix).cols()));
  });
}

Var col_sum(Var x) {
  Tape& t = *x.tape();
  const int ix = x.id();
  Matrix out = t.val(ix).colwise().sum().transpose();
  return t.emplace(std::move(out), t.requires_grad(ix), [ix](Tape& t, int self) {
    t.accumulate(ix, Matrix::Ones(t.val(ix).rows(), 1) * t.adjoint(self).transpose());
  });
}

Var mean(Var x) {
  const Scalar n = static_cast<Scalar>(x.value().size());
  return affine(sum(x), 1.0 / n, 0.0);
}

Var row_softmax(Var x) {
  Tape& t = *x.tape();
  const int ix = x.id();
  Matrix out = t.val(ix);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const Scalar m = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return t.emplace(std::move(out), t.requires_grad(ix), [ix](Tape& t, int self) {
    const Matrix& s = t.val(self);
    const Matrix& g = t.adjoint(self);
    Matrix gx(s.rows(), s.cols());
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      const Scalar dot = g.row(r).cwiseProduct(s.row(r)).sum();
      gx.row(r) = (s.row(r).array() * (g.row(r).array() - dot)).matrix();
    }
    t.accumulate(ix, gx);
  });
}

Var row_log_softmax(Var x) {
  Tape& t = *x.tape();
  const int ix = x.id();
  Matrix out = t.val(ix);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const Scalar m = out.row(r).maxCoeff();
    const Scalar lse = m + std::log((out.row(r).array() - m).exp().sum());
    out.row(r).array() -= lse;
  }
  return t.emplace(std::move(out), t.requires_grad(ix), [ix](Tape& t, int self) {
    const Matrix& o = t.val(self);
    const Matrix& g = t.adjoint(self);
    Matrix gx(o.rows(), o.cols());
    for (Eigen::Index r = 0; r < o.rows(); ++r) {
      const Scalar gsum = g.row(r).sum();
      gx.row(r) = g.row(r) - (gsum * o.row(r).array().exp()).matrix();
    }
    t.accumulate(ix, gx);
  });
}

Var row_lse(Var x) {
  Tape& t = *x.tape();
  const int ix = x.id();
  Matrix out(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Scalar m = t.val(ix).row(r).maxCoeff();
    out(r, 0) = m + std::log((t.val(ix).row(r).array() - m).exp().sum());
  }
  return t.emplace(std::move(out), t.requires_grad(ix), [ix](Tape& t, int self) {
    const Matrix& xv = t.val(ix);
    const Matrix& o = t.val(self);
    const Matrix& g = t.adjoint(self);
    Matrix gx(xv.rows(), xv.cols());
    for (Eigen::Index r = 0; r < xv.rows(); ++r)
      gx.row(r) = (g(r, 0) * (xv.row(r).array() - o(r, 0)).exp()).matrix();
    t.accumulate(ix, gx);
  });
}

Var rows_normalize(Var x, Scalar floor) {
  Tape& t = *x.tape();
  const int ix = x.id();
  Matrix out = t.val(ix);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const Scalar n = std::max(out.row(r).norm(), floor);
    out.row(r) /= n;
  }
  return t.emplace(std::move(out), t.requires_grad(ix), [ix, floor](Tape& t, int self) {
    const Matrix& xv = t.val(ix);
    const Matrix& o = t.val(self);
    const Matrix& g = t.adjoint(self);
    Matrix gx(xv.rows(), xv.cols());
    for (Eigen::Index r = 0; r < xv.rows(); ++r) {
      const Scalar n = xv.row(r).norm();
      if (n > floor) {
        const Scalar dot = g.row(r).cwiseProduct(o.row(r)).sum();
        gx.row(r) = (g.row(r) - dot * o.row(r)) / n;
      } else {
        gx.row(r) = g.row(r) / floor;  // norm clamped: locally linear
      }
    }
    t.accumulate(ix, gx);
  });
}

Var diag_vec(Var x) {
  Tape& t = *x.tape();
  require(x.rows() == x.cols(), "diag_vec: matrix must be square");
  const int ix = x.id();
  Matrix out = t.val(ix).diagonal();
  return t.emplace(std::move(out), t.requires_grad(ix), [ix](Tape& t, int self) {
    Matrix gx = Matrix::Zero(t.val(ix).rows(), t.val(ix).cols());
    gx.diagonal() = t.adjoint(self).col(0);
    t.accumulate(ix, gx);
  });
}

Var gather_cols(Var x, const std::vector<int>& col_of_row) {
  Tape& t = *x.tape();
  require(static_cast<Eigen::Index>(col_of_row.size()) == x.rows(), "gather_cols: index count mismatch");
  const int ix = x.id();
  Matrix out(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) out(r, 0) = t.val(ix)(r, col_of_row[r]);
  return t.emplace(std::move(out), t.requires_grad(ix), [ix, col_of_row](Tape& t, int self) {
    Matrix gx = Matrix::Zero(t.val(ix).rows(), t.val(ix).cols());
    for (Eigen::Index r = 0; r < gx.rows(); ++r) gx(r, col_of_row[r]) = t.adjoint(self)(r, 0);
    t.accumulate(ix, gx);
  });
}

Var slice_cols(Var x, int lo, int hi) {
  Tape& t = *x.tape();
  require(0 <= lo && lo < hi && hi <= x.cols(), "slice_cols: bad range");
  const int ix = x.id();
  return t.emplace(t.val(ix).middleCols(lo, hi - lo), t.requires_grad(ix), [ix, lo, hi](Tape& t, int self) {
    Matrix gx = Matrix::Zero(t.val(ix).rows(), t.val(ix).cols());
    gx.middleCols(lo, hi - lo) = t.adjoint(self);
    t.accumulate(ix, gx);
  });
}

Var hconcat(const std::vector<Var>& xs) {
  require(!xs.empty(), "hconcat: empty list");
  Tape& t = *xs.front().tape();
  Eigen::Index cols = 0;
  bool rg = false;
  for (const Var& v : xs) {
    require(v.tape() == &t, "hconcat: mixed tapes");
    require(v.rows() == xs.front().rows(), "hconcat: row mismatch");
    cols += v.cols();
    rg = rg || t.requires_grad(v.id());
  }
  Matrix out(xs.front().rows(), cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offs;
  Eigen::Index off = 0;
  for (const Var& v : xs) {
    out.middleCols(off, v.cols()) = v.value();
    ids.push_back(v.id());
    offs.push_back(off);
    off += v.cols();
  }
  return t.emplace(std::move(out), rg, [ids, offs](Tape& t, int self) {
    for (std::size_t k = 0; k < ids.size(); ++k)
      t.accumulate(ids[k], t.adjoint(self).middleCols(offs[k], t.val(ids[k]).cols()));
  });
}

Var exp_scaled_gram(Var a, Var b, Scalar scale) {
  Tape& t = tape_of(a, b);
  require(a.cols() == b.cols(), "exp_scaled_gram: inner dimension mismatch");
  const bool rg = t.requires_grad(a.id()) || t.requires_grad(b.id());
  const int ia = a.id(), ib = b.id();
  Matrix out = (scale * (t.val(ia) * t.val(ib).transpose()).array()).exp().matrix();
  return t.emplace(std::move(out), rg, [ia, ib, scale](Tape& t, int self) {
    const Matrix w = scale * t.adjoint(self).cwiseProduct(t.val(self));
    t.accumulate(ia, w * t.val(ib));
    t.accumulate(ib, w.transpose() * t.val(ia));
  });
}

Var l2_norm(Var x) { return sqrt(sum_squares(x)); }

}  // namespace bgcl
