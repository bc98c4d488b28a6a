#pragma once

#include <functional>
#include <map>
#include <string>

#include "bgcl/types.hpp"

namespace bgcl {

using ParamSet = std::map<std::string, Matrix>;
using ScalarFn = std::function<Scalar(const ParamSet&)>;

// Central-difference gradient estimate, one coordinate at a time.
// f must be deterministic (freeze any randomness before calling).
inline ParamSet finite_diff_grad(const ScalarFn& f, ParamSet params, Scalar eps) {
  require(eps > 0.0, "finite_diff_grad: eps must be positive");
  ParamSet grads;
  for (auto& [name, p] : params) {
    Matrix g(p.rows(), p.cols());
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.cols(); ++c) {
        const Scalar saved = p(r, c);
        p(r, c) = saved + eps;
        const Scalar fp = f(params);
        p(r, c) = saved - eps;
        const Scalar fm = f(params);
        p(r, c) = saved;
        require(std::isfinite(fp) && std::isfinite(fm), "finite_diff_grad: f returned non-finite value");
        g(r, c) = (fp - fm) / (2.0 * eps);
      }
    }
    grads.emplace(name, std::move(g));
  }
  return grads;
}

// Sup-norm difference normalized by the larger gradient magnitude
// (floored so comparing two near-zero gradients does not blow up).
inline Scalar max_rel_error(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "max_rel_error: shape mismatch");
  const Scalar diff = (a - b).cwiseAbs().maxCoeff();
  const Scalar scale =
      std::max({static_cast<Scalar>(1e-6), a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
  return diff / scale;
}

}  // namespace bgcl
