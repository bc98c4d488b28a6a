#include "bgcl/adam.hpp"

#include <cmath>

namespace bgcl {

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state) {
  state.step += 1;
  const Scalar bc1 = 1.0 - std::pow(state.beta1, static_cast<Scalar>(state.step));
  const Scalar bc2 = 1.0 - std::pow(state.beta2, static_cast<Scalar>(state.step));

  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    const Matrix g = (git != grads.end()) ? git->second : Matrix::Zero(p.rows(), p.cols());
    require(g.rows() == p.rows() && g.cols() == p.cols(), "adam_step: gradient shape mismatch for " + name);
    require(all_finite(g), "adam_step: non-finite gradient for " + name);

    Matrix& m = state.m.try_emplace(name, Matrix::Zero(p.rows(), p.cols())).first->second;
    Matrix& v = state.v.try_emplace(name, Matrix::Zero(p.rows(), p.cols())).first->second;
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);

    const Matrix m_hat = m / bc1;
    const Matrix v_hat = v / bc2;
    p.array() -= state.lr * m_hat.array() / (v_hat.array().sqrt() + state.eps);
  }
}

}  // namespace bgcl
