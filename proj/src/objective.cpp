#include "bgcl/objective.hpp"

#include <cmath>

namespace bgcl {

Matrix pairwise_similarity(const Matrix& p_o, const Matrix& p_t) {
  require(p_o.cols() == p_t.cols(), "pairwise_similarity: dimension mismatch");
  auto normalized = [](const Matrix& p) {
    Matrix n = p;
    for (Eigen::Index r = 0; r < n.rows(); ++r) n.row(r) /= std::max(n.row(r).norm(), 1e-8);
    return n;
  };
  return normalized(p_o) * normalized(p_t).transpose();
}

Var nt_xent_loss(Tape& t, Var p_o, Var p_t, double tau) {
  require(tau > 0.0, "nt_xent_loss: tau must be positive");
  require(p_o.tape() == &t && p_t.tape() == &t, "nt_xent_loss: wrong tape");
  const double inv_tau = 1.0 / tau;
  const Eigen::Index n = p_o.rows();
  require(n == p_t.rows() && p_o.cols() == p_t.cols(), "nt_xent_loss: shape mismatch");

  Var pn_o = rows_normalize(p_o);
  Var pn_t = rows_normalize(p_t);
  Var e_ot = exp_scaled_gram(pn_o, pn_t, inv_tau);  // [i,k] = exp(g(o_i,t_k)/tau)
  Var e_oo = exp_scaled_gram(pn_o, pn_o, inv_tau);
  Var e_tt = exp_scaled_gram(pn_t, pn_t, inv_tau);

  Var pos = diag_vec(e_ot);
  Var denom_o = sub(add(row_sum(e_ot), row_sum(e_oo)), diag_vec(e_oo));
  Var denom_t = sub(add(col_sum(e_ot), row_sum(e_tt)), diag_vec(e_tt));
  Var ell = sub(affine(log(pos), 2.0, 0.0), add(log(denom_o), log(denom_t)));
  return affine(sum(ell), -0.5 / static_cast<double>(n), 0.0);
}

Var grace_loss(Tape& t, Var h_o, Var h_t, const EncoderVars& enc, double tau) {
  return nt_xent_loss(t, project_tape(t, h_o, enc), project_tape(t, h_t, enc), tau);
}

Var weight_decay_var(Tape& t, const std::vector<Var>& weights, double lambda) {
  require(lambda >= 0.0, "weight_decay: lambda must be >= 0");
  require(!weights.empty(), "weight_decay: no weights");
  Var acc = sum_squares(weights.front());
  for (std::size_t i = 1; i < weights.size(); ++i) acc = add(acc, sum_squares(weights[i]));
  return affine(acc, lambda, 0.0);
}

double weight_decay(const EncoderParams& p, double lambda, bool include_head) {
  double ss = 0.0;
  for (const Matrix& w : p.weights) ss += w.squaredNorm();
  if (include_head)
    ss += p.head_w1.squaredNorm() + p.head_b1.squaredNorm() + p.head_w2.squaredNorm() +
          p.head_b2.squaredNorm();
  return lambda * ss;
}

double weight_kl_diag(const std::vector<Matrix>& layer_weights,
                      const std::array<std::vector<double>, 2>& pi_keep) {
  double total = 0.0;
  for (int view = 0; view < 2; ++view) {
    require(pi_keep[view].size() == layer_weights.size(), "weight_kl_diag: pi per layer per view");
    for (std::size_t l = 0; l < layer_weights.size(); ++l) {
      const double pi = pi_keep[view][l];
      require(pi >= 0.0 && pi <= 1.0, "weight_kl_diag: pi must be in [0,1]");
      total += 0.5 * pi * layer_weights[l].squaredNorm() - bernoulli_entropy(pi);
    }
  }
  return total;
}

double augmentation_kl(const AugmentationParams& aug, int edge_count, int B) {
  require(edge_count >= 1, "augmentation_kl: edge_count must be >= 1");
  require(B >= 1, "augmentation_kl: B must be >= 1");
  const int L = aug.layer_count();
  const double mult = static_cast<double>(edge_count) * static_cast<double>(B);
  double total = 0.0;
  for (int view = 0; view < 2; ++view) {
    double per_view = 0.0;
    for (int l = 0; l < L; ++l)
      per_view += kl_kuma_beta(aug.a(view, l), aug.b(view, l), aug.prior_c, L);
    total += mult * per_view;
  }
  return total;
}

Var augmentation_kl_var(Tape& t, const std::array<std::vector<Var>, 2>& a_vars,
                        const std::array<std::vector<Var>, 2>& b_vars, double c,
                        int edge_count, int B) {
  require(edge_count >= 1 && B >= 1, "augmentation_kl_var: bad multiplier");
  const int L = static_cast<int>(a_vars[0].size());
  const double mult = static_cast<double>(edge_count) * static_cast<double>(B);
  Var acc;
  for (int view = 0; view < 2; ++view) {
    for (int l = 0; l < L; ++l) {
      Var kl = kl_kuma_beta_var(t, a_vars[view][l], b_vars[view][l], c, L);
      acc = acc.valid() ? add(acc, kl) : kl;
    }
  }
  return affine(acc, mult, 0.0);
}

}  // namespace bgcl
