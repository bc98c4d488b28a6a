#pragma once

#include <array>
#include <vector>

#include "bgcl/augment.hpp"
#include "bgcl/encoder.hpp"
#include "bgcl/tape.hpp"
#include "bgcl/types.hpp"

namespace bgcl {

// Cosine similarities between all row pairs, each row norm floored at 1e-8.
Matrix pairwise_similarity(const Matrix& p_o, const Matrix& p_t);

// Symmetrized contrastive loss over projections: for each node the positive
// is its counterpart in the other view; negatives are every other node in
// both the cross-view and the intra-view direction.
Var nt_xent_loss(Tape& t, Var p_o, Var p_t, double tau);

// nt_xent over projected representations.
Var grace_loss(Tape& t, Var h_o, Var h_t, const EncoderVars& enc, double tau);

Var weight_decay_var(Tape& t, const std::vector<Var>& weights, double lambda);
double weight_decay(const EncoderParams& p, double lambda, bool include_head = true);

// Weight-space divergence diagnostic: per view and layer,
// (pi_keep/2)·||M||^2 − H(pi). Never optimized; reported only.
double weight_kl_diag(const std::vector<Matrix>& layer_weights,
                      const std::array<std::vector<double>, 2>& pi_keep);

// Both views: edge_count·B·Σ_l KL(Kumaraswamy(a,b) || Beta(c/L, c(L-1)/L)).
double augmentation_kl(const AugmentationParams& aug, int edge_count, int B);

Var augmentation_kl_var(Tape& t, const std::array<std::vector<Var>, 2>& a_vars,
                        const std::array<std::vector<Var>, 2>& b_vars, double c,
                        int edge_count, int B);

struct LossBreakdown {
  double l_cnt = 0.0;
  double l_wd = 0.0;
  double kl_aug = 0.0;
  double kl_weights_diag = 0.0;
  double total_phase1 = 0.0;      // l_cnt + l_wd
  double phase2_objective = 0.0;  // l_cnt - kl_aug
};

}  // namespace bgcl
