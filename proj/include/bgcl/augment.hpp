#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "bgcl/graph.hpp"
#include "bgcl/rng.hpp"
#include "bgcl/sparse.hpp"
#include "bgcl/tape.hpp"
#include "bgcl/types.hpp"

namespace bgcl {

inline constexpr int kViewO = 0;
inline constexpr int kViewT = 1;

// Variational parameters of the per-view, per-layer Kumaraswamy posteriors
// over keep probabilities, stored unconstrained (a = exp(log_a)).
struct AugmentationParams {
  std::array<std::vector<double>, 2> log_a;  // [view][layer]
  std::array<std::vector<double>, 2> log_b;
  double prior_c = 2.0;
  double temperature = 0.3;

  static AugmentationParams neutral(int layers, double c, double t);
  int layer_count() const { return static_cast<int>(log_a[0].size()); }
  double a(int view, int layer) const { return std::exp(log_a[view][layer]); }
  double b(int view, int layer) const { return std::exp(log_b[view][layer]); }
  // posterior mean E[pi] = b * B(1 + 1/a, b)
  double mean_pi(int view, int layer) const;
};

enum class MaskMode { Hard, Relaxed };

// Masks for one view. Per layer either per-block edge masks over the
// self-loop-augmented support, or (FeatureDrop) a keep pattern over the
// layer's input feature columns.
struct MaskSet {
  struct Layer {
    std::vector<Vector> block_masks;  // each sized nnz
    Vector column_keep;               // sized F_l; empty unless FeatureDrop
  };
  std::vector<Layer> layers;
  std::vector<double> pi;  // keep probability used per layer
};

// Inverse-CDF draw: pi = (1 - (1-u)^(1/b))^(1/a). u is clamped to
// [1e-7, 1-1e-7] before use.
double kumaraswamy_sample(double a, double b, double u);

// sigmoid((logit(pi) + logit(u)) / t); pi and u clamped as above.
double concrete_sample(double pi, double u, double t);

double bernoulli_entropy(double pi);

// The printed Kumaraswamy-vs-Beta(c/L, c(L-1)/L) divergence for one layer:
//   ((a - c/L)/a)(-gamma - digamma(b) - 1/b) + log(ab/(c/L)) - (b-1)/b.
// series_terms > 0 adds the (beta-1)-weighted Taylor tail, which is exactly
// zero for the Beta(1,1) prior used in the experiments.
double kl_kuma_beta(double a, double b, double c, int L, int series_terms = 0);

MaskSet sample_masks(const Csr& support, int L, int B, const std::vector<double>& pi,
                     MaskMode mode, RngStream& rng, double temperature = 0.3,
                     bool symmetric = false);

enum class SpecialMask { FeatureDrop, EdgeDrop, NodeDrop, Dropout };

MaskSet special_case_masks(SpecialMask type, const Graph& g, const Csr& support, int L,
                           int B, double pi, RngStream& rng);

// ---- tape versions (used during training) --------------------------------

// Differentiable in a and b; u is a frozen draw.
Var kumaraswamy_pi(Tape& t, Var a, Var b, double u);

// Relaxed mask vector over frozen uniform draws; differentiable in pi.
Var concrete_mask(Tape& t, Var pi, const Vector& u, double temperature);

// One layer's KL contribution as a tape expression in (a, b).
Var kl_kuma_beta_var(Tape& t, Var a, Var b, double c, int L);

}  // namespace bgcl
