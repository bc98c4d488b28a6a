#include "bgcl/augment.hpp"

#include <algorithm>
#include <cmath>

#include "bgcl/special.hpp"

namespace bgcl {

namespace {

constexpr double kClampLo = 1e-7;
constexpr double kClampHi = 1.0 - 1e-7;

double clamp_unit(double u) { return std::min(kClampHi, std::max(kClampLo, u)); }

}  // namespace

AugmentationParams AugmentationParams::neutral(int layers, double c, double t) {
  require(layers >= 1, "AugmentationParams: need at least one layer");
  require(c > 0.0 && t > 0.0, "AugmentationParams: c and t must be positive");
  AugmentationParams p;
  p.prior_c = c;
  p.temperature = t;
  for (int v = 0; v < 2; ++v) {
    p.log_a[v].assign(layers, 0.0);
    p.log_b[v].assign(layers, 0.0);
  }
  return p;
}

double AugmentationParams::mean_pi(int view, int layer) const {
  const double av = a(view, layer);
  const double bv = b(view, layer);
  return bv * std::exp(log_beta(1.0 + 1.0 / av, bv));
}

double kumaraswamy_sample(double a, double b, double u) {
  require(a > 0.0 && b > 0.0, "kumaraswamy_sample: a, b must be positive");
  u = clamp_unit(u);
  return std::pow(1.0 - std::pow(1.0 - u, 1.0 / b), 1.0 / a);
}

double concrete_sample(double pi, double u, double t) {
  require(t > 0.0, "concrete_sample: temperature must be positive");
  pi = clamp_unit(pi);
  u = clamp_unit(u);
  const double logit = std::log(pi / (1.0 - pi)) + std::log(u / (1.0 - u));
  return 1.0 / (1.0 + std::exp(-logit / t));
}

double bernoulli_entropy(double pi) {
  require(pi >= 0.0 && pi <= 1.0, "bernoulli_entropy: pi must be in [0,1]");
  double h = 0.0;
  if (pi > 0.0) h -= pi * std::log(pi);
  if (pi < 1.0) h -= (1.0 - pi) * std::log(1.0 - pi);
  return h;
}

double kl_kuma_beta(double a, double b, double c, int L, int series_terms) {
  require(a > 0.0 && b > 0.0 && c > 0.0, "kl_kuma_beta: parameters must be positive");
  require(L >= 1, "kl_kuma_beta: L must be >= 1");
  const double alpha = c / static_cast<double>(L);
  double kl = ((a - alpha) / a) * (-kEulerGamma - digamma(b) - 1.0 / b)
              + std::log(a * b / alpha) - (b - 1.0) / b;
  if (series_terms > 0) {
    const double beta = c * (static_cast<double>(L) - 1.0) / static_cast<double>(L);
    double tail = 0.0;
    for (int m = 1; m <= series_terms; ++m)
      tail += std::exp(log_beta(static_cast<double>(m) / a, b)) / (static_cast<double>(m) + a * b);
    kl += (beta - 1.0) * b * tail;
  }
  return kl;
}

MaskSet sample_masks(const Csr& support, int L, int B, const std::vector<double>& pi,
                     MaskMode mode, RngStream& rng, double temperature, bool symmetric) {
  require(B >= 1, "sample_masks: B must be >= 1");
  require(static_cast<int>(pi.size()) == L, "sample_masks: need one pi per layer");
  const int nnz = support.nnz();
  MaskSet out;
  out.pi = pi;
  out.layers.resize(L);

  auto draw = [&](double p) {
    if (mode == MaskMode::Hard) {
      if (p >= 1.0) return 1.0;
      if (p <= 0.0) return 0.0;
      return rng.bernoulli(p) ? 1.0 : 0.0;
    }
    return concrete_sample(p, rng.uniform(), temperature);
  };

  for (int l = 0; l < L; ++l) {
    if (mode == MaskMode::Hard)
      require(pi[l] >= 0.0 && pi[l] <= 1.0, "sample_masks: hard mode needs pi in [0,1]");
    else
      require(pi[l] > 0.0 && pi[l] < 1.0, "sample_masks: relaxed mode needs pi in (0,1)");
    out.layers[l].block_masks.resize(B);
    for (int beta = 0; beta < B; ++beta) {
      Vector m(nnz);
      if (!symmetric) {
        for (int k = 0; k < nnz; ++k) m[k] = draw(pi[l]);
      } else {
        m.setZero();
        for (int r = 0; r < support.n; ++r) {
          for (int k = support.row_ptr[r]; k < support.row_ptr[r + 1]; ++k) {
            const int col = support.col_idx[k];
            if (col < r) continue;
            const double val = draw(pi[l]);
            m[k] = val;
            if (col != r) m[support.find(col, r)] = val;
          }
        }
      }
      out.layers[l].block_masks[beta] = std::move(m);
    }
  }
  return out;
}

MaskSet special_case_masks(SpecialMask type, const Graph& g, const Csr& support, int L,
                           int B, double pi, RngStream& rng) {
  require(L >= 1 && B >= 1, "special_case_masks: bad L or B");
  require(pi >= 0.0 && pi <= 1.0, "special_case_masks: pi must be in [0,1]");
  const int nnz = support.nnz();
  const Vector ones = Vector::Ones(nnz);
  auto keep = [&] { return (pi >= 1.0) ? 1.0 : (pi <= 0.0 ? 0.0 : (rng.bernoulli(pi) ? 1.0 : 0.0)); };

  MaskSet out;
  out.pi.assign(L, 1.0);
  out.layers.resize(L);
  for (int l = 0; l < L; ++l) out.layers[l].block_masks.assign(B, ones);

  switch (type) {
    case SpecialMask::FeatureDrop: {
      // layer 0 drops whole input-feature blocks; deeper layers untouched
      out.pi[0] = pi;
      const int f0 = g.feature_dim();
      Vector col_keep = Vector::Ones(f0);
      for (int beta = 0; beta < B; ++beta) {
        const int lo = static_cast<int>((static_cast<long>(beta) * f0) / B);
        const int hi = static_cast<int>((static_cast<long>(beta) + 1) * f0 / B);
        if (lo >= hi) continue;
        const double k = keep();
        for (int j = lo; j < hi; ++j) col_keep[j] = k;
      }
      out.layers[0].block_masks.clear();
      out.layers[0].column_keep = std::move(col_keep);
      break;
    }
    case SpecialMask::EdgeDrop: {
      // one draw per undirected edge, self-loops kept, shared everywhere
      for (double& p : out.pi) p = pi;
      Vector m = ones;
      for (int r = 0; r < support.n; ++r) {
        for (int k = support.row_ptr[r]; k < support.row_ptr[r + 1]; ++k) {
          const int col = support.col_idx[k];
          if (col <= r) continue;
          const double v = keep();
          m[k] = v;
          m[support.find(col, r)] = v;
        }
      }
      for (int l = 0; l < L; ++l) out.layers[l].block_masks.assign(B, m);
      break;
    }
    case SpecialMask::NodeDrop: {
      out.pi[0] = pi;
      std::vector<double> node_keep(g.n_nodes);
      for (int v = 0; v < g.n_nodes; ++v) node_keep[v] = keep();
      Vector m(nnz);
      for (int r = 0; r < support.n; ++r)
        for (int k = support.row_ptr[r]; k < support.row_ptr[r + 1]; ++k)
          m[k] = node_keep[r] * node_keep[support.col_idx[k]];
      out.layers[0].block_masks.assign(B, m);
      break;
    }
    case SpecialMask::Dropout: {
      // per-node-per-block row masks on every layer output
      for (double& p : out.pi) p = pi;
      for (int l = 0; l < L; ++l) {
        for (int beta = 0; beta < B; ++beta) {
          Vector m(nnz);
          for (int r = 0; r < support.n; ++r) {
            const double v = keep();
            for (int k = support.row_ptr[r]; k < support.row_ptr[r + 1]; ++k) m[k] = v;
          }
          out.layers[l].block_masks[beta] = std::move(m);
        }
      }
      break;
    }
  }
  return out;
}

Var kumaraswamy_pi(Tape& t, Var a, Var b, double u) {
  u = clamp_unit(u);
  const double log_om_u = std::log(1.0 - u);
  Var e1 = exp(div(t.constant_scalar(log_om_u), b));  // (1-u)^(1/b)
  Var inner = log(affine(e1, -1.0, 1.0));             // log(1 - (1-u)^(1/b))
  return exp(div(inner, a));
}

Var concrete_mask(Tape& t, Var pi, const Vector& u, double temperature) {
  require(temperature > 0.0, "concrete_mask: temperature must be positive");
  // logit(pi) assembled from log(pi) and log(1-pi) so no clamp is needed on
  // the tape; the uniform draws carry the usual clamp.
  Var log_pi = log(pi);
  Var log_om = log(affine(pi, -1.0, 1.0));
  Var logit_pi = affine(sub(log_pi, log_om), 1.0 / temperature, 0.0);
  Matrix logit_u(u.size(), 1);
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    const double uu = clamp_unit(u[k]);
    logit_u(k, 0) = std::log(uu / (1.0 - uu)) / temperature;
  }
  return sigmoid(add_scalar_bcast(logit_pi, t.constant(std::move(logit_u))));
}

Var kl_kuma_beta_var(Tape& t, Var a, Var b, double c, int L) {
  require(c > 0.0 && L >= 1, "kl_kuma_beta_var: bad prior");
  const double alpha = c / static_cast<double>(L);
  Var one = t.constant_scalar(1.0);
  Var frac = affine(div(t.constant_scalar(alpha), a), -1.0, 1.0);     // (a - alpha)/a
  Var inv_b = div(one, b);
  Var inner = affine(add(digamma_of(b), inv_b), -1.0, -kEulerGamma);  // -gamma - psi(b) - 1/b
  Var t1 = mul(frac, inner);
  Var t2 = affine(add(log(a), log(b)), 1.0, -std::log(alpha));
  Var t3 = affine(inv_b, 1.0, -1.0);  // -(b-1)/b
  return add(add(t1, t2), t3);
}

}  // namespace bgcl
