#include "oracles.hpp"
#include <algorithm>

#include <cmath>

#include "bgcl/special.hpp"

namespace bgcl::oracle {

double kl_quadrature(double a, double b, double alpha, double beta, int points) {
  require(a > 0 && b > 0 && alpha > 0 && beta > 0, "kl_quadrature: parameters must be positive");
  require(points >= 3 && points % 2 == 1, "kl_quadrature: node count must be odd and >= 3");
  // Integrate in CDF space: with s = F(x) the divergence becomes
  // ∫ ln(q(x(s)) / p(x(s))) ds, which has no density singularities, so a
  // uniform trapezoid rule on clamped (0,1) is accurate even for a, b < 1.
  const double lo = 1e-9, hi = 1.0 - 1e-9;
  const double lb = log_beta(alpha, beta);
  auto integrand = [&](double s) {
    const double xa = -std::expm1(std::log1p(-s) / b);  // x^a, full precision at both ends
    const double log_x = std::log(std::max(xa, 1e-300)) / a;
    const double one_minus_x = std::max(-std::expm1(log_x), 1e-300);
    const double log_q = std::log(a) + std::log(b) + (a - 1.0) * log_x
                         + (b - 1.0) * std::log1p(-s) / b;
    const double log_p = (alpha - 1.0) * log_x + (beta - 1.0) * std::log(one_minus_x) - lb;
    return log_q - log_p;
  };
  const double h = (hi - lo) / static_cast<double>(points - 1);
  double acc = 0.5 * (integrand(lo) + integrand(hi));
  for (int i = 1; i + 1 < points; ++i) acc += integrand(lo + h * i);
  return acc * h;
}

namespace {

double cosine(const Matrix& x, Eigen::Index i, const Matrix& y, Eigen::Index k) {
  const double ni = std::max(x.row(i).norm(), 1e-8);
  const double nk = std::max(y.row(k).norm(), 1e-8);
  return x.row(i).dot(y.row(k)) / (ni * nk);
}

}  // namespace

double naive_grace_loss(const Matrix& p_o, const Matrix& p_t, double tau) {
  const Eigen::Index n = p_o.rows();
  double total = 0.0;
  auto ell = [&](const Matrix& a, const Matrix& b) {
    // ell(a_i, b_i) with cross-view negatives from b and intra-view from a
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pos = std::exp(cosine(a, i, b, i) / tau);
      double b1 = 0.0, b2 = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        if (k == i) continue;
        b1 += std::exp(cosine(a, i, b, k) / tau);
        b2 += std::exp(cosine(a, i, a, k) / tau);
      }
      s += std::log(pos / (pos + b1 + b2));
    }
    return s;
  };
  total = ell(p_o, p_t) + ell(p_t, p_o);
  return -total / (2.0 * static_cast<double>(n));
}

Matrix naive_gcn_masked(const Matrix& anorm, const Matrix& features, const DenseMaskFn& mask,
                        const Matrix& weights, const std::function<double(double)>& act) {
  const Eigen::Index n = anorm.rows();
  const Eigen::Index f_in = weights.rows();
  const Eigen::Index f_out = weights.cols();
  Matrix out(n, f_out);
  for (Eigen::Index j = 0; j < f_out; ++j) {
    Vector col = Vector::Zero(n);
    for (Eigen::Index i = 0; i < f_in; ++i) {
      const Matrix masked = anorm.cwiseProduct(mask(static_cast<int>(i), static_cast<int>(j)));
      col += masked * features.col(i) * weights(i, j);
    }
    for (Eigen::Index v = 0; v < n; ++v) out(v, j) = act(col[v]);
  }
  return out;
}

std::vector<std::vector<int>> floyd_warshall(const Graph& g) {
  const int n = g.n_nodes;
  const int inf = 1 << 20;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (int v = 0; v < n; ++v) d[v][v] = 0;
  for (auto [u, v] : g.edges) d[u][v] = d[v][u] = 1;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (d[i][j] >= inf) d[i][j] = -1;
  return d;
}

}  // namespace bgcl::oracle
