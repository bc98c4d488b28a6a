#pragma once

namespace bgcl {

inline constexpr double kEulerGamma = 0.57721566490153286060651209008240243;

// Digamma Ψ(x) for x > 0, absolute error below 1e-10
// (recurrence up past the asymptotic threshold, then the Stirling series).
double digamma(double x);

// Trigamma Ψ'(x) for x > 0; derivative of digamma, same accuracy target.
double trigamma(double x);

// log B(a, b) via lgamma.
double log_beta(double a, double b);

}  // namespace bgcl
