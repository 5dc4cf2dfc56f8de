#pragma once

// Reference values for the test suites. Closed forms are evaluated here,
// independently of the library; constants were computed at 30 digits with
// mpmath and frozen.

#include <cmath>
#include <cstddef>

namespace oracle {

inline constexpr double kE = 2.71828182845904523536;
inline constexpr double kTanh1 = 0.761594155955764888119;
inline constexpr double kExp125 = 3.49034295746184137613;
inline constexpr double kExp4 = 54.5981500331442390781;
inline constexpr double kExpHalf = 1.64872127070012814685;
inline constexpr double kOneMinusExpMinus1 = 0.632120558828557678404;
inline constexpr double kHundredthEMinus1 = 0.0171828182845904527113;

/// z(x) for z' = x z + x/(1+x^2) sqrt(z), z(0) = 1, at x = 0.5 and x = 1.
inline constexpr double kBernoulliHalf = 1.25916995621056898416;
inline constexpr double kBernoulliOne = 2.20145621613937201078;

/// Same problem through w = sqrt(z): w' = (x/2) w + x/(2(1+x^2)), solved by
/// integrating factor, the integral by composite Simpson with 2n panels.
inline double bernoulli_example(double x, std::size_t n = 2000) {
  auto f = [](double t) { return std::exp(-t * t / 4.0) * t / (2.0 * (1.0 + t * t)); };
  const double h = x / static_cast<double>(2 * n);
  double s = f(0.0) + f(x);
  for (std::size_t i = 1; i < 2 * n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(static_cast<double>(i) * h);
  const double w = std::exp(x * x / 4.0) * (1.0 + s * h / 3.0);
  return w * w;
}

/// Fixed-point u* of u = eps (x - a) + beta int_a^x u for constant beta:
/// u* = (eps / beta)(e^{beta (x - a)} - 1).
inline double gronwall_constant_beta(double eps, double beta, double s) {
  return beta == 0.0 ? eps * s : (eps / beta) * std::expm1(beta * s);
}

}  // namespace oracle
