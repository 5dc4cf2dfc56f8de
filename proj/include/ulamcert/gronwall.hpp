#pragma once

// Integral inequalities u(x) <= eps (x - a) + int_a^x beta(t) u(t) dt and
// their exponential bound eps (x - a) exp(int_a^x beta).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "ulamcert/error.hpp"
#include "ulamcert/interval.hpp"

namespace ulamcert::bounds {

struct GronwallForm {
  double epsilon = 1.0;
  double a = 0.0;
  std::function<double(double)> beta;

  [[nodiscard]] double alpha(double x) const { return epsilon * (x - a); }
};

/// eps (x - a) exp(int_a^x beta), the integral by composite trapezoid.
[[nodiscard]] inline double gronwall_bound(const GronwallForm& form, double x,
                                           std::size_t panels = 10000) {
  if (x < form.a) throw Error(ErrorKind::invalid_argument, "gronwall_bound needs x >= a");
  if (x == form.a) return 0.0;
  const double h = (x - form.a) / static_cast<double>(panels);
  double integral = 0.5 * (form.beta(form.a) + form.beta(x));
  for (std::size_t i = 1; i < panels; ++i) integral += form.beta(form.a + static_cast<double>(i) * h);
  integral *= h;
  return form.alpha(x) * std::exp(integral);
}

[[nodiscard]] inline std::vector<double> uniform_grid(const Interval& iv, std::size_t panels) {
  std::vector<double> x(panels + 1);
  const double h = iv.length() / static_cast<double>(panels);
  for (std::size_t i = 0; i < panels; ++i) x[i] = iv.a + static_cast<double>(i) * h;
  x[panels] = iv.b;
  return x;
}

/// The exponential bound at every node of `grid`, with the exponent
/// accumulated by trapezoid over the grid itself.
[[nodiscard]] inline std::vector<double> gronwall_bound_on_grid(const GronwallForm& form,
                                                                std::span<const double> grid) {
  std::vector<double> out(grid.size(), 0.0);
  if (grid.empty()) return out;
  double integral = 0.0;
  double b_prev = form.beta(grid[0]);
  out[0] = form.alpha(grid[0]) * std::exp(0.0);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double b_cur = form.beta(grid[i]);
    integral += 0.5 * (grid[i] - grid[i - 1]) * (b_prev + b_cur);
    out[i] = form.alpha(grid[i]) * std::exp(integral);
    b_prev = b_cur;
  }
  return out;
}

struct FixedPointResult {
  std::vector<double> x;
  std::vector<double> u;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Picard iteration u_{k+1}(x) = eps (x - a) + int_a^x beta u_k, starting at
/// u_0 = eps (x - a), trapezoid quadrature on a uniform grid.
[[nodiscard]] inline FixedPointResult gronwall_fixed_point(const GronwallForm& form,
                                                           const Interval& iv,
                                                           std::size_t panels = 10000,
                                                           std::size_t max_iters = 200,
                                                           double rel_tol = 1e-15) {
  validate(iv);
  FixedPointResult r;
  r.x = uniform_grid(iv, panels);
  const std::size_t n = r.x.size();
  std::vector<double> alpha(n), beta(n);
  for (std::size_t i = 0; i < n; ++i) {
    alpha[i] = form.alpha(r.x[i]);
    beta[i] = form.beta(r.x[i]);
  }
  r.u = alpha;
  std::vector<double> next(n);
  for (r.iterations = 1; r.iterations <= max_iters; ++r.iterations) {
    double integral = 0.0;
    next[0] = alpha[0];
    double change = std::abs(next[0] - r.u[0]);
    double scale = std::abs(next[0]);
    for (std::size_t i = 1; i < n; ++i) {
      integral += 0.5 * (r.x[i] - r.x[i - 1]) * (beta[i - 1] * r.u[i - 1] + beta[i] * r.u[i]);
      next[i] = alpha[i] + integral;
      change = std::max(change, std::abs(next[i] - r.u[i]));
      scale = std::max(scale, std::abs(next[i]));
    }
    r.u.swap(next);
    if (change <= rel_tol * scale) {
      r.converged = true;
      break;
    }
  }
  r.iterations = std::min(r.iterations, max_iters);
  return r;
}

struct GronwallCheck {
  double max_ratio = 0.0;
  double min_beta = 0.0;
  std::size_t iterations = 0;
  bool converged = false;

  /// Fixed point dominated by the exponential bound within relative 1e-8.
  [[nodiscard]] bool passes() const noexcept { return max_ratio <= 1.0 + 1e-8; }
};

/// Compares the Picard fixed point against the exponential bound on every
/// node after the first (the ratio is 0/0 at x = a).
[[nodiscard]] inline GronwallCheck gronwall_check(const GronwallForm& form, const Interval& iv,
                                                  std::size_t max_iters = 200,
                                                  std::size_t panels = 10000) {
  validate(iv);
  if (!(form.epsilon > 0.0)) throw Error(ErrorKind::invalid_argument, "epsilon must be positive");
  GronwallCheck c;
  const auto grid = uniform_grid(iv, panels);
  c.min_beta = std::numeric_limits<double>::infinity();
  for (double x : grid) c.min_beta = std::min(c.min_beta, form.beta(x));
  if (c.min_beta < 0.0) {
    throw Error(ErrorKind::hypothesis_failure, "beta is negative on the interval (min " +
                                                   std::to_string(c.min_beta) + ")");
  }
  GronwallForm anchored = form;
  anchored.a = iv.a;
  const FixedPointResult fp = gronwall_fixed_point(anchored, iv, panels, max_iters);
  const auto bound = gronwall_bound_on_grid(anchored, grid);
  c.iterations = fp.iterations;
  c.converged = fp.converged;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    c.max_ratio = std::max(c.max_ratio, fp.u[i] / bound[i]);
  }
  return c;
}

}  // namespace ulamcert::bounds
