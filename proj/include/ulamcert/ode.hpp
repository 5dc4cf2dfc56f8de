#pragma once

// Exact and perturbed Bernoulli / Riccati initial-value problems on [a, b],
// integrated by fixed-step classical RK4 on a shared uniform grid.

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <ostream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "ulamcert/error.hpp"
#include "ulamcert/expr.hpp"
#include "ulamcert/interval.hpp"
#include "ulamcert/perturb.hpp"

namespace ulamcert::ode {

struct SolverConfig {
  std::size_t n_steps = 10000;
  double blowup_threshold = 1e12;
};

inline void validate(const SolverConfig& cfg) {
  if (cfg.n_steps < 2) throw Error(ErrorKind::invalid_argument, "n_steps must be at least 2");
  if (!(cfg.blowup_threshold > 0.0)) {
    throw Error(ErrorKind::invalid_argument, "blowup_threshold must be positive");
  }
}

/// Solution samples on a uniform partition of an interval (n_steps + 1 nodes).
struct Trajectory {
  std::vector<double> x;
  std::vector<double> values;

  [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
  [[nodiscard]] std::size_t n_steps() const noexcept { return values.empty() ? 0 : values.size() - 1; }
  [[nodiscard]] double front() const { return values.front(); }
  [[nodiscard]] double back() const { return values.back(); }
};

/// z' = p(x) z + q(x) z^n.
struct BernoulliProblem {
  expr::Expression p;
  expr::Expression q;
  double n = 2.0;
  Interval interval;
  double z_a = 1.0;
  double z_floor = 1e-6;
};

/// z' = p(x) z^2 + q(x) z + r(x).
struct RiccatiProblem {
  expr::Expression p;
  expr::Expression q;
  expr::Expression r;
  Interval interval;
  double z_a = 0.0;
};

using OdeProblem = std::variant<BernoulliProblem, RiccatiProblem>;

[[nodiscard]] inline bool integer_exponent(double n) {
  return std::isfinite(n) && std::nearbyint(n) == n;
}

inline void require_function_of_x(const expr::Expression& e, const char* name) {
  const auto& v = e.variables();
  if (v.size() > 1 || (v.size() == 1 && v.front() != "x")) {
    throw Error(ErrorKind::invalid_argument,
                std::string("coefficient ") + name + " must be a function of x only");
  }
}

inline void validate(const BernoulliProblem& prob) {
  validate(prob.interval);
  require_function_of_x(prob.p, "p");
  require_function_of_x(prob.q, "q");
  if (!std::isfinite(prob.n) || prob.n == 0.0 || prob.n == 1.0) {
    throw Error(ErrorKind::invalid_argument, "Bernoulli exponent n must be finite and not 0 or 1");
  }
  if (!integer_exponent(prob.n)) {
    if (!(prob.z_floor > 0.0)) {
      throw Error(ErrorKind::invalid_argument, "z_floor must be positive for non-integer n");
    }
    if (!(prob.z_a >= prob.z_floor)) {
      throw Error(ErrorKind::invalid_argument,
                  "initial value must be at least z_floor for non-integer n");
    }
  }
  if (!std::isfinite(prob.z_a)) throw Error(ErrorKind::invalid_argument, "initial value must be finite");
}

inline void validate(const RiccatiProblem& prob) {
  validate(prob.interval);
  require_function_of_x(prob.p, "p");
  require_function_of_x(prob.q, "q");
  require_function_of_x(prob.r, "r");
  if (!std::isfinite(prob.z_a)) throw Error(ErrorKind::invalid_argument, "initial value must be finite");
}

[[nodiscard]] inline const Interval& interval_of(const OdeProblem& prob) {
  return std::visit([](const auto& p) -> const Interval& { return p.interval; }, prob);
}
[[nodiscard]] inline double initial_value(const OdeProblem& prob) {
  return std::visit([](const auto& p) { return p.z_a; }, prob);
}

/// z^n under the Bernoulli rule (sign-preserving integer powers, positive base
/// otherwise).
[[nodiscard]] inline double bernoulli_power(double z, double n) {
  double out = 0.0;
  if (!expr::real_power(z, n, out)) {
    throw Error(ErrorKind::domain, "z^n undefined for z = " + std::to_string(z) +
                                       ", n = " + std::to_string(n));
  }
  return out;
}

/// Right-hand side f(x, z) of the unperturbed equation.
[[nodiscard]] inline double rhs(const BernoulliProblem& prob, double x, double z) {
  const double px = prob.p({x});
  const double qx = prob.q({x});
  return px * z + qx * bernoulli_power(z, prob.n);
}
[[nodiscard]] inline double rhs(const RiccatiProblem& prob, double x, double z) {
  return prob.p({x}) * z * z + prob.q({x}) * z + prob.r({x});
}
[[nodiscard]] inline double rhs(const OdeProblem& prob, double x, double z) {
  return std::visit([&](const auto& p) { return rhs(p, x, z); }, prob);
}

namespace detail {

struct NoNodeCheck {
  void operator()(std::size_t, double, double) const noexcept {}
};

template <class Rhs, class NodeCheck>
Trajectory integrate(Rhs&& f, double z0, const Interval& iv, const SolverConfig& cfg,
                     NodeCheck&& check) {
  validate(iv);
  validate(cfg);
  const std::size_t n = cfg.n_steps;
  const double h = iv.length() / static_cast<double>(n);
  Trajectory t;
  t.x.resize(n + 1);
  t.values.resize(n + 1);
  for (std::size_t i = 0; i < n; ++i) t.x[i] = iv.a + static_cast<double>(i) * h;
  t.x[n] = iv.b;

  double z = z0;
  t.values[0] = z;
  check(std::size_t{0}, t.x[0], z);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = t.x[i];
    const double xm = x + 0.5 * h;
    const double x1 = t.x[i + 1];
    const double k1 = f(x, z);
    const double k2 = f(xm, z + 0.5 * h * k1);
    const double k3 = f(xm, z + 0.5 * h * k2);
    const double k4 = f(x1, z + h * k3);
    z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!std::isfinite(z) || std::abs(z) > cfg.blowup_threshold) {
      throw Error(ErrorKind::blowup,
                  "solution exceeded blowup threshold at node " + std::to_string(i + 1) +
                      " (x = " + std::to_string(x1) + ")",
                  i + 1);
    }
    t.values[i + 1] = z;
    check(i + 1, x1, z);
  }
  return t;
}

}  // namespace detail

/// Classical fixed-step RK4 for z' = f(x, z), z(x0) = z0 on [x0, interval.b].
template <class Rhs>
[[nodiscard]] Trajectory rk4(Rhs&& f, double x0, double z0, const Interval& interval,
                             const SolverConfig& cfg) {
  if (x0 != interval.a) {
    throw Error(ErrorKind::invalid_argument, "rk4 start point must equal the interval's left end");
  }
  return detail::integrate(std::forward<Rhs>(f), z0, interval, cfg, detail::NoNodeCheck{});
}

namespace detail {

template <class Extra>
Trajectory solve_bernoulli_with(const BernoulliProblem& prob, const SolverConfig& cfg,
                                Extra&& extra) {
  validate(prob);
  const bool floored = !integer_exponent(prob.n);
  auto floor_check = [&](std::size_t i, double x, double z) {
    if (floored && z < prob.z_floor) {
      throw Error(ErrorKind::positivity_floor,
                  "solution fell below z_floor = " + std::to_string(prob.z_floor) + " at node " +
                      std::to_string(i) + " (x = " + std::to_string(x) + ")",
                  i);
    }
  };
  return integrate([&](double x, double z) { return rhs(prob, x, z) + extra(x); }, prob.z_a,
                   prob.interval, cfg, floor_check);
}

template <class Extra>
Trajectory solve_riccati_with(const RiccatiProblem& prob, const SolverConfig& cfg, Extra&& extra) {
  validate(prob);
  return integrate([&](double x, double z) { return rhs(prob, x, z) + extra(x); }, prob.z_a,
                   prob.interval, cfg, NoNodeCheck{});
}

}  // namespace detail

[[nodiscard]] inline Trajectory solve_bernoulli(const BernoulliProblem& prob, const SolverConfig& cfg) {
  return detail::solve_bernoulli_with(prob, cfg, [](double) { return 0.0; });
}

[[nodiscard]] inline Trajectory solve_riccati(const RiccatiProblem& prob, const SolverConfig& cfg) {
  return detail::solve_riccati_with(prob, cfg, [](double) { return 0.0; });
}

[[nodiscard]] inline Trajectory solve_exact(const OdeProblem& prob, const SolverConfig& cfg) {
  return std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, BernoulliProblem>) {
          return solve_bernoulli(p, cfg);
        } else {
          return solve_riccati(p, cfg);
        }
      },
      prob);
}

/// Solves y' = f(x, y) + g(x), y(a) = z_a.
[[nodiscard]] inline Trajectory solve_perturbed(const OdeProblem& prob, const perturb::Perturbation& g,
                                                const SolverConfig& cfg) {
  auto extra = [&](double x) { return g(x); };
  return std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, BernoulliProblem>) {
          return detail::solve_bernoulli_with(p, cfg, extra);
        } else {
          return detail::solve_riccati_with(p, cfg, extra);
        }
      },
      prob);
}

inline void require_same_grid(const Trajectory& t1, const Trajectory& t2) {
  if (t1.x.size() != t2.x.size() || t1.values.size() != t2.values.size() ||
      t1.x.size() != t1.values.size()) {
    throw Error(ErrorKind::grid_mismatch, "trajectories have different node counts");
  }
  for (std::size_t i = 0; i < t1.x.size(); ++i) {
    if (t1.x[i] != t2.x[i]) {
      throw Error(ErrorKind::grid_mismatch, "trajectory grids differ at node " + std::to_string(i), i);
    }
  }
}

/// max_i |t1_i - t2_i| over a shared grid.
[[nodiscard]] inline double sup_distance(const Trajectory& t1, const Trajectory& t2) {
  require_same_grid(t1, t2);
  double m = 0.0;
  for (std::size_t i = 0; i < t1.values.size(); ++i) {
    m = std::max(m, std::abs(t1.values[i] - t2.values[i]));
  }
  return m;
}

/// |y(x) - y(a) - int_a^x f(t, y(t)) dt| per node, composite trapezoid on the
/// trajectory's own grid.
[[nodiscard]] inline std::vector<double> integral_residual(const Trajectory& t, const OdeProblem& prob) {
  const Interval& iv = interval_of(prob);
  if (t.x.empty() || t.x.front() != iv.a || t.x.back() != iv.b) {
    throw Error(ErrorKind::grid_mismatch, "trajectory is not defined on the problem interval");
  }
  std::vector<double> res(t.size(), 0.0);
  double f_prev = rhs(prob, t.x[0], t.values[0]);
  double integral = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double f_cur = rhs(prob, t.x[i], t.values[i]);
    integral += 0.5 * (t.x[i] - t.x[i - 1]) * (f_prev + f_cur);
    res[i] = std::abs(t.values[i] - t.values[0] - integral);
    f_prev = f_cur;
  }
  return res;
}

/// CSV with header "x,value", 17 significant digits.
inline void write_csv(std::ostream& os, const Trajectory& t) {
  os << "x,value\n";
  char buf[64];
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,", t.x[i]);
    os << buf;
    std::snprintf(buf, sizeof buf, "%.17g\n", t.values[i]);
    os << buf;
  }
}

}  // namespace ulamcert::ode
