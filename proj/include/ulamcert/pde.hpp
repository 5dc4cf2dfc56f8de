#pragma once

// First-order quasilinear PDE u_x = -(q/p) u_y + r/p with u(0, y) = psi(y),
// solved by the method of characteristics:
//   dy/dx = q/p,   du/dx = r/p [+ g(x, y) for perturbed problems],
// integrated with RK4 from seeds on the line x = 0 and resampled onto a
// rectangular grid slice by slice.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ulamcert/bounds.hpp"
#include "ulamcert/error.hpp"
#include "ulamcert/expr.hpp"
#include "ulamcert/ode.hpp"
#include "ulamcert/parallel.hpp"
#include "ulamcert/perturb.hpp"

namespace ulamcert::pde {

using bounds::Verdict;

struct Domain {
  double a_len = 1.0;
  double b_len = 1.0;
};

inline void validate(const Domain& d) {
  if (!std::isfinite(d.a_len) || !std::isfinite(d.b_len)) {
    throw Error(ErrorKind::invalid_argument, "domain lengths must be finite");
  }
  if (!(d.a_len > 0.0) || !(d.b_len > 0.0)) {
    throw Error(ErrorKind::invalid_argument, "domain empty (lengths must be positive)");
  }
}

/// p u_x + q u_y = r on [0, a_len] x [0, b_len], u(0, y) = psi(y).
/// p, q, r are functions of (x, y, u); psi of y.
struct QuasilinearProblem {
  expr::Expression p;
  expr::Expression q;
  expr::Expression r;
  expr::Expression psi;
  Domain domain;
};

enum class Interpolation { linear, cubic_hermite };

struct CharacteristicsConfig {
  /// n_steps counts RK4 steps across [0, a_len]; it is rounded up to a
  /// multiple of nx - 1 so every grid slice is an RK4 node.
  ode::SolverConfig solver{10000, 1e12};
  std::size_t nx = 101;
  std::size_t ny = 401;
  Interpolation interpolation = Interpolation::cubic_hermite;
  /// Seed characteristics beyond [0, b_len] so that curves drifting in y
  /// still cover the whole rectangle.
  bool extend_seeds = true;
};

struct Grid2D {
  std::size_t nx = 0;
  std::size_t ny = 0;
  double a_len = 1.0;
  double b_len = 1.0;

  [[nodiscard]] double x(std::size_t i) const {
    return i + 1 == nx ? a_len : a_len * static_cast<double>(i) / static_cast<double>(nx - 1);
  }
  [[nodiscard]] double y(std::size_t j) const {
    return j + 1 == ny ? b_len : b_len * static_cast<double>(j) / static_cast<double>(ny - 1);
  }
  [[nodiscard]] double dx() const { return a_len / static_cast<double>(nx - 1); }
  [[nodiscard]] double dy() const { return b_len / static_cast<double>(ny - 1); }

  friend bool operator==(const Grid2D&, const Grid2D&) = default;
};

/// Row-major by x slice: index(i, j) = i * ny + j.
struct Field2D {
  Grid2D grid;
  std::vector<double> values;
  std::vector<std::uint8_t> valid;

  [[nodiscard]] std::size_t index(std::size_t i, std::size_t j) const { return i * grid.ny + j; }
  [[nodiscard]] double at(std::size_t i, std::size_t j) const { return values[index(i, j)]; }
  [[nodiscard]] bool is_valid(std::size_t i, std::size_t j) const { return valid[index(i, j)] != 0; }
  [[nodiscard]] double valid_fraction() const {
    if (valid.empty()) return 0.0;
    std::size_t n = 0;
    for (auto v : valid) n += v != 0;
    return static_cast<double>(n) / static_cast<double>(valid.size());
  }
};

struct CharacteristicCurve {
  double seed = 0.0;
  /// Samples at grid slices 0 .. length - 1; the curve was truncated after
  /// leaving the integration window.
  std::vector<double> y;
  std::vector<double> u;
  std::size_t length = 0;
};

struct CharacteristicFan {
  std::vector<double> slice_x;
  std::vector<CharacteristicCurve> curves;
  std::size_t steps_per_slice = 1;
  bool crossing_detected = false;
  double crossing_x = 0.0;
  double crossing_y = 0.0;
};

namespace detail {

struct Prepared {
  expr::Expression p, q, r, psi;
  Domain domain;
};

inline Prepared prepare(const QuasilinearProblem& prob) {
  validate(prob.domain);
  const std::vector<std::string> xyu = {"x", "y", "u"};
  return Prepared{prob.p.rebind(xyu), prob.q.rebind(xyu), prob.r.rebind(xyu),
                  prob.psi.rebind({"y"}), prob.domain};
}

inline std::size_t steps_per_slice(const CharacteristicsConfig& cfg) {
  const std::size_t slices = cfg.nx - 1;
  return std::max<std::size_t>(1, (cfg.solver.n_steps + slices - 1) / slices);
}

inline void validate_config(const CharacteristicsConfig& cfg) {
  ode::validate(cfg.solver);
  if (cfg.nx < 2 || cfg.ny < 3) throw Error(ErrorKind::invalid_argument, "grid needs nx >= 2, ny >= 3");
}

struct Slope {
  double dy;
  double du;
};

inline Slope characteristic_slope(const Prepared& pr, const perturb::Perturbation* g, double x,
                                  double y, double u) {
  const double pv = pr.p({x, y, u});
  if (!(std::abs(pv) > 1e-14)) {
    throw Error(ErrorKind::coefficient_vanishes,
                "p vanishes at (x, y, u) = (" + std::to_string(x) + ", " + std::to_string(y) + ", " +
                    std::to_string(u) + ")");
  }
  Slope s{pr.q({x, y, u}) / pv, pr.r({x, y, u}) / pv};
  if (g != nullptr) s.du += (*g)(x, y);
  return s;
}

inline CharacteristicCurve integrate_curve(const Prepared& pr, const perturb::Perturbation* g,
                                           double seed, std::size_t nx, std::size_t sps,
                                           double window_lo, double window_hi,
                                           double blowup_threshold) {
  CharacteristicCurve c;
  c.seed = seed;
  c.y.reserve(nx);
  c.u.reserve(nx);
  double y = seed;
  double u = pr.psi({seed});
  c.y.push_back(y);
  c.u.push_back(u);
  const double a = pr.domain.a_len;
  const double h = a / static_cast<double>((nx - 1) * sps);
  const std::size_t total = (nx - 1) * sps;
  for (std::size_t step = 0; step < total; ++step) {
    const double x = a * static_cast<double>(step) / static_cast<double>(total);
    const double xm = x + 0.5 * h;
    const double x1 = step + 1 == total ? a : a * static_cast<double>(step + 1) / static_cast<double>(total);
    const Slope k1 = characteristic_slope(pr, g, x, y, u);
    const Slope k2 = characteristic_slope(pr, g, xm, y + 0.5 * h * k1.dy, u + 0.5 * h * k1.du);
    const Slope k3 = characteristic_slope(pr, g, xm, y + 0.5 * h * k2.dy, u + 0.5 * h * k2.du);
    const Slope k4 = characteristic_slope(pr, g, x1, y + h * k3.dy, u + h * k3.du);
    y += (h / 6.0) * (k1.dy + 2.0 * k2.dy + 2.0 * k3.dy + k4.dy);
    u += (h / 6.0) * (k1.du + 2.0 * k2.du + 2.0 * k3.du + k4.du);
    if (!std::isfinite(u) || std::abs(u) > blowup_threshold || !std::isfinite(y)) {
      throw Error(ErrorKind::blowup, "characteristic from y0 = " + std::to_string(seed) +
                                         " blew up at x = " + std::to_string(x1));
    }
    if ((step + 1) % sps == 0) {
      c.y.push_back(y);
      c.u.push_back(u);
      if (y < window_lo || y > window_hi) break;
    }
  }
  c.length = c.y.size();
  return c;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = i + 1 == n ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return v;
}

}  // namespace detail

/// Seeds on x = 0. With extend_seeds, a 17-curve pilot fan measures how far
/// characteristics drift in y and the seed range is widened so that the fan
/// covers [0, b_len] at every slice.
[[nodiscard]] inline std::vector<double> choose_seeds(const QuasilinearProblem& prob, std::size_t fan_n,
                                                      const CharacteristicsConfig& cfg) {
  if (fan_n < 16) throw Error(ErrorKind::invalid_argument, "fan_n must be at least 16");
  detail::validate_config(cfg);
  const detail::Prepared pr = detail::prepare(prob);
  const double b = pr.domain.b_len;
  if (!cfg.extend_seeds) return detail::linspace(0.0, b, fan_n);

  const auto pilot_seeds = detail::linspace(0.0, b, 17);
  const std::size_t sps = std::max<std::size_t>(1, std::min<std::size_t>(detail::steps_per_slice(cfg), 10));
  const double inf = std::numeric_limits<double>::infinity();
  double d_min = 0.0, d_max = 0.0;
  for (double s : pilot_seeds) {
    const auto c = detail::integrate_curve(pr, nullptr, s, cfg.nx, sps, -inf, inf,
                                           cfg.solver.blowup_threshold);
    for (double y : c.y) {
      d_min = std::min(d_min, y - s);
      d_max = std::max(d_max, y - s);
    }
  }
  const double lo = std::min(0.0, -d_max);
  const double hi = std::max(b, b - d_min);
  const double spacing = (hi - lo) / static_cast<double>(fan_n - 5);
  return detail::linspace(lo - 2.0 * spacing, hi + 2.0 * spacing, fan_n);
}

/// Integrates one characteristic per seed (in parallel) and checks, slice by
/// slice, that the surviving curves stay ordered in y.
[[nodiscard]] inline CharacteristicFan integrate_fan(const QuasilinearProblem& prob,
                                                     const std::vector<double>& seeds,
                                                     const perturb::Perturbation* g,
                                                     const CharacteristicsConfig& cfg) {
  detail::validate_config(cfg);
  const detail::Prepared pr = detail::prepare(prob);
  if (seeds.size() < 2) throw Error(ErrorKind::invalid_argument, "fan needs at least two seeds");
  CharacteristicFan fan;
  fan.steps_per_slice = detail::steps_per_slice(cfg);
  fan.slice_x.resize(cfg.nx);
  const Grid2D grid{cfg.nx, cfg.ny, pr.domain.a_len, pr.domain.b_len};
  for (std::size_t i = 0; i < cfg.nx; ++i) fan.slice_x[i] = grid.x(i);

  const double spacing = (seeds.back() - seeds.front()) / static_cast<double>(seeds.size() - 1);
  const double window_lo = std::min(0.0, seeds.front()) - 2.0 * spacing;
  const double window_hi = std::max(pr.domain.b_len, seeds.back()) + 2.0 * spacing;
  fan.curves.resize(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t k) {
    fan.curves[k] = detail::integrate_curve(pr, g, seeds[k], cfg.nx, fan.steps_per_slice, window_lo,
                                            window_hi, cfg.solver.blowup_threshold);
  });

  for (std::size_t i = 0; i < cfg.nx && !fan.crossing_detected; ++i) {
    double prev = -std::numeric_limits<double>::infinity();
    for (const auto& c : fan.curves) {
      if (c.length <= i) continue;
      if (!(c.y[i] > prev)) {
        fan.crossing_detected = true;
        fan.crossing_x = fan.slice_x[i];
        fan.crossing_y = c.y[i];
        break;
      }
      prev = c.y[i];
    }
  }
  return fan;
}

namespace detail {

/// Resamples one x slice of the fan onto the grid's y nodes.
inline void resample_slice(const CharacteristicFan& fan, std::size_t i, const Grid2D& grid,
                           Interpolation mode, Field2D& field) {
  std::vector<double> ys, us;
  for (const auto& c : fan.curves) {
    if (c.length > i) {
      ys.push_back(c.y[i]);
      us.push_back(c.u[i]);
    }
  }
  const std::size_t n = ys.size();
  std::vector<double> d;
  if (mode == Interpolation::cubic_hermite && n >= 3) {
    // Three-point (parabolic) slope estimates on the non-uniform positions.
    d.resize(n);
    std::vector<double> h(n - 1), delta(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
      h[k] = ys[k + 1] - ys[k];
      delta[k] = (us[k + 1] - us[k]) / h[k];
    }
    for (std::size_t k = 1; k + 1 < n; ++k) {
      d[k] = (h[k] * delta[k - 1] + h[k - 1] * delta[k]) / (h[k - 1] + h[k]);
    }
    d[0] = ((2.0 * h[0] + h[1]) * delta[0] - h[0] * delta[1]) / (h[0] + h[1]);
    d[n - 1] = ((2.0 * h[n - 2] + h[n - 3]) * delta[n - 2] - h[n - 2] * delta[n - 3]) /
               (h[n - 2] + h[n - 3]);
  }
  for (std::size_t j = 0; j < grid.ny; ++j) {
    const std::size_t idx = field.index(i, j);
    const double y = grid.y(j);
    if (n == 0 || y < ys.front() || y > ys.back()) {
      field.values[idx] = 0.0;
      field.valid[idx] = 0;
      continue;
    }
    if (n == 1) {
      field.values[idx] = us[0];
      field.valid[idx] = 1;
      continue;
    }
    std::size_t k = static_cast<std::size_t>(std::upper_bound(ys.begin(), ys.end(), y) - ys.begin());
    k = std::min(k == 0 ? 0 : k - 1, n - 2);
    const double hk = ys[k + 1] - ys[k];
    const double t = (y - ys[k]) / hk;
    double v = 0.0;
    if (d.empty()) {
      v = us[k] + t * (us[k + 1] - us[k]);
    } else {
      const double t2 = t * t, t3 = t2 * t;
      v = (2.0 * t3 - 3.0 * t2 + 1.0) * us[k] + (t3 - 2.0 * t2 + t) * hk * d[k] +
          (-2.0 * t3 + 3.0 * t2) * us[k + 1] + (t3 - t2) * hk * d[k + 1];
    }
    field.values[idx] = v;
    field.valid[idx] = 1;
  }
}

}  // namespace detail

[[nodiscard]] inline Field2D resample(const CharacteristicFan& fan, const QuasilinearProblem& prob,
                                      const CharacteristicsConfig& cfg) {
  Field2D field;
  field.grid = Grid2D{cfg.nx, cfg.ny, prob.domain.a_len, prob.domain.b_len};
  field.values.assign(cfg.nx * cfg.ny, 0.0);
  field.valid.assign(cfg.nx * cfg.ny, 0);
  for (std::size_t i = 0; i < cfg.nx; ++i) {
    detail::resample_slice(fan, i, field.grid, cfg.interpolation, field);
  }
  return field;
}

struct CharacteristicSolution {
  CharacteristicFan fan;
  Field2D field;
};

namespace detail {

inline CharacteristicSolution solve_with(const QuasilinearProblem& prob,
                                         const perturb::Perturbation* g, std::size_t fan_n,
                                         const CharacteristicsConfig& cfg) {
  const auto seeds = choose_seeds(prob, fan_n, cfg);
  CharacteristicSolution sol;
  sol.fan = integrate_fan(prob, seeds, g, cfg);
  if (sol.fan.crossing_detected) {
    throw Error(ErrorKind::characteristic_crossing,
                "characteristics cross near (x, y) = (" + std::to_string(sol.fan.crossing_x) + ", " +
                    std::to_string(sol.fan.crossing_y) + "); the classical solution breaks down");
  }
  sol.field = resample(sol.fan, prob, cfg);
  return sol;
}

}  // namespace detail

[[nodiscard]] inline CharacteristicSolution solve_characteristics_full(
    const QuasilinearProblem& prob, std::size_t fan_n, const CharacteristicsConfig& cfg) {
  return detail::solve_with(prob, nullptr, fan_n, cfg);
}

[[nodiscard]] inline Field2D solve_characteristics(const QuasilinearProblem& prob, std::size_t fan_n,
                                                   const CharacteristicsConfig& cfg) {
  return detail::solve_with(prob, nullptr, fan_n, cfg).field;
}

/// Same seeds as the unperturbed solve; g(x, y) is added to du/dx along each
/// characteristic.
[[nodiscard]] inline Field2D solve_perturbed_pde(const QuasilinearProblem& prob,
                                                 const perturb::Perturbation& g, std::size_t fan_n,
                                                 const CharacteristicsConfig& cfg) {
  return detail::solve_with(prob, &g, fan_n, cfg).field;
}

// ---------------------------------------------------------------------------
// Derived quantities on fields

/// d/dy by second-order finite differences (central inside, one-sided at the
/// edges of the valid run). `ok` is cleared where neighbours are invalid.
struct YDerivative {
  std::vector<double> values;
  std::vector<std::uint8_t> ok;
};

[[nodiscard]] inline YDerivative y_derivative(const Field2D& f) {
  const auto& g = f.grid;
  YDerivative d;
  d.values.assign(f.values.size(), 0.0);
  d.ok.assign(f.values.size(), 0);
  const double h = g.dy();
  for (std::size_t i = 0; i < g.nx; ++i) {
    for (std::size_t j = 0; j < g.ny; ++j) {
      if (!f.is_valid(i, j)) continue;
      const std::size_t idx = f.index(i, j);
      const bool left = j >= 1 && f.is_valid(i, j - 1);
      const bool right = j + 1 < g.ny && f.is_valid(i, j + 1);
      if (left && right) {
        d.values[idx] = (f.at(i, j + 1) - f.at(i, j - 1)) / (2.0 * h);
        d.ok[idx] = 1;
      } else if (right && j + 2 < g.ny && f.is_valid(i, j + 2)) {
        d.values[idx] = (-3.0 * f.at(i, j) + 4.0 * f.at(i, j + 1) - f.at(i, j + 2)) / (2.0 * h);
        d.ok[idx] = 1;
      } else if (left && j >= 2 && f.is_valid(i, j - 2)) {
        d.values[idx] = (3.0 * f.at(i, j) - 4.0 * f.at(i, j - 1) + f.at(i, j - 2)) / (2.0 * h);
        d.ok[idx] = 1;
      }
    }
  }
  return d;
}

/// |v(x, y) - v(0, y) - int_0^x [-(q/p) v_y + r/p](s, y, v(s, y)) ds| per
/// node, trapezoid in x along each grid column. Nodes after the first
/// uncomputable node of a column are marked invalid.
[[nodiscard]] inline Field2D integral_residual(const QuasilinearProblem& prob, const Field2D& v) {
  const detail::Prepared pr = detail::prepare(prob);
  const auto& g = v.grid;
  const YDerivative vy = y_derivative(v);
  Field2D res;
  res.grid = g;
  res.values.assign(v.values.size(), 0.0);
  res.valid.assign(v.values.size(), 0);
  for (std::size_t j = 0; j < g.ny; ++j) {
    double integral = 0.0;
    double f_prev = 0.0;
    for (std::size_t i = 0; i < g.nx; ++i) {
      const std::size_t idx = v.index(i, j);
      if (!vy.ok[idx]) break;
      const double x = g.x(i), y = g.y(j), val = v.values[idx];
      const double pv = pr.p({x, y, val});
      const double f = -(pr.q({x, y, val}) / pv) * vy.values[idx] + pr.r({x, y, val}) / pv;
      if (i > 0) integral += 0.5 * (x - g.x(i - 1)) * (f_prev + f);
      f_prev = f;
      res.values[idx] = std::abs(val - v.at(0, j) - integral);
      res.valid[idx] = 1;
    }
  }
  return res;
}

/// max over valid residual nodes of residual(x, y) - int_0^x bound_g(s, y) ds.
[[nodiscard]] inline double residual_excess(const QuasilinearProblem& prob, const Field2D& v,
                                            const perturb::Perturbation& g) {
  const Field2D res = integral_residual(prob, v);
  const auto& grid = v.grid;
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < grid.ny; ++j) {
    double allowance = 0.0;
    double b_prev = g.bound_at(grid.x(0), grid.y(j));
    for (std::size_t i = 0; i < grid.nx; ++i) {
      if (i > 0) {
        const double b_cur = g.bound_at(grid.x(i), grid.y(j));
        allowance += 0.5 * (grid.x(i) - grid.x(i - 1)) * (b_prev + b_cur);
        b_prev = b_cur;
      }
      if (!res.is_valid(i, j)) break;
      worst = std::max(worst, res.at(i, j) - allowance);
    }
  }
  return worst;
}

struct LipschitzPair {
  double l1 = 0.0;
  double l2 = 0.0;
  std::size_t nodes_used = 0;
};

/// Empirical l1, l2 for one pair of fields: the largest ratios
/// |(q/p)(v1) v1_y - (q/p)(v2) v2_y| / |v1 - v2| and |(r/p)(v1) - (r/p)(v2)| / |v1 - v2|
/// over common valid nodes with |v1 - v2| >= 1e-12.
[[nodiscard]] inline LipschitzPair estimate_l1_l2(const QuasilinearProblem& prob, const Field2D& f1,
                                                  const Field2D& f2) {
  if (!(f1.grid == f2.grid)) throw Error(ErrorKind::grid_mismatch, "fields are on different grids");
  const detail::Prepared pr = detail::prepare(prob);
  const YDerivative d1 = y_derivative(f1);
  const YDerivative d2 = y_derivative(f2);
  LipschitzPair out;
  const auto& g = f1.grid;
  for (std::size_t i = 0; i < g.nx; ++i) {
    for (std::size_t j = 0; j < g.ny; ++j) {
      const std::size_t idx = f1.index(i, j);
      if (!d1.ok[idx] || !d2.ok[idx]) continue;
      const double v1 = f1.values[idx], v2 = f2.values[idx];
      const double gap = std::abs(v1 - v2);
      if (gap < 1e-12) continue;
      const double x = g.x(i), y = g.y(j);
      const double p1 = pr.p({x, y, v1}), p2 = pr.p({x, y, v2});
      const double a1 = pr.q({x, y, v1}) / p1 * d1.values[idx];
      const double a2 = pr.q({x, y, v2}) / p2 * d2.values[idx];
      const double b1 = pr.r({x, y, v1}) / p1;
      const double b2 = pr.r({x, y, v2}) / p2;
      out.l1 = std::max(out.l1, std::abs(a1 - a2) / gap);
      out.l2 = std::max(out.l2, std::abs(b1 - b2) / gap);
      ++out.nodes_used;
    }
  }
  if (out.nodes_used == 0) {
    throw Error(ErrorKind::estimation_failure,
                "l1/l2 estimation failed: the fields coincide at every usable node");
  }
  return out;
}

namespace detail {

inline double sup_difference(const Field2D& v, const Field2D& u, std::size_t& common) {
  double m = 0.0;
  common = 0;
  for (std::size_t k = 0; k < v.values.size(); ++k) {
    if (!v.valid[k] || !u.valid[k]) continue;
    ++common;
    m = std::max(m, std::abs(v.values[k] - u.values[k]));
  }
  return m;
}

inline constexpr double kMaxInvalidFraction = 0.10;

}  // namespace detail

// ---------------------------------------------------------------------------
// Hyers-Ulam certificate

struct PdeHuOptions {
  double l1 = 0.0;
  double l2 = 0.0;
  std::string provenance = "user_supplied";
  perturb::EnsembleOptions ensemble;
};

struct PdeHuCertificate {
  double l1 = 0.0;
  double l2 = 0.0;
  std::string l_provenance;
  Domain domain;
  double c = 0.0;
  double epsilon = 0.0;
  std::size_t ensemble_size = 0;
  std::size_t fan_n = 0;
  Grid2D grid;
  std::vector<double> measured_sups;
  double max_ratio = 0.0;
  double invalid_fraction = 0.0;
  double max_residual_excess = -std::numeric_limits<double>::infinity();
  Verdict verdict = Verdict::unusable;
  std::vector<std::string> notes;

  [[nodiscard]] double bound() const noexcept { return c * epsilon; }
};

/// c = a_len exp(a_len (l1 + l2)); each member's sup over valid nodes of
/// |v - u| is compared with c * eps.
[[nodiscard]] inline PdeHuCertificate certify_pde_hu(const QuasilinearProblem& prob,
                                                     const perturb::PerturbationSpec& spec,
                                                     std::size_t count, const PdeHuOptions& opts,
                                                     std::size_t fan_n,
                                                     const CharacteristicsConfig& cfg) {
  validate(prob.domain);
  if (!(opts.l1 >= 0.0) || !(opts.l2 >= 0.0) || !std::isfinite(opts.l1) || !std::isfinite(opts.l2)) {
    throw Error(ErrorKind::invalid_argument, "l1 and l2 must be finite and non-negative");
  }
  PdeHuCertificate cert;
  cert.l1 = opts.l1;
  cert.l2 = opts.l2;
  cert.l_provenance = opts.provenance;
  cert.domain = prob.domain;
  cert.epsilon = spec.epsilon;
  cert.ensemble_size = count;
  cert.fan_n = fan_n;
  cert.grid = Grid2D{cfg.nx, cfg.ny, prob.domain.a_len, prob.domain.b_len};
  try {
    cert.c = bounds::hu_constant(opts.l1, opts.l2, Interval{0.0, prob.domain.a_len});
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::overflow) throw;
    cert.c = std::numeric_limits<double>::infinity();
    cert.notes.push_back(e.what());
    return cert;
  }
  cert.notes.push_back("l1, l2 (" + opts.provenance +
                       ") apply to the compared pairs only, not to all C1 functions");
  if (opts.l1 + opts.l2 == 0.0) {
    cert.notes.push_back("l1 + l2 = 0: bound evaluated at the limit of positive constants");
  }

  perturb::PerturbationSpec member_spec = spec;
  member_spec.dims = 2;
  member_spec.weight.reset();
  member_spec.domain_x = Interval{0.0, prob.domain.a_len};
  member_spec.domain_y = Interval{0.0, prob.domain.b_len};
  const auto members = perturb::ensemble(member_spec, count, opts.ensemble);

  Field2D exact;
  try {
    exact = solve_characteristics(prob, fan_n, cfg);
  } catch (const Error& e) {
    cert.notes.push_back(std::string("exact solve failed: ") + e.what());
    return cert;
  }

  struct Outcome {
    double sup = 0.0;
    double invalid = 0.0;
    double residual = -std::numeric_limits<double>::infinity();
    std::string failure;
  };
  std::vector<Outcome> outcomes(members.size());
  // Members run sequentially; each solve already fans its curves out.
  for (std::size_t k = 0; k < members.size(); ++k) {
    auto& out = outcomes[k];
    try {
      const Field2D v = solve_perturbed_pde(prob, members[k], fan_n, cfg);
      std::size_t common = 0;
      out.sup = detail::sup_difference(v, exact, common);
      out.invalid = 1.0 - static_cast<double>(common) / static_cast<double>(v.values.size());
      out.residual = residual_excess(prob, v, members[k]);
    } catch (const Error& e) {
      out.failure = "member " + std::to_string(k) + ": " + e.what();
    }
  }

  bool unusable = exact.valid_fraction() < 1.0 - detail::kMaxInvalidFraction;
  if (unusable) cert.notes.push_back("exact field covers too little of the grid");
  bool violated = false;
  const double bound = cert.bound();
  for (const auto& out : outcomes) {
    if (!out.failure.empty()) {
      unusable = true;
      cert.notes.push_back(out.failure);
      continue;
    }
    cert.measured_sups.push_back(out.sup);
    cert.invalid_fraction = std::max(cert.invalid_fraction, out.invalid);
    cert.max_residual_excess = std::max(cert.max_residual_excess, out.residual);
    cert.max_ratio = std::max(cert.max_ratio, out.sup / bound);
    if (out.invalid > detail::kMaxInvalidFraction) unusable = true;
    if (out.sup > bound * (1.0 + bounds::kBoundSlack)) violated = true;
  }
  cert.invalid_fraction = std::max(cert.invalid_fraction, 1.0 - exact.valid_fraction());
  if (cert.invalid_fraction > detail::kMaxInvalidFraction) {
    cert.notes.push_back("more than 10% of grid nodes lack characteristic coverage");
  }
  cert.verdict = unusable ? Verdict::unusable : (violated ? Verdict::violated : Verdict::holds);
  return cert;
}

// ---------------------------------------------------------------------------
// Hyers-Ulam-Rassias certificate

namespace detail {

inline void check_phi(const expr::Expression& phi, const Grid2D& g) {
  for (std::size_t i = 0; i < g.nx; ++i) {
    for (std::size_t j = 0; j < g.ny; ++j) {
      const double v = phi({g.x(i), g.y(j)});
      if (!(v > 0.0)) {
        throw Error(ErrorKind::hypothesis_failure,
                    "phi must be positive (phi(" + std::to_string(g.x(i)) + ", " +
                        std::to_string(g.y(j)) + ") = " + std::to_string(v) + ")");
      }
      if (i > 0 && v < phi({g.x(i - 1), g.y(j)})) {
        throw Error(ErrorKind::hypothesis_failure,
                    "phi not increasing in x near (" + std::to_string(g.x(i)) + ", " +
                        std::to_string(g.y(j)) + ")");
      }
      if (j > 0 && v < phi({g.x(i), g.y(j - 1)})) {
        throw Error(ErrorKind::hypothesis_failure,
                    "phi not increasing in y near (" + std::to_string(g.x(i)) + ", " +
                        std::to_string(g.y(j)) + ")");
      }
    }
  }
}

}  // namespace detail

/// lambda_phi = max over grid nodes of (trapezoid int_0^x phi(s, y) ds) / phi(x, y),
/// times 1 + 1e-6, after checking that phi is positive and nondecreasing in
/// both variables on the grid.
[[nodiscard]] inline double estimate_lambda_phi(const expr::Expression& phi_in, const Domain& domain,
                                                std::size_t nx, std::size_t ny) {
  validate(domain);
  if (nx < 2 || ny < 2) throw Error(ErrorKind::invalid_argument, "lambda_phi grid needs nx, ny >= 2");
  const expr::Expression phi = phi_in.rebind({"x", "y"});
  const Grid2D g{nx, ny, domain.a_len, domain.b_len};
  detail::check_phi(phi, g);
  double lambda = 0.0;
  for (std::size_t j = 0; j < ny; ++j) {
    const double y = g.y(j);
    double integral = 0.0;
    double prev = phi({0.0, y});
    for (std::size_t i = 1; i < nx; ++i) {
      const double cur = phi({g.x(i), y});
      integral += 0.5 * (g.x(i) - g.x(i - 1)) * (prev + cur);
      lambda = std::max(lambda, integral / cur);
      prev = cur;
    }
  }
  if (!std::isfinite(lambda)) {
    throw Error(ErrorKind::estimation_failure, "lambda_phi estimate diverges");
  }
  return lambda * (1.0 + 1e-6);
}

/// max over y of exp(int_0^{a_len} (l1 + l2)(s, y) ds) on the truncated domain.
[[nodiscard]] inline double estimate_m_exp(const expr::Expression& l1_in, const expr::Expression& l2_in,
                                           const Domain& domain, std::size_t nx, std::size_t ny) {
  validate(domain);
  const expr::Expression l1 = l1_in.rebind({"x", "y"});
  const expr::Expression l2 = l2_in.rebind({"x", "y"});
  const Grid2D g{nx, ny, domain.a_len, domain.b_len};
  double worst = 0.0;
  for (std::size_t j = 0; j < ny; ++j) {
    const double y = g.y(j);
    double integral = 0.0;
    double prev = 0.0;
    for (std::size_t i = 0; i < nx; ++i) {
      const double x = g.x(i);
      const double a = l1({x, y}), b = l2({x, y});
      if (a < 0.0 || b < 0.0) {
        throw Error(ErrorKind::hypothesis_failure,
                    "l1 and l2 must be non-negative (at x = " + std::to_string(x) +
                        ", y = " + std::to_string(y) + ")");
      }
      const double cur = a + b;
      if (i > 0) integral += 0.5 * (x - g.x(i - 1)) * (prev + cur);
      prev = cur;
    }
    worst = std::max(worst, integral);
  }
  const double m = std::exp(worst);
  if (!std::isfinite(m)) throw Error(ErrorKind::overflow, "exp(int (l1 + l2)) overflows");
  return m;
}

struct RassiasCertificate {
  std::string phi;
  std::string l1;
  std::string l2;
  Domain domain;
  double m_exp = 1.0;
  double lambda_phi = 0.0;
  double c_phi = 0.0;
  double epsilon = 0.0;
  std::size_t ensemble_size = 0;
  std::size_t fan_n = 0;
  Grid2D grid;
  /// max over members and valid nodes of |v - u| / (c_phi eps phi).
  double pointwise_ratios = 0.0;
  std::vector<double> member_ratios;
  double invalid_fraction = 0.0;
  double max_residual_excess = -std::numeric_limits<double>::infinity();
  Verdict verdict = Verdict::unusable;
  std::vector<std::string> notes;
};

struct PdeRassiasOptions {
  perturb::EnsembleOptions ensemble;
};

/// Pointwise check |v - u| <= c_phi eps phi with c_phi = lambda_phi * M_exp,
/// all quantities evaluated on the truncated rectangle.
[[nodiscard]] inline RassiasCertificate certify_pde_rassias(
    const QuasilinearProblem& prob, const expr::Expression& phi_in,
    const perturb::PerturbationSpec& spec, std::size_t count, const expr::Expression& l1_fn,
    const expr::Expression& l2_fn, std::size_t fan_n, const CharacteristicsConfig& cfg,
    const PdeRassiasOptions& opts = {}) {
  validate(prob.domain);
  const expr::Expression phi = phi_in.rebind({"x", "y"});
  RassiasCertificate cert;
  cert.phi = phi.str();
  cert.l1 = l1_fn.str();
  cert.l2 = l2_fn.str();
  cert.domain = prob.domain;
  cert.epsilon = spec.epsilon;
  cert.ensemble_size = count;
  cert.fan_n = fan_n;
  cert.grid = Grid2D{cfg.nx, cfg.ny, prob.domain.a_len, prob.domain.b_len};
  cert.lambda_phi = estimate_lambda_phi(phi, prob.domain, cfg.nx, cfg.ny);
  cert.m_exp = estimate_m_exp(l1_fn, l2_fn, prob.domain, cfg.nx, cfg.ny);
  cert.c_phi = cert.lambda_phi * cert.m_exp;
  cert.notes.push_back("claim restricted to the truncated domain [0, " +
                       std::to_string(prob.domain.a_len) + "] x [0, " +
                       std::to_string(prob.domain.b_len) + "]");

  perturb::PerturbationSpec member_spec = spec;
  member_spec.dims = 2;
  member_spec.weight = phi;
  member_spec.domain_x = Interval{0.0, prob.domain.a_len};
  member_spec.domain_y = Interval{0.0, prob.domain.b_len};
  const auto members = perturb::ensemble(member_spec, count, opts.ensemble);

  Field2D exact;
  try {
    exact = solve_characteristics(prob, fan_n, cfg);
  } catch (const Error& e) {
    cert.notes.push_back(std::string("exact solve failed: ") + e.what());
    return cert;
  }
  std::vector<double> phi_grid(exact.values.size());
  for (std::size_t i = 0; i < cfg.nx; ++i) {
    for (std::size_t j = 0; j < cfg.ny; ++j) {
      phi_grid[exact.index(i, j)] = phi({exact.grid.x(i), exact.grid.y(j)});
    }
  }

  bool unusable = exact.valid_fraction() < 1.0 - detail::kMaxInvalidFraction;
  bool violated = false;
  cert.invalid_fraction = 1.0 - exact.valid_fraction();
  for (std::size_t k = 0; k < members.size(); ++k) {
    Field2D v;
    try {
      v = solve_perturbed_pde(prob, members[k], fan_n, cfg);
    } catch (const Error& e) {
      unusable = true;
      cert.notes.push_back("member " + std::to_string(k) + ": " + e.what());
      continue;
    }
    double ratio = 0.0;
    std::size_t common = 0;
    const double scale = cert.c_phi * spec.epsilon;
    for (std::size_t idx = 0; idx < v.values.size(); ++idx) {
      if (!v.valid[idx] || !exact.valid[idx]) continue;
      ++common;
      ratio = std::max(ratio, std::abs(v.values[idx] - exact.values[idx]) / (scale * phi_grid[idx]));
    }
    const double invalid = 1.0 - static_cast<double>(common) / static_cast<double>(v.values.size());
    cert.invalid_fraction = std::max(cert.invalid_fraction, invalid);
    if (invalid > detail::kMaxInvalidFraction) unusable = true;
    cert.member_ratios.push_back(ratio);
    cert.pointwise_ratios = std::max(cert.pointwise_ratios, ratio);
    cert.max_residual_excess = std::max(cert.max_residual_excess, residual_excess(prob, v, members[k]));
    if (ratio > 1.0 + bounds::kBoundSlack) violated = true;
  }
  cert.verdict = unusable ? Verdict::unusable : (violated ? Verdict::violated : Verdict::holds);
  return cert;
}

// ---------------------------------------------------------------------------
// Export

/// CSV with header "x,y,value,valid", 17 significant digits.
inline void write_csv(std::ostream& os, const Field2D& f) {
  os << "x,y,value,valid\n";
  char buf[96];
  for (std::size_t i = 0; i < f.grid.nx; ++i) {
    for (std::size_t j = 0; j < f.grid.ny; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%d\n", f.grid.x(i), f.grid.y(j), f.at(i, j),
                    f.is_valid(i, j) ? 1 : 0);
      os << buf;
    }
  }
}

[[nodiscard]] inline nlohmann::json to_json(const PdeHuCertificate& c) {
  return nlohmann::json{
      {"schema", "ulamcert/1"},
      {"kind", "pde_hu"},
      {"domain", {c.domain.a_len, c.domain.b_len}},
      {"l1", c.l1},
      {"l2", c.l2},
      {"l_provenance", c.l_provenance},
      {"c", c.c},
      {"epsilon", c.epsilon},
      {"bound", c.bound()},
      {"ensemble_size", c.ensemble_size},
      {"fan_n", c.fan_n},
      {"grid", {c.grid.nx, c.grid.ny}},
      {"measured_sups", c.measured_sups},
      {"max_ratio", c.max_ratio},
      {"invalid_fraction", c.invalid_fraction},
      {"max_residual_excess", c.max_residual_excess},
      {"verdict", std::string(bounds::to_string(c.verdict))},
      {"notes", c.notes},
  };
}

[[nodiscard]] inline nlohmann::json to_json(const RassiasCertificate& c) {
  return nlohmann::json{
      {"schema", "ulamcert/1"},
      {"kind", "pde_rassias"},
      {"domain", {c.domain.a_len, c.domain.b_len}},
      {"truncated", true},
      {"phi", c.phi},
      {"l1", c.l1},
      {"l2", c.l2},
      {"M_exp", c.m_exp},
      {"lambda_phi", c.lambda_phi},
      {"c_phi", c.c_phi},
      {"epsilon", c.epsilon},
      {"ensemble_size", c.ensemble_size},
      {"fan_n", c.fan_n},
      {"grid", {c.grid.nx, c.grid.ny}},
      {"pointwise_ratios", c.pointwise_ratios},
      {"member_ratios", c.member_ratios},
      {"invalid_fraction", c.invalid_fraction},
      {"max_residual_excess", c.max_residual_excess},
      {"verdict", std::string(bounds::to_string(c.verdict))},
      {"notes", c.notes},
  };
}

}  // namespace ulamcert::pde
