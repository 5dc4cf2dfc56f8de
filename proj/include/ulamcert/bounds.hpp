#pragma once

// Hypothesis constants (M = max|coefficient|, Lipschitz L over a declared
// z range), the constant c = (b - a) exp((M + L)(b - a)), and empirical
// certification of Bernoulli / Riccati problems against c * eps.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "ulamcert/error.hpp"
#include "ulamcert/expr.hpp"
#include "ulamcert/gronwall.hpp"
#include "ulamcert/interval.hpp"
#include "ulamcert/ode.hpp"
#include "ulamcert/parallel.hpp"
#include "ulamcert/perturb.hpp"

namespace ulamcert::bounds {

inline constexpr double kSupSafetyFactor = 1.0 + 1e-9;
inline constexpr double kBoundSlack = 1e-9;
inline constexpr double kLipschitzClamp = 1e-300;

struct SupEstimate {
  double value = 0.0;
  std::size_t grid_points = 0;
  std::size_t refinement_passes = 0;
  double argmax = 0.0;
};

struct ZRange {
  double lo = 0.0;
  double hi = 1.0;

  [[nodiscard]] bool contains(double z) const noexcept { return lo <= z && z <= hi; }
};

enum class LipschitzMethod { symbolic_derivative_sup, user_supplied };

[[nodiscard]] constexpr std::string_view to_string(LipschitzMethod m) noexcept {
  return m == LipschitzMethod::user_supplied ? "user_supplied" : "symbolic_derivative_sup";
}

struct LipschitzEstimate {
  double value = 0.0;
  LipschitzMethod method = LipschitzMethod::symbolic_derivative_sup;
  ZRange z_range;
  /// The estimate was zero and has been replaced by kLipschitzClamp.
  bool clamped = false;
  double raw_value = 0.0;
};

namespace detail {

inline constexpr double kInvPhi = 0.6180339887498948482;  // 1 / golden ratio

/// Golden-section maximization of f on [lo, hi]; returns (argmax, max) over
/// every point it evaluated, endpoints included.
template <class F>
std::pair<double, double> golden_max(F&& f, double lo, double hi, int iterations = 80) {
  double best_x = lo;
  double best_f = f(lo);
  auto consider = [&](double x, double v) {
    if (v > best_f) {
      best_f = v;
      best_x = x;
    }
  };
  consider(hi, f(hi));
  if (!(hi > lo)) return {best_x, best_f};
  double c = hi - kInvPhi * (hi - lo);
  double d = lo + kInvPhi * (hi - lo);
  double fc = f(c);
  double fd = f(d);
  consider(c, fc);
  consider(d, fd);
  for (int i = 0; i < iterations && (d - c) > 1e-15 * (1.0 + std::abs(c)); ++i) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - kInvPhi * (hi - lo);
      fc = f(c);
      consider(c, fc);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + kInvPhi * (hi - lo);
      fd = f(d);
      consider(d, fd);
    }
  }
  return {best_x, best_f};
}

[[nodiscard]] inline double grid_point(const Interval& iv, std::size_t i, std::size_t n) {
  if (i + 1 == n) return iv.b;
  return iv.a + iv.length() * static_cast<double>(i) / static_cast<double>(n - 1);
}

}  // namespace detail

/// sup |f| on [a, b]: uniform scan of grid_n points, then two golden-section
/// passes around the best node (first over the neighbouring cells, then over a
/// quarter-cell window around the refined point). The result carries the
/// safety factor 1 + 1e-9.
template <class F>
[[nodiscard]] SupEstimate estimate_sup_of(F&& f, const Interval& iv, std::size_t grid_n = 2048) {
  validate(iv);
  if (grid_n < 100) throw Error(ErrorKind::invalid_argument, "sup estimation needs grid_n >= 100");
  auto absf = [&](double x) { return std::abs(f(x)); };
  std::size_t best = 0;
  double best_v = -1.0;
  for (std::size_t i = 0; i < grid_n; ++i) {
    const double v = absf(detail::grid_point(iv, i, grid_n));
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  double x_star = detail::grid_point(iv, best, grid_n);
  const double h = iv.length() / static_cast<double>(grid_n - 1);
  {
    const double lo = detail::grid_point(iv, best == 0 ? 0 : best - 1, grid_n);
    const double hi = detail::grid_point(iv, std::min(best + 1, grid_n - 1), grid_n);
    const auto [x1, v1] = detail::golden_max(absf, lo, hi);
    if (v1 > best_v) {
      best_v = v1;
      x_star = x1;
    }
  }
  {
    const double lo = std::max(iv.a, x_star - 0.25 * h);
    const double hi = std::min(iv.b, x_star + 0.25 * h);
    const auto [x2, v2] = detail::golden_max(absf, lo, hi);
    if (v2 > best_v) {
      best_v = v2;
      x_star = x2;
    }
  }
  return SupEstimate{best_v * kSupSafetyFactor, grid_n, 2, x_star};
}

/// M = max over [a, b] of |f| for a coefficient f(x).
[[nodiscard]] inline SupEstimate estimate_sup(const expr::Expression& f, const Interval& iv,
                                              std::size_t grid_n = 2048) {
  ode::require_function_of_x(f, "f");
  return estimate_sup_of([&](double x) { return f({x}); }, iv, grid_n);
}

/// sup |f(x, z)| over [a, b] x [z_lo, z_hi]: grid scan then two passes of
/// coordinate-wise golden-section refinement.
template <class F>
[[nodiscard]] double estimate_sup_2d(F&& f, const Interval& xr, const Interval& zr,
                                     std::size_t grid_n) {
  if (grid_n < 16) throw Error(ErrorKind::invalid_argument, "2-D sup estimation needs grid_n >= 16");
  double best_v = -1.0;
  std::size_t bi = 0, bj = 0;
  for (std::size_t i = 0; i < grid_n; ++i) {
    const double x = detail::grid_point(xr, i, grid_n);
    for (std::size_t j = 0; j < grid_n; ++j) {
      const double v = std::abs(f(x, detail::grid_point(zr, j, grid_n)));
      if (v > best_v) {
        best_v = v;
        bi = i;
        bj = j;
      }
    }
  }
  double xs = detail::grid_point(xr, bi, grid_n);
  double zs = detail::grid_point(zr, bj, grid_n);
  double hx = xr.length() / static_cast<double>(grid_n - 1);
  double hz = zr.length() / static_cast<double>(grid_n - 1);
  for (int pass = 0; pass < 2; ++pass) {
    {
      const double lo = std::max(xr.a, xs - hx), hi = std::min(xr.b, xs + hx);
      const auto [x1, v1] = detail::golden_max([&](double x) { return std::abs(f(x, zs)); }, lo, hi);
      if (v1 > best_v) {
        best_v = v1;
        xs = x1;
      }
    }
    {
      const double lo = std::max(zr.a, zs - hz), hi = std::min(zr.b, zs + hz);
      const auto [z1, v1] = detail::golden_max([&](double z) { return std::abs(f(xs, z)); }, lo, hi);
      if (v1 > best_v) {
        best_v = v1;
        zs = z1;
      }
    }
    hx *= 0.25;
    hz *= 0.25;
  }
  return best_v * kSupSafetyFactor;
}

namespace detail {

inline void check_z_range(const ZRange& zr) {
  if (!std::isfinite(zr.lo) || !std::isfinite(zr.hi)) {
    throw Error(ErrorKind::invalid_argument, "z_range endpoints must be finite");
  }
  if (!(zr.lo < zr.hi)) throw Error(ErrorKind::invalid_argument, "z_range empty (need z_lo < z_hi)");
}

inline LipschitzEstimate finish_lipschitz(double raw, const ZRange& zr) {
  LipschitzEstimate est;
  est.raw_value = raw;
  est.z_range = zr;
  est.method = LipschitzMethod::symbolic_derivative_sup;
  est.clamped = !(raw > 0.0);
  est.value = est.clamped ? kLipschitzClamp : raw;
  return est;
}

/// sup over the (x, z) box of |d/dz [coef(x) * z^power]|, derivative taken
/// symbolically.
inline LipschitzEstimate lipschitz_of_power_term(const expr::Expression& coef, double power,
                                                 const Interval& iv, const ZRange& zr,
                                                 std::size_t grid_n) {
  validate(iv);
  check_z_range(zr);
  const std::vector<std::string> xz = {"x", "z"};
  const expr::Expression cz = coef.rebind(xz);
  const expr::Expression zpow(
      expr::make_binary(expr::BinaryOp::pow, expr::make_variable(1), expr::make_constant(power)), xz);
  const expr::Expression dfdz = expr::differentiate(expr::multiply(cz, zpow), "z");
  const double raw =
      estimate_sup_2d([&](double x, double z) { return dfdz({x, z}); }, iv, Interval{zr.lo, zr.hi},
                      grid_n);
  return finish_lipschitz(raw, zr);
}

}  // namespace detail

/// L with |q(x) y^n - q(x) z^n| <= L |y - z| for y, z in z_range.
[[nodiscard]] inline LipschitzEstimate estimate_lipschitz_bernoulli(const expr::Expression& q, double n,
                                                                    const Interval& iv,
                                                                    const ZRange& zr,
                                                                    std::size_t grid_n = 257) {
  detail::check_z_range(zr);
  if (!ode::integer_exponent(n) && !(zr.lo > 0.0)) {
    throw Error(ErrorKind::invalid_argument, "z_range must be positive for non-integer n");
  }
  return detail::lipschitz_of_power_term(q, n, iv, zr, grid_n);
}

/// L with |p(x) y^2 - p(x) z^2| <= L |y - z| for y, z in z_range.
[[nodiscard]] inline LipschitzEstimate estimate_lipschitz_riccati(const expr::Expression& p,
                                                                  const Interval& iv,
                                                                  const ZRange& zr,
                                                                  std::size_t grid_n = 257) {
  return detail::lipschitz_of_power_term(p, 2.0, iv, zr, grid_n);
}

[[nodiscard]] inline LipschitzEstimate user_lipschitz(double value, const ZRange& zr) {
  detail::check_z_range(zr);
  if (!(value >= 0.0) || !std::isfinite(value)) {
    throw Error(ErrorKind::invalid_argument, "Lipschitz constant must be finite and non-negative");
  }
  LipschitzEstimate est = detail::finish_lipschitz(value, zr);
  est.method = LipschitzMethod::user_supplied;
  return est;
}

/// c = (b - a) exp((M + L)(b - a)).
[[nodiscard]] inline double hu_constant(double m, double l, const Interval& iv) {
  validate(iv);
  if (!(m >= 0.0) || !(l >= 0.0)) {
    throw Error(ErrorKind::invalid_argument, "hu_constant needs M >= 0 and L >= 0");
  }
  const double len = iv.length();
  const double c = len * std::exp((m + l) * len);
  if (!std::isfinite(c)) {
    throw Error(ErrorKind::overflow, "stability constant overflows; certificate unusable");
  }
  return c;
}

// ---------------------------------------------------------------------------
// Certification

enum class Verdict { holds, violated, range_exited, unusable };

[[nodiscard]] constexpr std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::holds: return "holds";
    case Verdict::violated: return "violated";
    case Verdict::range_exited: return "range_exited";
    case Verdict::unusable: return "unusable";
  }
  return "?";
}

struct OdeCertifyOptions {
  ZRange z_range;
  std::size_t sup_grid = 2048;
  std::size_t lipschitz_grid = 257;
  std::optional<double> user_lipschitz;
  perturb::EnsembleOptions ensemble;
};

struct HUCertificate {
  std::string problem_kind;
  SupEstimate M;
  LipschitzEstimate L;
  Interval interval;
  double c = 0.0;
  double epsilon = 0.0;
  std::size_t ensemble_size = 0;
  std::size_t n_steps = 0;
  std::vector<double> measured_sups;
  double max_ratio = 0.0;
  Verdict verdict = Verdict::unusable;
  /// Nodes outside z_range at which the Lipschitz inequality was checked
  /// directly on the (perturbed, exact) pair and held.
  std::size_t range_excursions = 0;
  /// max over members and nodes of residual(x) - sup|g| (x - a).
  double max_residual_excess = -std::numeric_limits<double>::infinity();
  std::vector<std::string> notes;

  [[nodiscard]] double bound() const noexcept { return c * epsilon; }
};

namespace detail {

/// The nonlinear term the Lipschitz hypothesis constrains.
inline double nonlinear_term(const ode::OdeProblem& prob, double x, double z) {
  if (const auto* b = std::get_if<ode::BernoulliProblem>(&prob)) {
    return b->q({x}) * ode::bernoulli_power(z, b->n);
  }
  const auto& r = std::get<ode::RiccatiProblem>(prob);
  return r.p({x}) * z * z;
}

struct MemberOutcome {
  double sup = 0.0;
  double residual_excess = -std::numeric_limits<double>::infinity();
  std::size_t excursions = 0;
  bool range_exited = false;
  std::string note;
};

/// Walks the pair node by node; outside z_range the Lipschitz inequality is
/// checked directly for this pair.
inline bool pair_within_hypothesis(const ode::OdeProblem& prob, const ode::Trajectory& y,
                                   const ode::Trajectory& z, const LipschitzEstimate& L,
                                   std::size_t& excursions, std::string& note) {
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double yi = y.values[i];
    const double zi = z.values[i];
    if (L.z_range.contains(yi) && L.z_range.contains(zi)) continue;
    ++excursions;
    const double gap = std::abs(yi - zi);
    if (gap == 0.0) continue;
    double lhs = 0.0;
    try {
      lhs = std::abs(nonlinear_term(prob, y.x[i], yi) - nonlinear_term(prob, y.x[i], zi));
    } catch (const Error& e) {
      note = std::string("nonlinear term undefined outside z_range: ") + e.what();
      return false;
    }
    if (lhs > L.value * gap * (1.0 + kBoundSlack)) {
      note = "trajectory left z_range at x = " + std::to_string(y.x[i]) + " (value " +
             std::to_string(yi) + ") where the Lipschitz bound fails";
      return false;
    }
  }
  return true;
}

}  // namespace detail

/// Solves the exact problem once and each ensemble member once, records
/// sup |y - z| per member and compares it against c * eps.
[[nodiscard]] inline HUCertificate certify_ode(const ode::OdeProblem& prob,
                                               const OdeCertifyOptions& opts,
                                               const perturb::PerturbationSpec& spec,
                                               std::size_t count, const ode::SolverConfig& cfg) {
  std::visit([](const auto& p) { ode::validate(p); }, prob);
  ode::validate(cfg);
  HUCertificate cert;
  cert.interval = ode::interval_of(prob);
  cert.epsilon = spec.epsilon;
  cert.ensemble_size = count;
  cert.n_steps = cfg.n_steps;

  if (const auto* b = std::get_if<ode::BernoulliProblem>(&prob)) {
    cert.problem_kind = "bernoulli";
    cert.M = estimate_sup(b->p, cert.interval, opts.sup_grid);
    cert.L = opts.user_lipschitz
                 ? user_lipschitz(*opts.user_lipschitz, opts.z_range)
                 : estimate_lipschitz_bernoulli(b->q, b->n, cert.interval, opts.z_range,
                                                opts.lipschitz_grid);
  } else {
    const auto& r = std::get<ode::RiccatiProblem>(prob);
    cert.problem_kind = "riccati";
    cert.M = estimate_sup(r.q, cert.interval, opts.sup_grid);
    cert.L = opts.user_lipschitz
                 ? user_lipschitz(*opts.user_lipschitz, opts.z_range)
                 : estimate_lipschitz_riccati(r.p, cert.interval, opts.z_range, opts.lipschitz_grid);
  }
  if (cert.L.clamped) {
    cert.notes.push_back("Lipschitz estimate was 0; clamped to 1e-300 (hypothesis needs L > 0)");
  }
  cert.notes.push_back("Lipschitz constant verified on z_range [" + std::to_string(opts.z_range.lo) +
                       ", " + std::to_string(opts.z_range.hi) +
                       "] only, not over all C1 functions");
  try {
    cert.c = hu_constant(cert.M.value, cert.L.value, cert.interval);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::overflow) throw;
    cert.c = std::numeric_limits<double>::infinity();
    cert.verdict = Verdict::unusable;
    cert.notes.push_back(e.what());
    return cert;
  }

  perturb::PerturbationSpec member_spec = spec;
  member_spec.dims = 1;
  member_spec.domain_x = cert.interval;
  const auto members = perturb::ensemble(member_spec, count, opts.ensemble);

  ode::Trajectory exact;
  try {
    exact = ode::solve_exact(prob, cfg);
  } catch (const Error& e) {
    cert.verdict = Verdict::range_exited;
    cert.notes.push_back(std::string("exact solution failed: ") + e.what());
    return cert;
  }
  for (std::size_t i = 0; i < exact.size(); ++i) {
    if (!opts.z_range.contains(exact.values[i])) {
      cert.verdict = Verdict::range_exited;
      cert.notes.push_back("exact solution leaves z_range at x = " + std::to_string(exact.x[i]));
      return cert;
    }
  }

  std::vector<detail::MemberOutcome> outcomes(members.size());
  parallel_for(members.size(), [&](std::size_t k) {
    auto& out = outcomes[k];
    ode::Trajectory y;
    try {
      y = ode::solve_perturbed(prob, members[k], cfg);
    } catch (const Error& e) {
      out.range_exited = true;
      out.note = "member " + std::to_string(k) + ": " + e.what();
      return;
    }
    out.sup = ode::sup_distance(y, exact);
    if (!detail::pair_within_hypothesis(prob, y, exact, cert.L, out.excursions, out.note)) {
      out.range_exited = true;
      out.note = "member " + std::to_string(k) + ": " + out.note;
    }
    const auto res = ode::integral_residual(y, prob);
    const double gsup = members[k].certified_sup();
    for (std::size_t i = 0; i < res.size(); ++i) {
      out.residual_excess =
          std::max(out.residual_excess, res[i] - gsup * (y.x[i] - cert.interval.a));
    }
  });

  const double bound = cert.bound();
  bool exited = false;
  bool violated = false;
  for (const auto& out : outcomes) {
    cert.measured_sups.push_back(out.sup);
    cert.range_excursions += out.excursions;
    cert.max_residual_excess = std::max(cert.max_residual_excess, out.residual_excess);
    if (out.range_exited) {
      exited = true;
      cert.notes.push_back(out.note);
    } else if (out.sup > bound * (1.0 + kBoundSlack)) {
      violated = true;
    }
    cert.max_ratio = std::max(cert.max_ratio, out.sup / bound);
  }
  if (cert.range_excursions > 0 && !exited) {
    cert.notes.push_back(std::to_string(cert.range_excursions) +
                         " node(s) outside z_range; Lipschitz inequality checked on the pair there");
  }
  cert.verdict = exited ? Verdict::range_exited : (violated ? Verdict::violated : Verdict::holds);
  return cert;
}

[[nodiscard]] inline nlohmann::json to_json(const HUCertificate& c) {
  return nlohmann::json{
      {"schema", "ulamcert/1"},
      {"kind", c.problem_kind},
      {"interval", {c.interval.a, c.interval.b}},
      {"M",
       {{"value", c.M.value},
        {"grid_points", c.M.grid_points},
        {"refinement_passes", c.M.refinement_passes}}},
      {"L",
       {{"value", c.L.value},
        {"raw_value", c.L.raw_value},
        {"method", std::string(to_string(c.L.method))},
        {"z_range", {c.L.z_range.lo, c.L.z_range.hi}},
        {"clamped", c.L.clamped}}},
      {"c", c.c},
      {"epsilon", c.epsilon},
      {"bound", c.bound()},
      {"ensemble_size", c.ensemble_size},
      {"n_steps", c.n_steps},
      {"measured_sups", c.measured_sups},
      {"max_ratio", c.max_ratio},
      {"range_excursions", c.range_excursions},
      {"max_residual_excess", c.max_residual_excess},
      {"verdict", std::string(to_string(c.verdict))},
      {"notes", c.notes},
  };
}

}  // namespace ulamcert::bounds
