#pragma once

// Smooth perturbation functions g with an analytic sup bound. Every family is
// built as amplitude * epsilon * s(x) [* s(y)] [* phi(x,y)], where the unit
// shape s satisfies |s| <= 1 by construction:
//   sine         s(t) = sin(omega t + phase)
//   constant     s(t) = +1 or -1
//   fourier_mix  s(t) = sum_k c_k sin(k t + phase_k) / sum_k |c_k|
//   bump         s(t) = sign * (tanh((t-c+w/2)/d) - tanh((t-c-w/2)/d)) / (2 tanh(w/(2d)))

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "ulamcert/error.hpp"
#include "ulamcert/expr.hpp"
#include "ulamcert/interval.hpp"

namespace ulamcert::perturb {

enum class Family { sine, constant, fourier_mix, bump };

inline constexpr std::array<Family, 4> kAllFamilies = {Family::sine, Family::constant,
                                                       Family::fourier_mix, Family::bump};

[[nodiscard]] constexpr std::string_view to_string(Family f) noexcept {
  switch (f) {
    case Family::sine: return "sine";
    case Family::constant: return "constant";
    case Family::fourier_mix: return "fourier_mix";
    case Family::bump: return "bump";
  }
  return "?";
}

[[nodiscard]] inline Family parse_family(std::string_view name) {
  for (Family f : kAllFamilies) {
    if (to_string(f) == name) return f;
  }
  throw Error(ErrorKind::invalid_argument,
              "unknown perturbation family '" + std::string(name) +
                  "' (expected sine, constant, fourier_mix or bump)");
}

/// Explicit family parameters. Unset optionals are drawn from the seed.
struct FamilyParams {
  std::optional<double> omega;
  std::optional<double> phase;
  std::optional<double> sign;
  std::size_t terms = 5;
  std::vector<double> coefficients;
  std::vector<double> phases;
  std::optional<double> center;
  std::optional<double> width;
  std::optional<double> steepness;
  /// Fraction of epsilon actually used, in [0, 1].
  double amplitude = 1.0;
};

struct PerturbationSpec {
  Family family = Family::sine;
  double epsilon = 0.01;
  FamilyParams params;
  std::uint64_t seed = 0;
  int dims = 1;
  /// Weight phi(x, y) for the weighted (Rassias) mode; requires dims == 2.
  std::optional<expr::Expression> weight;
  Interval domain_x{0.0, 1.0};
  Interval domain_y{0.0, 1.0};
};

/// One resolved unit-sup factor.
struct Shape {
  Family family = Family::sine;
  double omega = 1.0;
  double phase = 0.0;
  double sign = 1.0;
  std::vector<double> coefficients;
  std::vector<double> phases;
  double l1_norm = 1.0;
  double center = 0.0;
  double width = 1.0;
  double steepness = 0.1;

  [[nodiscard]] double operator()(double t) const {
    double s = 0.0;
    switch (family) {
      case Family::sine: s = std::sin(omega * t + phase); break;
      case Family::constant: s = sign; break;
      case Family::fourier_mix: {
        for (std::size_t k = 0; k < coefficients.size(); ++k) {
          s += coefficients[k] * std::sin(static_cast<double>(k + 1) * t + phases[k]);
        }
        s /= l1_norm;
        break;
      }
      case Family::bump: {
        const double half = 0.5 * width;
        const double num = std::tanh((t - center + half) / steepness) -
                           std::tanh((t - center - half) / steepness);
        s = sign * num / (2.0 * std::tanh(half / steepness));
        break;
      }
    }
    // The exact shape lies in [-1, 1]; the clamp only absorbs rounding.
    return std::clamp(s, -1.0, 1.0);
  }

  /// Analytic bound on |s''|.
  [[nodiscard]] double second_derivative_bound() const {
    switch (family) {
      case Family::sine: return omega * omega;
      case Family::constant: return 0.0;
      case Family::fourier_mix: {
        double acc = 0.0;
        for (std::size_t k = 0; k < coefficients.size(); ++k) {
          const double kk = static_cast<double>(k + 1);
          acc += std::abs(coefficients[k]) * kk * kk;
        }
        return acc / l1_norm;
      }
      case Family::bump: {
        // max |tanh''| = 4 / (3 sqrt 3)
        const double tanh2 = 4.0 / (3.0 * std::sqrt(3.0));
        return 2.0 * tanh2 / (steepness * steepness * 2.0 * std::tanh(0.5 * width / steepness));
      }
    }
    return 0.0;
  }

  [[nodiscard]] nlohmann::json params_json() const {
    nlohmann::json j = nlohmann::json::object();
    switch (family) {
      case Family::sine:
        j["omega"] = omega;
        j["phase"] = phase;
        break;
      case Family::constant: j["sign"] = sign; break;
      case Family::fourier_mix:
        j["coefficients"] = coefficients;
        j["phases"] = phases;
        break;
      case Family::bump:
        j["sign"] = sign;
        j["center"] = center;
        j["width"] = width;
        j["steepness"] = steepness;
        break;
    }
    return j;
  }

  friend bool operator==(const Shape&, const Shape&) = default;
};

/// g(x, y) = amplitude * epsilon * [phi(x, y)] * sx(x) * [sy(y)].
class Perturbation {
 public:
  Perturbation(Family family, double epsilon, double amplitude, std::uint64_t seed, int dims,
               Shape x_shape, std::optional<Shape> y_shape, std::optional<expr::Expression> weight)
      : family_(family),
        epsilon_(epsilon),
        amplitude_(amplitude),
        seed_(seed),
        dims_(dims),
        x_shape_(std::move(x_shape)),
        y_shape_(std::move(y_shape)),
        weight_(std::move(weight)) {}

  [[nodiscard]] double operator()(double x, double y = 0.0) const {
    double s = x_shape_(x);
    if (y_shape_) s *= (*y_shape_)(y);
    const double scale = amplitude_ * epsilon_;
    if (weight_) return scale * ((*weight_)({x, y}) * s);
    return scale * s;
  }

  /// Analytic bound on |g| in unweighted mode (and on |g| / phi in weighted mode).
  [[nodiscard]] double certified_sup() const noexcept { return amplitude_ * epsilon_; }

  /// Pointwise bound on |g(x, y)|: certified_sup, times phi(x, y) when weighted.
  [[nodiscard]] double bound_at(double x, double y = 0.0) const {
    if (weight_) return certified_sup() * (*weight_)({x, y});
    return certified_sup();
  }

  [[nodiscard]] Family family() const noexcept { return family_; }
  [[nodiscard]] double epsilon() const noexcept { return epsilon_; }
  [[nodiscard]] double amplitude() const noexcept { return amplitude_; }
  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] int dims() const noexcept { return dims_; }
  [[nodiscard]] const Shape& x_shape() const noexcept { return x_shape_; }
  [[nodiscard]] const std::optional<Shape>& y_shape() const noexcept { return y_shape_; }
  [[nodiscard]] const std::optional<expr::Expression>& weight() const noexcept { return weight_; }
  [[nodiscard]] bool weighted() const noexcept { return weight_.has_value(); }

  /// Manifest entry {family, params, seed, epsilon}.
  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json params = nlohmann::json::object();
    params["amplitude"] = amplitude_;
    params["x"] = x_shape_.params_json();
    if (y_shape_) params["y"] = y_shape_->params_json();
    if (weight_) params["weight"] = weight_->str();
    return nlohmann::json{{"family", std::string(to_string(family_))},
                          {"params", std::move(params)},
                          {"seed", seed_},
                          {"epsilon", epsilon_}};
  }

  /// Identical resolved parameters (the weight is compared by its text).
  [[nodiscard]] bool same_parameters(const Perturbation& o) const {
    const bool same_weight = weight_.has_value() == o.weight_.has_value() &&
                             (!weight_ || weight_->str() == o.weight_->str());
    return family_ == o.family_ && epsilon_ == o.epsilon_ && amplitude_ == o.amplitude_ &&
           seed_ == o.seed_ && dims_ == o.dims_ && x_shape_ == o.x_shape_ &&
           y_shape_ == o.y_shape_ && same_weight;
  }

 private:
  Family family_;
  double epsilon_;
  double amplitude_;
  std::uint64_t seed_;
  int dims_;
  Shape x_shape_;
  std::optional<Shape> y_shape_;
  std::optional<expr::Expression> weight_;
};

namespace detail {

/// Platform-independent uniform draws: mt19937_64 output is fixed by the
/// standard, the distribution objects are not.
class Draw {
 public:
  explicit Draw(std::uint64_t seed) : rng_(seed) {}
  double unit() { return static_cast<double>(rng_() >> 11) * 0x1p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
  double sign() { return (rng_() & 1u) ? 1.0 : -1.0; }

 private:
  std::mt19937_64 rng_;
};

inline Shape resolve_shape(Family family, const FamilyParams& p, const Interval& span, Draw& draw) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  Shape s;
  s.family = family;
  switch (family) {
    case Family::sine: {
      const double omega = draw.uniform(0.5, 8.0);
      const double phase = draw.uniform(0.0, two_pi);
      s.omega = p.omega.value_or(omega);
      s.phase = p.phase.value_or(phase);
      if (!std::isfinite(s.omega) || !std::isfinite(s.phase)) {
        throw Error(ErrorKind::invalid_argument, "sine perturbation needs finite omega and phase");
      }
      break;
    }
    case Family::constant: {
      const double sign = draw.sign();
      s.sign = p.sign.value_or(sign);
      if (s.sign != 1.0 && s.sign != -1.0) {
        throw Error(ErrorKind::invalid_argument, "constant perturbation sign must be +1 or -1");
      }
      break;
    }
    case Family::fourier_mix: {
      if (p.terms < 1) {
        throw Error(ErrorKind::invalid_argument, "fourier_mix needs at least one term");
      }
      s.coefficients.resize(p.terms);
      s.phases.resize(p.terms);
      for (std::size_t k = 0; k < p.terms; ++k) {
        s.coefficients[k] = draw.uniform(-1.0, 1.0);
        s.phases[k] = draw.uniform(0.0, two_pi);
      }
      if (!p.coefficients.empty()) {
        if (p.coefficients.size() != p.terms) {
          throw Error(ErrorKind::invalid_argument, "fourier_mix coefficient count must equal terms");
        }
        s.coefficients = p.coefficients;
      }
      if (!p.phases.empty()) {
        if (p.phases.size() != p.terms) {
          throw Error(ErrorKind::invalid_argument, "fourier_mix phase count must equal terms");
        }
        s.phases = p.phases;
      }
      double norm = 0.0;
      for (double c : s.coefficients) norm += std::abs(c);
      if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw Error(ErrorKind::invalid_argument, "fourier_mix coefficients must not all vanish");
      }
      s.l1_norm = norm;
      break;
    }
    case Family::bump: {
      const double len = span.length();
      const double sign = draw.sign();
      const double center = draw.uniform(span.a, span.b);
      const double width = draw.uniform(0.1, 0.5) * len;
      const double steep = draw.uniform(0.02, 0.1) * len;
      s.sign = p.sign.value_or(sign);
      s.center = p.center.value_or(center);
      s.width = p.width.value_or(width);
      s.steepness = p.steepness.value_or(steep);
      if (s.sign != 1.0 && s.sign != -1.0) {
        throw Error(ErrorKind::invalid_argument, "bump sign must be +1 or -1");
      }
      if (!(s.width > 0.0) || !(s.steepness > 0.0) || !std::isfinite(s.center)) {
        throw Error(ErrorKind::invalid_argument, "bump needs positive width and steepness");
      }
      break;
    }
  }
  return s;
}

}  // namespace detail

[[nodiscard]] inline Perturbation make_perturbation(const PerturbationSpec& spec) {
  if (!(spec.epsilon > 0.0) || !std::isfinite(spec.epsilon)) {
    throw Error(ErrorKind::invalid_argument, "perturbation epsilon must be positive and finite");
  }
  if (spec.dims != 1 && spec.dims != 2) {
    throw Error(ErrorKind::invalid_argument, "perturbation dims must be 1 or 2");
  }
  if (!(spec.params.amplitude >= 0.0 && spec.params.amplitude <= 1.0)) {
    throw Error(ErrorKind::invalid_argument, "perturbation amplitude must lie in [0, 1]");
  }
  if (spec.weight && spec.dims != 2) {
    throw Error(ErrorKind::invalid_argument, "weighted perturbations are two-dimensional");
  }
  std::optional<expr::Expression> weight;
  if (spec.weight) weight = spec.weight->rebind({"x", "y"});

  detail::Draw draw(spec.seed);
  Shape xs = detail::resolve_shape(spec.family, spec.params, spec.domain_x, draw);
  std::optional<Shape> ys;
  if (spec.dims == 2) {
    // The y factor draws its own parameters; explicit overrides apply to x only.
    FamilyParams yparams;
    yparams.terms = spec.params.terms;
    ys = detail::resolve_shape(spec.family, yparams, spec.domain_y, draw);
  }
  return Perturbation(spec.family, spec.epsilon, spec.params.amplitude, spec.seed, spec.dims,
                      std::move(xs), std::move(ys), std::move(weight));
}

struct EnsembleOptions {
  /// Rotate through all four families (member i uses family index + i).
  bool mix_families = true;
};

/// Member i is derived from seed ^ i. Member 0 equals make_perturbation(spec);
/// later members keep amplitude and term count but redraw every geometric
/// parameter.
[[nodiscard]] inline std::vector<Perturbation> ensemble(const PerturbationSpec& spec,
                                                        std::size_t count,
                                                        EnsembleOptions options = {}) {
  if (count < 1) throw Error(ErrorKind::invalid_argument, "ensemble count must be at least 1");
  std::size_t base = 0;
  for (std::size_t k = 0; k < kAllFamilies.size(); ++k) {
    if (kAllFamilies[k] == spec.family) base = k;
  }
  std::vector<Perturbation> out;
  out.reserve(count);
  out.push_back(make_perturbation(spec));
  for (std::size_t i = 1; i < count; ++i) {
    PerturbationSpec member = spec;
    member.seed = spec.seed ^ static_cast<std::uint64_t>(i);
    if (options.mix_families) member.family = kAllFamilies[(base + i) % kAllFamilies.size()];
    member.params = FamilyParams{};
    member.params.amplitude = spec.params.amplitude;
    member.params.terms = spec.params.terms;
    out.push_back(make_perturbation(member));
  }
  return out;
}

[[nodiscard]] inline nlohmann::json manifest_json(const std::vector<Perturbation>& members) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : members) arr.push_back(m.to_json());
  return arr;
}

}  // namespace ulamcert::perturb
