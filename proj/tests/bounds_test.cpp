#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "ulamcert/bounds.hpp"
#include "ulamcert/gronwall.hpp"

using namespace ulamcert;
using expr::parse;

namespace {

expr::Expression fx(const char* t) { return parse(t, {"x"}); }

ode::BernoulliProblem bernoulli_example() {
  return ode::BernoulliProblem{fx("x"), fx("x / (1 + x^2)"), 0.5, Interval{0.0, 1.0}, 1.0, 1e-6};
}

}  // namespace

TEST(Sup, Examples) {
  EXPECT_NEAR(bounds::estimate_sup(fx("x"), {0.0, 1.0}).value, 1.0, 2e-9);
  EXPECT_EQ(bounds::estimate_sup(fx("0"), {0.0, 1.0}).value, 0.0);
  EXPECT_NEAR(bounds::estimate_sup(fx("x / (1 + x^2)"), {0.0, 1.0}).value, 0.5, 2e-9);
  EXPECT_NEAR(bounds::estimate_sup(fx("x / (1 + x^2)"), {0.0, 3.0}).value, 0.5, 2e-9);
  EXPECT_THROW((void)bounds::estimate_sup(fx("x"), {0.0, 1.0}, 50), Error);
  EXPECT_THROW((void)bounds::estimate_sup(fx("log(x)"), {0.0, 1.0}), Error);
}

TEST(Sup, InteriorPeakRefined) {
  // Peak at x = 1/3 between grid nodes.
  const auto s = bounds::estimate_sup(fx("exp(-1000 * (x - 0.333333333)^2)"), {0.0, 1.0}, 128);
  EXPECT_GE(s.value, 1.0);
  EXPECT_NEAR(s.argmax, 0.333333333, 1e-6);
}

TEST(Sup, SoundnessProperty) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const char* fs[] = {"sin(7 * x) * exp(x)", "x^3 - x", "cos(20 * x) / (1 + x)", "tanh(5 * (x - 0.4))",
                      "abs(sin(13 * x))"};
  for (const char* t : fs) {
    const auto f = fx(t);
    const double m = bounds::estimate_sup(f, {0.0, 1.0}).value;
    for (int i = 0; i < 1000; ++i) ASSERT_LE(std::abs(f({u(rng)})), m) << t;
  }
}

TEST(Lipschitz, BernoulliExample) {
  const auto l = bounds::estimate_lipschitz_bernoulli(fx("x / (1 + x^2)"), 0.5, {0.0, 1.0}, {1.0, 1e6});
  EXPECT_NEAR(l.value, 0.25, 1e-8);
  EXPECT_EQ(l.method, bounds::LipschitzMethod::symbolic_derivative_sup);
  EXPECT_EQ(l.z_range.hi, 1e6);
  EXPECT_THROW((void)bounds::estimate_lipschitz_bernoulli(fx("1"), 0.5, {0.0, 1.0}, {-1.0, 1.0}), Error);
  EXPECT_THROW((void)bounds::estimate_lipschitz_bernoulli(fx("1"), 2.0, {0.0, 1.0}, {1.0, 1.0}), Error);
}

TEST(Lipschitz, ZeroCoefficientClamped) {
  const auto l = bounds::estimate_lipschitz_bernoulli(fx("0"), 2.0, {0.0, 1.0}, {-2.0, 2.0});
  EXPECT_TRUE(l.clamped);
  EXPECT_GT(l.value, 0.0);
  EXPECT_EQ(l.raw_value, 0.0);
  EXPECT_TRUE(bounds::estimate_lipschitz_riccati(fx("0"), {0.0, 1.0}, {-2.0, 2.0}).clamped);
}

TEST(Lipschitz, PolynomialCases) {
  EXPECT_NEAR(bounds::estimate_lipschitz_bernoulli(fx("1"), 2.0, {0.0, 1.0}, {-2.0, 2.0}).value, 4.0, 1e-8);
  EXPECT_NEAR(bounds::estimate_lipschitz_riccati(fx("-1"), {0.0, 1.0}, {-2.0, 2.0}).value, 4.0, 1e-8);
  EXPECT_NEAR(bounds::estimate_lipschitz_riccati(fx("x"), {0.0, 1.0}, {0.0, 1.0}).value, 2.0, 1e-8);
  const auto u = bounds::user_lipschitz(3.0, {0.0, 1.0});
  EXPECT_EQ(u.value, 3.0);
  EXPECT_EQ(u.method, bounds::LipschitzMethod::user_supplied);
}

TEST(HuConstant, Values) {
  EXPECT_NEAR(bounds::hu_constant(1.0, 0.25, {0.0, 1.0}), oracle::kExp125, 1e-14);
  EXPECT_EQ(bounds::hu_constant(0.0, 0.0, {0.0, 1.0}), 1.0);
  EXPECT_NEAR(bounds::hu_constant(0.0, 4.0, {0.0, 1.0}), oracle::kExp4, 1e-12);
  EXPECT_THROW((void)bounds::hu_constant(1e3, 1e3, {0.0, 1.0}), Error);
  EXPECT_THROW((void)bounds::hu_constant(-1.0, 0.0, {0.0, 1.0}), Error);
}

TEST(HuConstant, StrictlyIncreasingLattice) {
  for (double m = 0.0; m <= 3.0; m += 0.5) {
    for (double l = 0.0; l <= 3.0; l += 0.5) {
      for (double len = 0.25; len <= 2.0; len += 0.25) {
        const double c = bounds::hu_constant(m, l, {0.0, len});
        EXPECT_LT(c, bounds::hu_constant(m + 0.5, l, {0.0, len}));
        EXPECT_LT(c, bounds::hu_constant(m, l + 0.5, {0.0, len}));
        EXPECT_LT(c, bounds::hu_constant(m, l, {0.0, len + 0.25}));
      }
    }
  }
}

TEST(Gronwall, Bound) {
  bounds::GronwallForm zero{0.3, 0.0, [](double) { return 0.0; }};
  EXPECT_DOUBLE_EQ(bounds::gronwall_bound(zero, 0.7), 0.3 * 0.7);
  bounds::GronwallForm cst{1.0, 0.0, [](double) { return 1.25; }};
  EXPECT_NEAR(bounds::gronwall_bound(cst, 1.0), bounds::hu_constant(1.0, 0.25, {0.0, 1.0}), 1e-12);
  bounds::GronwallForm lin{1.0, 0.0, [](double t) { return t; }};
  EXPECT_NEAR(bounds::gronwall_bound(lin, 1.0), oracle::kExpHalf, 1e-8);
  EXPECT_THROW((void)bounds::gronwall_bound(lin, -0.5), Error);
}

TEST(Gronwall, FixedPointMatchesClosedForm) {
  for (double beta : {0.0, 0.5, 1.0, 3.0}) {
    bounds::GronwallForm f{0.01, 0.0, [=](double) { return beta; }};
    const auto fp = bounds::gronwall_fixed_point(f, {0.0, 1.0}, 10000);
    EXPECT_TRUE(fp.converged);
    for (std::size_t i = 0; i < fp.x.size(); i += 1000) {
      const double want = oracle::gronwall_constant_beta(0.01, beta, fp.x[i]);
      EXPECT_NEAR(fp.u[i], want, 5e-8 * std::max(want, 1e-3)) << beta;
    }
  }
}

TEST(Gronwall, CheckCases) {
  bounds::GronwallForm zero{0.1, 0.0, [](double) { return 0.0; }};
  const auto c0 = bounds::gronwall_check(zero, {0.0, 1.0});
  EXPECT_DOUBLE_EQ(c0.max_ratio, 1.0);
  EXPECT_TRUE(c0.passes());
  bounds::GronwallForm one{0.1, 0.0, [](double) { return 1.0; }};
  const auto c1 = bounds::gronwall_check(one, {0.0, 1.0});
  EXPECT_LE(c1.max_ratio, 1.0 + 1e-8);
  bounds::GronwallForm lin{0.1, 0.0, [](double t) { return t; }};
  EXPECT_TRUE(bounds::gronwall_check(lin, {0.0, 1.0}).passes());
  bounds::GronwallForm neg{0.1, 0.0, [](double t) { return t - 0.5; }};
  try {
    (void)bounds::gronwall_check(neg, {0.0, 1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::hypothesis_failure);
  }
}

TEST(Gronwall, RandomNonnegativeKernelsProperty) {
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    perturb::PerturbationSpec s;
    s.family = perturb::Family::fourier_mix;
    s.epsilon = 1.0;
    s.seed = seed;
    const auto g = perturb::make_perturbation(s);
    bounds::GronwallForm f{0.01, 0.0, [&](double x) {
                             const double v = 3.0 * g(x);
                             return v * v;
                           }};
    ASSERT_TRUE(bounds::gronwall_check(f, {0.0, 1.0}, 200, 2000).passes()) << seed;
  }
}

TEST(CertifyOde, BernoulliExampleHolds) {
  bounds::OdeCertifyOptions opts;
  opts.z_range = {1.0, 10.0};
  perturb::PerturbationSpec s;
  s.epsilon = 0.01;
  s.seed = 5;
  const auto cert = bounds::certify_ode(bernoulli_example(), opts, s, 40, {10000, 1e12});
  EXPECT_EQ(cert.verdict, bounds::Verdict::holds);
  EXPECT_NEAR(cert.c, oracle::kExp125, 1e-7);
  EXPECT_EQ(cert.c, bounds::hu_constant(cert.M.value, cert.L.value, cert.interval));
  EXPECT_EQ(cert.measured_sups.size(), 40u);
  EXPECT_LE(cert.max_ratio, 1.0);
  EXPECT_LE(cert.max_residual_excess, 1e-6);
  const auto j = bounds::to_json(cert);
  EXPECT_EQ(j["schema"], "ulamcert/1");
  EXPECT_EQ(j["verdict"], "holds");
}

TEST(CertifyOde, ZeroPerturbation) {
  bounds::OdeCertifyOptions opts;
  opts.z_range = {1.0, 10.0};
  perturb::PerturbationSpec s;
  s.family = perturb::Family::constant;
  s.params.amplitude = 0.0;
  const auto cert = bounds::certify_ode(bernoulli_example(), opts, s, 1, {10000, 1e12});
  EXPECT_EQ(cert.verdict, bounds::Verdict::holds);
  EXPECT_LE(cert.measured_sups.at(0), 1e-12);
}

TEST(CertifyOde, RangeExitDetected) {
  // Exact solution tanh(x) leaves [-0.5, 0.5].
  const ode::OdeProblem prob = ode::RiccatiProblem{fx("-1"), fx("0"), fx("1"), {0.0, 1.0}, 0.0};
  bounds::OdeCertifyOptions opts;
  opts.z_range = {-0.5, 0.5};
  const auto cert = bounds::certify_ode(prob, opts, perturb::PerturbationSpec{}, 4, {2000, 1e12});
  EXPECT_EQ(cert.verdict, bounds::Verdict::range_exited);
  EXPECT_FALSE(cert.notes.empty());
}

TEST(CertifyOde, BlowupIsRangeExit) {
  const ode::OdeProblem prob = ode::RiccatiProblem{fx("1"), fx("0"), fx("0"), {0.0, 2.0}, 1.0};
  bounds::OdeCertifyOptions opts;
  opts.z_range = {0.0, 2.0};
  const auto cert = bounds::certify_ode(prob, opts, perturb::PerturbationSpec{}, 2, {2000, 1e12});
  EXPECT_EQ(cert.verdict, bounds::Verdict::range_exited);
}

TEST(CertifyOde, OverflowingConstantIsUnusable) {
  const ode::OdeProblem prob = ode::RiccatiProblem{fx("1"), fx("0"), fx("0"), {0.0, 2.0}, 1.0};
  bounds::OdeCertifyOptions opts;
  opts.z_range = {0.0, 1e13};
  const auto cert = bounds::certify_ode(prob, opts, perturb::PerturbationSpec{}, 2, {2000, 1e12});
  EXPECT_EQ(cert.verdict, bounds::Verdict::unusable);
  EXPECT_TRUE(cert.measured_sups.empty());
}
