#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "ulamcert/expr.hpp"

using namespace ulamcert;
using expr::parse;

namespace {

ErrorKind kind_of(const std::string& text, const std::vector<std::string>& vars) {
  try {
    (void)parse(text, vars);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error for '" << text << "'";
  return ErrorKind::io;
}

}  // namespace

TEST(Parse, BernoulliExampleShape) {
  const auto e = parse("x*z + (x/(1+x^2))*sqrt(z)", {"x", "z"});
  EXPECT_DOUBLE_EQ(e({1.0, 4.0}), 4.0 + 0.5 * 2.0);
  EXPECT_TRUE(e.uses("x"));
  EXPECT_TRUE(e.uses("z"));
}

TEST(Parse, ConstantZero) {
  const auto e = parse("0", {});
  EXPECT_TRUE(e.is_constant());
  EXPECT_EQ(e({}), 0.0);
}

TEST(Parse, SyntaxErrorAtOffset) {
  try {
    (void)parse("x +* z", {"x", "z"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::syntax);
    ASSERT_TRUE(e.position().has_value());
    EXPECT_EQ(*e.position(), 3u);
  }
}

TEST(Parse, Errors) {
  EXPECT_EQ(kind_of("w + 1", {"x"}), ErrorKind::unknown_identifier);
  EXPECT_EQ(kind_of("y", {"x"}), ErrorKind::unknown_identifier);
  EXPECT_EQ(kind_of("sin(x, x)", {"x"}), ErrorKind::arity_mismatch);
  EXPECT_EQ(kind_of("pow(x)", {"x"}), ErrorKind::arity_mismatch);
  EXPECT_EQ(kind_of("sin + 1", {"x"}), ErrorKind::arity_mismatch);
  EXPECT_EQ(kind_of("(x", {"x"}), ErrorKind::syntax);
  EXPECT_EQ(kind_of("", {"x"}), ErrorKind::syntax);
  EXPECT_EQ(kind_of("1.2.3", {"x"}), ErrorKind::syntax);
  EXPECT_THROW((void)parse("x", {"t"}), Error);
  EXPECT_THROW((void)parse("x", {"x", "x"}), Error);
}

TEST(Parse, Precedence) {
  const auto v = [](const char* t) { return parse(t, {"x"})({3.0}); };
  EXPECT_DOUBLE_EQ(v("2^3^2"), 512.0);
  EXPECT_DOUBLE_EQ(v("-x^2"), -9.0);
  EXPECT_DOUBLE_EQ(v("2^-1"), 0.5);
  EXPECT_DOUBLE_EQ(v("8 - 3 - 2"), 3.0);
  EXPECT_DOUBLE_EQ(v("8 / 4 / 2"), 1.0);
  EXPECT_DOUBLE_EQ(v("1 + 2 * x"), 7.0);
  EXPECT_DOUBLE_EQ(v("-x * -x"), 9.0);
  EXPECT_DOUBLE_EQ(v("pow(x, 2)"), 9.0);
  EXPECT_DOUBLE_EQ(v("2e1 + .5"), 20.5);
}

TEST(Eval, Examples) {
  EXPECT_DOUBLE_EQ(parse("x/(1+x^2)", {"x"})({1.0}), 0.5);
  EXPECT_EQ(parse("sin(y - x)", {"x", "y"})({0.7, 0.7}), 0.0);
  expr::EvalPoint pt{{"x", 2.0}, {"y", 5.0}};
  EXPECT_DOUBLE_EQ(expr::eval(parse("y - x", {"x", "y"}), pt), 3.0);
  EXPECT_THROW((void)expr::eval(parse("y - x", {"x", "y"}), {{"x", 1.0}}), Error);
}

TEST(Eval, DomainErrorsNameTheNode) {
  auto domain_message = [](const char* t, double x) -> std::string {
    try {
      (void)parse(t, {"x"})({x});
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::domain);
      return e.what();
    }
    ADD_FAILURE() << t;
    return {};
  };
  EXPECT_NE(domain_message("1 + sqrt(x)", -1.0).find("sqrt(x)"), std::string::npos);
  EXPECT_NE(domain_message("log(x)", 0.0).find("log"), std::string::npos);
  EXPECT_NE(domain_message("2 / x", 0.0).find("2/x"), std::string::npos);
  EXPECT_FALSE(domain_message("x^0.5", -4.0).empty());
  EXPECT_FALSE(domain_message("exp(x)", 1000.0).empty());
}

TEST(Eval, RealPowers) {
  EXPECT_DOUBLE_EQ(parse("x^3", {"x"})({-2.0}), -8.0);
  EXPECT_DOUBLE_EQ(parse("x^-2", {"x"})({-2.0}), 0.25);
  EXPECT_NEAR(parse("x^0.5", {"x"})({4.0}), 2.0, 1e-15);
}

TEST(Eval, Pure) {
  const auto e = parse("tanh(x) * exp(-x) + cos(3*x)", {"x"});
  for (double x : {0.1, 0.3, 0.77}) EXPECT_EQ(e({x}), e({x}));
}

namespace {

/// Random well-defined expression over x, y for x > 0, y > 0.
std::string random_expr(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 2 : 12);
  const int k = pick(rng);
  const auto sub = [&] { return random_expr(rng, depth - 1); };
  switch (k) {
    case 0: return "x";
    case 1: return "y";
    case 2: return std::to_string(std::uniform_int_distribution<int>(1, 9)(rng)) + ".25";
    case 3: return "(" + sub() + " + " + sub() + ")";
    case 4: return "(" + sub() + " - " + sub() + ")";
    case 5: return sub() + " * " + sub();
    case 6: return "(" + sub() + ") / (1 + x^2)";
    case 7: return "sin(" + sub() + ")";
    case 8: return "cos(" + sub() + ")";
    case 9: return "-(" + sub() + ")";
    case 10: return "tanh(" + sub() + ")";
    case 11: return "sqrt(1 + (" + sub() + ")^2)";
    default: return "exp(sin(" + sub() + "))";
  }
}

}  // namespace

TEST(Print, RoundTripProperty) {
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> pt(0.1, 2.0);
  for (int trial = 0; trial < 60; ++trial) {
    const auto text = random_expr(rng, 4);
    const auto e1 = parse(text, {"x", "y"});
    const auto e2 = parse(e1.str(), {"x", "y"});
    for (int i = 0; i < 100; ++i) {
      const double x = pt(rng), y = pt(rng);
      const double a = e1({x, y}), b = e2({x, y});
      ASSERT_NEAR(a, b, 1e-12 * std::max(1.0, std::abs(a))) << text << " vs " << e1.str();
    }
  }
}

TEST(Print, Readable) {
  EXPECT_EQ(parse("x * z + (x / (1 + x^2)) * sqrt(z)", {"x", "z"}).str(), "x*z+x/(1+x^2)*sqrt(z)");
  EXPECT_EQ(parse("(x - y) - (x - y)", {"x", "y"}).str(), "x-y-(x-y)");
  EXPECT_EQ(parse("2^(3^x)", {"x"}).str(), "2^3^x");
  EXPECT_EQ(parse("(2^3)^x", {"x"}).str(), "(2^3)^x");
  EXPECT_EQ(parse("-(x^2)", {"x"}).str(), "-x^2");
}

TEST(Differentiate, Rules) {
  const auto d = expr::differentiate(parse("z^2", {"z"}), "z");
  EXPECT_DOUBLE_EQ(d({3.0}), 6.0);
  EXPECT_NEAR(expr::differentiate(parse("sqrt(z)", {"z"}), "z")({4.0}), 0.25, 1e-15);
  EXPECT_TRUE(expr::differentiate(parse("5", {"x"}), "x").is_constant());
  EXPECT_EQ(expr::differentiate(parse("5", {"x"}), "x")({1.0}), 0.0);
  EXPECT_EQ(expr::differentiate(parse("y", {"x", "y"}), "x")({1.0, 2.0}), 0.0);
  const auto dabs = expr::differentiate(parse("abs(x)", {"x"}), "x");
  EXPECT_EQ(dabs({-2.0}), -1.0);
  EXPECT_EQ(dabs({3.0}), 1.0);
  EXPECT_THROW((void)dabs({0.0}), Error);
}

TEST(Differentiate, MatchesCentralDifferences) {
  const std::vector<std::string> cases = {
      "x * z + x / (1 + x^2) * sqrt(z)", "exp(x * z)", "log(1 + z^2) * sin(x)", "cos(z) / (2 + x)",
      "tan(z / 3)", "tanh(x - z)", "abs(z - 5)", "z^x", "pow(z, 1.5)", "x^3 * z^-1",
      "sqrt(z) * log(z)"};
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pt(0.3, 2.5);
  const double h = 1e-5;
  for (const auto& c : cases) {
    const auto e = parse(c, {"x", "z"});
    for (const char* var : {"x", "z"}) {
      const auto d = expr::differentiate(e, var);
      for (int i = 0; i < 20; ++i) {
        const double x = pt(rng), z = pt(rng);
        const bool wrt_x = std::string(var) == "x";
        const double fp = wrt_x ? e({x + h, z}) : e({x, z + h});
        const double fm = wrt_x ? e({x - h, z}) : e({x, z - h});
        const double fd = (fp - fm) / (2.0 * h);
        const double an = d({x, z});
        ASSERT_NEAR(an, fd, 1e-5 * std::max(1.0, std::abs(fd))) << c << " d/d" << var;
      }
    }
  }
}

TEST(Expression, RebindAndCombine) {
  const auto e = parse("x + 1", {"x"});
  const auto r = e.rebind({"x", "y", "u"});
  EXPECT_DOUBLE_EQ(r({2.0, 100.0, -3.0}), 3.0);
  EXPECT_THROW((void)parse("x + y", {"x", "y"}).rebind({"x"}), Error);
  const auto a = parse("x", {"x"}), b = parse("x + 2", {"x"});
  EXPECT_DOUBLE_EQ(expr::multiply(a, b)({3.0}), 15.0);
  EXPECT_DOUBLE_EQ(expr::divide(a, b)({2.0}), 0.5);
  EXPECT_DOUBLE_EQ(expr::add(a, b)({1.0}), 4.0);
  EXPECT_THROW((void)expr::add(a, parse("y", {"y"})), Error);
}

TEST(Expression, ConcurrentEvaluationIsSafe) {
  const auto e = parse("sin(x) * exp(-x^2)", {"x"});
  std::vector<double> out(4000);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 1000; ++i) out[t * 1000 + i] = e({i * 1e-3});
    });
  }
  for (auto& th : threads) th.join();
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(out[i], out[3000 + i]);
}
