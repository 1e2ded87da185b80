#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "quasipot/expr.hpp"
#include "test_util.hpp"

using namespace quasipot;

namespace {

Vec point(std::initializer_list<double> values) {
  Vec x(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) x(i++) = v;
  return x;
}

}  // namespace

TEST_CASE("parse binds parameters and respects the grammar") {
  const Expr e = parse("-gamma*x2 - x1", 2, {{"gamma", 3.0}});
  const EvalResult r = evaluate(e, point({1.0, 2.0}));
  CHECK(r.value == doctest::Approx(-7.0));
  CHECK(r.gradient(0) == doctest::Approx(-1.0));
  CHECK(r.gradient(1) == doctest::Approx(-3.0));

  const Expr cubic = parse("x1^3 - x1", 1);
  CHECK(evaluate_value(cubic, point({2.0})) == doctest::Approx(6.0));
}

TEST_CASE("parse error carries the byte offset") {
  try {
    parse("x1 +", 1);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 4);
  }
  CHECK_THROWS_AS(parse("x1 + bogus", 1), UnknownIdentifier);
  CHECK_THROWS_AS(parse("x3", 2), UnknownIdentifier);
  CHECK_THROWS_AS(parse("", 1), ParseError);
  CHECK_THROWS_AS(parse("sin x1", 1), ParseError);
  CHECK_THROWS_AS(parse("(x1", 1), ParseError);
}

TEST_CASE("precedence and associativity") {
  CHECK(evaluate_value(parse("2+3*4", 1), point({0.0})) == doctest::Approx(14.0));
  CHECK(evaluate_value(parse("2*3^2", 1), point({0.0})) == doctest::Approx(18.0));
  CHECK(evaluate_value(parse("-2^2", 1), point({0.0})) == doctest::Approx(-4.0));
  CHECK(evaluate_value(parse("2^3^2", 1), point({0.0})) == doctest::Approx(512.0));
  CHECK(evaluate_value(parse("8/4/2", 1), point({0.0})) == doctest::Approx(1.0));
  CHECK(evaluate_value(parse("1-2-3", 1), point({0.0})) == doctest::Approx(-4.0));
  CHECK(evaluate_value(parse("2^-1", 1), point({0.0})) == doctest::Approx(0.5));
}

TEST_CASE("evaluate returns exact derivatives on fixed expressions") {
  SUBCASE("bilinear") {
    const EvalResult r = evaluate(parse("x1*x2", 2), point({2.0, 3.0}));
    CHECK(r.value == doctest::Approx(6.0));
    CHECK(r.gradient(0) == doctest::Approx(3.0));
    CHECK(r.gradient(1) == doctest::Approx(2.0));
    CHECK(r.hessian(0, 1) == doctest::Approx(1.0));
    CHECK(r.hessian(0, 0) == doctest::Approx(0.0));
    CHECK(r.hessian == r.hessian.transpose());
  }
  SUBCASE("exponential") {
    const EvalResult r = evaluate(parse("exp(x1)", 1), point({0.0}));
    CHECK(r.value == doctest::Approx(1.0));
    CHECK(r.gradient(0) == doctest::Approx(1.0));
    CHECK(r.hessian(0, 0) == doctest::Approx(1.0));
  }
  SUBCASE("double-well polynomial") {
    const EvalResult r = evaluate(parse("x1^4/4 - x1^2/2", 1), point({1.0}));
    CHECK(r.value == doctest::Approx(-0.25));
    CHECK(r.gradient(0) == doctest::Approx(0.0));
    CHECK(r.hessian(0, 0) == doctest::Approx(2.0));
  }
  SUBCASE("variable exponent") {
    const EvalResult r = evaluate(parse("x1^x2", 2), point({2.0, 3.0}));
    CHECK(r.value == doctest::Approx(8.0));
    CHECK(r.gradient(0) == doctest::Approx(12.0));                 // w u^(w-1)
    CHECK(r.gradient(1) == doctest::Approx(8.0 * std::log(2.0)));  // u^w log u
  }
  SUBCASE("negative base with integer exponent") {
    const EvalResult r = evaluate(parse("x1^3", 1), point({-2.0}));
    CHECK(r.value == doctest::Approx(-8.0));
    CHECK(r.gradient(0) == doctest::Approx(12.0));
    CHECK(r.hessian(0, 0) == doctest::Approx(-12.0));
  }
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(evaluate(parse("log(x1)", 1), point({-1.0})), DomainError);
  CHECK_THROWS_AS(evaluate(parse("sqrt(x1)", 1), point({-1.0})), DomainError);
  CHECK_THROWS_AS(evaluate(parse("1/x1", 1), point({0.0})), DomainError);
  CHECK_THROWS_AS(evaluate(parse("x1^2.5", 1), point({-1.0})), DomainError);
  // |.| and sqrt at the kink are value-ok but derivative-undefined.
  CHECK_THROWS_AS(evaluate(parse("abs(x1)", 1), point({0.0})), DomainError);
  CHECK(evaluate_value(parse("abs(x1)", 1), point({0.0})) == doctest::Approx(0.0));
  CHECK_THROWS_AS(evaluate(parse("sqrt(x1)", 1), point({0.0})), DomainError);
  CHECK(evaluate_value(parse("sqrt(x1)", 1), point({0.0})) == doctest::Approx(0.0));
  // Away from the kink, abs differentiates cleanly.
  const EvalResult r = evaluate(parse("abs(x1)", 1), point({-2.0}));
  CHECK(r.value == doctest::Approx(2.0));
  CHECK(r.gradient(0) == doctest::Approx(-1.0));
}

namespace {

// Random expressions kept within safe domains and moderate magnitudes.
Expr random_expr(std::mt19937_64& rng, int n, int depth) {
  std::uniform_real_distribution<double> coeff(-1.5, 1.5);
  std::uniform_int_distribution<int> var(0, n - 1);
  if (depth == 0) {
    return (rng() % 3 == 0) ? Expr::literal(coeff(rng)) : Expr::variable(var(rng));
  }
  switch (rng() % 8) {
    case 0: return random_expr(rng, n, depth - 1) + random_expr(rng, n, depth - 1);
    case 1: return random_expr(rng, n, depth - 1) - random_expr(rng, n, depth - 1);
    case 2: return random_expr(rng, n, depth - 1) * random_expr(rng, n, depth - 1);
    case 3:
      return random_expr(rng, n, depth - 1) /
             (Expr::literal(2.0) + Expr::variable(var(rng)) * Expr::variable(var(rng)));
    case 4: return Expr::apply(Func::Sin, random_expr(rng, n, depth - 1));
    case 5: return Expr::apply(Func::Tanh, random_expr(rng, n, depth - 1));
    case 6:
      return Expr::apply(Func::Exp, Expr::literal(0.25) * random_expr(rng, n, depth - 1));
    default:
      return pow(random_expr(rng, n, depth - 1), Expr::literal(2.0 + double(rng() % 2)));
  }
}

double fd_gradient(const Expr& e, Vec x, int i, double h) {
  x(i) += h;
  const double fp = evaluate_value(e, x);
  x(i) -= 2.0 * h;
  const double fm = evaluate_value(e, x);
  return (fp - fm) / (2.0 * h);
}

double fd_hessian(const Expr& e, Vec x, int i, int j, double h) {
  if (i == j) {
    const double f0 = evaluate_value(e, x);
    x(i) += h;
    const double fp = evaluate_value(e, x);
    x(i) -= 2.0 * h;
    const double fm = evaluate_value(e, x);
    return (fp - 2.0 * f0 + fm) / (h * h);
  }
  double sum = 0.0;
  for (int si : {1, -1})
    for (int sj : {1, -1}) {
      Vec y = x;
      y(i) += si * h;
      y(j) += sj * h;
      sum += si * sj * evaluate_value(e, y);
    }
  return sum / (4.0 * h * h);
}

}  // namespace

TEST_CASE("derivatives match central finite differences on random expressions") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> coord(-1.2, 1.2);
  int checked = 0;
  while (checked < 100) {
    const int n = 1 + static_cast<int>(rng() % 3);
    const Expr e = random_expr(rng, n, 3);
    Vec x(n);
    for (int i = 0; i < n; ++i) x(i) = coord(rng);
    EvalResult r;
    try {
      r = evaluate(e, x);
    } catch (const DomainError&) {
      continue;
    }
    if (std::abs(r.value) > 10.0 || r.gradient.norm() > 50.0 || r.hessian.norm() > 200.0)
      continue;  // keep finite-difference noise under control
    const double h = 1e-5;
    bool fd_ok = true;
    for (int i = 0; i < n && fd_ok; ++i) {
      const double fd = fd_gradient(e, x, i, h);
      fd_ok = std::abs(fd - r.gradient(i)) <= 1e-5 * std::max(1.0, std::abs(r.gradient(i)));
      CHECK_MESSAGE(fd_ok, "gradient entry ", i, ": fd=", fd, " exact=", r.gradient(i));
    }
    for (int i = 0; i < n && fd_ok; ++i)
      for (int j = i; j < n && fd_ok; ++j) {
        const double fd = fd_hessian(e, x, i, j, h);
        fd_ok = std::abs(fd - r.hessian(i, j)) <= 1e-5 * std::max(1.0, std::abs(r.hessian(i, j)));
        CHECK_MESSAGE(fd_ok, "hessian entry ", i, ",", j, ": fd=", fd, " exact=", r.hessian(i, j));
      }
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("evaluate is deterministic") {
  const Expr e = parse("sin(x1*x2) + exp(x1/4) - tanh(x2)", 2);
  const Vec x = point({0.7, -0.3});
  const EvalResult a = evaluate(e, x);
  const EvalResult b = evaluate(e, x);
  CHECK(a.value == b.value);
  CHECK((a.gradient - b.gradient).norm() == 0.0);
  CHECK((a.hessian - b.hessian).norm() == 0.0);
}

TEST_CASE("to_string round-trips through parse with identical evaluations") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> coord(-1.2, 1.2);
  int checked = 0;
  while (checked < 60) {
    const int n = 1 + static_cast<int>(rng() % 3);
    const Expr e = random_expr(rng, n, 3);
    const std::string text = to_string(e);
    const Expr back = parse(text, n);
    Vec x(n);
    for (int i = 0; i < n; ++i) x(i) = coord(rng);
    double v0, v1;
    try {
      v0 = evaluate_value(e, x);
      v1 = evaluate_value(back, x);
    } catch (const DomainError&) {
      continue;
    }
    CHECK_MESSAGE(v0 == v1, "round trip differs for: ", text);
    ++checked;
  }
}

TEST_CASE("symbolic differentiate agrees with the forward derivatives") {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> coord(-1.1, 1.1);
  int checked = 0;
  while (checked < 40) {
    const int n = 1 + static_cast<int>(rng() % 2);
    const Expr e = random_expr(rng, n, 3);
    Vec x(n);
    for (int i = 0; i < n; ++i) x(i) = coord(rng);
    try {
      const EvalResult r = evaluate(e, x);
      for (int i = 0; i < n; ++i) {
        const double d = evaluate_value(differentiate(e, i), x);
        CHECK(std::abs(d - r.gradient(i)) <= 1e-10 * std::max(1.0, std::abs(d)));
      }
    } catch (const DomainError&) {
      continue;
    }
    ++checked;
  }
}

TEST_CASE("differentiate on fixed forms") {
  const Expr u = parse("x1^4/4 - x1^2/2", 1);
  const Expr du = differentiate(u, 0);
  for (double x : {-1.5, -1.0, 0.0, 0.5, 2.0}) {
    CHECK(evaluate_value(du, point({x})) == doctest::Approx(x * x * x - x));
  }
  const Expr s = parse("sin(x1*x2)", 2);
  const Expr ds = differentiate(s, 0);
  CHECK(evaluate_value(ds, point({0.5, 2.0})) ==
        doctest::Approx(std::cos(1.0) * 2.0));
}
