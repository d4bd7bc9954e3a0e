#include <cmath>
#include <cstdint>
#include <random>

#include "doctest.h"
#include "ocreg/errors.hpp"
#include "ocreg/expr.hpp"

using namespace ocreg;

namespace {

const char* kTorresL = "(u1^2 + u2^2) * (exp(2*(x1 + x2)) + 1)";

Expr::Op root_op(const Expr& e) { return e.nodes().back().op; }
const Expr::Node& child(const Expr& e, int id, bool left) {
  const auto& nd = e.nodes()[id];
  return e.nodes()[left ? nd.lhs : nd.rhs];
}

// Central finite difference on one channel, independent of the dual sweep.
double central_difference(const Expr& e, Point p, int channel, double h) {
  auto slot = [&](Point& q) -> double& {
    if (channel == 0) return q.t;
    if (channel <= e.n()) return q.x[channel - 1];
    return q.u[channel - 1 - e.n()];
  };
  Point lo = p;
  Point hi = p;
  slot(lo) -= h;
  slot(hi) += h;
  return (e.eval(hi) - e.eval(lo)) / (2.0 * h);
}

}  // namespace

TEST_CASE("parse builds the expected trees") {
  SUBCASE("sum of squares") {
    const Expr e = Expr::parse("u1^2 + u2^2", 2, 2);
    CHECK(root_op(e) == Expr::Op::Add);
    const auto& l = child(e, e.root(), true);
    const auto& r = child(e, e.root(), false);
    CHECK(l.op == Expr::Op::Pow);
    CHECK(r.op == Expr::Op::Pow);
    CHECK(e == Expr::parse("(u1^(2)) + (u2 ^ 2)", 2, 2));
  }
  SUBCASE("product with exponential") {
    const Expr e = Expr::parse("u2 * exp(x1 + x2)", 2, 2);
    CHECK(root_op(e) == Expr::Op::Mul);
    CHECK(child(e, e.root(), true).op == Expr::Op::Control);
    CHECK(child(e, e.root(), true).index == 1);
    const auto& ex = child(e, e.root(), false);
    CHECK(ex.op == Expr::Op::Exp);
    CHECK(e.nodes()[ex.lhs].op == Expr::Op::Add);
  }
  SUBCASE("power binds tighter than unary minus and is right-associative") {
    CHECK(Expr::parse("-x1^2", 1, 0) == Expr::parse("-(x1^2)", 1, 0));
    CHECK(Expr::parse("x1^2^3", 1, 0) == Expr::parse("x1^(2^3)", 1, 0));
    CHECK(Expr::parse("2^-x1", 1, 0) == Expr::parse("2^(-x1)", 1, 0));
    CHECK(Expr::parse("1 - 2 - 3", 0, 0).eval({}) == doctest::Approx(-4.0));
    CHECK(Expr::parse("8 / 4 / 2", 0, 0).eval({}) == doctest::Approx(1.0));
    CHECK(Expr::parse("2 + 3 * 4", 0, 0).eval({}) == doctest::Approx(14.0));
  }
  SUBCASE("scientific literals") {
    CHECK(Expr::parse("1.5e-3 * t", 0, 0).eval(Point{2.0, {}, {}}) == doctest::Approx(3e-3));
    CHECK(Expr::parse(".5", 0, 0).eval({}) == 0.5);
  }
}

TEST_CASE("parse errors carry byte offsets") {
  try {
    (void)Expr::parse("x3", 2, 2);
    FAIL("expected out-of-range error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 0);
    CHECK(std::string(e.what()).find("out of range") != std::string::npos);
  }
  try {
    (void)Expr::parse("u1 + foo(x1)", 1, 1);
    FAIL("expected unknown identifier");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 5);
  }
  try {
    (void)Expr::parse("(u1 + 2", 1, 1);
    FAIL("expected missing paren");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 7);
  }
  CHECK_THROWS_AS((void)Expr::parse("", 1, 1), ParseError);
  CHECK_THROWS_AS((void)Expr::parse("   ", 1, 1), ParseError);
  CHECK_THROWS_AS((void)Expr::parse("x0", 1, 1), ParseError);
  CHECK_THROWS_AS((void)Expr::parse("u1 +", 1, 1), ParseError);
  CHECK_THROWS_AS((void)Expr::parse("1e999", 1, 1), ParseError);
  CHECK_THROWS_AS((void)Expr::parse("sqrt u1", 1, 1), ParseError);
  CHECK_THROWS_AS((void)Expr::parse("x", 1, 1), ParseError);
}

TEST_CASE("eval") {
  const Expr L = Expr::parse(kTorresL, 2, 2);
  CHECK(L.eval(Point{0.0, {0.0, 0.0}, {1.0, 0.0}}) == 2.0);
  CHECK(Expr::parse("u1^2", 1, 1).eval(Point{0.0, {0.0}, {3.0}}) == 9.0);
  CHECK_THROWS_AS((void)Expr::parse("sqrt(u1)", 1, 1).eval(Point{0.0, {0.0}, {-1.0}}), DomainError);
  CHECK_THROWS_AS((void)Expr::parse("log(x1)", 1, 1).eval(Point{0.0, {0.0}, {1.0}}), DomainError);
  CHECK_THROWS_AS((void)Expr::parse("1 / (x1 - 1)", 1, 1).eval(Point{0.0, {1.0}, {1.0}}), DomainError);
  CHECK_THROWS_AS((void)Expr::parse("x1^0.5", 1, 1).eval(Point{0.0, {-4.0}, {1.0}}), DomainError);
  CHECK(Expr::parse("x1^3", 1, 1).eval(Point{0.0, {-2.0}, {1.0}}) == -8.0);
  CHECK_THROWS_AS((void)L.eval(Point{0.0, {0.0}, {1.0, 0.0}}), DimensionError);

  try {
    (void)Expr::parse("u1 + sqrt(x1 - 2)", 1, 1).eval(Point{0.5, {1.0}, {0.0}});
    FAIL("expected domain error");
  } catch (const DomainError& e) {
    CHECK(e.subexpr() == "sqrt((x1 - 2))");
    CHECK(e.point().find("x=[1]") != std::string::npos);
  }
}

TEST_CASE("eval is pure") {
  const Expr L = Expr::parse(kTorresL, 2, 2);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  for (int i = 0; i < 50; ++i) {
    const Point p{d(rng), {d(rng), d(rng)}, {d(rng), d(rng)}};
    const double a = L.eval(p);
    const double b = L.eval(p);
    CHECK(std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b));
  }
}

TEST_CASE("grad") {
  const Expr L = Expr::parse(kTorresL, 2, 2);
  const Point p{0.0, {0.0, 0.0}, {1.0, 0.0}};
  const Gradient g = L.grad(p);
  // Frozen from the central-difference oracle (h = 1e-6): 2.0000000000575113.
  CHECK(central_difference(L, p, Channel::state(0), 1e-6) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(g.d_dx[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(g.d_dx[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(g.d_dt == 0.0);
  CHECK(g.d_du[0] == doctest::Approx(4.0));

  const Gradient q = Expr::parse("u1^2 + u2^2", 2, 2).grad(Point{0.0, {0.0, 0.0}, {1.0, 0.0}});
  CHECK(q.d_du[0] == 2.0);
  CHECK(q.d_du[1] == 0.0);

  const Expr norm = Expr::parse("sqrt(u1^2+u2^2)", 2, 2);
  CHECK_THROWS_AS((void)norm.grad(Point{0.0, {0.0, 0.0}, {0.0, 0.0}}), NonDifferentiableError);
  CHECK_THROWS_AS((void)Expr::parse("abs(u1)", 1, 1).grad(Point{0.0, {0.0}, {0.0}}), NonDifferentiableError);
  // The kink does not involve x, so x-partials stay available at u = 0.
  std::vector<double> dx;
  const double v = norm.partials(Point{0.0, {1.0, 2.0}, {0.0, 0.0}}, {Channel::state(0), Channel::state(1)}, dx);
  CHECK(v == 0.0);
  CHECK(dx == std::vector<double>{0.0, 0.0});
}

TEST_CASE("grad matches central differences at seeded random points") {
  struct Case {
    const char* text;
    int n;
    int r;
  };
  const Case cases[] = {
      {kTorresL, 2, 2},
      {"sqrt(u1^2 + u2^2)", 2, 2},
      {"u2 * exp(x1 + x2)", 2, 2},
      {"u1^2 + x1^2", 1, 1},
      {"sin(t * x1) / (2 + cos(u1)) - log(1 + x1^2) * abs(u1) + x1^u1", 1, 1},
  };
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> d(-1.5, 1.5);
  for (const Case& c : cases) {
    const Expr e = Expr::parse(c.text, c.n, c.r);
    int checked = 0;
    while (checked < 100) {
      Point p{d(rng), {}, {}};
      for (int i = 0; i < c.n; ++i) p.x.push_back(c.n == 1 ? std::abs(d(rng)) + 0.1 : d(rng));
      for (int j = 0; j < c.r; ++j) p.u.push_back(d(rng));
      // Guard bands: stay away from kinks of sqrt/abs.
      bool near_kink = false;
      for (double u : p.u) near_kink = near_kink || std::abs(u) < 1e-3;
      if (near_kink) continue;
      const Gradient g = e.grad(p);
      for (int ch = 0; ch < 1 + c.n + c.r; ++ch) {
        const double ad = ch == 0 ? g.d_dt : (ch <= c.n ? g.d_dx[ch - 1] : g.d_du[ch - 1 - c.n]);
        const double fd = central_difference(e, p, ch, 1e-6);
        const double err = std::abs(ad - fd);
        if (std::abs(ad) < 1.0) {
          CHECK(err <= 1e-8 + 1e-5 * std::abs(ad));
        } else {
          CHECK(err / std::abs(ad) <= 1e-5);
        }
      }
      ++checked;
    }
  }
}

TEST_CASE("serialize then parse is the identity on trees") {
  const char* texts[] = {
      kTorresL,
      "sqrt(u1^2 + u2^2)",
      "-x1^2 - -u1 * 3.25e-7 / (t + 0.1)",
      "2^-x1^2",
      "abs(sin(t)) + cos(x2) - log(exp(u2))",
      "0.1 + 1e10 * x1",
  };
  for (const char* text : texts) {
    const Expr e = Expr::parse(text, 2, 2);
    const Expr back = Expr::parse(e.to_string(), 2, 2);
    CHECK(e == back);
    CHECK(back.to_string() == e.to_string());
  }
}

TEST_CASE("structural queries") {
  const Expr e = Expr::parse("u2 * exp(x1 + x2)", 2, 2);
  CHECK(e.depends_on(Channel::state(0)));
  CHECK(e.depends_on(Channel::control(2, 1)));
  CHECK_FALSE(e.depends_on(Channel::control(2, 0)));
  CHECK_FALSE(e.depends_on(Channel::time()));
  CHECK(Expr::parse("u1", 1, 1).is_control_variable(0));
  CHECK_FALSE(Expr::parse("(u1)*1", 1, 1).is_control_variable(0));
}
