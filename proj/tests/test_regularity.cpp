#include <cmath>

#include "doctest.h"
#include "ocreg/builtin.hpp"
#include "ocreg/errors.hpp"
#include "ocreg/regularity.hpp"

using namespace ocreg;

namespace {

OCProblem scalar_problem(const std::string& L, const std::string& phi) {
  return parse_problem("n = 1\nr = 1\na = 0\nb = 1\nA = [0]\nB = [1]\nL = \"" + L + "\"\nphi1 = \"" + phi + "\"\n");
}

const GrowthCondition& find(const GrowthReport& rep, const std::string& name) {
  for (const auto& c : rep.conditions) {
    if (c.name == name) return c;
  }
  FAIL("missing condition " << name);
  throw 0;
}

}  // namespace

TEST_CASE("ceil_2sig") {
  CHECK(ceil_2sig(0.0) == 0.0);
  CHECK(ceil_2sig(1.0) == 1.0);
  CHECK(ceil_2sig(2.0) == 2.0);
  CHECK(ceil_2sig(1.99933) == 2.0);
  CHECK(ceil_2sig(0.999999999) == 1.0);
  CHECK(ceil_2sig(1.41421) == doctest::Approx(1.5));
  CHECK(ceil_2sig(123.4) == doctest::Approx(130.0));
  CHECK(ceil_2sig(0.0123) >= 0.0123);
}

TEST_CASE("sampling is deterministic and covers the box") {
  const OCProblem p = builtin_problem("torres-6.1");
  const SampleBox box = SampleBox::make(p, -2.0, 2.0, -10.0, 10.0, 500, 7);
  const auto a = sample_points(box);
  const auto b = sample_points(box);
  REQUIRE(a.size() == 243u + 500u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].u == b[i].u);
    CHECK(a[i].x == b[i].x);
    for (double x : a[i].x) CHECK((x >= -2.0 && x <= 2.0));
    for (double u : a[i].u) CHECK((u >= -10.0 && u <= 10.0));
  }
  const auto big = sample_points(box.scaled_u(2.0));
  CHECK(big.back().u[0] == doctest::Approx(2.0 * a.back().u[0]));
  SampleBox bad = box;
  bad.x_hi[0] = -3.0;
  CHECK_THROWS_AS(bad.validate(), InvariantError);
}

TEST_CASE("growth bounds of the two-state example") {
  const OCProblem p = builtin_problem("torres-6.1");
  const SampleBox box = SampleBox::make(p, -2.0, 2.0, -10.0, 10.0, 2000, 1);
  const GrowthReport rep = check_growth_theorem53(p, box);
  CHECK(rep.verdict == "satisfied-on-box");
  CHECK(rep.skipped == 0);
  for (const char* name : {"dL/dx1", "dL/dx2"}) {
    const GrowthCondition& c = find(rep, name);
    CHECK(c.c == 2.0);
    CHECK(c.k == 0.0);
    CHECK(c.certified);
    // sup of 2 e^{2s} / (e^{2s} + 1) over s <= 4.
    CHECK(c.c_fit == doctest::Approx(2.0 * std::exp(8.0) / (std::exp(8.0) + 1.0)).epsilon(1e-12));
  }
  for (const char* name : {"dphi2/dx1", "dphi2/dx2"}) {
    const GrowthCondition& c = find(rep, name);
    CHECK(c.c == 1.0);
    CHECK(c.k == 0.0);
  }
  CHECK(find(rep, "dL/dt").c == 0.0);
  CHECK(find(rep, "dphi1/dx1").c == 0.0);
  // Independent pass with a different seed and count.
  SampleBox other = box;
  other.seed = 12345;
  other.count = 3000;
  CHECK(recheck_growth(p, rep, other));
}

TEST_CASE("growth escalation flags a bound that only holds on the box") {
  const OCProblem path = scalar_problem("x1 * u1^2", "u1");
  const SampleBox box = SampleBox::make(path, -2.0, 2.0, -10.0, 10.0, 500, 1);
  const GrowthReport rep = check_growth_theorem53(path, box);
  const GrowthCondition& c = find(rep, "dL/dx1");
  CHECK(c.verdict == "suspect");
  CHECK(rep.verdict == "suspect");
  CHECK(c.escalation[1] > c.escalation[0]);
  CHECK(c.witness.x[0] == 0.0);

  const OCProblem base = builtin_problem("baseline");
  const GrowthReport ok = check_growth_theorem53(base, SampleBox::make(base, -2.0, 2.0, -10.0, 10.0, 500, 1));
  CHECK(ok.verdict == "satisfied-on-box");
}

TEST_CASE("Tonelli-Morrey condition for x' = u") {
  const OCProblem base = builtin_problem("baseline");
  const GrowthReport wide = check_growth_tonelli_morrey_cv(base, SampleBox::make(base, -2.0, 2.0, -10.0, 10.0, 500, 1));
  REQUIRE(wide.conditions.size() == 1);
  CHECK(wide.conditions[0].c == 1.0);
  CHECK(wide.conditions[0].k == 1.0);
  CHECK(wide.verdict == "satisfied-on-box");
  const GrowthReport narrow = check_growth_tonelli_morrey_cv(base, SampleBox::make(base, -2.0, 2.0, -1.0, 1.0, 500, 1));
  CHECK(narrow.conditions[0].c == 0.0);
  CHECK(narrow.conditions[0].k == 2.0);
  const OCProblem torres = builtin_problem("torres-6.1");
  CHECK_THROWS_AS(check_growth_tonelli_morrey_cv(torres, SampleBox::make(torres, -2.0, 2.0, -10.0, 10.0, 10, 1)),
                  ValidationError);
}

TEST_CASE("coercivity envelopes") {
  const OCProblem base = builtin_problem("baseline");
  const CoercivityReport b = check_coercivity(base, SampleBox::make(base, -2.0, 2.0, -10.0, 10.0, 2000, 1), 16);
  CHECK(b.verdict == "pass");
  for (const auto& level : b.levels) {
    for (const auto& sh : level.shells) {
      if (sh.count == 0 || sh.r_star == 0.0) continue;
      CHECK(std::abs(sh.theta / (sh.r_star * sh.r_star) - 1.0) <= 1e-6);
    }
  }

  const OCProblem torres = builtin_problem("torres-6.1");
  const CoercivityReport t = check_coercivity(torres, SampleBox::make(torres, -2.0, 2.0, -10.0, 10.0, 2000, 1), 16);
  CHECK(t.verdict == "pass");
  CHECK(t.top_min_quadratic >= 0.5);
  CHECK(t.top_max_quadratic <= 1.5);

  const OCProblem lin = scalar_problem("sqrt(u1^2)", "u1");
  const CoercivityReport l = check_coercivity(lin, SampleBox::make(lin, -2.0, 2.0, -10.0, 10.0, 2000, 1), 16);
  CHECK(l.verdict == "fail");
  CHECK_FALSE(l.superlinear);
  CHECK(l.levels[0].top_mean_theta_over_r == doctest::Approx(1.0));

  CHECK_THROWS_AS(check_coercivity(base, SampleBox::make(base, -2.0, 2.0, -10.0, 10.0, 10, 1), 3), InvariantError);
}

TEST_CASE("control-affine detection") {
  const OCProblem base = builtin_problem("baseline");
  const AffineGrowthReport b = check_affine(base, SampleBox::make(base, -2.0, 2.0, -10.0, 10.0, 500, 1));
  CHECK(b.affine);
  CHECK(b.full_rank);
  CHECK(b.min_singular_value == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(b.gamma > 0.0);
  CHECK(b.beta < 2.0);
  CHECK(b.mu >= std::max(b.beta - 2.0, -2.0));

  const OCProblem torres = builtin_problem("torres-6.1");
  const AffineGrowthReport t = check_affine(torres, SampleBox::make(torres, -2.0, 2.0, -10.0, 10.0, 500, 1));
  CHECK_FALSE(t.affine);
  CHECK(t.witness_component == 0);
  CHECK(std::abs(t.witness_second_diff) > 1e-6);
  CHECK(t.verdict == "inapplicable");

  const OCProblem state_gain = scalar_problem("u1^2", "x1 * u1");
  const AffineGrowthReport s = check_affine(state_gain, SampleBox::make(state_gain, -2.0, 2.0, -10.0, 10.0, 500, 1));
  CHECK(s.affine);
  CHECK_FALSE(s.full_rank);
  CHECK(s.rank_witness.x[0] == 0.0);
  CHECK(s.verdict == "inapplicable");

  // Affine but disguised: (x1 + 1)^2 * u1 - 2 * x1 * u1 = (x1^2 + 1) u1.
  const OCProblem disguised = scalar_problem("u1^2", "(x1 + 1)^2 * u1 - 2 * x1 * u1 + sin(t)");
  CHECK(check_affine(disguised, SampleBox::make(disguised, -2.0, 2.0, -10.0, 10.0, 200, 1)).affine);
}

TEST_CASE("integrable bound along a control") {
  const OCProblem base = builtin_problem("baseline");
  const std::vector<double> s = GridFn::uniform_nodes(0.0, 1.0, 20);
  const AlphaReport b = check_alpha_bound(base, GridFn(s, std::vector<double>(s.size(), 1.0), 1), {-1.0}, {1.0});
  CHECK(b.integral == 0.0);
  CHECK(b.lipschitz_max == 0.0);
  CHECK(b.verdict == "finite");

  const OCProblem torres = builtin_problem("torres-6.1");
  std::vector<double> w;
  for (std::size_t i = 0; i < s.size(); ++i) {
    w.push_back(1.0);
    w.push_back(0.0);
  }
  const AlphaReport t = check_alpha_bound(torres, GridFn(s, w, 2), {-1.0, -1.0}, {2.0, 2.0});
  // |dL/dx| = 2 sqrt(2) e^{2(x1 + x2)} at u = (1, 0), largest at the corner x = (2, 2).
  const double oracle = 2.0 * std::sqrt(2.0) * std::exp(8.0);
  for (double a : t.alpha) CHECK(a == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(t.integral == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(t.lipschitz_max <= oracle);
  CHECK(t.verdict == "finite");

  std::vector<double> bad(s.size(), 1.0);
  bad[3] = HUGE_VAL;
  CHECK_THROWS_AS(check_alpha_bound(base, GridFn(s, bad, 1), {-1.0}, {1.0}), InvariantError);
}
