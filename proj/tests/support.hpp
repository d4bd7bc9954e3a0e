#pragma once

// Seeded admissible pairs for the bundled problems, shared by the unit and
// acceptance tests.

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ocreg/problem.hpp"

namespace ocreg::testing {

/// Random smooth state path with the problem's end points: linear interpolation
/// plus a few sine modes that vanish at both ends.
inline std::vector<double> random_path(const OCProblem& p, int intervals, std::mt19937_64& rng, double amplitude) {
  std::uniform_real_distribution<double> coef(-amplitude, amplitude);
  std::vector<double> x((intervals + 1) * p.n);
  const std::vector<double> s = GridFn::uniform_nodes(p.a, p.b, intervals);
  for (int k = 0; k < p.n; ++k) {
    const double c1 = coef(rng);
    const double c2 = coef(rng) * 0.5;
    for (int i = 0; i <= intervals; ++i) {
      const double th = (s[i] - p.a) / (p.b - p.a);
      const double base = p.A[k] + th * (p.B[k] - p.A[k]);
      x[i * p.n + k] = base + c1 * std::sin(std::numbers::pi * th) + c2 * std::sin(2 * std::numbers::pi * th);
    }
    x[k] = p.A[k];
    x[intervals * p.n + k] = p.B[k];
  }
  return x;
}

/// Pair for x' = u (baseline, lq): the control is the difference quotient.
inline AdmissiblePair random_integrator_pair(const OCProblem& p, int intervals, std::mt19937_64& rng) {
  const std::vector<double> s = GridFn::uniform_nodes(p.a, p.b, intervals);
  GridFn x(s, random_path(p, intervals, rng, 0.8), p.n);
  GridFn u(s, p.r);
  for (int i = 0; i < intervals; ++i) {
    for (int k = 0; k < p.n; ++k) u.at(i, k) = (x.at(i + 1, k) - x.at(i, k)) / (s[i + 1] - s[i]);
  }
  u.set_row(intervals, u.row(intervals - 1));
  return {x, u};
}

/// Pair for the two-state example: x1 increases fast enough that the midpoint
/// equations sqrt(u1^2 + u2^2) = dx1/h, u2 e^{x1 + x2} = dx2/h have a solution.
inline AdmissiblePair random_torres_pair(const OCProblem& p, int intervals, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coef(-0.3, 0.3);
  const double c = coef(rng);
  const double d = coef(rng);
  const std::vector<double> s = GridFn::uniform_nodes(p.a, p.b, intervals);
  GridFn x(s, 2);
  for (int i = 0; i <= intervals; ++i) {
    const double th = s[i];
    x.at(i, 0) = th + c * std::sin(std::numbers::pi * th) / std::numbers::pi * 0.9;
    x.at(i, 1) = 1.0 + d * std::sin(std::numbers::pi * th) * 0.2;
  }
  x.at(0, 0) = 0.0;
  x.at(0, 1) = 1.0;
  x.at(intervals, 0) = 1.0;
  x.at(intervals, 1) = 1.0;
  GridFn u(s, 2);
  for (int i = 0; i < intervals; ++i) {
    const double h = s[i + 1] - s[i];
    const double d1 = (x.at(i + 1, 0) - x.at(i, 0)) / h;
    const double d2 = (x.at(i + 1, 1) - x.at(i, 1)) / h;
    const double smid = 0.5 * (x.at(i, 0) + x.at(i + 1, 0) + x.at(i, 1) + x.at(i + 1, 1));
    const double u2 = d2 * std::exp(-smid);
    u.at(i, 1) = u2;
    u.at(i, 0) = std::sqrt(d1 * d1 - u2 * u2);
  }
  u.set_row(intervals, u.row(intervals - 1));
  return {x, u};
}

inline AdmissiblePair random_pair(const OCProblem& p, int intervals, std::mt19937_64& rng) {
  if (p.n == 2) return random_torres_pair(p, intervals, rng);
  return random_integrator_pair(p, intervals, rng);
}

/// Adaptive Simpson quadrature, used as an independent oracle for integrals.
template <class F>
double adaptive_simpson(F f, double a, double b, double tol, int depth = 50) {
  auto simpson = [&](double lo, double hi, double flo, double fmid, double fhi) {
    return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
  };
  struct Rec {
    F& f;
    double operator()(double lo, double hi, double flo, double fmid, double fhi, double whole, double eps,
                      int left, decltype(simpson)& s) {
      const double mid = 0.5 * (lo + hi);
      const double lm = 0.5 * (lo + mid);
      const double rm = 0.5 * (mid + hi);
      const double flm = f(lm);
      const double frm = f(rm);
      const double l = s(lo, mid, flo, flm, fmid);
      const double r = s(mid, hi, fmid, frm, fhi);
      if (left <= 0 || std::abs(l + r - whole) <= 15.0 * eps) return l + r + (l + r - whole) / 15.0;
      return (*this)(lo, mid, flo, flm, fmid, l, eps / 2, left - 1, s) +
             (*this)(mid, hi, fmid, frm, fhi, r, eps / 2, left - 1, s);
    }
  };
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  Rec rec{f};
  return rec(a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, depth, simpson);
}

}  // namespace ocreg::testing
