// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "../support.hpp"
#include "ocreg/builtin.hpp"
#include "ocreg/errors.hpp"
#include "ocreg/extremal.hpp"
#include "ocreg/regularity.hpp"
#include "ocreg/solver.hpp"
#include "ocreg/transform.hpp"

using namespace ocreg;

namespace {

int failures = 0;

void report(int id, const std::string& title, bool pass, const std::string& detail) {
  std::printf("[%s] %2d. %s: %s\n", pass ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

void run(int id, const std::string& title, const std::function<bool(std::string&)>& body) {
  std::string detail;
  bool pass = false;
  try {
    pass = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  report(id, title, pass, detail);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

const std::array<const char*, 3> kProblems = {"baseline", "lq", "torres-6.1"};

double max_speed(const OCProblem& p, const AdmissiblePair& pair) {
  double m = 0.0;
  for (int i = 0; i < pair.x.intervals(); ++i) {
    double s = 0.0;
    for (double f : p.eval_phi(Point{pair.x.node(i), pair.x.row_vec(i), pair.u.row_vec(i)})) s += f * f;
    m = std::max(m, std::sqrt(s));
  }
  return m;
}

// Largest jump of the control between neighbouring cells.
double max_control_jump(const AdmissiblePair& pair) {
  double m = 0.0;
  for (int i = 0; i + 1 < pair.u.intervals(); ++i) {
    for (int j = 0; j < pair.u.dim(); ++j) m = std::max(m, std::abs(pair.u.at(i + 1, j) - pair.u.at(i, j)));
  }
  return m;
}

VProfile random_profile(const OCProblem& p, int intervals, std::mt19937_64& rng, int k) {
  std::uniform_real_distribution<double> slow(0.5, 0.95);
  std::uniform_real_distribution<double> fast(1.05, 1.5);
  if (k % 5 == 0) return VProfile::identity(p.a, p.b);
  const double lo = slow(rng);
  const double hi = fast(rng);
  return k % 2 ? VProfile::two_step(p.a, p.b, lo, hi, intervals) : VProfile::two_step(p.a, p.b, hi, lo, intervals);
}

struct TransformCase {
  OCProblem p;
  AdmissiblePair pair;
  TransformReport rep;
};

std::vector<TransformCase> transform_cases() {
  std::vector<TransformCase> out;
  std::mt19937_64 rng(4242);
  for (int k = 0; k < 50; ++k) {
    const OCProblem p = builtin_problem(kProblems[k % 3]);
    AdmissiblePair pair = testing::random_pair(p, 400, rng);
    const VProfile v = random_profile(p, 400, rng, k);
    TransformReport rep = transform_report(p, pair, v, 1e-6);
    out.push_back({p, std::move(pair), rep});
  }
  return out;
}

double lq_oracle() {
  const double s1 = std::sinh(1.0);
  return testing::adaptive_simpson(
      [s1](double t) {
        const double x = std::sinh(t) / s1;
        const double u = std::cosh(t) / s1;
        return u * u + x * x;
      },
      0.0, 1.0, 1e-12);
}

Extremal baseline_extremal(const OCProblem& p, int N) {
  AdmissiblePair pair = sample_pair(p, N, [](double t) { return std::vector<double>{t}; },
                                    [](double) { return std::vector<double>{1.0}; });
  GridFn psi(pair.x.nodes(), std::vector<double>(N + 1, 2.0), 1);
  return Extremal::make(std::move(pair), -1.0, std::move(psi));
}

Extremal lq_extremal(const OCProblem& p, int N) {
  const double s1 = std::sinh(1.0);
  AdmissiblePair pair = sample_pair(p, N, [s1](double t) { return std::vector<double>{std::sinh(t) / s1}; },
                                    [s1](double t) { return std::vector<double>{std::cosh(t) / s1}; });
  GridFn psi(pair.x.nodes(), 1);
  for (std::size_t i = 0; i < psi.size(); ++i) psi.at(i, 0) = 2.0 * std::cosh(psi.node(i)) / s1;
  return Extremal::make(std::move(pair), -1.0, std::move(psi));
}

std::string capture(const std::string& cmd, int& status) {
  std::string out;
  FILE* f = popen(cmd.c_str(), "r");
  if (!f) {
    status = -1;
    return out;
  }
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = std::fread(buf.data(), 1, buf.size(), f)) > 0) out.append(buf.data(), got);
  status = pclose(f);
  return out;
}

}  // namespace

int main() {
  const std::vector<TransformCase> cases = transform_cases();

  run(1, "cost invariance under reparameterization (50 cases, N=400)", [&](std::string& d) {
    double worst = 0.0;
    for (const TransformCase& c : cases) worst = std::max(worst, c.rep.abs_diff / (1.0 + std::abs(c.rep.cost_P)));
    d = fmt("max |cost_P - cost_Ptau| / (1 + |cost_P|) = %.3e (limit 1e-6)", worst);
    return worst <= 1e-6;
  });

  run(2, "project after lift round trip (50 cases)", [&](std::string& d) {
    double worst_state = 0.0;
    double worst_control = 0.0;
    bool ok = true;
    for (const TransformCase& c : cases) {
      const double h = (c.p.b - c.p.a) / 400.0;
      const double bound = 2.0 * h * max_speed(c.p, c.pair);
      worst_state = std::max(worst_state, c.rep.roundtrip_sup_error / bound);
      worst_control = std::max(worst_control, c.rep.roundtrip_control_error);
      ok = ok && c.rep.roundtrip_sup_error <= bound && c.rep.roundtrip_control_error <= max_control_jump(c.pair) &&
           c.rep.lifted_admissible && c.rep.projected_admissible;
    }
    d = fmt("state error / (2h max|phi|) <= %.3f, control error %.3e", worst_state, worst_control);
    return ok;
  });

  run(3, "Hamiltonian relation bitwise, derivative identities <= 1e-10", [&](std::string& d) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> box(-2.0, 2.0);
    std::uniform_real_distribution<double> vd(kVMin, kVMax);
    int mismatched = 0;
    double worst = 0.0;
    for (const char* name : kProblems) {
      const OCProblem p = builtin_problem(name);
      for (int k = 0; k < 100; ++k) {
        Point pt{box(rng), {}, {}};
        for (int i = 0; i < p.n; ++i) pt.x.push_back(box(rng));
        for (int j = 0; j < p.r; ++j) pt.u.push_back(box(rng));
        std::vector<double> pz(p.n);
        for (double& c : pz) c = box(rng);
        const double p0 = k % 5 == 0 ? 0.0 : -1.0;
        const double pt_val = box(rng);
        const double v = vd(rng);
        const double lhs = hamiltonian_Ptau(p, pt, v, p0, pt_val, pz);
        const double rhs = (hamiltonian_P(p, pt, p0, pz) + pt_val) * v;
        if (std::bit_cast<std::uint64_t>(lhs) != std::bit_cast<std::uint64_t>(rhs)) ++mismatched;
        const HamiltonianPartials h = hamiltonian_P_partials(p, pt, p0, pz);
        const HamiltonianPartials ht = hamiltonian_Ptau_partials(p, pt, v, p0, pt_val, pz);
        worst = std::max(worst, std::abs(ht.d_dt - v * h.d_dt) / (1.0 + std::abs(h.d_dt)));
        for (int i = 0; i < p.n; ++i) {
          worst = std::max(worst, std::abs(ht.d_dx[i] - v * h.d_dx[i]) / (1.0 + std::abs(h.d_dx[i])));
        }
      }
    }
    d = fmt("%.0f bitwise mismatches in 300 points, worst identity residual %.3e", mismatched, worst);
    return mismatched == 0 && worst <= 1e-10;
  });

  run(4, "lifted extremals sit on the zero level (<= 1e-8)", [&](std::string& d) {
    double worst = 0.0;
    for (const char* name : {"baseline", "lq"}) {
      const OCProblem p = builtin_problem(name);
      const Extremal e = std::string(name) == "baseline" ? baseline_extremal(p, 200) : lq_extremal(p, 200);
      for (const VProfile& v : {VProfile::identity(p.a, p.b), VProfile::two_step(p.a, p.b, 0.5, 1.5, 200)}) {
        worst = std::max(worst, zero_level_max(p, lift_extremal(p, e, v)));
      }
    }
    d = fmt("max |H_tau| = %.3e over baseline and LQ, identity and two-step", worst);
    return worst <= 1e-8;
  });

  run(5, "two-state example straight path: admissible, cost vs quadrature oracle", [&](std::string& d) {
    const OCProblem p = builtin_problem("torres-6.1");
    const AdmissiblePair pair = sample_pair(p, 200, [](double t) { return std::vector<double>{t, 1.0}; },
                                            [](double) { return std::vector<double>{1.0, 0.0}; });
    const AdmissibilityReport adm = check_admissible(p, pair, 1e-6);
    const CanonicalLift lift = canonical_lift(p, pair, 1e-6);
    const AdmissibilityReport adm_tau = check_admissible(p, lift.quad, 1e-6);
    const double oracle = testing::adaptive_simpson(
        [&p](double t) { return p.L.eval(Point{t, {t, 1.0}, {1.0, 0.0}}); }, 0.0, 1.0, 1e-12);
    const double closed = (std::exp(4.0) - std::exp(2.0)) / 2.0 + 1.0;
    const double cost = cost_Ptau(p, lift.quad);
    d = fmt("cost %.6f, oracle %.6f, closed form %.6f", cost, oracle, closed) +
        fmt(", residual %.1e", adm.max_residual);
    return adm.pass && adm_tau.pass && std::abs(cost - oracle) <= 1e-2 && std::abs(oracle - closed) <= 1e-8 &&
           std::abs(cost_P(p, pair) - oracle) <= 1e-2;
  });

  run(6, "two-state example regularity verdicts", [&](std::string& d) {
    const OCProblem p = builtin_problem("torres-6.1");
    const SampleBox box = SampleBox::make(p, -2.0, 2.0, -10.0, 10.0, 2000, 1);
    const GrowthReport g = check_growth_theorem53(p, box);
    bool growth_ok = g.verdict == "satisfied-on-box";
    for (const GrowthCondition& c : g.conditions) {
      if (c.name == "dL/dx1" || c.name == "dL/dx2") growth_ok = growth_ok && c.c == 2.0 && c.k == 0.0 && c.certified;
      if (c.name == "dphi2/dx1" || c.name == "dphi2/dx2") {
        growth_ok = growth_ok && c.c == 1.0 && c.k == 0.0 && c.certified;
      }
    }
    const CoercivityReport co = check_coercivity(p, box, 16);
    const bool coercive_ok = co.verdict == "pass" && co.top_min_quadratic >= 0.5 && co.top_max_quadratic <= 1.5;
    const AffineGrowthReport af = check_affine(p, box);
    const bool affine_ok = !af.affine && af.witness_component >= 0 && !af.applicable;
    d = std::string("growth ") + (growth_ok ? "ok" : "wrong") +
        fmt(", theta/r^2 in [%.3f, %.3f]", co.top_min_quadratic, co.top_max_quadratic) + ", affine " +
        (af.affine ? "yes" : "no") + fmt(" (witness component %.0f)", af.witness_component);
    return growth_ok && coercive_ok && affine_ok;
  });

  run(7, "solver matches analytic and closed-form oracles", [&](std::string& d) {
    const SolveResult base = solve(Transcription(builtin_problem("baseline"), 50));
    double u_err = 0.0;
    for (std::size_t i = 0; i < base.pair.u.size(); ++i) u_err = std::max(u_err, std::abs(base.pair.u.at(i, 0) - 1.0));
    const SolveResult lq = solve(Transcription(builtin_problem("lq"), 100));
    const double oracle = lq_oracle();
    d = fmt("baseline cost %.8f, max|u - 1| %.2e", base.cost, u_err) +
        fmt("; LQ cost %.8f vs oracle %.8f", lq.cost, oracle);
    return base.converged && lq.converged && std::abs(base.cost - 1.0) <= 1e-4 && u_err <= 1e-3 &&
           std::abs(lq.cost - oracle) <= 1e-3;
  });

  run(8, "boundedness diagnostic over N = 25, 50, 100", [&](std::string& d) {
    const BoundednessReport base = boundedness_diagnostic(builtin_problem("baseline"), {25, 50, 100});
    double worst = 0.0;
    for (double r : base.relative_changes) worst = std::max(worst, r);
    const BoundednessReport tor = boundedness_diagnostic(builtin_problem("torres-6.1"), {25, 50, 100});
    bool tor_converged = true;
    for (bool c : tor.converged) tor_converged = tor_converged && c;
    d = fmt("baseline max change %.2e; two-state sup norms %.6f %.6f", worst, tor.sup_norms[0], tor.sup_norms[1]) +
        fmt(" %.6f, verdict ", tor.sup_norms[2]) + tor.verdict;
    return base.verdict == "bounded-stable" && worst <= kBoundedTol && tor_converged && !tor.verdict.empty();
  });

  run(9, "autodiff gradients vs central differences (100 points per problem)", [&](std::string& d) {
    std::mt19937_64 rng(909);
    std::uniform_real_distribution<double> box(-1.5, 1.5);
    double worst = 0.0;
    int points = 0;
    for (const char* name : kProblems) {
      const OCProblem p = builtin_problem(name);
      std::vector<const Expr*> exprs{&p.L};
      for (const Expr& e : p.phi) exprs.push_back(&e);
      int checked = 0;
      while (checked < 100) {
        Point pt{box(rng), {}, {}};
        for (int i = 0; i < p.n; ++i) pt.x.push_back(box(rng));
        for (int j = 0; j < p.r; ++j) pt.u.push_back(box(rng));
        double unorm = 0.0;
        for (double u : pt.u) unorm += u * u;
        if (std::sqrt(unorm) < 1e-3) continue;  // guard band of the sqrt kink
        for (const Expr* e : exprs) {
          const Gradient g = e->grad(pt);
          for (int ch = 0; ch < 1 + p.n + p.r; ++ch) {
            const double h = 1e-6;
            Point lo = pt;
            Point hi = pt;
            double* plo = ch == 0 ? &lo.t : (ch <= p.n ? &lo.x[ch - 1] : &lo.u[ch - 1 - p.n]);
            double* phi = ch == 0 ? &hi.t : (ch <= p.n ? &hi.x[ch - 1] : &hi.u[ch - 1 - p.n]);
            *plo -= h;
            *phi += h;
            const double fd = (e->eval(hi) - e->eval(lo)) / (2 * h);
            const double ad = ch == 0 ? g.d_dt : (ch <= p.n ? g.d_dx[ch - 1] : g.d_du[ch - 1 - p.n]);
            worst = std::max(worst, std::abs(ad - fd) / std::max(1.0, std::abs(ad)));
          }
        }
        ++checked;
        ++points;
      }
    }
    d = fmt("%.0f points, worst relative error %.3e (limit 1e-5)", points, worst);
    return worst <= 1e-5;
  });

  run(10, "example torres-6.1 --seed 7 is byte-identical across runs", [&](std::string& d) {
    const std::string cmd = std::string("\"") + OCREG_TOOL + "\" example torres-6.1 --seed 7";
    int s1 = 0;
    int s2 = 0;
    const std::string a = capture(cmd, s1);
    const std::string b = capture(cmd, s2);
    d = fmt("%.0f bytes, exit statuses %.0f and %.0f", static_cast<double>(a.size()), s1, s2);
    return !a.empty() && a == b && s1 == 0 && s2 == 0;
  });

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
