#include "ocreg/regularity.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "ocreg/errors.hpp"

namespace ocreg {

namespace {

constexpr std::array<int, 24> kPrimes{2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89};
constexpr std::array<double, 3> kLevels{1.0, 2.0, 4.0};
constexpr std::array<double, 4> kGridK{0.0, 1.0, 10.0, 100.0};

double radical_inverse(std::uint64_t i, int base) {
  double inv = 1.0 / base;
  double f = inv;
  double out = 0.0;
  while (i > 0) {
    out += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return out;
}

// Rows of a randomly shifted Halton sequence in [0, 1)^dim.
std::vector<std::vector<double>> halton(int dim, int count, std::uint64_t seed) {
  if (dim > static_cast<int>(kPrimes.size())) throw DimensionError("too many sampling dimensions");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> shift(dim);
  for (double& s : shift) s = unit(rng);
  std::vector<std::vector<double>> out(count, std::vector<double>(dim));
  for (int i = 0; i < count; ++i) {
    for (int d = 0; d < dim; ++d) {
      double v = radical_inverse(static_cast<std::uint64_t>(i) + 1, kPrimes[d]) + shift[d];
      out[i][d] = v - std::floor(v);
    }
  }
  return out;
}

double lerp(double lo, double hi, double s) { return lo + s * (hi - lo); }

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<int> time_state_channels(int n) {
  std::vector<int> ch{Channel::time()};
  for (int i = 0; i < n; ++i) ch.push_back(Channel::state(i));
  return ch;
}

// ---------------------------------------------------------------------------
// Shared fitting of lhs <= c * rhs + k.

struct Samples {
  std::vector<Point> points;
  std::vector<std::vector<double>> lhs;  // [condition][sample]
  std::vector<std::vector<double>> rhs;
};

using Quantities = std::function<void(const Point&, std::vector<double>&, std::vector<double>&)>;

double fit_c(const std::vector<double>& lhs, const std::vector<double>& rhs, double k) {
  double c = 0.0;
  for (std::size_t s = 0; s < lhs.size(); ++s) c = std::max(c, std::max(lhs[s] - k, 0.0) / std::max(rhs[s], kRatioFloor));
  return c;
}

bool certifies(const std::vector<double>& lhs, const std::vector<double>& rhs, double c, double k) {
  for (std::size_t s = 0; s < lhs.size(); ++s) {
    const double bound = c * rhs[s] + k;
    if (lhs[s] - bound > kCertifyTol * std::max(1.0, lhs[s])) return false;
  }
  return true;
}

// Growing fitted constant under the x1 -> x2 -> x4 escalation.
bool grows(double c1, double c2, double c4) { return c2 > c1 * (1.0 + 1e-6) && c4 - c2 >= 0.5 * (c2 - c1); }

struct Choice {
  double c = 0.0;
  double k = 0.0;
  double c_fit = 0.0;
  bool grid_k = true;
};

// Smallest certified c + k over the k-grid and the (0, ceil(max lhs)) candidate.
Choice choose(const std::vector<double>& lhs, const std::vector<double>& rhs) {
  std::vector<Choice> cands;
  for (double k : kGridK) {
    const double fit = fit_c(lhs, rhs, k);
    cands.push_back({ceil_2sig(fit / (1.0 + kCertifyTol)), k, fit, true});
  }
  double mx = 0.0;
  for (double l : lhs) mx = std::max(mx, l);
  if (mx > 0.0) cands.push_back({0.0, ceil_2sig(mx), 0.0, false});
  Choice best;
  bool have = false;
  for (const Choice& c : cands) {
    if (!certifies(lhs, rhs, c.c, c.k)) continue;
    if (!have || c.c + c.k < best.c + best.k || (c.c + c.k == best.c + best.k && c.c < best.c)) {
      best = c;
      have = true;
    }
  }
  if (!have) throw InvariantError("no certified growth constants");
  return best;
}

// Evaluates the quantities at the factorial + Halton samples of each escalation
// level, accumulating so that level L contains every earlier sample.
std::array<Samples, 3> sample_levels(const SampleBox& box, int conditions, const Quantities& q, int& total,
                                     int& skipped) {
  std::array<Samples, 3> out;
  std::vector<double> lhs(conditions);
  std::vector<double> rhs(conditions);
  Samples acc;
  acc.lhs.assign(conditions, {});
  acc.rhs.assign(conditions, {});
  for (std::size_t lvl = 0; lvl < kLevels.size(); ++lvl) {
    for (const Point& pt : sample_points(box.scaled_u(kLevels[lvl]))) {
      ++total;
      try {
        q(pt, lhs, rhs);
      } catch (const NonDifferentiableError&) {
        ++skipped;
        continue;
      }
      acc.points.push_back(pt);
      for (int c = 0; c < conditions; ++c) {
        acc.lhs[c].push_back(lhs[c]);
        acc.rhs[c].push_back(rhs[c]);
      }
    }
    out[lvl] = acc;
  }
  if (static_cast<double>(skipped) > 0.01 * total) {
    throw Error(std::to_string(skipped) + " of " + std::to_string(total) +
                " samples hit a non-differentiable point (limit 1%)");
  }
  return out;
}

GrowthReport run_growth(const std::string& mode, const std::vector<std::string>& names, const SampleBox& box,
                        const Quantities& q) {
  box.validate();
  GrowthReport rep;
  rep.mode = mode;
  int total = 0;
  const auto levels = sample_levels(box, static_cast<int>(names.size()), q, total, rep.skipped);
  const Samples& base = levels[0];
  rep.samples = static_cast<int>(base.points.size());
  bool any_suspect = false;
  for (std::size_t c = 0; c < names.size(); ++c) {
    GrowthCondition gc;
    gc.name = names[c];
    const auto& lhs = base.lhs[c];
    const auto& rhs = base.rhs[c];
    const Choice ch = choose(lhs, rhs);
    gc.c = ch.c;
    gc.k = ch.k;
    gc.c_fit = ch.c_fit;
    gc.certified = certifies(lhs, rhs, gc.c, gc.k);
    std::size_t arg = 0;
    for (std::size_t s = 0; s < lhs.size(); ++s) {
      const double ratio = lhs[s] / std::max(rhs[s], kRatioFloor);
      if (s == 0 || ratio > gc.max_ratio) {
        gc.max_ratio = ratio;
        arg = s;
      }
    }
    if (!lhs.empty()) {
      gc.witness = base.points[arg];
      gc.witness_lhs = lhs[arg];
      gc.witness_rhs = rhs[arg];
    }
    bool suspect = true;
    for (double k : kGridK) {
      const double c1 = fit_c(levels[0].lhs[c], levels[0].rhs[c], k);
      const double c2 = fit_c(levels[1].lhs[c], levels[1].rhs[c], k);
      const double c4 = fit_c(levels[2].lhs[c], levels[2].rhs[c], k);
      suspect = suspect && grows(c1, c2, c4);
    }
    for (const Samples& lv : levels) {
      if (ch.grid_k) {
        gc.escalation.push_back(fit_c(lv.lhs[c], lv.rhs[c], ch.k));
      } else {
        gc.escalation.push_back(*std::max_element(lv.lhs[c].begin(), lv.lhs[c].end()));
      }
    }
    gc.verdict = suspect ? "suspect" : "satisfied-on-box";
    any_suspect = any_suspect || suspect;
    rep.conditions.push_back(std::move(gc));
  }
  rep.verdict = any_suspect ? "suspect" : "satisfied-on-box";
  return rep;
}

std::vector<std::string> theorem53_names(int n) {
  std::vector<std::string> names{"dL/dt"};
  for (int j = 0; j < n; ++j) names.push_back("dL/dx" + std::to_string(j + 1));
  names.push_back("dphi/dt");
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) names.push_back("dphi" + std::to_string(i + 1) + "/dx" + std::to_string(j + 1));
  }
  return names;
}

Quantities theorem53_quantities(const OCProblem& p) {
  const std::vector<int> ch = time_state_channels(p.n);
  return [&p, ch](const Point& pt, std::vector<double>& lhs, std::vector<double>& rhs) {
    std::vector<double> d;
    const int n = p.n;
    const double L = p.L.partials(pt, ch, d);
    std::size_t c = 0;
    lhs[c] = std::abs(d[0]);
    rhs[c++] = std::abs(L);
    for (int j = 0; j < n; ++j) {
      lhs[c] = std::abs(d[1 + j]);
      rhs[c++] = std::abs(L);
    }
    std::vector<double> phi(n);
    std::vector<double> phi_t(n);
    std::vector<std::vector<double>> phi_x(n);
    for (int i = 0; i < n; ++i) {
      phi[i] = p.phi[i].partials(pt, ch, d);
      phi_t[i] = d[0];
      phi_x[i].assign(d.begin() + 1, d.end());
    }
    lhs[c] = norm2(phi_t);
    rhs[c++] = norm2(phi);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        lhs[c] = std::abs(phi_x[i][j]);
        rhs[c++] = std::abs(phi[i]);
      }
    }
  };
}

Quantities cv_quantities(const OCProblem& p) {
  return [&p](const Point& pt, std::vector<double>& lhs, std::vector<double>& rhs) {
    const Gradient g = p.L.grad(pt);
    lhs[0] = norm2(g.d_dx) + norm2(g.d_du);
    rhs[0] = std::abs(g.value);
  };
}

void require_cv_form(const OCProblem& p) {
  bool cv = p.n == p.r;
  for (int i = 0; cv && i < p.n; ++i) cv = p.phi[i].is_control_variable(i);
  if (!cv) throw ValidationError("dynamics are not of the form x' = u; the condition does not apply", "phi");
}

// Control i on the boundary of the box, chosen by sample index.
Point edge_projection(const Point& pt, const SampleBox& box, std::size_t idx) {
  Point out = pt;
  const std::size_t r = box.u_lo.size();
  const std::size_t axis = idx % r;
  out.u[axis] = (idx / r) % 2 == 0 ? box.u_lo[axis] : box.u_hi[axis];
  return out;
}

// Pattern search from a shell's lowest sample towards smaller L while staying
// inside the shell and the box. Every accepted point is itself a sample.
void refine_shell(const OCProblem& p, const SampleBox& box, CoercivityShell& sh, Point& best, bool last) {
  const int n = static_cast<int>(box.x_lo.size());
  const int r = static_cast<int>(box.u_lo.size());
  const int dim = 1 + n + r;
  auto lo = [&](int d) { return d == 0 ? box.t_lo : (d <= n ? box.x_lo[d - 1] : box.u_lo[d - 1 - n]); };
  auto hi = [&](int d) { return d == 0 ? box.t_hi : (d <= n ? box.x_hi[d - 1] : box.u_hi[d - 1 - n]); };
  auto coord = [&](Point& q, int d) -> double& { return d == 0 ? q.t : (d <= n ? q.x[d - 1] : q.u[d - 1 - n]); };
  std::vector<double> step(dim);
  for (int d = 0; d < dim; ++d) step[d] = 0.125 * (hi(d) - lo(d));
  for (int iter = 0; iter < 60; ++iter) {
    bool moved = false;
    for (int d = 0; d < dim; ++d) {
      for (double sign : {-1.0, 1.0}) {
        Point q = best;
        coord(q, d) = std::clamp(coord(q, d) + sign * step[d], lo(d), hi(d));
        double L = 0.0;
        double rad = 0.0;
        try {
          L = p.L.eval(q);
          rad = norm2(p.eval_phi(q));
        } catch (const DomainError&) {
          continue;
        }
        const bool inside = rad >= sh.r_lo && (rad < sh.r_hi || (last && rad <= sh.r_hi));
        if (inside && L < sh.theta) {
          sh.theta = L;
          sh.r_star = rad;
          ++sh.count;
          best = q;
          moved = true;
        }
      }
    }
    if (!moved) {
      for (double& s : step) s *= 0.5;
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Sampling

SampleBox SampleBox::make(const OCProblem& p, double x_lo, double x_hi, double u_lo, double u_hi, int count,
                          std::uint64_t seed) {
  SampleBox b;
  b.t_lo = p.a;
  b.t_hi = p.b;
  b.x_lo.assign(p.n, x_lo);
  b.x_hi.assign(p.n, x_hi);
  b.u_lo.assign(p.r, u_lo);
  b.u_hi.assign(p.r, u_hi);
  b.count = count;
  b.seed = seed;
  b.validate();
  return b;
}

void SampleBox::validate() const {
  if (!(t_lo < t_hi)) throw InvariantError("sample box needs t_lo < t_hi");
  if (x_lo.size() != x_hi.size() || u_lo.size() != u_hi.size()) throw DimensionError("sample box bounds disagree");
  for (std::size_t i = 0; i < x_lo.size(); ++i) {
    if (!(x_lo[i] < x_hi[i])) throw InvariantError("sample box needs x_lo < x_hi on every axis");
  }
  for (std::size_t j = 0; j < u_lo.size(); ++j) {
    if (!(u_lo[j] < u_hi[j])) throw InvariantError("sample box needs u_lo < u_hi on every axis");
  }
  if (count < 1) throw InvariantError("sample count must be at least 1");
}

SampleBox SampleBox::scaled_u(double factor) const {
  SampleBox b = *this;
  for (std::size_t j = 0; j < u_lo.size(); ++j) {
    const double mid = 0.5 * (u_lo[j] + u_hi[j]);
    const double half = 0.5 * (u_hi[j] - u_lo[j]) * factor;
    b.u_lo[j] = mid - half;
    b.u_hi[j] = mid + half;
  }
  return b;
}

std::vector<Point> sample_points(const SampleBox& box) {
  box.validate();
  const int n = static_cast<int>(box.x_lo.size());
  const int r = static_cast<int>(box.u_lo.size());
  const int dim = 1 + n + r;
  auto make_point = [&](const std::vector<double>& s) {
    Point pt{lerp(box.t_lo, box.t_hi, s[0]), std::vector<double>(n), std::vector<double>(r)};
    for (int i = 0; i < n; ++i) pt.x[i] = lerp(box.x_lo[i], box.x_hi[i], s[1 + i]);
    for (int j = 0; j < r; ++j) pt.u[j] = lerp(box.u_lo[j], box.u_hi[j], s[1 + n + j]);
    return pt;
  };
  std::vector<Point> out;
  if (dim <= 7) {
    std::vector<int> idx(dim, 0);
    std::vector<double> s(dim);
    while (true) {
      for (int d = 0; d < dim; ++d) s[d] = 0.5 * idx[d];
      out.push_back(make_point(s));
      int d = 0;
      while (d < dim && ++idx[d] == 3) idx[d++] = 0;
      if (d == dim) break;
    }
  } else {
    out.push_back(make_point(std::vector<double>(dim, 0.5)));
  }
  for (const auto& s : halton(dim, box.count, box.seed)) out.push_back(make_point(s));
  return out;
}

double ceil_2sig(double x) {
  if (!(x > 0.0)) return 0.0;
  if (!std::isfinite(x)) return x;
  const double e = std::floor(std::log10(x));
  const double scale = std::pow(10.0, e - 1.0);
  double q = x / scale;
  // Absorb representation error so that exact two-digit values stay put.
  q = std::ceil(q * (1.0 - 1e-12));
  double out = q * scale;
  if (out < x) out = std::nextafter(out, HUGE_VAL);
  return out;
}

// ---------------------------------------------------------------------------
// Growth

GrowthReport check_growth_theorem53(const OCProblem& p, const SampleBox& box) {
  return run_growth("theorem53", theorem53_names(p.n), box, theorem53_quantities(p));
}

GrowthReport check_growth_tonelli_morrey_cv(const OCProblem& p, const SampleBox& box) {
  require_cv_form(p);
  return run_growth("tonelli_morrey_cv", {"dL/dx+dL/du"}, box, cv_quantities(p));
}

bool recheck_growth(const OCProblem& p, const GrowthReport& rep, const SampleBox& box) {
  const Quantities q = rep.mode == "theorem53" ? theorem53_quantities(p) : cv_quantities(p);
  std::vector<double> lhs(rep.conditions.size());
  std::vector<double> rhs(rep.conditions.size());
  for (const Point& pt : sample_points(box)) {
    try {
      q(pt, lhs, rhs);
    } catch (const NonDifferentiableError&) {
      continue;
    }
    for (std::size_t c = 0; c < rep.conditions.size(); ++c) {
      if (!certifies({lhs[c]}, {rhs[c]}, rep.conditions[c].c, rep.conditions[c].k)) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Coercivity

CoercivityReport check_coercivity(const OCProblem& p, const SampleBox& box, int shells) {
  if (shells < 4) throw InvariantError("coercivity check needs at least 4 shells");
  box.validate();
  CoercivityReport rep;
  std::vector<double> quad_top;
  for (std::size_t lvl = 0; lvl < kLevels.size(); ++lvl) {
    const SampleBox b = box.scaled_u(kLevels[lvl]);
    const std::vector<Point> pts = sample_points(b);
    std::vector<double> Ls(pts.size());
    std::vector<double> rs(pts.size());
    double rmax = 0.0;
    for (std::size_t s = 0; s < pts.size(); ++s) {
      Ls[s] = p.L.eval(pts[s]);
      rs[s] = norm2(p.eval_phi(pts[s]));
      rmax = std::max(rmax, rs[s]);
    }
    CoercivityLevel level;
    level.factor = kLevels[lvl];
    level.shells.resize(shells);
    for (int j = 0; j < shells; ++j) {
      level.shells[j].r_lo = rmax * j / shells;
      level.shells[j].r_hi = j + 1 == shells ? rmax : rmax * (j + 1) / shells;
    }
    std::vector<std::size_t> arg(shells, 0);
    for (std::size_t s = 0; s < pts.size(); ++s) {
      const int j = rmax > 0.0 ? std::min(shells - 1, static_cast<int>(rs[s] / rmax * shells)) : 0;
      CoercivityShell& sh = level.shells[j];
      if (sh.count == 0 || Ls[s] < sh.theta) {
        sh.theta = Ls[s];
        sh.r_star = rs[s];
        arg[j] = s;
      }
      ++sh.count;
    }
    for (int j = 0; j < shells; ++j) {
      if (level.shells[j].count == 0) continue;
      Point start = pts[arg[j]];
      refine_shell(p, b, level.shells[j], start, j + 1 == shells);
    }
    level.min_theta = *std::min_element(Ls.begin(), Ls.end());
    double sum = 0.0;
    int used = 0;
    std::vector<double> xs;
    std::vector<double> ys;
    for (int j = shells / 2; j < shells; ++j) {
      const CoercivityShell& sh = level.shells[j];
      if (sh.count == 0 || sh.r_star <= 0.0) continue;
      sum += sh.theta / sh.r_star;
      ++used;
      xs.push_back(sh.r_star);
      ys.push_back(sh.theta / sh.r_star);
      if (lvl == 0) quad_top.push_back(sh.theta / (sh.r_star * sh.r_star));
    }
    level.top_mean_theta_over_r = used > 0 ? sum / used : 0.0;
    if (lvl == 0) {
      for (const CoercivityShell& sh : level.shells) rep.empty_shells += sh.count == 0 ? 1 : 0;
      if (xs.size() >= 2) {
        double mx = 0.0;
        double my = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
          mx += xs[i];
          my += ys[i];
        }
        mx /= xs.size();
        my /= ys.size();
        double sxy = 0.0;
        double sxx = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
          sxy += (xs[i] - mx) * (ys[i] - my);
          sxx += (xs[i] - mx) * (xs[i] - mx);
        }
        rep.slope = sxx > 0.0 ? sxy / sxx : 0.0;
      }
    }
    level.edge_min_phi = HUGE_VAL;
    for (std::size_t s = 0; s < pts.size(); ++s) {
      level.edge_min_phi = std::min(level.edge_min_phi, norm2(p.eval_phi(edge_projection(pts[s], b, s))));
    }
    rep.levels.push_back(std::move(level));
  }
  if (!quad_top.empty()) {
    rep.top_min_quadratic = *std::min_element(quad_top.begin(), quad_top.end());
    rep.top_max_quadratic = *std::max_element(quad_top.begin(), quad_top.end());
  }
  const double m1 = rep.levels[0].min_theta;
  const double m2 = rep.levels[1].min_theta;
  const double m4 = rep.levels[2].min_theta;
  const double tol = 1e-9 * (1.0 + std::abs(m1));
  rep.bounded_below = !(m2 < m1 - tol && m4 < m2 - tol && m2 - m4 >= 0.5 * (m1 - m2));
  const double s1 = rep.levels[0].top_mean_theta_over_r;
  const double s2 = rep.levels[1].top_mean_theta_over_r;
  const double s4 = rep.levels[2].top_mean_theta_over_r;
  rep.superlinear = s1 > 0.0 && s2 >= 1.1 * s1 && s4 >= 1.1 * s2;
  const double e1 = rep.levels[0].edge_min_phi;
  const double e2 = rep.levels[1].edge_min_phi;
  const double e4 = rep.levels[2].edge_min_phi;
  rep.edge_growth = e2 > e1 * (1.0 + 1e-6) && e4 > e2 * (1.0 + 1e-6);
  rep.verdict = rep.bounded_below && rep.superlinear && rep.edge_growth ? "pass" : "fail";
  return rep;
}

// ---------------------------------------------------------------------------
// Control-affine systems

AffineGrowthReport check_affine(const OCProblem& p, const SampleBox& box) {
  box.validate();
  AffineGrowthReport rep;
  const int n = p.n;
  const int r = p.r;
  double half = 0.0;
  for (int j = 0; j < r; ++j) half = std::max(half, 0.5 * (box.u_hi[j] - box.u_lo[j]));
  const double h = 1e-3 * std::max(1.0, half);

  // (t, x) points: the box centre first, then shifted Halton points.
  std::vector<Point> base;
  {
    Point centre{0.5 * (box.t_lo + box.t_hi), std::vector<double>(n), std::vector<double>(r)};
    for (int i = 0; i < n; ++i) centre.x[i] = 0.5 * (box.x_lo[i] + box.x_hi[i]);
    base.push_back(centre);
    for (const auto& s : halton(1 + n, 19, box.seed ^ 0x9e3779b97f4a7c15ULL)) {
      Point pt{lerp(box.t_lo, box.t_hi, s[0]), std::vector<double>(n), std::vector<double>(r)};
      for (int i = 0; i < n; ++i) pt.x[i] = lerp(box.x_lo[i], box.x_hi[i], s[1 + i]);
      base.push_back(pt);
    }
    std::mt19937_64 rng(box.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Point& pt : base) {
      for (int j = 0; j < r; ++j) pt.u[j] = lerp(box.u_lo[j], box.u_hi[j], unit(rng));
    }
  }

  double worst = 0.0;
  rep.min_singular_value = HUGE_VAL;
  rep.full_rank = r <= n;
  for (const Point& pt : base) {
    const std::vector<double> f0 = p.eval_phi(pt);
    std::vector<std::vector<double>> f1(r);
    for (int j = 0; j < r; ++j) {
      Point q = pt;
      q.u[j] += h;
      f1[j] = p.eval_phi(q);
    }
    double scale = 1.0;
    for (double f : f0) scale = std::max(scale, 1.0 + std::abs(f));
    for (int j = 0; j < r; ++j) {
      for (int l = j; l < r; ++l) {
        Point q = pt;
        q.u[j] += h;
        q.u[l] += h;
        const std::vector<double> f2 = p.eval_phi(q);
        for (int i = 0; i < n; ++i) {
          const double second = (f2[i] - f1[j][i] - f1[l][i] + f0[i]) / (h * h);
          const double rel = std::abs(second) / scale;
          if (std::abs(second) > 1e-6 * scale && rel > worst) {
            worst = rel;
            rep.affine = false;
            rep.witness = pt;
            rep.witness_component = i;
            rep.witness_second_diff = second;
          }
        }
      }
    }
    Eigen::MatrixXd g(n, r);
    for (int j = 0; j < r; ++j) {
      for (int i = 0; i < n; ++i) g(i, j) = (f1[j][i] - f0[i]) / h;
    }
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(g).singularValues();
    const double smin = sv.size() > 0 ? sv(sv.size() - 1) : 0.0;
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    if (smin < rep.min_singular_value) {
      rep.min_singular_value = smin;
      rep.rank_witness = pt;
    }
    if (!(smin > 1e-8 * (1.0 + smax))) rep.full_rank = false;
  }

  // zeta: smallest sampled L.
  rep.zeta = HUGE_VAL;
  for (const Point& pt : sample_points(box)) rep.zeta = std::min(rep.zeta, p.L.eval(pt));

  if (!rep.affine) {
    rep.applicable = false;
    rep.verdict = "inapplicable";
    return rep;
  }

  // Growth of the affine-system condition, fitted over (beta, mu) and eta.
  const std::vector<int> ch = time_state_channels(n);
  struct Base {
    double lhs;
    double L;
    double unorm;
  };
  std::array<std::vector<Base>, 3> levels;
  std::vector<Base> acc;
  for (std::size_t lvl = 0; lvl < kLevels.size(); ++lvl) {
    for (const Point& pt : sample_points(box.scaled_u(kLevels[lvl]))) {
      std::vector<double> d;
      try {
        const double L = p.L.partials(pt, ch, d);
        const double Lt = d[0];
        const std::vector<double> Lx(d.begin() + 1, d.end());
        std::vector<double> phi(n);
        std::vector<double> phi_t(n);
        std::vector<std::vector<double>> phi_x(n, std::vector<double>(n));
        for (int i = 0; i < n; ++i) {
          phi[i] = p.phi[i].partials(pt, ch, d);
          phi_t[i] = d[0];
          for (int k = 0; k < n; ++k) phi_x[k][i] = d[1 + k];
        }
        double lhs = std::abs(Lt);
        for (double v : Lx) lhs += std::abs(v);
        std::vector<double> tmp(n);
        for (int i = 0; i < n; ++i) tmp[i] = L * phi_t[i] - Lt * phi[i];
        lhs += norm2(tmp);
        for (int k = 0; k < n; ++k) {
          for (int i = 0; i < n; ++i) tmp[i] = L * phi_x[k][i] - Lx[k] * phi[i];
          lhs += norm2(tmp);
        }
        acc.push_back({lhs, L, norm2(pt.u)});
      } catch (const NonDifferentiableError&) {
        ++rep.skipped;
      }
    }
    levels[lvl] = acc;
  }

  auto columns = [](const std::vector<Base>& s, double beta, double mu, std::vector<double>& lhs,
                    std::vector<double>& rhs) {
    lhs.clear();
    rhs.clear();
    for (const Base& b : s) {
      if (mu < 0.0 && b.unorm == 0.0) continue;
      lhs.push_back(b.lhs * (mu == 0.0 ? 1.0 : std::pow(b.unorm, mu)));
      rhs.push_back(std::pow(std::max(b.L, kRatioFloor), beta));
    }
  };
  bool have = false;
  std::vector<double> lhs;
  std::vector<double> rhs;
  for (double beta : {-1.0, 0.0, 0.5, 1.0, 1.5, 1.9}) {
    for (double mu : {-2.0, -1.0, 0.0, 1.0}) {
      if (mu < std::max(beta - 2.0, -2.0)) continue;
      columns(levels[0], beta, mu, lhs, rhs);
      if (lhs.empty()) continue;
      const Choice c = choose(lhs, rhs);
      const double gamma = c.c > 0.0 ? c.c : kRatioFloor;
      if (!have || gamma + c.k < rep.gamma + rep.eta) {
        have = true;
        rep.gamma = gamma;
        rep.eta = c.k;
        rep.beta = beta;
        rep.mu = mu;
      }
    }
  }
  bool suspect = true;
  for (double eta : kGridK) {
    std::array<double, 3> g{};
    for (std::size_t lvl = 0; lvl < 3; ++lvl) {
      columns(levels[lvl], rep.beta, rep.mu, lhs, rhs);
      g[lvl] = fit_c(lhs, rhs, eta);
      if (eta == rep.eta) rep.escalation.push_back(g[lvl]);
    }
    suspect = suspect && grows(g[0], g[1], g[2]);
  }
  if (rep.escalation.empty()) {
    for (std::size_t lvl = 0; lvl < 3; ++lvl) {
      columns(levels[lvl], rep.beta, rep.mu, lhs, rhs);
      rep.escalation.push_back(fit_c(lhs, rhs, rep.eta));
    }
  }
  rep.applicable = have && rep.full_rank && !suspect;
  rep.verdict = rep.applicable ? "applicable" : "inapplicable";
  return rep;
}

// ---------------------------------------------------------------------------
// Integrable bounds along a control

AlphaReport check_alpha_bound(const OCProblem& p, const GridFn& w, const std::vector<double>& x_lo,
                              const std::vector<double>& x_hi, int count, std::uint64_t seed) {
  const int n = p.n;
  if (w.dim() != p.r) throw DimensionError("control has wrong dimension");
  if (static_cast<int>(x_lo.size()) != n || static_cast<int>(x_hi.size()) != n) {
    throw DimensionError("state box has wrong dimension");
  }
  for (int i = 0; i < n; ++i) {
    if (!(x_lo[i] < x_hi[i])) throw InvariantError("state box needs lo < hi on every axis");
  }
  for (std::size_t j = 0; j < w.size(); ++j) {
    for (int k = 0; k < w.dim(); ++k) {
      if (!std::isfinite(w.at(j, k))) {
        throw InvariantError("control value is not finite at node " + std::to_string(j));
      }
    }
  }

  std::vector<std::vector<double>> xs;
  if (n <= 6) {
    std::vector<int> idx(n, 0);
    while (true) {
      std::vector<double> x(n);
      for (int i = 0; i < n; ++i) x[i] = lerp(x_lo[i], x_hi[i], 0.5 * idx[i]);
      xs.push_back(x);
      int i = 0;
      while (i < n && ++idx[i] == 3) idx[i++] = 0;
      if (i == n) break;
    }
  }
  for (const auto& s : halton(n, count, seed)) {
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = lerp(x_lo[i], x_hi[i], s[i]);
    xs.push_back(x);
  }

  const std::vector<int> ch = [n] {
    std::vector<int> c;
    for (int i = 0; i < n; ++i) c.push_back(Channel::state(i));
    return c;
  }();
  AlphaReport rep;
  std::vector<double> d;
  std::vector<double> Ls(xs.size());
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double tau = w.node(j);
    double alpha = 0.0;
    for (std::size_t s = 0; s < xs.size(); ++s) {
      const Point pt{tau, xs[s], w.row_vec(j)};
      Ls[s] = p.L.partials(pt, ch, d);
      alpha = std::max(alpha, norm2(d));
      for (int i = 0; i < n; ++i) {
        (void)p.phi[i].partials(pt, ch, d);
        alpha = std::max(alpha, norm2(d));
      }
    }
    for (std::size_t s = 0; s < xs.size(); ++s) {
      for (std::size_t q = s + 1; q < xs.size(); ++q) {
        double dist = 0.0;
        for (int i = 0; i < n; ++i) dist += (xs[s][i] - xs[q][i]) * (xs[s][i] - xs[q][i]);
        if (dist == 0.0) continue;
        rep.lipschitz_max = std::max(rep.lipschitz_max, std::abs(Ls[s] - Ls[q]) / std::sqrt(dist));
      }
    }
    rep.tau.push_back(tau);
    rep.alpha.push_back(alpha);
  }
  for (std::size_t j = 0; j + 1 < rep.tau.size(); ++j) {
    rep.integral += 0.5 * (rep.tau[j + 1] - rep.tau[j]) * (rep.alpha[j] + rep.alpha[j + 1]);
  }
  rep.verdict = std::isfinite(rep.integral) && std::isfinite(rep.lipschitz_max) ? "finite" : "infinite";
  return rep;
}

}  // namespace ocreg
