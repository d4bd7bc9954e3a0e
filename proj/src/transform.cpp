#include "ocreg/transform.hpp"

#include <algorithm>
#include <cmath>

#include "ocreg/errors.hpp"

namespace ocreg {

namespace {

double scale_of(double a, double b) { return std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace

// ---------------------------------------------------------------------------
// VProfile

VProfile::VProfile(double a, double b, GridFn v) : a_(a), b_(b), v_(std::move(v)) {
  if (!(a_ < b_)) throw InvariantError("v-profile interval must satisfy a < b");
  if (v_.dim() != 1) throw DimensionError("v-profile must be scalar");
  if (v_.size() < 2) throw DimensionError("v-profile needs at least two nodes");
  const double tol = kIntegralTol * scale_of(a_, b_);
  if (std::abs(v_.front() - a_) > tol || std::abs(v_.back() - b_) > tol) {
    throw InvariantError("v-profile grid must span [a, b]");
  }
  identity_ = true;
  for (std::size_t k = 0; k < v_.size(); ++k) {
    const double val = v_.at(k, 0);
    if (!(val >= kVMin && val <= kVMax)) {
      throw InvariantError("v = " + std::to_string(val) + " outside [0.5, 1.5] at profile node " + std::to_string(k));
    }
    identity_ = identity_ && val == 1.0;
  }
  cumulative_.resize(v_.size());
  cumulative_[0] = a_;
  for (std::size_t k = 0; k + 1 < v_.size(); ++k) {
    cumulative_[k + 1] = cumulative_[k] + v_.at(k, 0) * (v_.node(k + 1) - v_.node(k));
  }
  const double integral = cumulative_.back() - a_;
  if (std::abs(integral - (b_ - a_)) > kIntegralTol * std::max(1.0, b_ - a_)) {
    throw InvariantError("integral of v is " + std::to_string(integral) + ", must equal b - a = " +
                         std::to_string(b_ - a_));
  }
  // Project the last cell so that t(b) = b holds exactly.
  const std::size_t last = v_.size() - 2;
  const double adjusted = (b_ - cumulative_[last]) / (v_.node(last + 1) - v_.node(last));
  if (adjusted >= kVMin && adjusted <= kVMax) {
    v_.at(last, 0) = adjusted;
    v_.at(last + 1, 0) = adjusted;
  }
  cumulative_.back() = b_;
}

VProfile VProfile::identity(double a, double b) { return VProfile(a, b, GridFn({a, b}, {1.0, 1.0}, 1)); }

VProfile VProfile::two_step(double a, double b, double first, double second, int intervals) {
  if (intervals < 1) throw DimensionError("two-step profile needs at least one interval");
  double brk = b;
  if (first != second) {
    brk = a + (b - a) * (second - 1.0) / (second - first);
    if (!(brk >= a && brk <= b)) {
      throw InvariantError("two-step profile " + std::to_string(first) + "/" + std::to_string(second) +
                           " cannot integrate to b - a");
    }
  }
  std::vector<double> s = GridFn::uniform_nodes(a, b, intervals);
  std::vector<double> vals(s.size());
  for (int k = 0; k < intervals; ++k) {
    if (s[k + 1] <= brk) {
      vals[k] = first;
    } else if (s[k] >= brk) {
      vals[k] = second;
    } else {
      vals[k] = (first * (brk - s[k]) + second * (s[k + 1] - brk)) / (s[k + 1] - s[k]);
    }
  }
  vals.back() = vals[intervals - 1];
  return VProfile(a, b, GridFn(std::move(s), std::move(vals), 1));
}

VProfile VProfile::segments(double a, double b, const std::vector<double>& values) {
  if (values.empty()) throw DimensionError("segment profile needs at least one value");
  std::vector<double> s = GridFn::uniform_nodes(a, b, static_cast<int>(values.size()));
  std::vector<double> vals(values);
  vals.push_back(values.back());
  return VProfile(a, b, GridFn(std::move(s), std::move(vals), 1));
}

double VProfile::time_at(double tau) const {
  if (identity_) return tau;
  if (tau <= a_) return a_;
  if (tau >= b_) return b_;
  const std::size_t k = v_.cell(tau);
  return cumulative_[k] + v_.at(k, 0) * (tau - v_.node(k));
}

double VProfile::tau_at(double t) const {
  if (identity_) return t;
  if (t <= a_) return a_;
  if (t >= b_) return b_;
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), t);
  std::size_t k = static_cast<std::size_t>(it - cumulative_.begin()) - 1;
  k = std::min(k, cumulative_.size() - 2);
  return std::min(v_.node(k) + (t - cumulative_[k]) / v_.at(k, 0), v_.node(k + 1));
}

double VProfile::value_at(double tau) const { return v_.at(v_.cell(tau), 0); }

std::pair<double, double> VProfile::range(double lo, double hi) const {
  std::size_t k0 = v_.cell(lo);
  std::size_t k1 = v_.cell(hi);
  // A cell that only touches `hi` at its left end does not contribute.
  if (k1 > k0 && v_.node(k1) >= hi) --k1;
  double mn = v_.at(k0, 0);
  double mx = mn;
  for (std::size_t k = k0; k <= k1; ++k) {
    mn = std::min(mn, v_.at(k, 0));
    mx = std::max(mx, v_.at(k, 0));
  }
  return {mn, mx};
}

// ---------------------------------------------------------------------------
// Lift

TauQuadruple lift_to_tau(const AdmissiblePair& pair, const VProfile& v, LiftGrid grid) {
  if (pair.x.size() < 2) throw DimensionError("pair grid needs at least two nodes");
  if (pair.x.nodes() != pair.u.nodes()) throw DimensionError("state and control grids differ");
  const double a = v.a();
  const double b = v.b();
  const double tol = VProfile::kIntegralTol * scale_of(a, b);
  if (std::abs(pair.x.front() - a) > tol || std::abs(pair.x.back() - b) > tol) {
    throw InvariantError("v-profile and pair live on different intervals");
  }
  const std::size_t m = pair.x.size();
  const int n = pair.x.dim();
  const int r = pair.u.dim();

  std::vector<double> tau(m);
  std::vector<double> times(m);
  std::vector<double> z(m * n);
  std::vector<double> w(m * r);

  if (grid == LiftGrid::Preimage) {
    for (std::size_t j = 0; j < m; ++j) {
      times[j] = pair.x.node(j);
      tau[j] = v.tau_at(times[j]);
    }
    tau.front() = a;
    tau.back() = b;
    std::copy(pair.x.values().begin(), pair.x.values().end(), z.begin());
    std::copy(pair.u.values().begin(), pair.u.values().end(), w.begin());
  } else {
    tau = GridFn::uniform_nodes(a, b, static_cast<int>(m) - 1);
    for (std::size_t j = 0; j < m; ++j) times[j] = v.time_at(tau[j]);
    times.front() = a;
    times.back() = b;
    for (std::size_t j = 0; j < m; ++j) {
      // Snap to a pair node when t(tau_j) lands on one up to round-off.
      double tj = times[j];
      const std::size_t c = pair.x.cell(tj);
      for (std::size_t cand : {c, c + 1}) {
        if (std::abs(tj - pair.x.node(cand)) <= tol) tj = pair.x.node(cand);
      }
      const std::vector<double> xs = pair.x.linear_at(tj);
      const std::vector<double> us = pair.u.left_at(tj);
      std::copy(xs.begin(), xs.end(), z.begin() + static_cast<std::ptrdiff_t>(j * n));
      std::copy(us.begin(), us.end(), w.begin() + static_cast<std::ptrdiff_t>(j * r));
    }
    // Close the control grid with the value of the final cell.
    std::copy(w.begin() + static_cast<std::ptrdiff_t>((m - 2) * r), w.begin() + static_cast<std::ptrdiff_t>((m - 1) * r),
              w.begin() + static_cast<std::ptrdiff_t>((m - 1) * r));
  }

  std::vector<double> vbar(m);
  for (std::size_t j = 0; j + 1 < m; ++j) {
    if (v.is_identity()) {
      vbar[j] = 1.0;
      continue;
    }
    const auto [lo, hi] = v.range(tau[j], tau[j + 1]);
    vbar[j] = std::clamp((times[j + 1] - times[j]) / (tau[j + 1] - tau[j]), lo, hi);
  }
  vbar.back() = vbar[m - 2];

  return TauQuadruple{GridFn(tau, times, 1), GridFn(tau, std::move(z), n), GridFn(tau, std::move(vbar), 1),
                      GridFn(tau, std::move(w), r)};
}

// ---------------------------------------------------------------------------
// Projection

std::vector<Preimage> invert_time(const TauQuadruple& q, const std::vector<double>& times) {
  const std::size_t m = q.t.size();
  if (m < 2) throw DimensionError("quadruple grid needs at least two nodes");
  std::vector<double> tv(m);
  for (std::size_t j = 0; j < m; ++j) tv[j] = q.t.at(j, 0);
  for (std::size_t j = 1; j < m; ++j) {
    if (!(tv[j] > tv[j - 1])) {
      throw InvariantError("t(tau) is not strictly increasing at tau-node " + std::to_string(j));
    }
  }
  const double tol = VProfile::kIntegralTol * scale_of(tv.front(), tv.back());
  std::vector<Preimage> out(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    auto it = std::upper_bound(tv.begin(), tv.end(), t);
    std::size_t k = it == tv.begin() ? 0 : static_cast<std::size_t>(it - tv.begin()) - 1;
    k = std::min(k, m - 2);
    Preimage pre;
    if (k + 2 < m && std::abs(t - tv[k + 1]) <= tol) {
      pre.cell = k + 1;
      pre.theta = 0.0;
    } else if (std::abs(t - tv[k]) <= tol) {
      pre.cell = k;
      pre.theta = 0.0;
    } else if (std::abs(t - tv[k + 1]) <= tol) {
      pre.cell = k;
      pre.theta = 1.0;
    } else {
      pre.cell = k;
      pre.theta = std::clamp((t - tv[k]) / (tv[k + 1] - tv[k]), 0.0, 1.0);
    }
    const double t0 = q.t.node(pre.cell);
    const double t1 = q.t.node(pre.cell + 1);
    pre.tau = pre.theta == 0.0 ? t0 : (pre.theta == 1.0 ? t1 : t0 + pre.theta * (t1 - t0));
    out[i] = pre;
  }
  return out;
}

AdmissiblePair project_from_tau(const TauQuadruple& q) {
  if (q.t.size() < 2 || q.t.dim() != 1) throw DimensionError("quadruple time grid is malformed");
  const std::size_t m = q.t.size();
  const double a = q.t.node(0);
  const double b = q.t.node(m - 1);
  const std::vector<double> grid = GridFn::uniform_nodes(a, b, static_cast<int>(m) - 1);
  const std::vector<Preimage> pre = invert_time(q, grid);
  const int n = q.z.dim();
  const int r = q.w.dim();
  AdmissiblePair pair{GridFn(grid, n), GridFn(grid, r)};
  for (std::size_t i = 0; i < m; ++i) {
    const Preimage& p = pre[i];
    for (int k = 0; k < n; ++k) {
      const double lo = q.z.at(p.cell, k);
      const double hi = q.z.at(p.cell + 1, k);
      pair.x.at(i, k) = p.theta == 0.0 ? lo : (p.theta == 1.0 ? hi : lo + p.theta * (hi - lo));
    }
    pair.u.set_row(i, q.w.row(p.cell));
  }
  pair.u.set_row(m - 1, pair.u.row(m - 2));
  return pair;
}

CanonicalLift canonical_lift(const OCProblem& p, const AdmissiblePair& pair, double tol) {
  const AdmissibilityReport rep = check_admissible(p, pair, tol);
  if (!rep.pass) {
    throw InvariantError("pair is not admissible: max residual " + std::to_string(rep.max_residual) +
                         ", boundary error " + std::to_string(rep.boundary_error));
  }
  TauQuadruple quad = lift_to_tau(pair, VProfile::identity(p.a, p.b));
  GridFn t = quad.t;
  GridFn z = quad.z;
  GridFn v = quad.v;
  FixedControlProblem fixed = fix_control(p, quad.w);
  return CanonicalLift{std::move(quad), std::move(t), std::move(z), std::move(v), std::move(fixed)};
}

TransformReport transform_report(const OCProblem& p, const AdmissiblePair& pair, const VProfile& v, double tol,
                                 LiftGrid grid) {
  TransformReport rep;
  rep.cost_P = cost_P(p, pair);
  const TauQuadruple q = lift_to_tau(pair, v, grid);
  rep.cost_Ptau = cost_Ptau(p, q);
  rep.abs_diff = std::abs(rep.cost_P - rep.cost_Ptau);
  rep.lifted_admissible = check_admissible(p, q, tol).pass;
  const AdmissiblePair back = project_from_tau(q);
  rep.projected_admissible = check_admissible(p, back, tol).pass;
  for (std::size_t i = 0; i < back.x.size(); ++i) {
    const double t = back.x.node(i);
    const std::vector<double> x = pair.x.linear_at(t);
    for (int k = 0; k < p.n; ++k) rep.roundtrip_sup_error = std::max(rep.roundtrip_sup_error, std::abs(back.x.at(i, k) - x[k]));
    if (i + 1 < back.x.size()) {
      const std::vector<double> u = pair.u.left_at(t);
      for (int k = 0; k < p.r; ++k) {
        rep.roundtrip_control_error = std::max(rep.roundtrip_control_error, std::abs(back.u.at(i, k) - u[k]));
      }
    }
  }
  return rep;
}

}  // namespace ocreg
