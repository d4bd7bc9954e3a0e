#include "ocreg/extremal.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "ocreg/errors.hpp"

namespace ocreg {

namespace {

bool all_zero(const GridFn& g) {
  return std::all_of(g.values().begin(), g.values().end(), [](double x) { return x == 0.0; });
}

bool all_finite(const GridFn& g) {
  return std::all_of(g.values().begin(), g.values().end(), [](double x) { return std::isfinite(x); });
}

std::vector<double> midpoint(const GridFn& g, std::size_t i) {
  std::vector<double> out(g.dim());
  for (int k = 0; k < g.dim(); ++k) out[k] = 0.5 * (g.at(i, k) + g.at(i + 1, k));
  return out;
}

// Uniform grid search on the box followed by two local refinement passes.
struct SearchResult {
  double sup = -HUGE_VAL;
  std::vector<double> arg;
};

SearchResult box_search(const std::function<double(const std::vector<double>&)>& f, const ControlBox& box, int grid) {
  const int r = static_cast<int>(box.lo.size());
  SearchResult best;
  std::vector<double> u(r);
  auto consider = [&](const std::vector<double>& cand) {
    const double val = f(cand);
    if (val > best.sup) {
      best.sup = val;
      best.arg = cand;
    }
  };

  std::vector<double> step(r);
  for (int j = 0; j < r; ++j) step[j] = grid > 1 ? (box.hi[j] - box.lo[j]) / (grid - 1) : 0.0;
  std::vector<int> idx(r, 0);
  while (true) {
    for (int j = 0; j < r; ++j) u[j] = idx[j] == grid - 1 ? box.hi[j] : box.lo[j] + step[j] * idx[j];
    consider(u);
    int j = 0;
    while (j < r && ++idx[j] == grid) idx[j++] = 0;
    if (j == r) break;
  }

  for (int pass = 1; pass <= 2; ++pass) {
    const std::vector<double> centre = best.arg;
    std::vector<double> h(r);
    for (int j = 0; j < r; ++j) h[j] = step[j] / (1 << pass);
    std::vector<int> k(r, -2);
    while (true) {
      for (int j = 0; j < r; ++j) u[j] = std::clamp(centre[j] + h[j] * k[j], box.lo[j], box.hi[j]);
      consider(u);
      int j = 0;
      while (j < r && ++k[j] == 3) k[j++] = -2;
      if (j == r) break;
    }
  }
  return best;
}

void check_box(const ControlBox& box, int r, int grid) {
  if (static_cast<int>(box.lo.size()) != r || static_cast<int>(box.hi.size()) != r) {
    throw DimensionError("control box has wrong dimension");
  }
  for (int j = 0; j < r; ++j) {
    if (!(box.lo[j] < box.hi[j])) throw InvariantError("control box needs lo < hi on every axis");
  }
  if (grid < 2) throw InvariantError("maximality grid needs at least two points per axis");
}

}  // namespace

// ---------------------------------------------------------------------------
// Extremal objects

Extremal Extremal::make(AdmissiblePair pair, double psi0, GridFn psi) {
  if (psi.dim() != pair.x.dim()) throw DimensionError("adjoint has wrong dimension");
  if (psi.nodes() != pair.x.nodes()) throw DimensionError("adjoint lives on a different grid than the pair");
  if (!std::isfinite(psi0) || !all_finite(psi)) throw InvariantError("multipliers must be finite");
  if (psi0 > 0.0) throw InvariantError("cost multiplier must be <= 0");
  if (psi0 == 0.0 && all_zero(psi)) throw InvariantError("multipliers vanish identically");
  double scale = 0.0;
  if (psi0 < 0.0) {
    scale = -psi0;
    psi0 = -1.0;
  } else {
    for (double x : psi.values()) scale = std::max(scale, std::abs(x));
  }
  if (scale != 1.0) {
    for (std::size_t i = 0; i < psi.size(); ++i) {
      for (int k = 0; k < psi.dim(); ++k) psi.at(i, k) /= scale;
    }
  }
  return Extremal(std::move(pair), psi0, std::move(psi));
}

TauExtremal TauExtremal::make(TauQuadruple quad, double p0, GridFn p_t, GridFn p_z) {
  if (p_t.dim() != 1) throw DimensionError("p_t must be scalar");
  if (p_z.dim() != quad.z.dim()) throw DimensionError("p_z has wrong dimension");
  if (p_t.nodes() != quad.t.nodes() || p_z.nodes() != quad.t.nodes()) {
    throw DimensionError("multipliers live on a different grid than the quadruple");
  }
  if (!std::isfinite(p0) || !all_finite(p_t) || !all_finite(p_z)) throw InvariantError("multipliers must be finite");
  if (p0 > 0.0) throw InvariantError("cost multiplier must be <= 0");
  if (p0 == 0.0 && all_zero(p_t) && all_zero(p_z)) throw InvariantError("multipliers vanish identically");
  return TauExtremal(std::move(quad), p0, std::move(p_t), std::move(p_z));
}

// ---------------------------------------------------------------------------
// Hamiltonians

double hamiltonian_P(const OCProblem& p, const Point& pt, double psi0, std::span<const double> psi) {
  if (static_cast<int>(psi.size()) != p.n) throw DimensionError("adjoint has wrong dimension");
  double h = psi0 * p.L.eval(pt);
  for (int i = 0; i < p.n; ++i) h += psi[i] * p.phi[i].eval(pt);
  return h;
}

double hamiltonian_Ptau(const OCProblem& p, const Point& pt, double v, double p0, double p_t,
                        std::span<const double> p_z) {
  if (!(v >= kVMin && v <= kVMax)) throw InvariantError("v = " + std::to_string(v) + " outside [0.5, 1.5]");
  return (hamiltonian_P(p, pt, p0, p_z) + p_t) * v;
}

HamiltonianPartials hamiltonian_P_partials(const OCProblem& p, const Point& pt, double psi0,
                                           std::span<const double> psi) {
  if (static_cast<int>(psi.size()) != p.n) throw DimensionError("adjoint has wrong dimension");
  std::vector<int> channels{Channel::time()};
  for (int i = 0; i < p.n; ++i) channels.push_back(Channel::state(i));
  HamiltonianPartials out;
  out.d_dx.assign(p.n, 0.0);
  std::vector<double> d;
  auto accumulate = [&](const Expr& e, double weight) {
    out.value += weight * e.partials(pt, channels, d);
    out.d_dt += weight * d[0];
    for (int i = 0; i < p.n; ++i) out.d_dx[i] += weight * d[1 + i];
  };
  accumulate(p.L, psi0);
  for (int i = 0; i < p.n; ++i) accumulate(p.phi[i], psi[i]);
  return out;
}

HamiltonianPartials hamiltonian_Ptau_partials(const OCProblem& p, const Point& pt, double v, double p0, double p_t,
                                              std::span<const double> p_z) {
  if (static_cast<int>(p_z.size()) != p.n) throw DimensionError("adjoint has wrong dimension");
  if (!(v >= kVMin && v <= kVMax)) throw InvariantError("v = " + std::to_string(v) + " outside [0.5, 1.5]");
  // Dual arithmetic on (p0 L + p_t + p_z . phi) * v with v held constant.
  auto sweep = [&](int channel) {
    Dual acc{p_t, 0.0};
    const Dual l = p.L.eval_dual(pt, channel);
    acc.v += p0 * l.v;
    acc.d += p0 * l.d;
    for (int i = 0; i < p.n; ++i) {
      const Dual f = p.phi[i].eval_dual(pt, channel);
      acc.v += p_z[i] * f.v;
      acc.d += p_z[i] * f.d;
    }
    return Dual{acc.v * v, acc.d * v};
  };
  HamiltonianPartials out;
  const Dual dt = sweep(Channel::time());
  out.value = dt.v;
  out.d_dt = dt.d;
  out.d_dx.resize(p.n);
  for (int i = 0; i < p.n; ++i) out.d_dx[i] = sweep(Channel::state(i)).d;
  return out;
}

// ---------------------------------------------------------------------------
// Adjoint residuals

double adjoint_residual_P(const OCProblem& p, const Extremal& e) {
  const AdmissiblePair& pair = e.pair();
  check_shape(p, pair);
  double worst = 0.0;
  for (int i = 0; i < pair.x.intervals(); ++i) {
    const double h = pair.x.node(i + 1) - pair.x.node(i);
    const Point mid{0.5 * (pair.x.node(i) + pair.x.node(i + 1)), midpoint(pair.x, i), pair.u.row_vec(i)};
    const std::vector<double> psi_mid = midpoint(e.psi(), i);
    const HamiltonianPartials hp = hamiltonian_P_partials(p, mid, e.psi0(), psi_mid);
    for (int k = 0; k < p.n; ++k) {
      worst = std::max(worst, std::abs((e.psi().at(i + 1, k) - e.psi().at(i, k)) / h + hp.d_dx[k]));
    }
  }
  return worst;
}

double adjoint_residual_Ptau(const OCProblem& p, const TauExtremal& te) {
  const TauQuadruple& q = te.quad();
  check_shape(p, q);
  double worst = 0.0;
  for (int j = 0; j < q.t.intervals(); ++j) {
    const double h = q.t.node(j + 1) - q.t.node(j);
    const double v = q.v.at(j, 0);
    const Point mid{0.5 * (q.t.at(j, 0) + q.t.at(j + 1, 0)), midpoint(q.z, j), q.w.row_vec(j)};
    const std::vector<double> pz_mid = midpoint(te.p_z(), j);
    const double pt_mid = 0.5 * (te.p_t().at(j, 0) + te.p_t().at(j + 1, 0));
    const HamiltonianPartials hp = hamiltonian_Ptau_partials(p, mid, v, te.p0(), pt_mid, pz_mid);
    worst = std::max(worst, std::abs((te.p_t().at(j + 1, 0) - te.p_t().at(j, 0)) / h + hp.d_dt));
    for (int k = 0; k < p.n; ++k) {
      worst = std::max(worst, std::abs((te.p_z().at(j + 1, k) - te.p_z().at(j, k)) / h + hp.d_dx[k]));
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Maximality

ControlBox ControlBox::uniform(int r, double lo, double hi) {
  return ControlBox{std::vector<double>(r, lo), std::vector<double>(r, hi)};
}

bool ControlBox::contains(std::span<const double> u) const {
  if (u.size() != lo.size()) return false;
  for (std::size_t j = 0; j < u.size(); ++j) {
    if (!(u[j] >= lo[j] && u[j] <= hi[j])) return false;
  }
  return true;
}

MaximalityReport maximality_check_P(const OCProblem& p, const Extremal& e, const ControlBox& box, int grid) {
  check_box(box, p.r, grid);
  const AdmissiblePair& pair = e.pair();
  check_shape(p, pair);
  MaximalityReport rep;
  rep.box = box;
  rep.grid = grid;
  for (int i = 0; i < pair.x.intervals(); ++i) {
    const std::vector<double> u = pair.u.row_vec(i);
    if (!box.contains(u)) throw InvariantError("candidate control at node " + std::to_string(i) + " is outside the box");
    const std::vector<double> psi = e.psi().row_vec(i);
    Point pt{pair.x.node(i), pair.x.row_vec(i), u};
    const double here = hamiltonian_P(p, pt, e.psi0(), psi);
    const SearchResult best = box_search(
        [&](const std::vector<double>& c) {
          pt.u = c;
          return hamiltonian_P(p, pt, e.psi0(), psi);
        },
        box, grid);
    const double gap = best.sup - here;
    if (rep.worst_node < 0 || gap > rep.worst_gap) {
      rep.worst_gap = gap;
      rep.worst_node = i;
      rep.argmax_found = best.arg;
    }
  }
  return rep;
}

MaximalityReport maximality_check_Ptau(const OCProblem& p, const TauExtremal& te, const ControlBox& box, int grid) {
  check_box(box, p.r, grid);
  const TauQuadruple& q = te.quad();
  check_shape(p, q);
  MaximalityReport rep;
  rep.box = box;
  rep.grid = grid;
  for (int j = 0; j < q.t.intervals(); ++j) {
    const std::vector<double> w = q.w.row_vec(j);
    if (!box.contains(w)) throw InvariantError("candidate control at node " + std::to_string(j) + " is outside the box");
    const std::vector<double> pz = te.p_z().row_vec(j);
    const double pt_j = te.p_t().at(j, 0);
    Point pt{q.t.at(j, 0), q.z.row_vec(j), w};
    const double here = hamiltonian_Ptau(p, pt, q.v.at(j, 0), te.p0(), pt_j, pz);
    SearchResult best = box_search(
        [&](const std::vector<double>& c) {
          pt.u = c;
          return hamiltonian_P(p, pt, te.p0(), pz) + pt_j;
        },
        box, grid);
    // The reparameterized Hamiltonian is linear in v, so its sup sits at an end of [0.5, 1.5].
    const double v_best = best.sup >= 0.0 ? kVMax : kVMin;
    best.arg.push_back(v_best);
    const double gap = best.sup * v_best - here;
    if (rep.worst_node < 0 || gap > rep.worst_gap) {
      rep.worst_gap = gap;
      rep.worst_node = j;
      rep.argmax_found = best.arg;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Lift and projection

TauExtremal lift_extremal(const OCProblem& p, const Extremal& e, const VProfile& v, LiftGrid grid) {
  check_shape(p, e.pair());
  TauQuadruple quad = lift_to_tau(e.pair(), v, grid);
  const std::size_t m = quad.t.size();
  GridFn p_z(quad.t.nodes(), p.n);
  GridFn p_t(quad.t.nodes(), 1);
  for (std::size_t j = 0; j < m; ++j) {
    if (grid == LiftGrid::Preimage) {
      p_z.set_row(j, e.psi().row(j));
    } else {
      p_z.set_row(j, e.psi().linear_at(quad.t.at(j, 0)));
    }
    const Point pt{quad.t.at(j, 0), quad.z.row_vec(j), quad.w.row_vec(j)};
    p_t.at(j, 0) = -hamiltonian_P(p, pt, e.psi0(), p_z.row(j));
  }
  return TauExtremal::make(std::move(quad), e.psi0(), std::move(p_t), std::move(p_z));
}

Extremal project_extremal(const OCProblem& p, const TauExtremal& te) {
  check_shape(p, te.quad());
  AdmissiblePair pair = project_from_tau(te.quad());
  const std::vector<Preimage> pre = invert_time(te.quad(), pair.x.nodes());
  GridFn psi(pair.x.nodes(), p.n);
  for (std::size_t i = 0; i < pre.size(); ++i) {
    const Preimage& q = pre[i];
    for (int k = 0; k < p.n; ++k) {
      const double lo = te.p_z().at(q.cell, k);
      const double hi = te.p_z().at(q.cell + 1, k);
      psi.at(i, k) = q.theta == 0.0 ? lo : (q.theta == 1.0 ? hi : lo + q.theta * (hi - lo));
    }
  }
  return Extremal::make(std::move(pair), te.p0(), std::move(psi));
}

double zero_level_max(const OCProblem& p, const TauExtremal& te) {
  const TauQuadruple& q = te.quad();
  double worst = 0.0;
  for (std::size_t j = 0; j < q.t.size(); ++j) {
    const Point pt{q.t.at(j, 0), q.z.row_vec(j), q.w.row_vec(j)};
    worst = std::max(worst, std::abs(hamiltonian_Ptau(p, pt, q.v.at(j, 0), te.p0(), te.p_t().at(j, 0), te.p_z().row(j))));
  }
  return worst;
}

double hamiltonian_scale(const OCProblem& p, const TauExtremal& te) {
  const TauQuadruple& q = te.quad();
  double worst = 0.0;
  for (std::size_t j = 0; j < q.t.size(); ++j) {
    const Point pt{q.t.at(j, 0), q.z.row_vec(j), q.w.row_vec(j)};
    worst = std::max(worst, std::abs(hamiltonian_P(p, pt, te.p0(), te.p_z().row(j))));
  }
  return worst;
}

bool classify_abnormal(const Extremal& e) {
  if (e.psi0() == 0.0 && all_zero(e.psi())) throw InvariantError("multipliers vanish identically");
  return e.abnormal();
}

bool classify_abnormal(const TauExtremal& te) {
  if (te.p0() == 0.0 && all_zero(te.p_t()) && all_zero(te.p_z())) {
    throw InvariantError("multipliers vanish identically");
  }
  return te.abnormal();
}

ExtremalReport verify_extremal(const OCProblem& p, const Extremal& e, const ControlBox& box, const VProfile& v,
                               int grid) {
  ExtremalReport rep;
  rep.adjoint_residual = adjoint_residual_P(p, e);
  const MaximalityReport mx = maximality_check_P(p, e, box, grid);
  rep.worst_gap = mx.worst_gap;
  rep.worst_node = mx.worst_node;
  rep.argmax_found = mx.argmax_found;
  rep.box = box;
  const TauExtremal te = lift_extremal(p, e, v);
  rep.hamiltonian_zero_level_max = zero_level_max(p, te);
  rep.tau_adjoint_residual = adjoint_residual_Ptau(p, te);
  rep.abnormal = classify_abnormal(e);
  return rep;
}

}  // namespace ocreg
