#include "ocreg/solver.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

#include "ocreg/errors.hpp"

namespace ocreg {

namespace {

double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

// ---------------------------------------------------------------------------
// Transcription

Transcription::Transcription(OCProblem p, int intervals) : p_(std::move(p)), N_(intervals) {
  if (N_ < 2) throw DimensionError("transcription needs at least two intervals");
  p_.validate();
  nodes_ = GridFn::uniform_nodes(p_.a, p_.b, N_);
  h_ = (p_.b - p_.a) / N_;
}

std::vector<double> Transcription::state(const std::vector<double>& z, int node) const {
  if (node == 0) return p_.A;
  if (node == N_) return p_.B;
  const auto it = z.begin() + x_offset(node);
  return {it, it + p_.n};
}

std::vector<double> Transcription::control(const std::vector<double>& z, int node) const {
  const auto it = z.begin() + u_offset(node);
  return {it, it + p_.r};
}

AdmissiblePair Transcription::unpack(const std::vector<double>& z) const {
  if (z.size() != size()) throw DimensionError("decision vector has wrong length");
  AdmissiblePair pair{GridFn(nodes_, p_.n), GridFn(nodes_, p_.r)};
  for (int i = 0; i <= N_; ++i) pair.x.set_row(i, state(z, i));
  for (int i = 0; i < N_; ++i) pair.u.set_row(i, control(z, i));
  pair.u.set_row(N_, pair.u.row(N_ - 1));
  return pair;
}

std::vector<double> Transcription::pack(const AdmissiblePair& pair) const {
  check_shape(p_, pair);
  if (pair.x.intervals() != N_) throw DimensionError("pair has a different grid size");
  std::vector<double> z(size());
  for (int i = 1; i < N_; ++i) {
    for (int k = 0; k < p_.n; ++k) z[x_offset(i) + k] = pair.x.at(i, k);
  }
  for (int i = 0; i < N_; ++i) {
    for (int j = 0; j < p_.r; ++j) z[u_offset(i) + j] = pair.u.at(i, j);
  }
  return z;
}

std::vector<double> Transcription::default_init() const {
  std::vector<double> z(size(), 0.0);
  for (int i = 1; i < N_; ++i) {
    const double th = static_cast<double>(i) / N_;
    for (int k = 0; k < p_.n; ++k) z[x_offset(i) + k] = p_.A[k] + th * (p_.B[k] - p_.A[k]);
  }
  if (p_.r == p_.n) {
    for (int i = 0; i < N_; ++i) {
      for (int j = 0; j < p_.r; ++j) z[u_offset(i) + j] = (p_.B[j] - p_.A[j]) / (p_.b - p_.a);
    }
  }
  return z;
}

double Transcription::cost(const std::vector<double>& z) const {
  if (z.size() != size()) throw DimensionError("decision vector has wrong length");
  double sum = 0.0;
  for (int i = 0; i < N_; ++i) {
    const std::vector<double> u = control(z, i);
    sum += 0.5 * h_ * (p_.L.eval(Point{nodes_[i], state(z, i), u}) + p_.L.eval(Point{nodes_[i + 1], state(z, i + 1), u}));
  }
  return sum;
}

std::vector<double> Transcription::constraints(const std::vector<double>& z) const {
  if (z.size() != size()) throw DimensionError("decision vector has wrong length");
  std::vector<double> c(constraint_count());
  for (int i = 0; i < N_; ++i) {
    const std::vector<double> x0 = state(z, i);
    const std::vector<double> x1 = state(z, i + 1);
    Point mid{nodes_[i] + 0.5 * h_, std::vector<double>(p_.n), control(z, i)};
    for (int k = 0; k < p_.n; ++k) mid.x[k] = 0.5 * (x0[k] + x1[k]);
    for (int k = 0; k < p_.n; ++k) c[i * p_.n + k] = (x1[k] - x0[k]) / h_ - p_.phi[k].eval(mid);
  }
  return c;
}

Transcription::Evaluation Transcription::evaluate(const std::vector<double>& z) const {
  if (z.size() != size()) throw DimensionError("decision vector has wrong length");
  const int n = p_.n;
  const int r = p_.r;
  const int width = 2 * n + r;
  Evaluation ev;
  ev.cost_grad.assign(size(), 0.0);
  ev.c.assign(constraint_count(), 0.0);
  ev.jac.assign(static_cast<std::size_t>(N_) * n * width, 0.0);
  for (int i = 0; i < N_; ++i) {
    const std::vector<double> u = control(z, i);
    const std::vector<double> x0 = state(z, i);
    const std::vector<double> x1 = state(z, i + 1);
    for (int side = 0; side < 2; ++side) {
      const int node = i + side;
      const Gradient g = p_.L.grad(Point{nodes_[node], side == 0 ? x0 : x1, u});
      ev.cost += 0.5 * h_ * g.value;
      if (node > 0 && node < N_) {
        for (int k = 0; k < n; ++k) ev.cost_grad[x_offset(node) + k] += 0.5 * h_ * g.d_dx[k];
      }
      for (int j = 0; j < r; ++j) ev.cost_grad[u_offset(i) + j] += 0.5 * h_ * g.d_du[j];
    }
    Point mid{nodes_[i] + 0.5 * h_, std::vector<double>(n), u};
    for (int k = 0; k < n; ++k) mid.x[k] = 0.5 * (x0[k] + x1[k]);
    for (int k = 0; k < n; ++k) {
      const Gradient g = p_.phi[k].grad(mid);
      ev.c[i * n + k] = (x1[k] - x0[k]) / h_ - g.value;
      double* row = ev.jac.data() + (static_cast<std::size_t>(i) * n + k) * width;
      for (int m = 0; m < n; ++m) {
        row[m] = -0.5 * g.d_dx[m];
        row[n + m] = -0.5 * g.d_dx[m];
      }
      row[k] -= 1.0 / h_;
      row[n + k] += 1.0 / h_;
      for (int j = 0; j < r; ++j) row[2 * n + j] = -g.d_du[j];
    }
  }
  return ev;
}

void Transcription::add_jt(const Evaluation& ev, const std::vector<double>& y, std::vector<double>& g) const {
  const int n = p_.n;
  const int r = p_.r;
  const int width = 2 * n + r;
  for (int i = 0; i < N_; ++i) {
    for (int k = 0; k < n; ++k) {
      const double yk = y[i * n + k];
      if (yk == 0.0) continue;
      const double* row = ev.jac.data() + (static_cast<std::size_t>(i) * n + k) * width;
      if (i > 0) {
        for (int m = 0; m < n; ++m) g[x_offset(i) + m] += yk * row[m];
      }
      if (i + 1 < N_) {
        for (int m = 0; m < n; ++m) g[x_offset(i + 1) + m] += yk * row[n + m];
      }
      for (int j = 0; j < r; ++j) g[u_offset(i) + j] += yk * row[2 * n + j];
    }
  }
}

// ---------------------------------------------------------------------------
// Augmented Lagrangian

namespace {

struct Merit {
  double value = 0.0;
  std::vector<double> grad;
  std::vector<double> c;
  double cost = 0.0;
};

Merit merit(const Transcription& tr, const std::vector<double>& z, const std::vector<double>& lambda, double rho) {
  const Transcription::Evaluation ev = tr.evaluate(z);
  Merit m;
  m.cost = ev.cost;
  m.c = ev.c;
  std::vector<double> y(ev.c.size());
  double pen = 0.0;
  double lin = 0.0;
  for (std::size_t i = 0; i < ev.c.size(); ++i) {
    y[i] = lambda[i] + rho * ev.c[i];
    lin += lambda[i] * ev.c[i];
    pen += ev.c[i] * ev.c[i];
  }
  m.value = ev.cost + lin + 0.5 * rho * pen;
  m.grad = ev.cost_grad;
  tr.add_jt(ev, y, m.grad);
  return m;
}

// Hessian of the merit by forward differences of its gradient. Variables of
// nodes i-1, i, i+1 are the only ones coupled to node i, so nodes are perturbed
// three colours at a time.
Eigen::MatrixXd merit_hessian(const Transcription& tr, const std::vector<double>& z, const std::vector<double>& lambda,
                              double rho, const std::vector<double>& g0) {
  const int n = tr.problem().n;
  const int r = tr.problem().r;
  const int N = tr.intervals();
  const std::size_t m = z.size();
  // Node of each variable.
  std::vector<int> node(m);
  std::vector<int> comp(m);
  for (int i = 1; i < N; ++i) {
    for (int k = 0; k < n; ++k) {
      node[(i - 1) * n + k] = i;
      comp[(i - 1) * n + k] = k;
    }
  }
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < r; ++j) {
      node[(N - 1) * n + i * r + j] = i;
      comp[(N - 1) * n + i * r + j] = n + j;
    }
  }
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (int colour = 0; colour < 3; ++colour) {
    for (int c = 0; c < n + r; ++c) {
      std::vector<std::size_t> group;
      for (std::size_t v = 0; v < m; ++v) {
        if (node[v] % 3 == colour && comp[v] == c) group.push_back(v);
      }
      if (group.empty()) continue;
      std::vector<double> eps(m, 0.0);
      for (std::size_t v : group) eps[v] = 1e-7 * std::max(1.0, std::abs(z[v]));
      std::vector<double> g1;
      for (double sign : {1.0, -1.0}) {
        std::vector<double> zp = z;
        for (std::size_t v : group) zp[v] += sign * eps[v];
        try {
          g1 = merit(tr, zp, lambda, rho).grad;
          for (std::size_t v : group) eps[v] *= sign;
          break;
        } catch (const DomainError&) {
          g1.clear();
        }
      }
      if (g1.empty()) continue;
      for (std::size_t row = 0; row < m; ++row) {
        const double dg = g1[row] - g0[row];
        if (dg == 0.0) continue;
        // The perturbed variable coupled to `row` is the one at a node within one of row's node.
        for (std::size_t v : group) {
          if (std::abs(node[v] - node[row]) <= 1) {
            H(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(v)) = dg / eps[v];
            break;
          }
        }
      }
    }
  }
  return 0.5 * (H + H.transpose());
}

// Newton direction on H + mu I, raising mu until the factorization succeeds.
std::vector<double> newton_direction(const Eigen::MatrixXd& H, const std::vector<double>& g) {
  const Eigen::Index m = H.rows();
  Eigen::VectorXd rhs(m);
  for (Eigen::Index i = 0; i < m; ++i) rhs(i) = -g[static_cast<std::size_t>(i)];
  const double scale = std::max(1e-12, H.diagonal().cwiseAbs().maxCoeff());
  double mu = 0.0;
  for (int attempt = 0; attempt < 40; ++attempt) {
    Eigen::MatrixXd A = H;
    A.diagonal().array() += mu;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) {
      const Eigen::VectorXd d = llt.solve(rhs);
      if (d.allFinite()) return {d.data(), d.data() + m};
    }
    mu = mu == 0.0 ? 1e-10 * scale : mu * 10.0;
  }
  return {};
}

// Damped Newton with Armijo backtracking. Returns the number of iterations.
int inner_solve(const Transcription& tr, std::vector<double>& z, const std::vector<double>& lambda, double rho,
                double tol, int budget, Merit& cur, std::vector<double>& history) {
  history.push_back(cur.value);
  int it = 0;
  while (it < budget && inf_norm(cur.grad) > tol) {
    std::vector<double> d = newton_direction(merit_hessian(tr, z, lambda, rho, cur.grad), cur.grad);
    double slope = d.empty() ? 0.0 : dot(cur.grad, d);
    if (!(slope < 0.0)) {
      d = cur.grad;
      for (double& v : d) v = -v;
      slope = dot(cur.grad, d);
    }
    double step = 1.0;
    bool accepted = false;
    Merit next;
    std::vector<double> trial(z.size());
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t q = 0; q < z.size(); ++q) trial[q] = z[q] + step * d[q];
      try {
        next = merit(tr, trial, lambda, rho);
        if (std::isfinite(next.value) && next.value <= cur.value + 1e-4 * step * slope) {
          accepted = true;
          break;
        }
      } catch (const DomainError&) {
        // Outside the domain or inside a kink guard band: shorten the step.
      }
      step *= 0.5;
    }
    ++it;
    if (!accepted) break;
    z = trial;
    cur = std::move(next);
    history.push_back(cur.value);
  }
  return it;
}

}  // namespace

SolveResult solve(const Transcription& tr, const std::vector<double>& init, const SolveOptions& opts) {
  if (init.size() != tr.size()) throw DimensionError("initial decision vector has wrong length");
  if (!(opts.feas_tol > 0.0) || !(opts.opt_tol > 0.0)) throw InvariantError("solver tolerances must be positive");
  std::vector<double> z = init;
  std::vector<double> lambda(tr.constraint_count(), 0.0);
  double rho = opts.rho0;
  SolveResult res;
  Merit cur = merit(tr, z, lambda, rho);
  double prev_feas = inf_norm(cur.c);
  for (int outer = 0; outer < opts.max_outer; ++outer) {
    res.outer_iterations = outer + 1;
    std::vector<double> history;
    const int budget = opts.max_iter - res.iterations;
    res.iterations += inner_solve(tr, z, lambda, rho, opts.opt_tol, budget, cur, history);
    res.merit_history.push_back(std::move(history));
    const double feas = inf_norm(cur.c);
    const double gnorm = inf_norm(cur.grad);
    for (std::size_t i = 0; i < lambda.size(); ++i) lambda[i] += rho * cur.c[i];
    res.grad_norm = gnorm;
    if (feas <= opts.feas_tol && gnorm <= opts.opt_tol) {
      res.converged = true;
      res.message = "converged";
      break;
    }
    if (res.iterations >= opts.max_iter) {
      res.message = "iteration limit reached";
      break;
    }
    if (feas > 0.25 * prev_feas) rho = std::min(rho * opts.rho_factor, opts.rho_max);
    prev_feas = feas;
    cur = merit(tr, z, lambda, rho);
  }
  if (res.message.empty()) res.message = "outer iteration limit reached";
  res.pair = tr.unpack(z);
  res.cost = tr.cost(z);
  res.max_residual = inf_norm(tr.constraints(z));
  res.multipliers = lambda;
  res.psi = adjoint_estimate(tr, lambda);
  for (int i = 0; i < tr.intervals(); ++i) {
    double s = 0.0;
    for (double u : res.pair.u.row(i)) s += u * u;
    res.control_sup_norm = std::max(res.control_sup_norm, std::sqrt(s));
  }
  return res;
}

SolveResult solve(const Transcription& tr, const SolveOptions& opts) { return solve(tr, tr.default_init(), opts); }

GridFn adjoint_estimate(const Transcription& tr, const std::vector<double>& multipliers) {
  const int N = tr.intervals();
  const int n = tr.problem().n;
  if (multipliers.size() != tr.constraint_count()) throw DimensionError("multiplier vector has wrong length");
  GridFn psi(tr.nodes(), n);
  auto mid = [&](int i, int k) { return multipliers[i * n + k] / tr.step(); };
  for (int k = 0; k < n; ++k) {
    for (int i = 1; i < N; ++i) psi.at(i, k) = 0.5 * (mid(i - 1, k) + mid(i, k));
    psi.at(0, k) = 1.5 * mid(0, k) - 0.5 * mid(1, k);
    psi.at(N, k) = 1.5 * mid(N - 1, k) - 0.5 * mid(N - 2, k);
  }
  return psi;
}

// ---------------------------------------------------------------------------
// Boundedness diagnostic

BoundednessReport boundedness_diagnostic(const OCProblem& p, const std::vector<int>& Ns, const SolveOptions& opts) {
  if (Ns.size() < 2) throw InvariantError("boundedness diagnostic needs at least two grid sizes");
  for (std::size_t i = 1; i < Ns.size(); ++i) {
    if (!(Ns[i] > Ns[i - 1])) throw InvariantError("grid sizes must be increasing");
  }
  std::vector<std::future<SolveResult>> jobs;
  for (int N : Ns) {
    jobs.push_back(std::async(std::launch::async, [&p, N, &opts] { return solve(Transcription(p, N), opts); }));
  }
  BoundednessReport rep;
  rep.intervals = Ns;
  bool all = true;
  for (auto& job : jobs) {
    SolveResult r = job.get();
    rep.sup_norms.push_back(r.control_sup_norm);
    rep.costs.push_back(r.cost);
    rep.converged.push_back(r.converged);
    all = all && r.converged;
    rep.results.push_back(std::move(r));
  }
  for (std::size_t i = 1; i < rep.sup_norms.size(); ++i) {
    const double prev = rep.sup_norms[i - 1];
    rep.relative_changes.push_back(std::abs(rep.sup_norms[i] - prev) / std::max(prev, 1e-300));
  }
  if (!all) {
    rep.verdict = "not-converged";
  } else {
    rep.verdict = rep.relative_changes.back() <= kBoundedTol ? "bounded-stable" : "unstable";
  }
  return rep;
}

}  // namespace ocreg
