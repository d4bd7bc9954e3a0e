#pragma once

// Direct transcription on a uniform grid: trapezoidal cost, midpoint
// collocation of the dynamics, solved by an augmented Lagrangian whose inner
// problems use damped Newton steps with a backtracking line search.

#include <string>
#include <vector>

#include "ocreg/problem.hpp"

namespace ocreg {

/// Decision vector: states at nodes 1..N-1 (the end points are fixed to A and B),
/// then controls at nodes 0..N-1, node-major.
class Transcription {
 public:
  /// Throws DimensionError for intervals < 2.
  Transcription(OCProblem p, int intervals);

  const OCProblem& problem() const noexcept { return p_; }
  int intervals() const noexcept { return N_; }
  double step() const noexcept { return h_; }
  const std::vector<double>& nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>((N_ - 1) * p_.n + N_ * p_.r); }
  std::size_t constraint_count() const noexcept { return static_cast<std::size_t>(N_ * p_.n); }

  AdmissiblePair unpack(const std::vector<double>& z) const;
  std::vector<double> pack(const AdmissiblePair& pair) const;
  /// States linear between A and B; controls (B - A)/(b - a) when r = n, else 0.
  std::vector<double> default_init() const;

  double cost(const std::vector<double>& z) const;
  /// c_{i,k} = (x_{i+1,k} - x_{i,k})/h - phi_k(t_i + h/2, (x_i + x_{i+1})/2, u_i), interval-major.
  std::vector<double> constraints(const std::vector<double>& z) const;

  /// Cost, constraints and their first derivatives at z.
  struct Evaluation {
    double cost = 0.0;
    std::vector<double> cost_grad;
    std::vector<double> c;
    // Per interval, an n x (2n + r) row-major block of d c_i / d(x_i, x_{i+1}, u_i).
    std::vector<double> jac;
  };
  Evaluation evaluate(const std::vector<double>& z) const;
  /// g += J^T y.
  void add_jt(const Evaluation& ev, const std::vector<double>& y, std::vector<double>& g) const;

 private:
  int x_offset(int node) const { return (node - 1) * p_.n; }
  int u_offset(int node) const { return (N_ - 1) * p_.n + node * p_.r; }
  std::vector<double> state(const std::vector<double>& z, int node) const;
  std::vector<double> control(const std::vector<double>& z, int node) const;

  OCProblem p_;
  int N_;
  double h_;
  std::vector<double> nodes_;
};

struct SolveOptions {
  double feas_tol = 1e-6;
  double opt_tol = 1e-6;
  int max_iter = 2000;        // total inner iterations
  int max_outer = 40;
  double rho0 = 10.0;
  double rho_factor = 10.0;
  double rho_max = 1e9;
};

struct SolveResult {
  AdmissiblePair pair;
  double cost = 0.0;
  double max_residual = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  int outer_iterations = 0;
  bool converged = false;
  double control_sup_norm = 0.0;  // max over nodes of |u_i|
  std::vector<double> multipliers;  // constraint multipliers, interval-major
  GridFn psi;                       // adjoint estimate on the nodes, for psi0 = -1
  std::vector<std::vector<double>> merit_history;  // per outer iteration
  std::string message;
};

/// Deterministic given init and options. Domain errors at the initial point are
/// rethrown; inside the line search they shrink the step.
SolveResult solve(const Transcription& tr, const std::vector<double>& init, const SolveOptions& opts = {});
SolveResult solve(const Transcription& tr, const SolveOptions& opts = {});

/// psi at interval midpoints is multiplier / h; node values average the two
/// neighbouring midpoints and extrapolate linearly at the ends.
GridFn adjoint_estimate(const Transcription& tr, const std::vector<double>& multipliers);

struct BoundednessReport {
  std::vector<int> intervals;
  std::vector<double> sup_norms;
  std::vector<double> costs;
  std::vector<double> relative_changes;
  std::vector<bool> converged;
  std::vector<SolveResult> results;
  std::string verdict;  // "bounded-stable", "unstable" or "not-converged"
};

inline constexpr double kBoundedTol = 0.05;

/// Solves at each grid size (in parallel) and compares control sup-norms.
/// Throws InvariantError for fewer than two sizes or sizes not increasing.
BoundednessReport boundedness_diagnostic(const OCProblem& p, const std::vector<int>& Ns, const SolveOptions& opts = {});

}  // namespace ocreg
