#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ocreg/expr.hpp"

namespace ocreg {

/// Values sampled on a strictly increasing node vector, `dim` columns per node.
///
/// States are read piecewise-linearly between nodes. Controls are read
/// piecewise-constant: the value on [s_i, s_{i+1}) is the row at node i, and the
/// row at the last node only closes the grid (by convention a copy of row N-1).
class GridFn {
 public:
  GridFn() = default;
  GridFn(std::vector<double> nodes, int dim);
  GridFn(std::vector<double> nodes, std::vector<double> values, int dim);

  static std::vector<double> uniform_nodes(double a, double b, int intervals);

  std::size_t size() const noexcept { return nodes_.size(); }
  int intervals() const noexcept { return static_cast<int>(nodes_.size()) - 1; }
  int dim() const noexcept { return dim_; }
  const std::vector<double>& nodes() const noexcept { return nodes_; }
  const std::vector<double>& values() const noexcept { return values_; }
  double node(std::size_t i) const { return nodes_[i]; }
  double front() const { return nodes_.front(); }
  double back() const { return nodes_.back(); }

  double& at(std::size_t i, int k) { return values_[i * dim_ + k]; }
  double at(std::size_t i, int k) const { return values_[i * dim_ + k]; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * dim_, std::size_t(dim_)}; }
  std::vector<double> row_vec(std::size_t i) const { auto r = row(i); return {r.begin(), r.end()}; }
  void set_row(std::size_t i, std::span<const double> v);

  /// Cell index i with nodes[i] <= s < nodes[i+1]; s == back() maps to the last cell.
  std::size_t cell(double s) const;
  std::vector<double> linear_at(double s) const;
  std::vector<double> left_at(double s) const;

 private:
  std::vector<double> nodes_;
  std::vector<double> values_;
  int dim_ = 0;
};

/// Data of the Lagrange problem: interval, endpoints, Lagrangian and dynamics.
struct OCProblem {
  std::string name;
  int n = 0;
  int r = 0;
  double a = 0.0;
  double b = 1.0;
  std::vector<double> A;
  std::vector<double> B;
  Expr L;
  std::vector<Expr> phi;

  /// Throws ValidationError when a < b or the dimensions disagree.
  void validate() const;
  std::vector<double> eval_phi(const Point& p) const;
};

/// Grid-sampled (x, u) on a common node vector.
struct AdmissiblePair {
  GridFn x;
  GridFn u;
};

/// Grid-sampled (t, z, v, w) on a common tau-grid.
struct TauQuadruple {
  GridFn t;
  GridFn z;
  GridFn v;
  GridFn w;
};

inline constexpr double kVMin = 0.5;
inline constexpr double kVMax = 1.5;

/// Problem with the control frozen to `w`. The integrand and dynamics are
/// F(tau, t, z, v) = L(t, z, w(tau)) v and f(tau, t, z, v) = phi(t, z, w(tau)) v.
class FixedControlProblem {
 public:
  FixedControlProblem(const OCProblem& base, GridFn w);

  const OCProblem& base() const noexcept { return base_; }
  const GridFn& control() const noexcept { return w_; }
  double F(double tau, double t, std::span<const double> z, double v) const;
  std::vector<double> f(double tau, double t, std::span<const double> z, double v) const;

 private:
  OCProblem base_;
  GridFn w_;
};

struct AdmissibilityReport {
  double max_residual = 0.0;
  double boundary_error = 0.0;
  int worst_interval = -1;
  bool pass = false;
};

OCProblem parse_problem(std::string_view text, const std::string& source = "<string>");
OCProblem load_problem(const std::filesystem::path& path);

/// Throws DimensionError when the pair does not fit the problem.
void check_shape(const OCProblem& p, const AdmissiblePair& pair);
void check_shape(const OCProblem& p, const TauQuadruple& q);

/// Throws InvariantError unless 0.5 <= v <= 1.5, t(a) = a, t(b) = b, t strictly
/// increasing and the integral of v equals b - a.
void check_tau_invariants(const OCProblem& p, const TauQuadruple& q);

/// Trapezoid of L(t, x(t), u(t)); u on each interval is its left-node value.
double cost_P(const OCProblem& p, const AdmissiblePair& pair);
/// Trapezoid of L(t(tau), z(tau), w(tau)) v(tau), same conventions.
double cost_Ptau(const OCProblem& p, const TauQuadruple& q);

/// Midpoint residual max_i |(x_{i+1} - x_i)/h - phi(t_mid, x_mid, u_i)|_inf and
/// boundary mismatch |x(a) - A|, |x(b) - B|.
AdmissibilityReport check_admissible(const OCProblem& p, const AdmissiblePair& pair, double tol);
/// Residuals of t' = v and z' = phi v plus boundary and box violations.
AdmissibilityReport check_admissible(const OCProblem& p, const TauQuadruple& q, double tol);

FixedControlProblem fix_control(const OCProblem& p, GridFn w);

/// Pair sampled from closed-form x(t), u(t) on a uniform grid of `intervals` cells.
AdmissiblePair sample_pair(const OCProblem& p, int intervals,
                           const std::function<std::vector<double>(double)>& x,
                           const std::function<std::vector<double>(double)>& u);

}  // namespace ocreg
