#pragma once

// Passage between admissible pairs (x, u) of the Lagrange problem and admissible
// quadruples (t, z, v, w) of its time-reparameterized form, where t is a state
// driven by t' = v with v in [0.5, 1.5].

#include <vector>

#include "ocreg/problem.hpp"

namespace ocreg {

/// Piecewise-constant time-change rate v on [a, b] (left value per cell) with
/// 0.5 <= v <= 1.5 and integral b - a. The integral is checked to 1e-12 and the
/// last cell value is then adjusted so that t(b) = b holds exactly.
class VProfile {
 public:
  static constexpr double kIntegralTol = 1e-12;

  VProfile(double a, double b, GridFn v);

  static VProfile identity(double a, double b);
  /// `low` before the break point and `high` after it, with the break placed so
  /// that the integral is b - a. Cells of the grid that contain the break carry
  /// the cell average.
  static VProfile two_step(double a, double b, double first, double second, int intervals);
  /// Equal-width segments with the given values.
  static VProfile segments(double a, double b, const std::vector<double>& values);

  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }
  const GridFn& grid() const noexcept { return v_; }
  bool is_identity() const noexcept { return identity_; }

  /// t(tau) = a + integral of v over [a, tau].
  double time_at(double tau) const;
  /// Inverse of time_at.
  double tau_at(double t) const;
  double value_at(double tau) const;
  /// Smallest and largest v on [lo, hi].
  std::pair<double, double> range(double lo, double hi) const;

 private:
  double a_;
  double b_;
  GridFn v_;
  std::vector<double> cumulative_;  // t at the profile nodes
  bool identity_ = false;
};

/// How lift_to_tau chooses the tau-grid.
enum class LiftGrid {
  /// tau-nodes are the preimages tau(t_i) of the pair's nodes. States and controls
  /// transfer node for node and the quadrature of the cost is preserved.
  Preimage,
  /// Uniform tau-grid with the pair's node count; z and w are read off the pair
  /// by its interpolation semantics.
  Uniform,
};

TauQuadruple lift_to_tau(const AdmissiblePair& pair, const VProfile& v, LiftGrid grid = LiftGrid::Preimage);

/// Location of t inside the t(tau) polyline of a quadruple.
struct Preimage {
  std::size_t cell = 0;  // tau-cell index
  double theta = 0.0;    // fraction within the cell, in [0, 1]
  double tau = 0.0;
};

/// Piecewise-linear inversion of t(tau) at each requested time.
std::vector<Preimage> invert_time(const TauQuadruple& q, const std::vector<double>& times);

/// (x, u) = (z, w) composed with tau(t), resampled on a uniform t-grid with the
/// same node count as q.
AdmissiblePair project_from_tau(const TauQuadruple& q);

/// The triple (t, z, v) = (tau, x(tau), 1) of the fixed-control problem with w = u.
struct CanonicalLift {
  TauQuadruple quad;
  GridFn t;
  GridFn z;
  GridFn v;
  FixedControlProblem fixed;
};

/// Lift with v = 1. Throws InvariantError when the pair fails check_admissible at `tol`.
CanonicalLift canonical_lift(const OCProblem& p, const AdmissiblePair& pair, double tol = 1e-6);

struct TransformReport {
  double cost_P = 0.0;
  double cost_Ptau = 0.0;
  double abs_diff = 0.0;
  double roundtrip_sup_error = 0.0;   // states
  double roundtrip_control_error = 0.0;
  bool lifted_admissible = false;
  bool projected_admissible = false;
};

TransformReport transform_report(const OCProblem& p, const AdmissiblePair& pair, const VProfile& v,
                                 double tol = 1e-6, LiftGrid grid = LiftGrid::Preimage);

}  // namespace ocreg
