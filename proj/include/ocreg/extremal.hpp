#pragma once

// Hamiltonians of the Lagrange problem and of its reparameterized form,
// adjoint residuals, maximality checks on a control box, and the passage of
// extremals between the two problems.
//
// With H = psi0 L + psi . phi, the reparameterized Hamiltonian is
// (p0 L + p_t + p_z . phi) v = (H + p_t) v, so its t- and z-partials are v times
// those of H. Lifting sets p_t = -H along the extremal, which puts the lifted
// object on the zero level of the reparameterized Hamiltonian for every v.

#include <optional>
#include <string>
#include <vector>

#include "ocreg/problem.hpp"
#include "ocreg/transform.hpp"

namespace ocreg {

/// Admissible pair with cost multiplier psi0 <= 0 and adjoint psi on the pair's nodes.
class Extremal {
 public:
  /// Throws InvariantError when psi0 > 0 or all multipliers vanish. A normal
  /// extremal (psi0 < 0) is scaled to psi0 = -1; an abnormal one to max|psi| = 1.
  static Extremal make(AdmissiblePair pair, double psi0, GridFn psi);

  const AdmissiblePair& pair() const noexcept { return pair_; }
  double psi0() const noexcept { return psi0_; }
  const GridFn& psi() const noexcept { return psi_; }
  bool abnormal() const noexcept { return psi0_ == 0.0; }

 private:
  Extremal(AdmissiblePair pair, double psi0, GridFn psi)
      : pair_(std::move(pair)), psi0_(psi0), psi_(std::move(psi)) {}
  AdmissiblePair pair_;
  double psi0_;
  GridFn psi_;
};

/// Admissible quadruple with multipliers p0 <= 0, p_t and p_z on the tau-grid.
class TauExtremal {
 public:
  static TauExtremal make(TauQuadruple quad, double p0, GridFn p_t, GridFn p_z);

  const TauQuadruple& quad() const noexcept { return quad_; }
  double p0() const noexcept { return p0_; }
  const GridFn& p_t() const noexcept { return p_t_; }
  const GridFn& p_z() const noexcept { return p_z_; }
  bool abnormal() const noexcept { return p0_ == 0.0; }

 private:
  TauExtremal(TauQuadruple quad, double p0, GridFn p_t, GridFn p_z)
      : quad_(std::move(quad)), p0_(p0), p_t_(std::move(p_t)), p_z_(std::move(p_z)) {}
  TauQuadruple quad_;
  double p0_;
  GridFn p_t_;
  GridFn p_z_;
};

double hamiltonian_P(const OCProblem& p, const Point& pt, double psi0, std::span<const double> psi);

/// (hamiltonian_P + p_t) v. Throws InvariantError when v is outside [0.5, 1.5].
double hamiltonian_Ptau(const OCProblem& p, const Point& pt, double v, double p0, double p_t,
                        std::span<const double> p_z);

/// H with its t- and x-partials. Control partials are left empty so that kinks
/// in u do not block state derivatives.
struct HamiltonianPartials {
  double value = 0.0;
  double d_dt = 0.0;
  std::vector<double> d_dx;
};

/// Partials of H from a full gradient sweep of L and each phi_i.
HamiltonianPartials hamiltonian_P_partials(const OCProblem& p, const Point& pt, double psi0,
                                           std::span<const double> psi);

/// Partials of the reparameterized Hamiltonian in (t, z), from one dual sweep per
/// channel of the product (p0 L + p_t + p_z . phi) v.
HamiltonianPartials hamiltonian_Ptau_partials(const OCProblem& p, const Point& pt, double v, double p0, double p_t,
                                              std::span<const double> p_z);

/// max over intervals of |(psi_{i+1} - psi_i)/h + dH/dx(midpoint)|_inf.
double adjoint_residual_P(const OCProblem& p, const Extremal& e);
/// Same for (p_t, p_z) against v dH/dt and v dH/dx.
double adjoint_residual_Ptau(const OCProblem& p, const TauExtremal& te);

/// Axis-aligned control box.
struct ControlBox {
  std::vector<double> lo;
  std::vector<double> hi;

  static ControlBox uniform(int r, double lo, double hi);
  bool contains(std::span<const double> u) const;
};

struct MaximalityReport {
  double worst_gap = 0.0;
  int worst_node = -1;
  std::vector<double> argmax_found;
  ControlBox box;
  int grid = 0;
};

/// For each control node, samples H over a uniform grid of `grid` points per
/// axis on the box, then refines twice around the best point (spacing halved
/// each pass). The gap is the sampled supremum minus H at the candidate.
/// Ties between nodes go to the lowest index. Only the box is searched.
MaximalityReport maximality_check_P(const OCProblem& p, const Extremal& e, const ControlBox& box, int grid = 81);

/// Same for the reparameterized problem, searching (w, v) in box x [0.5, 1.5].
MaximalityReport maximality_check_Ptau(const OCProblem& p, const TauExtremal& te, const ControlBox& box,
                                       int grid = 81);

TauExtremal lift_extremal(const OCProblem& p, const Extremal& e, const VProfile& v,
                          LiftGrid grid = LiftGrid::Preimage);
Extremal project_extremal(const OCProblem& p, const TauExtremal& te);

/// Max over nodes of |(H + p_t) v|.
double zero_level_max(const OCProblem& p, const TauExtremal& te);
/// Max over nodes of |H| along the lifted pair, the scale of the zero-level test.
double hamiltonian_scale(const OCProblem& p, const TauExtremal& te);

/// True when the cost multiplier vanishes. Throws InvariantError for all-zero multipliers.
bool classify_abnormal(const Extremal& e);
bool classify_abnormal(const TauExtremal& te);

struct ExtremalReport {
  double adjoint_residual = 0.0;
  double worst_gap = 0.0;
  int worst_node = -1;
  std::vector<double> argmax_found;
  double hamiltonian_zero_level_max = 0.0;
  double tau_adjoint_residual = 0.0;
  bool abnormal = false;
  ControlBox box;
};

/// Adjoint residual, maximality gap on `box`, and the zero level of the lift under `v`.
ExtremalReport verify_extremal(const OCProblem& p, const Extremal& e, const ControlBox& box, const VProfile& v,
                               int grid = 81);

}  // namespace ocreg
