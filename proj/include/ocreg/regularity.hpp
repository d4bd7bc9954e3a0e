#pragma once

// Sampled checks of the hypotheses under which minimizing controls are bounded:
// Tonelli-Morrey type growth bounds, coercivity of L in |phi|, integrable bounds
// on state derivatives along a control, and the control-affine growth
// condition. Every verdict is relative to the sampled box; enlarging the
// control box (x2, x4 about its centre) is used to tell a bound that holds
// from one that only holds because the box is small.

#include <cstdint>
#include <string>
#include <vector>

#include "ocreg/problem.hpp"

namespace ocreg {

/// Domain sampled for "for all (t, x, u)" statements.
struct SampleBox {
  double t_lo = 0.0;
  double t_hi = 1.0;
  std::vector<double> x_lo;
  std::vector<double> x_hi;
  std::vector<double> u_lo;
  std::vector<double> u_hi;
  int count = 2000;  // low-discrepancy points on top of the 3^(1+n+r) factorial grid
  std::uint64_t seed = 1;

  /// t over [a, b], every state in [x_lo, x_hi], every control in [u_lo, u_hi].
  static SampleBox make(const OCProblem& p, double x_lo, double x_hi, double u_lo, double u_hi, int count = 2000,
                        std::uint64_t seed = 1);
  /// Throws InvariantError for empty intervals or count < 1.
  void validate() const;
  /// Same box with the control intervals scaled by `factor` about their centres.
  SampleBox scaled_u(double factor) const;
};

/// Factorial grid {lo, mid, hi} on every axis followed by `count` points of a
/// randomly shifted Halton sequence.
std::vector<Point> sample_points(const SampleBox& box);

/// Smallest value with two significant digits that is >= x (0 for x <= 0).
double ceil_2sig(double x);

inline constexpr double kCertifyTol = 1e-9;
inline constexpr double kRatioFloor = 1e-12;

/// One inequality lhs <= c * rhs + k.
struct GrowthCondition {
  std::string name;
  double c = 0.0;
  double k = 0.0;
  double c_fit = 0.0;           // unrounded max ratio for the chosen k
  double max_ratio = 0.0;       // max of lhs / max(rhs, 1e-12)
  Point witness;                // sample attaining max_ratio
  double witness_lhs = 0.0;
  double witness_rhs = 0.0;
  std::vector<double> escalation;  // fitted c for the chosen k on the x1, x2, x4 boxes
  bool certified = false;       // (c, k) holds at every sample
  std::string verdict;          // "satisfied-on-box" or "suspect"
};

struct GrowthReport {
  std::string mode;  // "theorem53" or "tonelli_morrey_cv"
  std::vector<GrowthCondition> conditions;
  int samples = 0;
  int skipped = 0;
  std::string verdict;
};

/// |dL/dt| <= c|L| + k, |dL/dx_j| <= c|L| + k for each j, |dphi/dt| <= c|phi| + k,
/// |dphi_i/dx_j| <= c|phi_i| + k for each i, j. c is the max ratio for each k in
/// {0, 1, 10, 100} and for k = max lhs with c = 0; the pair with the smallest
/// c + k (then smallest c) is reported after rounding c up to two digits.
/// Non-differentiable samples are skipped; more than 1% skipped throws.
GrowthReport check_growth_theorem53(const OCProblem& p, const SampleBox& box);

/// |dL/dx| + |dL/du| <= c|L| + k for problems with x' = u. Throws
/// ValidationError when the dynamics are not the control itself.
GrowthReport check_growth_tonelli_morrey_cv(const OCProblem& p, const SampleBox& box);

/// Re-checks the reported (c, k) of every condition on the given box.
bool recheck_growth(const OCProblem& p, const GrowthReport& rep, const SampleBox& box);

struct CoercivityShell {
  double r_lo = 0.0;
  double r_hi = 0.0;
  int count = 0;
  double theta = 0.0;   // min L over samples in the shell
  double r_star = 0.0;  // |phi| at that sample
};

struct CoercivityLevel {
  double factor = 1.0;
  std::vector<CoercivityShell> shells;
  double min_theta = 0.0;
  double top_mean_theta_over_r = 0.0;  // mean of theta / r* over the top half of nonempty shells
  double edge_min_phi = 0.0;           // min |phi| over samples with u on the box boundary
};

struct CoercivityReport {
  std::vector<CoercivityLevel> levels;  // x1, x2, x4
  double slope = 0.0;                   // least-squares slope of theta / r* against r* (top half, x1)
  double top_min_quadratic = 0.0;       // min and max of theta / r*^2 over the top half, x1
  double top_max_quadratic = 0.0;
  bool bounded_below = false;
  bool superlinear = false;
  bool edge_growth = false;
  int empty_shells = 0;
  std::string verdict;  // "pass" or "fail"
};

/// Lower envelope of L over shells of |phi|. Throws InvariantError for shells < 4.
CoercivityReport check_coercivity(const OCProblem& p, const SampleBox& box, int shells = 16);

struct AffineGrowthReport {
  bool affine = true;
  Point witness;                  // where a second difference exceeded the threshold
  int witness_component = -1;
  double witness_second_diff = 0.0;
  double min_singular_value = 0.0;
  Point rank_witness;
  bool full_rank = false;
  double gamma = 0.0;
  double beta = 0.0;
  double eta = 0.0;
  double mu = 0.0;
  double zeta = 0.0;  // min L over the samples
  std::vector<double> escalation;  // gamma on the x1, x2, x4 boxes
  int skipped = 0;
  bool applicable = false;
  std::string verdict;  // "applicable" or "inapplicable"
};

/// Second-difference affinity test in u at 20 seeded (t, x) points, rank of the
/// control matrix, and a grid fit of the growth condition for affine systems.
AffineGrowthReport check_affine(const OCProblem& p, const SampleBox& box);

struct AlphaReport {
  std::vector<double> tau;
  std::vector<double> alpha;
  double integral = 0.0;
  double lipschitz_max = 0.0;
  std::string verdict;  // "finite" or "infinite"
};

/// alpha(tau) = max over x in the box of |dL/dx| and |dphi_i/dx| at (tau, x, w(tau)).
AlphaReport check_alpha_bound(const OCProblem& p, const GridFn& w, const std::vector<double>& x_lo,
                              const std::vector<double>& x_hi, int count = 200, std::uint64_t seed = 1);

}  // namespace ocreg
