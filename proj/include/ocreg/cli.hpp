#pragma once

// Command-line front end. Every command writes one JSON document to stdout or
// --out and returns 0 on success, 1 when a verdict fails and 2 on usage or
// evaluation errors.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ocreg/problem.hpp"

namespace ocreg {

struct RunConfig {
  std::string subcommand;
  std::string problem;  // file path or builtin name
  std::string which;    // check: growth | coercivity | affine | alpha
  std::string mode = "theorem53";
  std::vector<std::string> profile{"identity"};
  std::uint64_t seed = 1;
  std::vector<double> box_x{-2.0, 2.0};
  std::vector<double> box_u{-10.0, 10.0};
  std::vector<double> extremal_box{-4.0, 4.0};
  int shells = 16;
  int samples = 2000;
  int nodes = 0;  // 0 picks the command default
  double feas_tol = 1e-6;
  double opt_tol = 1e-6;
  int max_iter = 2000;
  double gap_tol = 1e-2;
  double adjoint_tol = 5e-2;
  std::string pair_path;  // trajectory CSV for cost, transform, alpha
  std::string out;
  std::string csv;

  /// Throws ValidationError for non-positive tolerances, empty boxes and the like.
  void validate() const;
};

/// Builtin name first, then a file path. Throws ValidationError when neither exists.
OCProblem resolve_problem(const std::string& source);

/// Parses `args` (without the program name) and runs the command.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ocreg
