#pragma once

#include <string>
#include <vector>

#include "ocreg/problem.hpp"

namespace ocreg {

/// Names accepted by builtin_problem: "torres-6.1", "baseline", "lq".
std::vector<std::string> builtin_names();

/// Problem-file text of a bundled problem. Throws ValidationError for unknown names.
std::string builtin_text(const std::string& name);
OCProblem builtin_problem(const std::string& name);

}  // namespace ocreg
