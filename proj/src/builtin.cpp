#include "ocreg/builtin.hpp"

#include <array>
#include <utility>

#include "ocreg/errors.hpp"

namespace ocreg {

namespace {

constexpr const char* kTorres = R"ocp(n = 2
r = 2
a = 0
b = 1
A = [0, 1]
B = [1, 1]
L = "(u1^2 + u2^2) * (exp(2*(x1 + x2)) + 1)"
phi1 = "sqrt(u1^2 + u2^2)"
phi2 = "u2 * exp(x1 + x2)"
)ocp";

constexpr const char* kBaseline = R"ocp(n = 1
r = 1
a = 0
b = 1
A = [0]
B = [1]
L = "u1^2"
phi1 = "u1"
)ocp";

constexpr const char* kLq = R"ocp(n = 1
r = 1
a = 0
b = 1
A = [0]
B = [1]
L = "u1^2 + x1^2"
phi1 = "u1"
)ocp";

constexpr std::array<std::pair<const char*, const char*>, 3> kTable{{
    {"torres-6.1", kTorres},
    {"baseline", kBaseline},
    {"lq", kLq},
}};

}  // namespace

std::vector<std::string> builtin_names() {
  std::vector<std::string> out;
  for (const auto& [name, text] : kTable) out.emplace_back(name);
  return out;
}

std::string builtin_text(const std::string& name) {
  for (const auto& [key, text] : kTable) {
    if (name == key) return text;
  }
  throw ValidationError("unknown example '" + name + "'");
}

OCProblem builtin_problem(const std::string& name) {
  OCProblem p = parse_problem(builtin_text(name), name);
  p.name = name;
  return p;
}

}  // namespace ocreg
