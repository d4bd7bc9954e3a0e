#pragma once

// JSON views of the library's results and the trajectory CSV format. Dumps are
// deterministic: object keys sorted, numbers with 17 significant digits,
// non-finite numbers written as null.

#include <iosfwd>
#include <string>

#include "json.hpp"
#include "ocreg/extremal.hpp"
#include "ocreg/regularity.hpp"
#include "ocreg/solver.hpp"
#include "ocreg/transform.hpp"

namespace ocreg {

using Json = nlohmann::json;

/// Two-space indented dump with a trailing newline.
std::string dump_json(const Json& j);

Json to_json(const OCProblem& p);
Json to_json(const Point& pt);
Json to_json(const GridFn& f);
Json to_json(const AdmissibilityReport& r);
Json to_json(const TransformReport& r);
Json to_json(const GrowthReport& r);
Json to_json(const CoercivityReport& r);
Json to_json(const AffineGrowthReport& r);
Json to_json(const AlphaReport& r);
Json to_json(const ExtremalReport& r);
/// Without the trajectory unless `trajectory` is set.
Json to_json(const SolveResult& r, bool trajectory = false);
Json to_json(const BoundednessReport& r);

/// Header "t,x1..xn,u1..ur", one row per node, 17 significant digits.
std::string trajectory_csv(const AdmissiblePair& pair);
/// Reads the format written by trajectory_csv. Throws ValidationError on
/// malformed rows and DimensionError when the columns do not fit the problem.
AdmissiblePair read_trajectory_csv(const OCProblem& p, std::istream& in);

}  // namespace ocreg
