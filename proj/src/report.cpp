#include "ocreg/report.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <sstream>

#include "ocreg/errors.hpp"

namespace ocreg {

namespace {

std::string number(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void dump(const Json& j, int depth, std::string& out) {
  const std::string pad(2 * (depth + 1), ' ');
  const std::string close(2 * depth, ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + Json(it.key()).dump() + ": ";
        dump(it.value(), depth + 1, out);
      }
      out += "\n" + close + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      bool flat = true;
      for (const Json& e : j) flat = flat && !e.is_structured();
      if (flat) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          dump(j[i], depth + 1, out);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        dump(j[i], depth + 1, out);
      }
      out += "\n" + close + "]";
      return;
    }
    case Json::value_t::number_float:
      out += number(j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

Json rows(const GridFn& f) {
  Json a = Json::array();
  for (std::size_t i = 0; i < f.size(); ++i) a.push_back(f.row_vec(i));
  return a;
}

Json box_json(const ControlBox& b) { return {{"lo", b.lo}, {"hi", b.hi}}; }

}  // namespace

std::string dump_json(const Json& j) {
  std::string out;
  dump(j, 0, out);
  out += "\n";
  return out;
}

Json to_json(const OCProblem& p) {
  Json phi = Json::array();
  for (const Expr& e : p.phi) phi.push_back(e.to_string());
  return {{"name", p.name}, {"n", p.n}, {"r", p.r}, {"a", p.a}, {"b", p.b}, {"A", p.A}, {"B", p.B},
          {"L", p.L.to_string()}, {"phi", phi}};
}

Json to_json(const Point& pt) { return {{"t", pt.t}, {"x", pt.x}, {"u", pt.u}}; }

Json to_json(const GridFn& f) { return {{"nodes", f.nodes()}, {"values", rows(f)}}; }

Json to_json(const AdmissibilityReport& r) {
  return {{"max_residual", r.max_residual}, {"boundary_error", r.boundary_error}, {"worst_interval", r.worst_interval},
          {"pass", r.pass}};
}

Json to_json(const TransformReport& r) {
  return {{"cost_P", r.cost_P},
          {"cost_Ptau", r.cost_Ptau},
          {"abs_diff", r.abs_diff},
          {"roundtrip_sup_error", r.roundtrip_sup_error},
          {"roundtrip_control_error", r.roundtrip_control_error},
          {"lifted_admissible", r.lifted_admissible},
          {"projected_admissible", r.projected_admissible}};
}

Json to_json(const GrowthReport& r) {
  Json conds = Json::array();
  for (const GrowthCondition& c : r.conditions) {
    conds.push_back({{"name", c.name},
                     {"c", c.c},
                     {"k", c.k},
                     {"c_fit", c.c_fit},
                     {"max_ratio", c.max_ratio},
                     {"witness", to_json(c.witness)},
                     {"witness_lhs", c.witness_lhs},
                     {"witness_rhs", c.witness_rhs},
                     {"escalation", c.escalation},
                     {"certified", c.certified},
                     {"verdict", c.verdict}});
  }
  return {{"mode", r.mode}, {"conditions", conds}, {"samples", r.samples}, {"skipped", r.skipped},
          {"verdict", r.verdict}};
}

Json to_json(const CoercivityReport& r) {
  Json levels = Json::array();
  for (const CoercivityLevel& l : r.levels) {
    Json shells = Json::array();
    for (const CoercivityShell& s : l.shells) {
      shells.push_back(
          {{"r_lo", s.r_lo}, {"r_hi", s.r_hi}, {"count", s.count}, {"theta", s.theta}, {"r_star", s.r_star}});
    }
    levels.push_back({{"factor", l.factor},
                      {"shells", shells},
                      {"min_theta", l.min_theta},
                      {"top_mean_theta_over_r", l.top_mean_theta_over_r},
                      {"edge_min_phi", l.edge_min_phi}});
  }
  return {{"levels", levels},
          {"slope", r.slope},
          {"top_min_quadratic", r.top_min_quadratic},
          {"top_max_quadratic", r.top_max_quadratic},
          {"bounded_below", r.bounded_below},
          {"superlinear", r.superlinear},
          {"edge_growth", r.edge_growth},
          {"empty_shells", r.empty_shells},
          {"verdict", r.verdict}};
}

Json to_json(const AffineGrowthReport& r) {
  Json j = {{"affine", r.affine},
            {"min_singular_value", r.min_singular_value},
            {"full_rank", r.full_rank},
            {"gamma", r.gamma},
            {"beta", r.beta},
            {"eta", r.eta},
            {"mu", r.mu},
            {"zeta", r.zeta},
            {"escalation", r.escalation},
            {"skipped", r.skipped},
            {"applicable", r.applicable},
            {"verdict", r.verdict}};
  if (!r.affine) {
    j["witness"] = to_json(r.witness);
    j["witness_component"] = r.witness_component;
    j["witness_second_diff"] = r.witness_second_diff;
  } else {
    j["rank_witness"] = to_json(r.rank_witness);
  }
  return j;
}

Json to_json(const AlphaReport& r) {
  return {{"tau", r.tau},
          {"alpha", r.alpha},
          {"integral", r.integral},
          {"lipschitz_max", r.lipschitz_max},
          {"verdict", r.verdict}};
}

Json to_json(const ExtremalReport& r) {
  return {{"adjoint_residual", r.adjoint_residual},
          {"worst_gap", r.worst_gap},
          {"worst_node", r.worst_node},
          {"argmax_found", r.argmax_found},
          {"hamiltonian_zero_level_max", r.hamiltonian_zero_level_max},
          {"tau_adjoint_residual", r.tau_adjoint_residual},
          {"abnormal", r.abnormal},
          {"box", box_json(r.box)}};
}

Json to_json(const SolveResult& r, bool trajectory) {
  Json merit_last = Json::array();
  for (const auto& h : r.merit_history) merit_last.push_back(h.empty() ? 0.0 : h.back());
  Json j = {{"cost", r.cost},
            {"max_residual", r.max_residual},
            {"grad_norm", r.grad_norm},
            {"iterations", r.iterations},
            {"outer_iterations", r.outer_iterations},
            {"converged", r.converged},
            {"control_sup_norm", r.control_sup_norm},
            {"intervals", r.pair.x.intervals()},
            {"merit_per_outer", merit_last},
            {"message", r.message}};
  if (trajectory) {
    j["t"] = r.pair.x.nodes();
    j["x"] = rows(r.pair.x);
    j["u"] = rows(r.pair.u);
    j["psi"] = rows(r.psi);
    j["multipliers"] = r.multipliers;
  }
  return j;
}

Json to_json(const BoundednessReport& r) {
  Json solves = Json::array();
  for (const SolveResult& s : r.results) solves.push_back(to_json(s));
  return {{"intervals", r.intervals},         {"sup_norms", r.sup_norms},
          {"costs", r.costs},                 {"relative_changes", r.relative_changes},
          {"converged", Json(r.converged)},   {"solves", solves},
          {"verdict", r.verdict}};
}

std::string trajectory_csv(const AdmissiblePair& pair) {
  std::string out = "t";
  for (int k = 0; k < pair.x.dim(); ++k) out += ",x" + std::to_string(k + 1);
  for (int j = 0; j < pair.u.dim(); ++j) out += ",u" + std::to_string(j + 1);
  out += "\n";
  for (std::size_t i = 0; i < pair.x.size(); ++i) {
    out += number(pair.x.node(i));
    for (double v : pair.x.row(i)) out += "," + number(v);
    for (double v : pair.u.row(i)) out += "," + number(v);
    out += "\n";
  }
  return out;
}

AdmissiblePair read_trajectory_csv(const OCProblem& p, std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> nodes;
  std::vector<double> xs;
  std::vector<double> us;
  const std::size_t cols = 1 + p.n + p.r;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line[0] == 't') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::logic_error&) {
        throw ValidationError("bad number '" + cell + "' in trajectory", {}, lineno);
      }
    }
    if (row.size() != cols) {
      throw DimensionError("trajectory row " + std::to_string(lineno) + " has " + std::to_string(row.size()) +
                           " columns, expected " + std::to_string(cols));
    }
    nodes.push_back(row[0]);
    xs.insert(xs.end(), row.begin() + 1, row.begin() + 1 + p.n);
    us.insert(us.end(), row.begin() + 1 + p.n, row.end());
  }
  if (nodes.size() < 2) throw ValidationError("trajectory needs at least two rows");
  return {GridFn(nodes, xs, p.n), GridFn(nodes, us, p.r)};
}

}  // namespace ocreg
