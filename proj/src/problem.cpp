#include "ocreg/problem.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "ocreg/errors.hpp"

namespace ocreg {

// ---------------------------------------------------------------------------
// GridFn

GridFn::GridFn(std::vector<double> nodes, int dim)
    : GridFn(nodes, std::vector<double>(nodes.size() * static_cast<std::size_t>(std::max(dim, 0)), 0.0), dim) {}

GridFn::GridFn(std::vector<double> nodes, std::vector<double> values, int dim)
    : nodes_(std::move(nodes)), values_(std::move(values)), dim_(dim) {
  if (dim_ < 0) throw DimensionError("negative GridFn dimension");
  if (values_.size() != nodes_.size() * static_cast<std::size_t>(dim_)) {
    throw DimensionError("GridFn has " + std::to_string(values_.size()) + " values for " +
                         std::to_string(nodes_.size()) + " nodes of dimension " + std::to_string(dim_));
  }
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    if (!(nodes_[i] > nodes_[i - 1])) throw InvariantError("GridFn nodes must be strictly increasing");
  }
}

std::vector<double> GridFn::uniform_nodes(double a, double b, int intervals) {
  if (intervals < 1) throw DimensionError("a grid needs at least one interval");
  std::vector<double> s(intervals + 1);
  const double h = (b - a) / intervals;
  for (int i = 0; i <= intervals; ++i) s[i] = a + h * i;
  s.back() = b;
  return s;
}

void GridFn::set_row(std::size_t i, std::span<const double> v) {
  if (static_cast<int>(v.size()) != dim_) throw DimensionError("row has wrong dimension");
  std::copy(v.begin(), v.end(), values_.begin() + static_cast<std::ptrdiff_t>(i * dim_));
}

std::size_t GridFn::cell(double s) const {
  if (nodes_.size() < 2) throw DimensionError("GridFn needs at least two nodes");
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), s);
  if (it == nodes_.begin()) return 0;
  const std::size_t i = static_cast<std::size_t>(it - nodes_.begin()) - 1;
  return std::min(i, nodes_.size() - 2);
}

std::vector<double> GridFn::linear_at(double s) const {
  const std::size_t i = cell(s);
  const double w = std::clamp((s - nodes_[i]) / (nodes_[i + 1] - nodes_[i]), 0.0, 1.0);
  std::vector<double> out(dim_);
  for (int k = 0; k < dim_; ++k) {
    const double lo = at(i, k);
    const double hi = at(i + 1, k);
    out[k] = w == 0.0 ? lo : (w == 1.0 ? hi : lo + w * (hi - lo));
  }
  return out;
}

std::vector<double> GridFn::left_at(double s) const { return row_vec(cell(s)); }

// ---------------------------------------------------------------------------
// OCProblem

void OCProblem::validate() const {
  if (n < 1) throw ValidationError("state dimension must be at least 1", "n");
  if (r < 1) throw ValidationError("control dimension must be at least 1", "r");
  if (!std::isfinite(a) || !std::isfinite(b)) throw ValidationError("interval end points must be finite", "a");
  if (!(a < b)) throw ValidationError("interval must satisfy a < b", "b");
  if (static_cast<int>(A.size()) != n) throw ValidationError("A must have n entries", "A");
  if (static_cast<int>(B.size()) != n) throw ValidationError("B must have n entries", "B");
  if (static_cast<int>(phi.size()) != n) throw ValidationError("need one dynamics expression per state", "phi");
  if (L.empty()) throw ValidationError("missing Lagrangian", "L");
  if (L.n() != n || L.r() != r) throw ValidationError("Lagrangian declared with wrong dimensions", "L");
  for (int i = 0; i < n; ++i) {
    if (phi[i].n() != n || phi[i].r() != r) {
      throw ValidationError("dynamics declared with wrong dimensions", "phi" + std::to_string(i + 1));
    }
  }
}

std::vector<double> OCProblem::eval_phi(const Point& p) const {
  std::vector<double> out(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i) out[i] = phi[i].eval(p);
  return out;
}

// ---------------------------------------------------------------------------
// Problem file: `key = value` lines, `#` comments.

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

double parse_number(const std::string& text, const std::string& key, std::size_t line) {
  const std::string s = trim(text);
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ValidationError("expected a finite number, got '" + s + "'", key, line);
  }
  return v;
}

int parse_count(const std::string& text, const std::string& key, std::size_t line) {
  const std::string s = trim(text);
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ValidationError("expected an integer, got '" + s + "'", key, line);
  }
  return v;
}

std::vector<double> parse_list(const std::string& text, const std::string& key, std::size_t line) {
  const std::string s = trim(text);
  if (s.size() < 2 || s.front() != '[' || s.back() != ']') {
    throw ValidationError("expected a bracketed list like [0, 1]", key, line);
  }
  std::vector<double> out;
  const std::string inner = trim(std::string_view(s).substr(1, s.size() - 2));
  if (inner.empty()) return out;
  std::stringstream ss(inner);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number(item, key, line));
  return out;
}

std::string parse_quoted(const std::string& text, const std::string& key, std::size_t line) {
  const std::string s = trim(text);
  if (s.size() < 2 || s.front() != '"' || s.back() != '"' || s.find('"', 1) != s.size() - 1) {
    throw ValidationError("expected a double-quoted expression", key, line);
  }
  return s.substr(1, s.size() - 2);
}

struct Entry {
  std::string value;
  std::size_t line = 0;
};

}  // namespace

OCProblem parse_problem(std::string_view text, const std::string& source) {
  std::map<std::string, Entry> entries;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string line(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    // Strip comments that are not inside a quoted string.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    const std::string body = trim(line);
    if (body.empty()) {
      if (eol == text.size()) break;
      continue;
    }
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos) throw ValidationError("expected 'key = value'", {}, line_no);
    const std::string key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) throw ValidationError("empty key", {}, line_no);
    if (entries.contains(key)) throw ValidationError("duplicate key", key, line_no);
    entries[key] = Entry{body.substr(eq + 1), line_no};
    if (eol == text.size()) break;
  }

  auto require = [&](const std::string& key) -> const Entry& {
    auto it = entries.find(key);
    if (it == entries.end()) throw ValidationError("missing required key", key);
    return it->second;
  };

  OCProblem p;
  p.name = source;
  {
    const Entry& e = require("n");
    p.n = parse_count(e.value, "n", e.line);
    if (p.n < 1) throw ValidationError("state dimension must be at least 1", "n", e.line);
  }
  {
    const Entry& e = require("r");
    p.r = parse_count(e.value, "r", e.line);
    if (p.r < 1) throw ValidationError("control dimension must be at least 1", "r", e.line);
  }
  p.a = parse_number(require("a").value, "a", require("a").line);
  p.b = parse_number(require("b").value, "b", require("b").line);
  if (!(p.a < p.b)) throw ValidationError("interval must satisfy a < b", "b", require("b").line);
  p.A = parse_list(require("A").value, "A", require("A").line);
  p.B = parse_list(require("B").value, "B", require("B").line);
  if (static_cast<int>(p.A.size()) != p.n) throw ValidationError("A must have n entries", "A", require("A").line);
  if (static_cast<int>(p.B.size()) != p.n) throw ValidationError("B must have n entries", "B", require("B").line);

  auto expression = [&](const std::string& key) {
    const Entry& e = require(key);
    const std::string src = parse_quoted(e.value, key, e.line);
    try {
      return Expr::parse(src, p.n, p.r);
    } catch (const ParseError& err) {
      throw ValidationError(std::string("expression error: ") + err.what(), key, e.line);
    }
  };
  p.L = expression("L");
  for (int i = 1; i <= p.n; ++i) p.phi.push_back(expression("phi" + std::to_string(i)));

  for (const auto& [key, entry] : entries) {
    bool known = key == "n" || key == "r" || key == "a" || key == "b" || key == "A" || key == "B" || key == "L";
    for (int i = 1; i <= p.n && !known; ++i) known = key == "phi" + std::to_string(i);
    if (!known) throw ValidationError("unknown key", key, entry.line);
  }
  p.validate();
  return p;
}

OCProblem load_problem(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open problem file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  OCProblem p = parse_problem(ss.str(), path.string());
  p.name = path.stem().string();
  return p;
}

// ---------------------------------------------------------------------------
// Shapes and invariants

void check_shape(const OCProblem& p, const AdmissiblePair& pair) {
  if (pair.x.size() < 2) throw DimensionError("pair grid needs at least two nodes");
  if (pair.x.dim() != p.n) throw DimensionError("state grid has wrong dimension");
  if (pair.u.dim() != p.r) throw DimensionError("control grid has wrong dimension");
  if (pair.x.nodes() != pair.u.nodes()) throw DimensionError("state and control grids differ");
}

void check_shape(const OCProblem& p, const TauQuadruple& q) {
  if (q.t.size() < 2) throw DimensionError("quadruple grid needs at least two nodes");
  if (q.t.dim() != 1 || q.v.dim() != 1) throw DimensionError("t and v must be scalar");
  if (q.z.dim() != p.n) throw DimensionError("z grid has wrong dimension");
  if (q.w.dim() != p.r) throw DimensionError("w grid has wrong dimension");
  const auto& s = q.t.nodes();
  if (q.z.nodes() != s || q.v.nodes() != s || q.w.nodes() != s) throw DimensionError("quadruple grids differ");
}

void check_tau_invariants(const OCProblem& p, const TauQuadruple& q) {
  check_shape(p, q);
  const std::size_t m = q.t.size();
  for (std::size_t j = 0; j < m; ++j) {
    const double v = q.v.at(j, 0);
    if (!(v >= kVMin && v <= kVMax)) {
      throw InvariantError("v = " + std::to_string(v) + " outside [0.5, 1.5] at node " + std::to_string(j));
    }
  }
  for (std::size_t j = 1; j < m; ++j) {
    if (!(q.t.at(j, 0) > q.t.at(j - 1, 0))) throw InvariantError("t is not strictly increasing");
  }
  const double scale = std::max(1.0, std::abs(p.b - p.a));
  double integral = 0.0;
  for (std::size_t j = 0; j + 1 < m; ++j) integral += q.v.at(j, 0) * (q.t.node(j + 1) - q.t.node(j));
  if (std::abs(integral - (p.b - p.a)) > 1e-12 * scale * static_cast<double>(m)) {
    throw InvariantError("integral of v is " + std::to_string(integral) + ", expected b - a");
  }
  if (std::abs(q.t.at(0, 0) - p.a) > 1e-12 * scale || std::abs(q.t.at(m - 1, 0) - p.b) > 1e-12 * scale) {
    throw InvariantError("t(a) = a and t(b) = b violated");
  }
}

// ---------------------------------------------------------------------------
// Costs and residuals

double cost_P(const OCProblem& p, const AdmissiblePair& pair) {
  check_shape(p, pair);
  double sum = 0.0;
  Point lo{0.0, {}, {}};
  Point hi{0.0, {}, {}};
  for (int i = 0; i < pair.x.intervals(); ++i) {
    const double h = pair.x.node(i + 1) - pair.x.node(i);
    lo = Point{pair.x.node(i), pair.x.row_vec(i), pair.u.row_vec(i)};
    hi = Point{pair.x.node(i + 1), pair.x.row_vec(i + 1), pair.u.row_vec(i)};
    sum += 0.5 * h * (p.L.eval(lo) + p.L.eval(hi));
  }
  return sum;
}

double cost_Ptau(const OCProblem& p, const TauQuadruple& q) {
  check_tau_invariants(p, q);
  double sum = 0.0;
  for (int j = 0; j < q.t.intervals(); ++j) {
    const double h = q.t.node(j + 1) - q.t.node(j);
    const double v = q.v.at(j, 0);
    const Point lo{q.t.at(j, 0), q.z.row_vec(j), q.w.row_vec(j)};
    const Point hi{q.t.at(j + 1, 0), q.z.row_vec(j + 1), q.w.row_vec(j)};
    sum += 0.5 * h * (p.L.eval(lo) * v + p.L.eval(hi) * v);
  }
  return sum;
}

AdmissibilityReport check_admissible(const OCProblem& p, const AdmissiblePair& pair, double tol) {
  check_shape(p, pair);
  AdmissibilityReport rep;
  const std::size_t last = pair.x.size() - 1;
  for (int k = 0; k < p.n; ++k) {
    rep.boundary_error = std::max(rep.boundary_error, std::abs(pair.x.at(0, k) - p.A[k]));
    rep.boundary_error = std::max(rep.boundary_error, std::abs(pair.x.at(last, k) - p.B[k]));
  }
  for (int i = 0; i < pair.x.intervals(); ++i) {
    const double h = pair.x.node(i + 1) - pair.x.node(i);
    Point mid{0.5 * (pair.x.node(i) + pair.x.node(i + 1)), std::vector<double>(p.n), pair.u.row_vec(i)};
    for (int k = 0; k < p.n; ++k) mid.x[k] = 0.5 * (pair.x.at(i, k) + pair.x.at(i + 1, k));
    const std::vector<double> f = p.eval_phi(mid);
    double res = 0.0;
    for (int k = 0; k < p.n; ++k) res = std::max(res, std::abs((pair.x.at(i + 1, k) - pair.x.at(i, k)) / h - f[k]));
    if (rep.worst_interval < 0 || res > rep.max_residual) {
      rep.max_residual = res;
      rep.worst_interval = i;
    }
  }
  rep.pass = rep.max_residual <= tol && rep.boundary_error <= tol;
  return rep;
}

AdmissibilityReport check_admissible(const OCProblem& p, const TauQuadruple& q, double tol) {
  check_shape(p, q);
  AdmissibilityReport rep;
  const std::size_t last = q.t.size() - 1;
  rep.boundary_error = std::max(std::abs(q.t.at(0, 0) - p.a), std::abs(q.t.at(last, 0) - p.b));
  for (int k = 0; k < p.n; ++k) {
    rep.boundary_error = std::max(rep.boundary_error, std::abs(q.z.at(0, k) - p.A[k]));
    rep.boundary_error = std::max(rep.boundary_error, std::abs(q.z.at(last, k) - p.B[k]));
  }
  bool in_box = true;
  for (std::size_t j = 0; j < q.v.size(); ++j) in_box = in_box && q.v.at(j, 0) >= kVMin && q.v.at(j, 0) <= kVMax;
  double worst = -1.0;
  for (int j = 0; j < q.t.intervals(); ++j) {
    const double h = q.t.node(j + 1) - q.t.node(j);
    const double v = q.v.at(j, 0);
    double res = std::abs((q.t.at(j + 1, 0) - q.t.at(j, 0)) / h - v);
    Point mid{0.5 * (q.t.at(j, 0) + q.t.at(j + 1, 0)), std::vector<double>(p.n), q.w.row_vec(j)};
    for (int k = 0; k < p.n; ++k) mid.x[k] = 0.5 * (q.z.at(j, k) + q.z.at(j + 1, k));
    const std::vector<double> f = p.eval_phi(mid);
    for (int k = 0; k < p.n; ++k) res = std::max(res, std::abs((q.z.at(j + 1, k) - q.z.at(j, k)) / h - f[k] * v));
    if (res > worst) {
      worst = res;
      rep.worst_interval = j;
    }
  }
  rep.max_residual = std::max(worst, 0.0);
  rep.pass = in_box && rep.max_residual <= tol && rep.boundary_error <= tol;
  return rep;
}

// ---------------------------------------------------------------------------
// Fixed control

FixedControlProblem::FixedControlProblem(const OCProblem& base, GridFn w) : base_(base), w_(std::move(w)) {
  if (w_.dim() != base_.r) {
    throw DimensionError("fixed control has dimension " + std::to_string(w_.dim()) + ", problem has r = " +
                         std::to_string(base_.r));
  }
  if (w_.size() < 2) throw DimensionError("fixed control grid needs at least two nodes");
}

double FixedControlProblem::F(double tau, double t, std::span<const double> z, double v) const {
  const Point pt{t, std::vector<double>(z.begin(), z.end()), w_.left_at(tau)};
  return base_.L.eval(pt) * v;
}

std::vector<double> FixedControlProblem::f(double tau, double t, std::span<const double> z, double v) const {
  const Point pt{t, std::vector<double>(z.begin(), z.end()), w_.left_at(tau)};
  std::vector<double> out = base_.eval_phi(pt);
  for (double& c : out) c *= v;
  return out;
}

FixedControlProblem fix_control(const OCProblem& p, GridFn w) { return FixedControlProblem(p, std::move(w)); }

AdmissiblePair sample_pair(const OCProblem& p, int intervals,
                           const std::function<std::vector<double>(double)>& x,
                           const std::function<std::vector<double>(double)>& u) {
  const std::vector<double> s = GridFn::uniform_nodes(p.a, p.b, intervals);
  AdmissiblePair pair{GridFn(s, p.n), GridFn(s, p.r)};
  for (std::size_t i = 0; i < s.size(); ++i) {
    pair.x.set_row(i, x(s[i]));
    pair.u.set_row(i, u(i + 1 < s.size() ? s[i] : s[i - 1]));
  }
  // The last control row closes the grid with the value of the final cell.
  pair.u.set_row(s.size() - 1, pair.u.row(s.size() - 2));
  return pair;
}

}  // namespace ocreg
