#include "ocreg/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "CLI11.hpp"
#include "ocreg/builtin.hpp"
#include "ocreg/errors.hpp"
#include "ocreg/report.hpp"

namespace ocreg {

namespace {

struct Outcome {
  Json doc;
  int code = 0;
};

constexpr int kFail = 1;
constexpr int kError = 2;

bool positive(double v) { return std::isfinite(v) && v > 0.0; }

void check_interval(const std::vector<double>& v, const std::string& flag) {
  if (v.size() != 2 || !(v[0] < v[1])) throw ValidationError(flag + " needs two values lo < hi", flag);
}

Json error_json(const std::exception& e) {
  Json j = {{"message", e.what()}};
  if (const auto* v = dynamic_cast<const ValidationError*>(&e)) {
    j["type"] = "validation";
    j["line"] = v->line();
    j["key"] = v->key();
  } else if (const auto* p = dynamic_cast<const ParseError*>(&e)) {
    j["type"] = "parse";
    j["offset"] = p->offset();
  } else if (dynamic_cast<const NonDifferentiableError*>(&e)) {
    j["type"] = "non-differentiable";
  } else if (dynamic_cast<const DomainError*>(&e)) {
    j["type"] = "domain";
  } else if (dynamic_cast<const DimensionError*>(&e)) {
    j["type"] = "dimension";
  } else if (dynamic_cast<const InvariantError*>(&e)) {
    j["type"] = "invariant";
  } else {
    j["type"] = "internal";
  }
  return j;
}

std::string sibling(const std::string& out, const std::string& suffix) {
  std::filesystem::path p(out);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write " + path);
  f << text;
}

int nodes_or(const RunConfig& cfg, int fallback) { return cfg.nodes > 0 ? cfg.nodes : fallback; }

SolveOptions solve_options(const RunConfig& cfg) {
  SolveOptions o;
  o.feas_tol = cfg.feas_tol;
  o.opt_tol = cfg.opt_tol;
  o.max_iter = cfg.max_iter;
  return o;
}

SampleBox sample_box(const OCProblem& p, const RunConfig& cfg) {
  return SampleBox::make(p, cfg.box_x[0], cfg.box_x[1], cfg.box_u[0], cfg.box_u[1], cfg.samples, cfg.seed);
}

// Pair from --pair, else the solver's default initial guess.
AdmissiblePair reference_pair(const OCProblem& p, const RunConfig& cfg, int fallback_nodes) {
  if (!cfg.pair_path.empty()) {
    std::ifstream f(cfg.pair_path);
    if (!f) throw ValidationError("cannot open trajectory " + cfg.pair_path);
    AdmissiblePair pair = read_trajectory_csv(p, f);
    check_shape(p, pair);
    return pair;
  }
  const Transcription tr(p, nodes_or(cfg, fallback_nodes));
  return tr.unpack(tr.default_init());
}

VProfile make_profile(const OCProblem& p, const std::vector<std::string>& spec, int intervals) {
  if (spec.size() == 1 && spec[0] == "identity") return VProfile::identity(p.a, p.b);
  if (spec.size() == 3 && spec[0] == "two-step") {
    double first = 0.0;
    double second = 0.0;
    try {
      first = std::stod(spec[1]);
      second = std::stod(spec[2]);
    } catch (const std::logic_error&) {
      throw ValidationError("two-step profile needs two numbers", "--profile");
    }
    return VProfile::two_step(p.a, p.b, first, second, intervals);
  }
  throw ValidationError("profile must be 'identity' or 'two-step P Q'", "--profile");
}

Json profile_json(const std::vector<std::string>& spec) {
  Json j = {{"kind", spec[0]}};
  if (spec.size() == 3) j["values"] = {std::stod(spec[1]), std::stod(spec[2])};
  return j;
}

double max_speed(const OCProblem& p, const AdmissiblePair& pair) {
  double m = 0.0;
  for (int i = 0; i < pair.x.intervals(); ++i) {
    double s = 0.0;
    for (double f : p.eval_phi(Point{pair.x.node(i), pair.x.row_vec(i), pair.u.row_vec(i)})) s += f * f;
    m = std::max(m, std::sqrt(s));
  }
  return m;
}

double max_cell(const GridFn& f) {
  double h = 0.0;
  for (int i = 0; i < f.intervals(); ++i) h = std::max(h, f.node(i + 1) - f.node(i));
  return h;
}

Json base_doc(const RunConfig& cfg, const OCProblem& p) {
  return {{"command", cfg.subcommand}, {"source", cfg.problem}, {"problem", p.name}};
}

// ---------------------------------------------------------------------------

Outcome cmd_validate(const RunConfig& cfg) {
  const OCProblem p = resolve_problem(cfg.problem);
  Json doc = base_doc(cfg, p);
  doc["definition"] = to_json(p);
  doc["n"] = p.n;
  doc["r"] = p.r;
  doc["valid"] = true;
  return {doc, 0};
}

Outcome cmd_cost(const RunConfig& cfg) {
  const OCProblem p = resolve_problem(cfg.problem);
  const AdmissiblePair pair = reference_pair(p, cfg, 100);
  const AdmissibilityReport adm = check_admissible(p, pair, cfg.feas_tol);
  Json doc = base_doc(cfg, p);
  doc["intervals"] = pair.x.intervals();
  doc["cost_P"] = cost_P(p, pair);
  doc["admissibility"] = to_json(adm);
  doc["tolerance"] = cfg.feas_tol;
  return {doc, adm.pass ? 0 : kFail};
}

Outcome cmd_transform(const RunConfig& cfg) {
  const OCProblem p = resolve_problem(cfg.problem);
  const AdmissiblePair pair = reference_pair(p, cfg, 400);
  const VProfile v = make_profile(p, cfg.profile, pair.x.intervals());
  const TransformReport rep = transform_report(p, pair, v, cfg.feas_tol);
  const double bound = 2.0 * max_cell(pair.x) * max_speed(p, pair);
  const double cost_tol = 1e-6 * (1.0 + std::abs(rep.cost_P));
  const bool pass = rep.abs_diff <= cost_tol && rep.roundtrip_sup_error <= bound && rep.lifted_admissible &&
                    rep.projected_admissible;
  Json doc = base_doc(cfg, p);
  doc["intervals"] = pair.x.intervals();
  doc["profile"] = profile_json(cfg.profile);
  doc["report"] = to_json(rep);
  doc["cost_tolerance"] = cost_tol;
  doc["roundtrip_bound"] = bound;
  doc["pass"] = pass;
  return {doc, pass ? 0 : kFail};
}

Outcome cmd_check(const RunConfig& cfg) {
  const OCProblem p = resolve_problem(cfg.problem);
  Json doc = base_doc(cfg, p);
  doc["check"] = cfg.which;
  doc["seed"] = cfg.seed;
  doc["box_x"] = cfg.box_x;
  doc["box_u"] = cfg.box_u;
  bool ok = false;
  if (cfg.which == "growth") {
    const SampleBox box = sample_box(p, cfg);
    GrowthReport rep;
    if (cfg.mode == "theorem53") {
      rep = check_growth_theorem53(p, box);
    } else if (cfg.mode == "tonelli-morrey") {
      rep = check_growth_tonelli_morrey_cv(p, box);
    } else {
      throw ValidationError("growth mode must be 'theorem53' or 'tonelli-morrey'", "--mode");
    }
    ok = rep.verdict == "satisfied-on-box";
    doc["report"] = to_json(rep);
  } else if (cfg.which == "coercivity") {
    const CoercivityReport rep = check_coercivity(p, sample_box(p, cfg), cfg.shells);
    ok = rep.verdict == "pass";
    doc["shells"] = cfg.shells;
    doc["report"] = to_json(rep);
  } else if (cfg.which == "affine") {
    const AffineGrowthReport rep = check_affine(p, sample_box(p, cfg));
    ok = rep.applicable;
    doc["report"] = to_json(rep);
  } else if (cfg.which == "alpha") {
    const AdmissiblePair pair = reference_pair(p, cfg, 100);
    const AlphaReport rep = check_alpha_bound(p, pair.u, std::vector<double>(p.n, cfg.box_x[0]),
                                              std::vector<double>(p.n, cfg.box_x[1]), std::max(1, cfg.samples / 10),
                                              cfg.seed);
    ok = rep.verdict == "finite";
    doc["report"] = to_json(rep);
  } else {
    throw ValidationError("check must be one of growth, coercivity, affine, alpha", "which");
  }
  doc["verdict"] = doc["report"]["verdict"];
  return {doc, ok ? 0 : kFail};
}

Outcome cmd_solve(const RunConfig& cfg) {
  const OCProblem p = resolve_problem(cfg.problem);
  const Transcription tr(p, cfg.pair_path.empty() ? nodes_or(cfg, 100) : reference_pair(p, cfg, 100).x.intervals());
  const std::vector<double> init = cfg.pair_path.empty() ? tr.default_init() : tr.pack(reference_pair(p, cfg, 100));
  const SolveResult r = solve(tr, init, solve_options(cfg));
  Json doc = base_doc(cfg, p);
  doc["result"] = to_json(r, true);
  doc["feas_tol"] = cfg.feas_tol;
  doc["opt_tol"] = cfg.opt_tol;
  doc["max_iter"] = cfg.max_iter;
  const std::string csv = !cfg.csv.empty() ? cfg.csv : (!cfg.out.empty() ? sibling(cfg.out, ".csv") : std::string());
  if (!csv.empty()) {
    write_file(csv, trajectory_csv(r.pair));
    doc["csv"] = csv;
  }
  return {doc, r.converged ? 0 : kFail};
}

struct ExtremalCheck {
  Json doc;
  bool pass = false;
};

// Extremal test of a solved pair with psi0 = -1 and psi from the collocation duals.
ExtremalCheck extremal_check(const OCProblem& p, const SolveResult& r, const RunConfig& cfg) {
  const Extremal e = Extremal::make(r.pair, -1.0, r.psi);
  const VProfile v = make_profile(p, cfg.profile, r.pair.x.intervals());
  const ExtremalReport rep =
      verify_extremal(p, e, ControlBox::uniform(p.r, cfg.extremal_box[0], cfg.extremal_box[1]), v);
  double h_scale = 0.0;
  double psi_scale = 0.0;
  for (std::size_t i = 0; i < r.pair.x.size(); ++i) {
    const Point pt{r.pair.x.node(i), r.pair.x.row_vec(i), r.pair.u.row_vec(i)};
    h_scale = std::max(h_scale, std::abs(hamiltonian_P(p, pt, -1.0, r.psi.row(i))));
    for (double q : r.psi.row(i)) psi_scale = std::max(psi_scale, std::abs(q));
  }
  const double gap_limit = cfg.gap_tol * std::max(1.0, h_scale);
  const double adjoint_limit = cfg.adjoint_tol * std::max(1.0, psi_scale);
  const double zero_limit = 1e-8 * std::max(1.0, h_scale);
  ExtremalCheck out;
  out.pass = r.converged && !rep.abnormal && rep.worst_gap <= gap_limit && rep.adjoint_residual <= adjoint_limit &&
             rep.hamiltonian_zero_level_max <= zero_limit;
  out.doc = {{"report", to_json(rep)},
             {"multipliers", "estimated from the collocation duals, psi0 = -1"},
             {"intervals", r.pair.x.intervals()},
             {"profile", profile_json(cfg.profile)},
             {"hamiltonian_scale", h_scale},
             {"gap_limit", gap_limit},
             {"adjoint_limit", adjoint_limit},
             {"zero_level_limit", zero_limit},
             {"pass", out.pass}};
  return out;
}

Outcome cmd_verify_extremal(const RunConfig& cfg) {
  const OCProblem p = resolve_problem(cfg.problem);
  const SolveResult r = solve(Transcription(p, nodes_or(cfg, 100)), solve_options(cfg));
  Json doc = base_doc(cfg, p);
  doc["solve"] = to_json(r);
  const ExtremalCheck ec = extremal_check(p, r, cfg);
  doc["extremal"] = ec.doc;
  return {doc, ec.pass ? 0 : kFail};
}

Outcome cmd_example(const RunConfig& cfg) {
  const std::vector<std::string> names = builtin_names();
  if (std::find(names.begin(), names.end(), cfg.problem) == names.end()) {
    throw ValidationError("unknown example '" + cfg.problem + "'", "name");
  }
  Json doc = {{"command", "example"}, {"problem", cfg.problem}, {"seed", cfg.seed}};
  Json stages = Json::array();
  int code = 0;
  auto stage = [&](const std::string& name, auto&& body) {
    Json s = {{"stage", name}};
    try {
      const std::string status = body(s);
      s["status"] = status;
      if (status == "fail") code = std::max(code, kFail);
    } catch (const std::exception& e) {
      s["status"] = "error";
      s["error"] = error_json(e);
      code = kError;
    }
    stages.push_back(std::move(s));
  };

  OCProblem p;
  bool loaded = false;
  stage("validate", [&](Json& s) {
    p = builtin_problem(cfg.problem);
    loaded = true;
    s["definition"] = to_json(p);
    return std::string("pass");
  });
  if (loaded) {
    const SampleBox box = sample_box(p, cfg);
    stage("growth", [&](Json& s) {
      const GrowthReport rep = check_growth_theorem53(p, box);
      s["report"] = to_json(rep);
      return std::string(rep.verdict == "satisfied-on-box" ? "pass" : "fail");
    });
    stage("coercivity", [&](Json& s) {
      const CoercivityReport rep = check_coercivity(p, box, cfg.shells);
      s["report"] = to_json(rep);
      return std::string(rep.verdict == "pass" ? "pass" : "fail");
    });
    stage("affine", [&](Json& s) {
      const AffineGrowthReport rep = check_affine(p, box);
      s["report"] = to_json(rep);
      return std::string(rep.applicable ? "pass" : "inapplicable");
    });
    BoundednessReport sweep;
    bool solved = false;
    stage("solve", [&](Json& s) {
      sweep = boundedness_diagnostic(p, {25, 50, 100}, solve_options(cfg));
      solved = true;
      s["boundedness"] = to_json(sweep);
      if (!cfg.out.empty()) {
        Json files = Json::array();
        for (const SolveResult& r : sweep.results) {
          const std::string path = sibling(cfg.out, "_N" + std::to_string(r.pair.x.intervals()) + ".csv");
          write_file(path, trajectory_csv(r.pair));
          files.push_back(path);
        }
        s["csv"] = files;
      }
      return std::string(sweep.verdict == "bounded-stable" ? "pass" : "fail");
    });
    stage("extremal", [&](Json& s) {
      if (!solved) throw InvariantError("no solved pair to verify");
      const ExtremalCheck ec = extremal_check(p, sweep.results.back(), cfg);
      s["verification"] = ec.doc;
      return std::string(ec.pass ? "pass" : "fail");
    });
  }
  doc["stages"] = stages;
  doc["status"] = code == 0 ? "pass" : (code == kFail ? "fail" : "error");
  return {doc, code};
}

void add_common(CLI::App* sc, RunConfig& cfg) {
  sc->add_option("--seed", cfg.seed, "seed for all sampling");
  sc->add_option("--out", cfg.out, "write the JSON report here instead of stdout");
}

void add_nodes(CLI::App* sc, RunConfig& cfg) {
  sc->add_option("--nodes", cfg.nodes, "number of grid intervals")->check(CLI::PositiveNumber);
}

void add_solver(CLI::App* sc, RunConfig& cfg) {
  sc->add_option("--feas-tol", cfg.feas_tol, "constraint tolerance");
  sc->add_option("--opt-tol", cfg.opt_tol, "stationarity tolerance");
  sc->add_option("--max-iter", cfg.max_iter, "inner iteration cap")->check(CLI::PositiveNumber);
}

void add_boxes(CLI::App* sc, RunConfig& cfg) {
  sc->add_option("--box-x", cfg.box_x, "state interval lo hi")->expected(2)->allow_extra_args(false);
  sc->add_option("--box-u", cfg.box_u, "control interval lo hi")->expected(2)->allow_extra_args(false);
}

void add_profile(CLI::App* sc, RunConfig& cfg) {
  sc->add_option("--profile", cfg.profile, "identity | two-step P Q")->expected(1, 3)->allow_extra_args(false);
}

void add_extremal(CLI::App* sc, RunConfig& cfg) {
  sc->add_option("--box-u", cfg.extremal_box, "control box for the maximality search, lo hi")
      ->expected(2)
      ->allow_extra_args(false);
  sc->add_option("--gap-tol", cfg.gap_tol, "maximality gap tolerance relative to max(1, |H|)");
  sc->add_option("--adjoint-tol", cfg.adjoint_tol, "adjoint residual tolerance relative to max(1, |psi|)");
}

}  // namespace

void RunConfig::validate() const {
  if (problem.empty()) throw ValidationError("no problem given", "problem");
  check_interval(box_x, "--box-x");
  check_interval(box_u, "--box-u");
  check_interval(extremal_box, "--box-u");
  for (auto [v, name] : {std::pair{feas_tol, "--feas-tol"}, std::pair{opt_tol, "--opt-tol"},
                         std::pair{gap_tol, "--gap-tol"}, std::pair{adjoint_tol, "--adjoint-tol"}}) {
    if (!positive(v)) throw ValidationError(std::string(name) + " must be positive", name);
  }
  if (shells < 4) throw ValidationError("--shells must be at least 4", "--shells");
  if (samples < 1) throw ValidationError("--samples must be positive", "--samples");
  if (nodes < 0) throw ValidationError("--nodes must be positive", "--nodes");
  if (max_iter < 1) throw ValidationError("--max-iter must be positive", "--max-iter");
}

OCProblem resolve_problem(const std::string& source) {
  const std::vector<std::string> names = builtin_names();
  if (std::find(names.begin(), names.end(), source) != names.end()) return builtin_problem(source);
  if (std::filesystem::is_regular_file(source)) return load_problem(source);
  throw ValidationError("no problem file or builtin named '" + source + "'", "problem");
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Lagrange optimal control toolkit", "ocreg"};
  app.require_subcommand(1);

  auto* validate = app.add_subcommand("validate", "load a problem file and report its dimensions");
  validate->add_option("problem", cfg.problem, "problem file or builtin name")->required();
  add_common(validate, cfg);

  auto* cost = app.add_subcommand("cost", "cost and admissibility of a pair");
  cost->add_option("problem", cfg.problem, "problem file or builtin name")->required();
  cost->add_option("--pair", cfg.pair_path, "trajectory CSV (default: straight-line initial guess)");
  add_common(cost, cfg);
  add_nodes(cost, cfg);
  cost->add_option("--feas-tol", cfg.feas_tol, "admissibility tolerance");

  auto* transform = app.add_subcommand("transform", "lift a pair to the reparameterized problem and back");
  transform->add_option("problem", cfg.problem, "problem file or builtin name")->required();
  transform->add_option("--pair", cfg.pair_path, "trajectory CSV (default: straight-line initial guess)");
  add_common(transform, cfg);
  add_nodes(transform, cfg);
  add_profile(transform, cfg);
  transform->add_option("--feas-tol", cfg.feas_tol, "admissibility tolerance");

  auto* check = app.add_subcommand("check", "sampled regularity hypotheses");
  check->add_option("problem", cfg.problem, "problem file or builtin name")->required();
  check->add_option("which", cfg.which, "growth | coercivity | affine | alpha")->required();
  check->add_option("--mode", cfg.mode, "growth form: theorem53 | tonelli-morrey");
  check->add_option("--shells", cfg.shells, "coercivity shells");
  check->add_option("--samples", cfg.samples, "low-discrepancy samples per box");
  check->add_option("--pair", cfg.pair_path, "trajectory CSV whose control is used by alpha");
  add_common(check, cfg);
  add_nodes(check, cfg);
  add_boxes(check, cfg);

  auto* solve_cmd = app.add_subcommand("solve", "direct collocation solve");
  solve_cmd->add_option("problem", cfg.problem, "problem file or builtin name")->required();
  solve_cmd->add_option("--pair", cfg.pair_path, "trajectory CSV used as the initial guess");
  solve_cmd->add_option("--csv", cfg.csv, "trajectory CSV output (default: next to --out)");
  add_common(solve_cmd, cfg);
  add_nodes(solve_cmd, cfg);
  add_solver(solve_cmd, cfg);

  auto* verify = app.add_subcommand("verify-extremal", "solve, then test the maximum principle with dual multipliers");
  verify->add_option("problem", cfg.problem, "problem file or builtin name")->required();
  add_common(verify, cfg);
  add_nodes(verify, cfg);
  add_solver(verify, cfg);
  add_profile(verify, cfg);
  add_extremal(verify, cfg);

  auto* example = app.add_subcommand("example", "full pipeline on a builtin problem");
  example->add_option("name", cfg.problem, "torres-6.1 | baseline | lq")->required();
  example->add_option("--shells", cfg.shells, "coercivity shells");
  example->add_option("--samples", cfg.samples, "low-discrepancy samples per box");
  add_common(example, cfg);
  add_solver(example, cfg);
  add_boxes(example, cfg);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kError;
  }
  cfg.subcommand = app.get_subcommands().front()->get_name();

  Outcome result;
  try {
    cfg.validate();
    if (cfg.subcommand == "validate") {
      result = cmd_validate(cfg);
    } else if (cfg.subcommand == "cost") {
      result = cmd_cost(cfg);
    } else if (cfg.subcommand == "transform") {
      result = cmd_transform(cfg);
    } else if (cfg.subcommand == "check") {
      result = cmd_check(cfg);
    } else if (cfg.subcommand == "solve") {
      result = cmd_solve(cfg);
    } else if (cfg.subcommand == "verify-extremal") {
      result = cmd_verify_extremal(cfg);
    } else {
      result = cmd_example(cfg);
    }
  } catch (const std::exception& e) {
    result.doc = {{"command", cfg.subcommand}, {"source", cfg.problem}, {"error", error_json(e)}};
    result.code = kError;
    err << "ocreg " << cfg.subcommand << ": " << e.what() << "\n";
  }
  const std::string text = dump_json(result.doc);
  if (cfg.out.empty()) {
    out << text;
  } else {
    try {
      write_file(cfg.out, text);
    } catch (const std::exception& e) {
      err << "ocreg: " << e.what() << "\n";
      return kError;
    }
  }
  return result.code;
}

}  // namespace ocreg
