// Batch front end. Talks to the solver exclusively through the public C API.
#include "nbc.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json; // std::map backed, so dumps are key-sorted (canonical)

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ApiError : std::runtime_error {
  nbc_status status;
  ApiError(nbc_status s, const std::string& msg) : std::runtime_error(msg), status(s) {}
};

void check(nbc_status s) {
  if (s != NBC_OK) throw ApiError(s, nbc_last_error());
}

struct ModelDel { void operator()(nbc_model* p) const { nbc_model_free(p); } };
struct MeasureDel { void operator()(nbc_measure* p) const { nbc_measure_free(p); } };
struct ControlDel { void operator()(nbc_control* p) const { nbc_control_free(p); } };
struct TrajDel { void operator()(nbc_trajectory* p) const { nbc_trajectory_free(p); } };
struct CostatesDel { void operator()(nbc_costates* p) const { nbc_costates_free(p); } };
struct ReportDel { void operator()(nbc_report* p) const { nbc_report_free(p); } };
using ModelPtr = std::unique_ptr<nbc_model, ModelDel>;
using MeasurePtr = std::unique_ptr<nbc_measure, MeasureDel>;
using ControlPtr = std::unique_ptr<nbc_control, ControlDel>;
using TrajPtr = std::unique_ptr<nbc_trajectory, TrajDel>;
using CostatesPtr = std::unique_ptr<nbc_costates, CostatesDel>;
using ReportPtr = std::unique_ptr<nbc_report, ReportDel>;

void reject_unknown(const json& obj, const char* where,
                    std::initializer_list<const char*> keys) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : keys)
      if (it.key() == k) { known = true; break; }
    if (!known)
      throw ConfigError(std::string(where) + ": unknown key \"" + it.key() + "\"");
  }
}

double get_num(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(std::string(key) + " must be a number");
  return v.get<double>();
}

int get_int(const json& obj, const char* key, int fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(std::string(key) + " must be an integer");
  return v.get<int>();
}

bool get_bool(const json& obj, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) throw ConfigError(std::string(key) + " must be a boolean");
  return v.get<bool>();
}

std::string get_str(const json& obj, const char* key, const char* fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(std::string(key) + " must be a string");
  return v.get<std::string>();
}

std::string get_str(const json& obj, const char* key) {
  if (!obj.contains(key)) throw ConfigError(std::string("missing required key \"") + key + "\"");
  return get_str(obj, key, "");
}

std::vector<double> get_vec(const json& v, int want, const char* what) {
  if (!v.is_array() || static_cast<int>(v.size()) != want)
    throw ConfigError(std::string(what) + " must be an array of " + std::to_string(want) +
                      " numbers");
  std::vector<double> out;
  for (const json& vi : v) {
    if (!vi.is_number()) throw ConfigError(std::string(what) + " entries must be numbers");
    out.push_back(vi.get<double>());
  }
  return out;
}

std::string resolve_path(const fs::path& base, const std::string& given) {
  fs::path p(given);
  if (p.is_relative()) p = base / p;
  return fs::weakly_canonical(p).string();
}

struct RunConfig {
  json resolved;
  ModelPtr model;
  int dim = 0;
  int control_dim = 0;
  MeasurePtr theta; // may be empty (checks sample their own)
  double horizon = 1.0;
  int steps = 100;
  std::string integrator = "rk4";
  std::string control_source;
  std::vector<double> control_value;
  std::string control_csv;
  json optimizer; // defaults expanded, or null when not configured
  uint64_t seed = 1;
  fs::path out;
};

RunConfig load_config(const std::string& config_path, const std::string& out_flag,
                      std::optional<uint64_t> seed_flag) {
  std::ifstream in(config_path);
  if (!in) throw ConfigError("cannot open config file " + config_path);
  json raw;
  try {
    raw = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse: ") + e.what());
  }
  if (!raw.is_object()) throw ConfigError("config root must be an object");
  reject_unknown(raw, "config",
                 {"model", "opinion", "initial_measure", "horizon", "steps", "integrator",
                  "control", "optimizer", "seed", "out"});
  const fs::path base = fs::absolute(config_path).parent_path();

  RunConfig rc;
  json& res = rc.resolved;

  const std::string model_name = get_str(raw, "model");
  if (model_name == "scalar-benchmark") {
    if (raw.contains("opinion"))
      throw ConfigError("opinion parameters only apply to model \"opinion\"");
    nbc_model* m = nullptr;
    check(nbc_model_scalar_benchmark(&m));
    rc.model.reset(m);
  } else if (model_name == "opinion") {
    json op = raw.value("opinion", json::object());
    if (!op.is_object()) throw ConfigError("opinion must be an object");
    reject_unknown(op, "opinion",
                   {"dim", "attraction", "decay", "exchange", "control_drift", "control_lo",
                    "control_hi"});
    nbc_opinion_params p;
    p.dim = get_int(op, "dim", 1);
    p.attraction = get_num(op, "attraction", 1.0);
    p.decay = get_num(op, "decay", 0.0);
    p.exchange = get_num(op, "exchange", 0.0);
    p.control_drift = get_bool(op, "control_drift", false) ? 1 : 0;
    p.control_lo = get_num(op, "control_lo", -1.0);
    p.control_hi = get_num(op, "control_hi", 1.0);
    nbc_model* m = nullptr;
    check(nbc_model_opinion(&p, &m));
    rc.model.reset(m);
    res["opinion"] = {{"dim", p.dim},
                      {"attraction", p.attraction},
                      {"decay", p.decay},
                      {"exchange", p.exchange},
                      {"control_drift", p.control_drift != 0},
                      {"control_lo", p.control_lo},
                      {"control_hi", p.control_hi}};
  } else {
    throw ConfigError("unknown model \"" + model_name + "\"");
  }
  res["model"] = model_name;
  check(nbc_model_dims(rc.model.get(), &rc.dim, &rc.control_dim));
  std::vector<double> box_lo(rc.control_dim), box_hi(rc.control_dim);
  check(nbc_model_box(rc.model.get(), box_lo.data(), box_hi.data()));

  if (raw.contains("initial_measure")) {
    const json& im = raw.at("initial_measure");
    if (!im.is_object()) throw ConfigError("initial_measure must be an object");
    reject_unknown(im, "initial_measure", {"atoms", "csv"});
    if (im.contains("atoms") == im.contains("csv"))
      throw ConfigError("initial_measure needs exactly one of \"atoms\" or \"csv\"");
    if (im.contains("atoms")) {
      const json& atoms = im.at("atoms");
      if (!atoms.is_array() || atoms.empty())
        throw ConfigError("initial_measure.atoms must be a nonempty array");
      std::vector<double> pts, wts;
      json echo = json::array();
      for (const json& a : atoms) {
        if (!a.is_object()) throw ConfigError("each atom must be an object");
        reject_unknown(a, "atom", {"x", "weight"});
        if (!a.contains("x")) throw ConfigError("atom: missing \"x\"");
        std::vector<double> x = get_vec(a.at("x"), rc.dim, "atom x");
        pts.insert(pts.end(), x.begin(), x.end());
        if (!a.contains("weight") || !a.at("weight").is_number())
          throw ConfigError("atom weight must be a number");
        wts.push_back(a.at("weight").get<double>());
        echo.push_back({{"weight", a.at("weight")}, {"x", a.at("x")}});
      }
      nbc_measure* m = nullptr;
      check(nbc_measure_create(rc.dim, static_cast<int>(wts.size()), pts.data(), wts.data(), &m));
      rc.theta.reset(m);
      res["initial_measure"] = {{"atoms", echo}};
    } else {
      const std::string path = resolve_path(base, get_str(im, "csv"));
      if (!fs::exists(path)) throw ConfigError("initial measure file not found: " + path);
      nbc_measure* m = nullptr;
      check(nbc_measure_read_csv(path.c_str(), &m));
      rc.theta.reset(m);
      int d = 0;
      check(nbc_measure_dims(rc.theta.get(), &d, nullptr));
      if (d != rc.dim)
        throw ConfigError("initial measure has dimension " + std::to_string(d) +
                          ", model expects " + std::to_string(rc.dim));
      res["initial_measure"] = {{"csv", path}};
    }
  }

  rc.horizon = get_num(raw, "horizon", 1.0);
  if (!(rc.horizon > 0.0)) throw ConfigError("horizon must be positive");
  rc.steps = get_int(raw, "steps", 100);
  if (rc.steps < 1) throw ConfigError("steps must be >= 1");
  rc.integrator = get_str(raw, "integrator", "rk4");
  if (rc.integrator != "rk4" && rc.integrator != "euler")
    throw ConfigError("integrator must be \"rk4\" or \"euler\"");
  res["horizon"] = rc.horizon;
  res["steps"] = rc.steps;
  res["integrator"] = rc.integrator;

  json ctl = raw.value("control", json::object());
  if (!ctl.is_object()) throw ConfigError("control must be an object");
  reject_unknown(ctl, "control", {"source", "value", "csv"});
  rc.control_source = get_str(ctl, "source", "constant");
  if (rc.control_source == "constant") {
    if (ctl.contains("csv")) throw ConfigError("control.csv only applies to source \"csv\"");
    if (ctl.contains("value")) {
      rc.control_value = get_vec(ctl.at("value"), rc.control_dim, "control.value");
    } else {
      for (int i = 0; i < rc.control_dim; ++i)
        rc.control_value.push_back(0.5 * (box_lo[i] + box_hi[i]));
    }
    res["control"] = {{"source", "constant"}, {"value", rc.control_value}};
  } else if (rc.control_source == "csv") {
    if (ctl.contains("value")) throw ConfigError("control.value only applies to source \"constant\"");
    rc.control_csv = resolve_path(base, get_str(ctl, "csv"));
    if (!fs::exists(rc.control_csv)) throw ConfigError("control file not found: " + rc.control_csv);
    res["control"] = {{"source", "csv"}, {"csv", rc.control_csv}};
  } else if (rc.control_source == "optimize") {
    if (ctl.contains("value") || ctl.contains("csv"))
      throw ConfigError("control source \"optimize\" takes no value or csv");
    res["control"] = {{"source", "optimize"}};
  } else {
    throw ConfigError("control.source must be \"constant\", \"csv\", or \"optimize\"");
  }

  if (raw.contains("optimizer") || rc.control_source == "optimize") {
    json op = raw.value("optimizer", json::object());
    if (!op.is_object()) throw ConfigError("optimizer must be an object");
    reject_unknown(op, "optimizer",
                   {"method", "max_iters", "residual_tol", "cost_tol", "damping", "u_grid",
                    "armijo_alpha0", "armijo_shrink", "armijo_c1", "min_step", "initial"});
    json ro;
    const std::string method = get_str(op, "method", "msa");
    if (method != "msa" && method != "projected-gradient")
      throw ConfigError("optimizer.method must be \"msa\" or \"projected-gradient\"");
    ro["method"] = method;
    ro["max_iters"] = get_int(op, "max_iters", 50);
    ro["residual_tol"] = get_num(op, "residual_tol", 1e-8);
    ro["cost_tol"] = get_num(op, "cost_tol", 1e-10);
    ro["damping"] = get_num(op, "damping", 1.0);
    ro["u_grid"] = get_int(op, "u_grid", 101);
    ro["armijo_alpha0"] = get_num(op, "armijo_alpha0", 1.0);
    ro["armijo_shrink"] = get_num(op, "armijo_shrink", 0.5);
    ro["armijo_c1"] = get_num(op, "armijo_c1", 1e-4);
    ro["min_step"] = get_num(op, "min_step", 1e-12);
    if (op.contains("initial")) {
      get_vec(op.at("initial"), rc.control_dim, "optimizer.initial");
      ro["initial"] = op.at("initial");
    }
    rc.optimizer = ro;
    res["optimizer"] = ro;
  }

  if (seed_flag) {
    rc.seed = *seed_flag;
  } else if (raw.contains("seed")) {
    const json& s = raw.at("seed");
    if (s.is_number_unsigned())
      rc.seed = s.get<uint64_t>();
    else if (s.is_number_integer() && s.get<int64_t>() >= 0)
      rc.seed = static_cast<uint64_t>(s.get<int64_t>());
    else
      throw ConfigError("seed must be a nonnegative integer");
  }
  res["seed"] = rc.seed;

  std::string out_str = !out_flag.empty() ? out_flag : get_str(raw, "out", "out");
  fs::path outp(out_str);
  if (outp.is_relative()) outp = (!out_flag.empty() ? fs::current_path() : base) / outp;
  rc.out = fs::weakly_canonical(outp);
  res["out"] = rc.out.string();
  std::error_code ec;
  fs::create_directories(rc.out, ec);
  if (ec && !fs::is_directory(rc.out))
    throw ConfigError("cannot create output directory " + rc.out.string());
  return rc;
}

void write_echo(const RunConfig& rc) {
  const fs::path p = rc.out / "config_resolved.json";
  std::ofstream o(p);
  if (!o) throw ConfigError("cannot write " + p.string());
  o << rc.resolved.dump(2) << "\n";
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ControlPtr make_control(const RunConfig& rc) {
  nbc_control* u = nullptr;
  if (rc.control_source == "constant") {
    check(nbc_control_constant(rc.control_dim, rc.steps, rc.control_value.data(), &u));
    return ControlPtr(u);
  }
  if (rc.control_source == "csv") {
    check(nbc_control_read_csv(rc.control_csv.c_str(), &u));
    ControlPtr p(u);
    int cd = 0, iv = 0;
    check(nbc_control_dims(p.get(), &cd, &iv));
    if (cd != rc.control_dim)
      throw ConfigError("control file has dimension " + std::to_string(cd) + ", model expects " +
                        std::to_string(rc.control_dim));
    if (iv != rc.steps)
      throw ConfigError("control file has " + std::to_string(iv) + " intervals, config asks for " +
                        std::to_string(rc.steps) + " steps");
    return p;
  }
  throw ConfigError("control source \"optimize\" requires the optimize subcommand");
}

void write_trajectory_files(const RunConfig& rc, const nbc_trajectory* traj) {
  check(nbc_trajectory_write_csv(traj, (rc.out / "trajectory.csv").string().c_str()));
  check(nbc_trajectory_write_moments_csv(traj, (rc.out / "moments.csv").string().c_str()));
  check(nbc_trajectory_write_mass_csv(traj, (rc.out / "mass.csv").string().c_str()));
}

int cmd_simulate(const RunConfig& rc) {
  if (!rc.theta) throw ConfigError("initial_measure is required for simulate");
  ControlPtr u = make_control(rc);
  const auto t0 = std::chrono::steady_clock::now();
  nbc_trajectory* traj_raw = nullptr;
  check(nbc_simulate(rc.model.get(), rc.theta.get(), u.get(), rc.horizon, rc.steps,
                     rc.integrator.c_str(), &traj_raw));
  TrajPtr traj(traj_raw);
  const double secs = seconds_since(t0);
  write_trajectory_files(rc, traj.get());

  int nodes = 0;
  check(nbc_trajectory_nodes(traj.get(), &nodes));
  nbc_measure* fin_raw = nullptr;
  check(nbc_trajectory_measure_at(traj.get(), nodes - 1, &fin_raw));
  MeasurePtr fin(fin_raw);
  double mass = 0.0, cost = 0.0;
  check(nbc_measure_total_mass(fin.get(), &mass));
  check(nbc_trajectory_cost(rc.model.get(), traj.get(), &cost));
  std::printf("final mass %.17g\n", mass);
  std::printf("terminal cost %.17g\n", cost);
  std::printf("wall time %.3f s\n", secs);
  std::printf("outputs in %s\n", rc.out.string().c_str());
  return 0;
}

int cmd_check(const RunConfig& rc, const std::string& suite) {
  const int u_grid = rc.optimizer.is_object() ? rc.optimizer.value("u_grid", 101) : 101;
  char* table = nullptr;
  int all = 0;
  check(nbc_check_run(rc.model.get(), rc.theta.get(), rc.horizon, rc.steps,
                      rc.integrator.c_str(), suite.c_str(), rc.seed, u_grid, &table, &all));
  std::fputs(table, stdout);
  nbc_string_free(table);
  if (all) {
    std::printf("all checks passed\n");
    return 0;
  }
  std::fprintf(stderr, "check suite \"%s\" failed\n", suite.c_str());
  return 1;
}

int cmd_optimize(const RunConfig& rc) {
  if (!rc.theta) throw ConfigError("initial_measure is required for optimize");
  if (rc.control_source != "optimize")
    throw ConfigError("set control.source to \"optimize\" for the optimize subcommand");
  const json& op = rc.optimizer;
  const std::string method = op.at("method").get<std::string>();
  std::vector<double> initial;
  nbc_opt_options opts{};
  opts.method = method.c_str();
  opts.max_iters = op.at("max_iters").get<int>();
  opts.residual_tol = op.at("residual_tol").get<double>();
  opts.cost_tol = op.at("cost_tol").get<double>();
  opts.damping = op.at("damping").get<double>();
  opts.u_grid = op.at("u_grid").get<int>();
  opts.armijo_alpha0 = op.at("armijo_alpha0").get<double>();
  opts.armijo_shrink = op.at("armijo_shrink").get<double>();
  opts.armijo_c1 = op.at("armijo_c1").get<double>();
  opts.min_step = op.at("min_step").get<double>();
  if (op.contains("initial")) {
    initial = op.at("initial").get<std::vector<double>>();
    opts.initial = initial.data();
  }

  const auto t0 = std::chrono::steady_clock::now();
  nbc_report* rep_raw = nullptr;
  const nbc_status st = nbc_optimize(rc.model.get(), rc.theta.get(), rc.horizon, rc.steps,
                                     rc.integrator.c_str(), &opts, &rep_raw);
  if (st != NBC_OK && st != NBC_ERR_UNCONVERGED) throw ApiError(st, nbc_last_error());
  ReportPtr rep(rep_raw);
  const double secs = seconds_since(t0);

  check(nbc_report_write_json(rep.get(), (rc.out / "report.json").string().c_str()));
  check(nbc_report_write_control_csv(rep.get(), rc.horizon,
                                     (rc.out / "control.csv").string().c_str()));
  nbc_control* u_raw = nullptr;
  check(nbc_report_final_control(rep.get(), &u_raw));
  ControlPtr u(u_raw);
  nbc_trajectory* traj_raw = nullptr;
  check(nbc_simulate(rc.model.get(), rc.theta.get(), u.get(), rc.horizon, rc.steps,
                     rc.integrator.c_str(), &traj_raw));
  TrajPtr traj(traj_raw);
  write_trajectory_files(rc, traj.get());
  nbc_costates* co_raw = nullptr;
  check(nbc_adjoint_solve(rc.model.get(), u.get(), traj.get(), &co_raw));
  CostatesPtr co(co_raw);
  check(nbc_costates_write_csv(traj.get(), co.get(), (rc.out / "costates.csv").string().c_str()));
  check(nbc_adjoint_summary_write_csv(rc.model.get(), u.get(), traj.get(), co.get(), opts.u_grid,
                                      (rc.out / "adjoint_summary.csv").string().c_str()));

  double cost = 0.0, residual = 0.0;
  int conv = 0;
  check(nbc_report_final_cost(rep.get(), &cost));
  check(nbc_report_final_residual(rep.get(), &residual));
  check(nbc_report_converged(rep.get(), &conv));
  std::printf("final cost %.17g\n", cost);
  std::printf("final residual %.17g\n", residual);
  std::printf("converged %s (%s)\n", conv ? "yes" : "no", nbc_report_reason(rep.get()));
  std::printf("classification %s\n", nbc_report_classification(rep.get()));
  std::printf("wall time %.3f s\n", secs);
  std::printf("outputs in %s\n", rc.out.string().c_str());
  if (st == NBC_ERR_UNCONVERGED) {
    std::fprintf(stderr, "optimizer stopped at the iteration cap\n");
    return 4;
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"particle solver and control optimizer for nonlocal balance equations"};
  app.require_subcommand(1);

  std::string config_path, out_flag, suite;
  uint64_t seed_val = 0;
  app.add_option("--config", config_path, "run configuration (JSON)")->required();
  app.add_option("--out", out_flag, "output directory (overrides the config)");
  CLI::Option* seed_opt = app.add_option("--seed", seed_val, "random seed (overrides the config)");

  CLI::App* sim = app.add_subcommand("simulate", "integrate the controlled dynamics forward");
  sim->fallthrough();
  CLI::App* opt = app.add_subcommand("optimize", "minimize the terminal cost over controls");
  opt->fallthrough();
  CLI::App* chk = app.add_subcommand("check", "run a validation suite");
  chk->fallthrough();
  chk->add_option("suite", suite,
                  "derivatives | gradient | weak-form | hamiltonian-equivalence | lipschitz-beta")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    std::optional<uint64_t> seed_flag;
    if (seed_opt->count() > 0) seed_flag = seed_val;
    RunConfig rc = load_config(config_path, out_flag, seed_flag);
    write_echo(rc);
    if (sim->parsed()) return cmd_simulate(rc);
    if (opt->parsed()) return cmd_optimize(rc);
    return cmd_check(rc, suite);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const ApiError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    if (e.status == NBC_ERR_NUMERICAL) return 3;
    if (e.status == NBC_ERR_UNCONVERGED) return 4;
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
