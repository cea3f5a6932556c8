// sri: batch runner and validator for two-timescale stochastic recursive
// inclusions. Subcommands: validate, run, solve-di, saddle.
//
// Exit status: 0 ok, 1 validation or configuration failure, 2 divergence,
// 3 I/O error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "experiment.hpp"

namespace fs = std::filesystem;
using namespace sri;
using namespace sri::cli;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> steps;
  std::string out;
  std::size_t replicas = 1;
  bool envelope = false;
};

fs::path output_dir(const Flags& f, const json& cfg) {
  if (!f.out.empty()) return f.out;
  if (const char* env = std::getenv("SRI_OUT_DIR"); env && *env) return env;
  if (cfg.contains("output_dir") && cfg.at("output_dir").is_string()) return cfg.at("output_dir").get<std::string>();
  return "out";
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw IoError("cannot create output directory '" + p.string() + "'");
}

template <class Fn>
void write_file(const fs::path& p, Fn&& body) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + p.string() + "' for writing");
  body(os);
  os.flush();
  if (!os) throw IoError("write failed for '" + p.string() + "'");
}

json schedule_json(const StepSchedule& s) { return {{"alpha", s.alpha}, {"beta", s.beta}, {"a0", s.a0}, {"b0", s.b0}}; }

json base_manifest(const std::string& sub, const Flags& f, const json& cfg) {
  return {{"tool", "sri"},
          {"version", kVersion},
          {"compiler", __VERSION__},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"subcommand", sub},
          {"config", fs::path(f.config).filename().string()},
          {"config_hash", config_hash(cfg)}};
}

void apply_overrides(Experiment& e, const Flags& f) {
  if (f.seed) e.options.seed = *f.seed;
  if (f.steps) {
    if (*f.steps < 1) throw ConfigError("--steps must be at least 1");
    e.options.steps = *f.steps;
  }
  if (e.options.steps < 1) throw ConfigError("field 'steps' must be at least 1");
  const ScheduleReport sr = validate_schedule(e.options.schedule, std::max<std::size_t>(e.options.steps, 2));
  if (!sr.ok()) throw ConfigError("schedule: " + sr.violations.front());
}

// ---- validate ---------------------------------------------------------------

struct CheckLine {
  std::string name;
  bool ok;
  std::string detail;
};

std::vector<Probe> probe_grid(const MapDims& d, std::size_t alphabet, const Vector& x0, const Vector& y0) {
  std::vector<Vector> xs{x0, Vector::Zero(d.d1)}, ys{y0, Vector::Zero(d.d2)};
  for (Eigen::Index i = 0; i < d.d1; ++i) {
    xs.push_back(3.0 * Vector::Unit(d.d1, i));
    xs.push_back(-5.0 * Vector::Unit(d.d1, i));
  }
  for (Eigen::Index i = 0; i < d.d2; ++i) {
    ys.push_back(2.0 * Vector::Unit(d.d2, i));
    ys.push_back(-2.0 * Vector::Unit(d.d2, i));
  }
  std::vector<Probe> grid;
  for (const Vector& x : xs)
    for (const Vector& y : ys)
      for (std::size_t s = 0; s < alphabet; ++s) grid.push_back({x, y, s});
  return grid;
}

void add_report(std::vector<CheckLine>& out, const std::string& name, const CheckReport& r) {
  std::string detail = r.failures.empty() ? "" : r.failures.front();
  out.push_back({name, r.ok(), detail});
}

std::vector<CheckLine> validate_experiment(const json& cfg) {
  std::vector<CheckLine> lines;
  Experiment e = experiment_of(cfg);
  const ScheduleReport sr = validate_schedule(e.options.schedule, std::max<std::size_t>(e.options.steps, 2));
  std::string sched_detail;
  for (const auto& v : sr.violations) sched_detail += (sched_detail.empty() ? "" : "; ") + v;
  lines.push_back({"schedule", sr.ok(), sched_detail});

  const std::vector<Probe> g1 = probe_grid(e.system().h1.dims(), e.system().h1.alphabet_size(), e.options.x0, e.options.y0);
  add_report(lines, "H1 stochastic approximation map", validate_sam(e.system().h1, g1));
  add_report(lines, "H2 stochastic approximation map", validate_sam(e.system().h2, g1));

  bool rows_ok = true;
  std::string rows_detail;
  for (const Probe& p : g1) {
    try {
      (void)e.system().k1.row(p.x, p.y, p.s);
      (void)e.system().k2.row(p.x, p.y, p.s);
    } catch (const KernelError& err) {
      rows_ok = false;
      rows_detail = err.what();
      break;
    }
  }
  lines.push_back({"kernel rows stochastic", rows_ok, rows_detail});

  if (e.saddle) {
    const CoercivityCheck& c = e.saddle->coercivity();
    lines.push_back({"coercivity at radius r", c.ok(),
                     "min J on sphere " + format_double(c.min_on_sphere) + " vs M1 " + format_double(c.m1)});
    lines.push_back({"unique stationary law", e.saddle->stationary().unique(),
                     std::to_string(e.saddle->stationary().vertices.size()) + " vertices"});
  }
  if (e.slow_field) {
    std::vector<Vector> ys{e.options.y0, Vector::Zero(e.options.y0.size())};
    for (Eigen::Index i = 0; i < e.options.y0.size(); ++i) {
      ys.push_back(Vector::Unit(e.options.y0.size(), i));
      ys.push_back(-Vector::Unit(e.options.y0.size(), i));
    }
    add_report(lines, "slow mean field Marchaud", check_marchaud(*e.slow_field, ys));
  }
  return lines;
}

std::vector<CheckLine> validate_di(const json& cfg) {
  std::vector<CheckLine> lines;
  DIJob job = di_job_of(cfg);
  lines.push_back({"di step", job.dt > 0.0 && job.horizon >= job.dt, "dt " + format_double(job.dt)});
  std::vector<Vector> grid{job.z0, Vector::Zero(job.z0.size()), 2.0 * job.z0, -job.z0};
  add_report(lines, "di field Marchaud", check_marchaud(*job.field, grid));
  return lines;
}

int cmd_validate(const Flags& f) {
  const json cfg = load_config(f.config);
  std::vector<CheckLine> lines;
  if (!cfg.contains("problem") && !cfg.contains("di")) throw ConfigError("config needs a 'problem' or a 'di' section");
  if (cfg.contains("problem")) {
    auto l = validate_experiment(cfg);
    lines.insert(lines.end(), l.begin(), l.end());
  }
  if (cfg.contains("di")) {
    auto l = validate_di(cfg);
    lines.insert(lines.end(), l.begin(), l.end());
  }
  bool all = true;
  std::ostringstream rep;
  for (const auto& l : lines) {
    all = all && l.ok;
    rep << (l.ok ? "PASS " : "FAIL ") << l.name;
    if (!l.detail.empty()) rep << ": " << l.detail;
    rep << '\n';
  }
  rep << (all ? "all checks passed\n" : "validation failed\n");
  std::cout << rep.str();
  const fs::path dir = output_dir(f, cfg);
  ensure_dir(dir);
  write_file(dir / "validate_report.txt", [&](std::ostream& os) { os << rep.str(); });
  return all ? 0 : 1;
}

// ---- run / saddle -----------------------------------------------------------

void write_diagnostics(std::ostream& os, const Experiment& e, const Trajectory& tr) {
  CsvWriter w(os,
              {"window", "t_start", "n_start", "n_end", "interpolation_gap", "noise_partial_sum", "apt_metric",
               "dist_to_lambda", "occupation_tv"},
              "windows of length gap_window on the slow clock");
  std::vector<GapWindow> windows;
  try {
    windows = interpolation_gap(tr, 1, e.diagnostics.gap_window);
  } catch (const ScheduleError&) {
    return;  // run shorter than one window
  }
  const double t_end = tr.t_slow.back();
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const GapWindow& g = windows[i];
    double apt = kNaN;
    if (e.slow_field && g.t_start + e.diagnostics.apt_window <= t_end)
      apt = apt_profile(tr, *e.slow_field, {g.t_start}, {e.diagnostics.apt_window, e.diagnostics.apt_dt, e.diagnostics.apt_terms})
                .front();
    const double dist = e.lambda ? (tr.x[g.start] - e.lambda(tr.y[g.start])).norm() : kNaN;
    double tv = kNaN;
    const StationarySet st = stationary_set(e.system().k2.frozen(tr.x[g.start], tr.y[g.start]));
    if (st.unique()) {
      const EmpiricalMeasure occ = occupation(tr, g.start, g.end);
      tv = total_variation(occ.s_marginal(e.system().k2.alphabet_size()), st.vertices.front());
    }
    w.row({static_cast<double>(i), g.t_start, static_cast<double>(g.start), static_cast<double>(g.end), g.gap,
           g.noise_sum, apt, dist, tv});
  }
}

json saddle_report_json(const OptimalityReport& r) {
  json j = {{"x_bar", std::vector<double>(r.x_bar.data(), r.x_bar.data() + r.x_bar.size())},
            {"y_bar", std::vector<double>(r.y_bar.data(), r.y_bar.data() + r.y_bar.size())},
            {"feasibility_gap", r.feasibility_gap},
            {"primal_dual_gap", r.primal_dual_gap},
            {"distance_to_lambda", r.distance_to_lambda}};
  j["eps_surplus"] = r.eps_surplus ? json(*r.eps_surplus) : json(nullptr);
  return j;
}

struct ReplicaResult {
  bool diverged = false;
  std::size_t divergence_step = 0;
  std::optional<Trajectory> trajectory;
};

ReplicaResult run_one(const Experiment& e, std::uint64_t seed) {
  RunOptions o = e.options;
  o.seed = seed;
  try {
    return {false, 0, run(e.system(), o)};
  } catch (const DivergenceError& d) {
    return {true, d.step(), std::nullopt};
  }
}

std::vector<ReplicaResult> run_all(const Experiment& e, std::size_t replicas) {
  std::vector<std::future<ReplicaResult>> jobs;
  for (std::size_t i = 0; i < replicas; ++i)
    jobs.push_back(std::async(std::launch::async, [&e, i] { return run_one(e, e.options.seed + i); }));
  std::vector<ReplicaResult> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

int cmd_run(const Flags& f, bool saddle_mode) {
  const json cfg = load_config(f.config);
  Experiment e = experiment_of(cfg);
  apply_overrides(e, f);
  if (saddle_mode && !e.saddle) throw ConfigError("the saddle subcommand needs problem 'saddle_quadratic'");
  if (f.replicas < 1) throw ConfigError("--replicas must be at least 1");
  const fs::path root = output_dir(f, cfg);
  ensure_dir(root);

  const std::vector<ReplicaResult> results = run_all(e, f.replicas);
  int status = 0;
  Vector x_sum, y_sum;
  json reports = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    const fs::path dir = f.replicas > 1 ? root / ("replica_" + std::to_string(i)) : root;
    ensure_dir(dir);
    json manifest = base_manifest(saddle_mode ? "saddle" : "run", f, cfg);
    manifest["seed"] = e.options.seed + i;
    manifest["steps"] = e.options.steps;
    manifest["schedule"] = schedule_json(e.options.schedule);
    const ReplicaResult& r = results[i];
    if (r.diverged) {
      manifest["status"] = "diverged";
      manifest["divergence_step"] = r.divergence_step;
      std::cerr << "replica " << i << ": iterates diverged at step " << r.divergence_step << '\n';
      status = 2;
    } else {
      const Trajectory& tr = *r.trajectory;
      manifest["status"] = "ok";
      json outputs = json::array();
      if (!saddle_mode) {
        write_file(dir / "trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, tr); });
        write_file(dir / "diagnostics.csv", [&](std::ostream& os) { write_diagnostics(os, e, tr); });
        outputs = {"trajectory.csv", "diagnostics.csv"};
      } else {
        const std::size_t tail = static_cast<std::size_t>(e.diagnostics.tail_fraction * static_cast<double>(tr.x.size()));
        const std::size_t first = tr.x.size() - std::max<std::size_t>(tail, 1);
        write_file(dir / "tail.csv", [&](std::ostream& os) { write_trajectory_csv(os, tr, first); });
        const OptimalityReport rep = optimality_report(*e.saddle, tr, e.diagnostics.tail_fraction);
        reports.push_back(saddle_report_json(rep));
        x_sum = x_sum.size() ? Vector(x_sum + rep.x_bar) : rep.x_bar;
        y_sum = y_sum.size() ? Vector(y_sum + rep.y_bar) : rep.y_bar;
        outputs = {"tail.csv"};
      }
      manifest["outputs"] = outputs;
    }
    write_file(dir / "manifest.json", [&](std::ostream& os) { os << manifest.dump(2) << '\n'; });
  }

  if (saddle_mode && status == 0) {
    const double k = static_cast<double>(results.size());
    const OptimalityReport mean = optimality_at(*e.saddle, x_sum / k, y_sum / k);
    json report = base_manifest("saddle", f, cfg);
    report["replicas"] = results.size();
    report["tail_fraction"] = e.diagnostics.tail_fraction;
    report["replica_mean"] = saddle_report_json(mean);
    report["per_replica"] = reports;
    write_file(root / "report.json", [&](std::ostream& os) { os << report.dump(2) << '\n'; });
    std::cout << report["replica_mean"].dump(2) << '\n';
  }
  return status;
}

// ---- solve-di -----------------------------------------------------------------

int cmd_solve_di(const Flags& f) {
  const json cfg = load_config(f.config);
  const DIJob job = di_job_of(cfg);
  if (f.envelope && !job.saddle) throw ConfigError("--envelope needs di.field 'saddle_dual'");
  const DIPath path = di_solve(*job.field, job.z0, job.horizon, job.dt, job.selection);
  for (const auto& w : path.warnings) std::cerr << "warning: " << w << '\n';
  const fs::path dir = output_dir(f, cfg);
  ensure_dir(dir);
  json manifest = base_manifest("solve-di", f, cfg);
  manifest["status"] = "ok";
  if (f.envelope) {
    const EnvelopeReport env = verify_envelope(*job.saddle, path);
    write_file(dir / "dipath.csv", [&](std::ostream& os) {
      write_dipath_csv(os, path, {"value", "integral", "discrepancy"}, {env.value, env.integral, env.discrepancy});
    });
    manifest["envelope"] = {{"max_discrepancy", env.max_discrepancy}, {"nondecreasing", env.nondecreasing}};
    std::cout << "envelope max discrepancy " << format_double(env.max_discrepancy)
              << (env.nondecreasing ? ", value nondecreasing\n" : ", value NOT nondecreasing\n");
  } else {
    write_file(dir / "dipath.csv", [&](std::ostream& os) { write_dipath_csv(os, path); });
  }
  manifest["outputs"] = {"dipath.csv"};
  write_file(dir / "manifest.json", [&](std::ostream& os) { os << manifest.dump(2) << '\n'; });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-timescale stochastic recursive inclusions: simulation and checks"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Flags f;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON config file")->required();
    sub->add_option("--out", f.out, "output directory (default: $SRI_OUT_DIR, then config output_dir, then ./out)");
  };
  auto* validate = app.add_subcommand("validate", "check a config's maps, kernels and schedule");
  add_common(validate);
  auto* run_cmd = app.add_subcommand("run", "simulate and write trajectory and diagnostics CSVs");
  auto* saddle_cmd = app.add_subcommand("saddle", "primal-dual solve with an optimality report");
  for (auto* sub : {run_cmd, saddle_cmd}) {
    add_common(sub);
    sub->add_option("--seed", f.seed, "64-bit seed (overrides config)");
    sub->add_option("--steps", f.steps, "number of steps N (overrides config)");
    sub->add_option("--replicas", f.replicas, "independent seeds run concurrently")->check(CLI::PositiveNumber);
  }
  auto* di_cmd = app.add_subcommand("solve-di", "Euler solve of a differential inclusion");
  add_common(di_cmd);
  di_cmd->add_flag("--envelope", f.envelope, "add envelope-identity columns (dual field only)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*validate) return cmd_validate(f);
    if (*run_cmd) return cmd_run(f, false);
    if (*saddle_cmd) return cmd_run(f, true);
    if (*di_cmd) return cmd_solve_di(f);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
