#ifndef SRI_TOOLS_EXPERIMENT_HPP
#define SRI_TOOLS_EXPERIMENT_HPP

// Config parsing and problem assembly for the command-line runner.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sri/sri.hpp"

namespace sri::cli {

using nlohmann::json;

/// Unparseable or inconsistent configuration (exit status 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File-system failure (exit status 3).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline json load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  try {
    json j = json::parse(text);
    if (!j.is_object()) throw ConfigError(path + ": top level must be an object");
    return j;
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": parse error: " + e.what());
  }
}

/// FNV-1a over the canonical dump (sorted keys, no whitespace).
inline std::string config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Field access with the dotted path in every message.
inline const json& field(const json& j, const std::string& path, const std::string& key) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError("missing field '" + path + key + "'");
  return j.at(key);
}

inline double number(const json& v, const std::string& name) {
  if (!v.is_number()) throw ConfigError("field '" + name + "' must be a number");
  return v.get<double>();
}

inline double number_or(const json& j, const std::string& path, const std::string& key, double fallback) {
  return j.contains(key) ? number(j.at(key), path + key) : fallback;
}

inline std::uint64_t unsigned_or(const json& j, const std::string& path, const std::string& key, std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    throw ConfigError("field '" + path + key + "' must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

inline Vector vector_of(const json& v, const std::string& name) {
  if (!v.is_array() || v.empty()) throw ConfigError("field '" + name + "' must be a nonempty array of numbers");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = number(v[i], name + "[" + std::to_string(i) + "]");
  return out;
}

inline Matrix matrix_of(const json& v, const std::string& name, const std::string& row_word = "row") {
  if (!v.is_array() || v.empty()) throw ConfigError("field '" + name + "' must be a nonempty array of rows");
  const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
  Matrix m(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string rn = name + " " + row_word + " " + std::to_string(i);
    if (!v[i].is_array() || v[i].size() != cols || cols == 0)
      throw ConfigError("field '" + rn + "' must be an array of " + std::to_string(cols) + " numbers");
    for (std::size_t k = 0; k < cols; ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = number(v[i][k], rn);
  }
  return m;
}

/// A constant kernel given as a nested array, checked square and stochastic.
inline Matrix kernel_matrix(const json& v, const std::string& name, std::size_t alphabet) {
  if (!v.is_array()) throw ConfigError("field '" + name + "' must be an array of rows");
  if (v.size() != alphabet)
    throw ConfigError("field '" + name + "': expected " + std::to_string(alphabet) + " rows, got " +
                      std::to_string(v.size()) + " (missing kernel row " + std::to_string(v.size()) + ")");
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!v[i].is_array() || v[i].size() != alphabet)
      throw ConfigError("field '" + name + " row " + std::to_string(i) + "' must hold " + std::to_string(alphabet) +
                        " probabilities");
  const Matrix p = matrix_of(v, name);
  try {
    require_stochastic(p);
  } catch (const KernelError& e) {
    throw ConfigError("field '" + name + "': " + e.what());
  }
  return p;
}

/// Kernel: nested array, or {"builtin": "logistic_tilt", "strength": c}.
/// logistic_tilt is a two-state kernel whose rows move to state 1 with
/// probability 1/(1 + exp(-c·x[0])), independent of the current state.
inline FiniteKernel kernel_of(const json& v, const std::string& name, std::size_t alphabet) {
  if (v.is_object()) {
    const std::string b = field(v, name + ".", "builtin").get<std::string>();
    if (b != "logistic_tilt") throw ConfigError("field '" + name + ".builtin': unknown kernel '" + b + "'");
    if (alphabet != 2) throw ConfigError("field '" + name + "': logistic_tilt needs a two-state alphabet");
    const double c = number_or(v, name + ".", "strength", 1.0);
    return FiniteKernel(2, [c](const Vector& x, const Vector&, std::size_t) {
      const double p = 1.0 / (1.0 + std::exp(-c * x[0]));
      return Vector((Vector(2) << 1.0 - p, p).finished());
    });
  }
  return FiniteKernel::constant(kernel_matrix(v, name, alphabet));
}

inline StepSchedule schedule_of(const json& cfg) {
  const json& s = field(cfg, "", "schedule");
  StepSchedule out;
  out.alpha = number(field(s, "schedule.", "alpha"), "schedule.alpha");
  out.beta = number(field(s, "schedule.", "beta"), "schedule.beta");
  out.a0 = number_or(s, "schedule.", "a0", 1.0);
  out.b0 = number_or(s, "schedule.", "b0", 1.0);
  return out;
}

inline NoiseModel noise_of(const json& j, const std::string& path) {
  if (j.is_null()) return NoiseModel::off();
  const std::string kind = field(j, path + ".", "kind").get<std::string>();
  if (kind == "none") return NoiseModel::off();
  const double scale = number(field(j, path + ".", "scale"), path + ".scale");
  if (!(scale >= 0.0)) throw ConfigError("field '" + path + ".scale' must be nonnegative");
  if (kind == "uniform") return NoiseModel::uniform_box(scale);
  if (kind == "gaussian") return NoiseModel::clipped_gaussian(scale);
  throw ConfigError("field '" + path + ".kind': unknown noise model '" + kind + "'");
}

inline SelectionRule selection_of(const json& j, const std::string& key) {
  if (!j.contains(key)) return SelectionRule::least_norm;
  const std::string s = j.at(key).get<std::string>();
  if (s == "least_norm") return SelectionRule::least_norm;
  if (s == "random_vertex") return SelectionRule::random_vertex;
  throw ConfigError("field '" + key + "': unknown selection rule '" + s + "'");
}

inline SaddleProblem saddle_of(const json& cfg) {
  const json& s = field(cfg, "", "saddle");
  const json& th = field(s, "saddle.", "theta");
  if (!th.is_array() || th.empty()) throw ConfigError("field 'saddle.theta' must be a nonempty array");
  const std::size_t n = th.size();
  QuadraticSpec q;
  for (std::size_t i = 0; i < n; ++i) q.theta.push_back(vector_of(th[i], "saddle.theta[" + std::to_string(i) + "]"));
  const json& cs = field(s, "saddle.", "C");
  const json& ws = field(s, "saddle.", "w");
  const json& fp = field(s, "saddle.", "feasible_points");
  if (!cs.is_array() || cs.size() != n) throw ConfigError("field 'saddle.C' needs one matrix per state");
  if (!ws.is_array() || ws.size() != n) throw ConfigError("field 'saddle.w' needs one vector per state");
  if (!fp.is_array() || fp.size() != n) throw ConfigError("field 'saddle.feasible_points' needs one point per state");
  for (std::size_t i = 0; i < n; ++i) {
    q.c.push_back(matrix_of(cs[i], "saddle.C[" + std::to_string(i) + "]"));
    q.w.push_back(vector_of(ws[i], "saddle.w[" + std::to_string(i) + "]"));
    q.feasible_points.push_back(vector_of(fp[i], "saddle.feasible_points[" + std::to_string(i) + "]"));
  }
  q.kernel = kernel_matrix(field(s, "saddle.", "kernel"), "saddle.kernel", n);
  q.eps = number(field(s, "saddle.", "eps"), "saddle.eps");
  q.r = number(field(s, "saddle.", "r"), "saddle.r");
  q.growth_k = number(field(s, "saddle.", "K"), "saddle.K");
  if (s.contains("x_star")) q.x_star = vector_of(s.at("x_star"), "saddle.x_star");
  try {
    return quadratic_problem(q);
  } catch (const SaddleError& e) {
    throw ConfigError(std::string("saddle: ") + e.what());
  }
}

struct Diagnostics {
  double gap_window = 1.0;
  double apt_window = 2.0;
  double apt_dt = 1e-2;
  int apt_terms = 10;
  double tail_fraction = 0.1;
};

/// Everything `run`, `saddle` and `validate` need for a two-timescale problem.
struct Experiment {
  std::string problem;
  std::optional<TwoTimescaleSystem> system_;
  RunOptions options;
  std::optional<SaddleProblem> saddle;
  std::optional<MeanField> slow_field;
  std::function<Vector(const Vector&)> lambda;  // empty when lambda(y) is unknown
  Diagnostics diagnostics;

  const TwoTimescaleSystem& system() const { return *system_; }
};

inline Diagnostics diagnostics_of(const json& cfg) {
  Diagnostics d;
  if (!cfg.contains("diagnostics")) return d;
  const json& j = cfg.at("diagnostics");
  d.gap_window = number_or(j, "diagnostics.", "gap_window", d.gap_window);
  d.apt_window = number_or(j, "diagnostics.", "apt_window", d.apt_window);
  d.apt_dt = number_or(j, "diagnostics.", "apt_dt", d.apt_dt);
  d.apt_terms = static_cast<int>(number_or(j, "diagnostics.", "apt_terms", d.apt_terms));
  d.tail_fraction = number_or(j, "diagnostics.", "tail_fraction", d.tail_fraction);
  if (!(d.gap_window > 0.0) || !(d.apt_window > 0.0) || !(d.apt_dt > 0.0) || d.apt_terms < 1 ||
      !(d.tail_fraction > 0.0 && d.tail_fraction <= 1.0))
    throw ConfigError("field 'diagnostics': windows and dt must be positive, apt_terms >= 1, tail_fraction in (0, 1]");
  return d;
}

inline Experiment experiment_of(const json& cfg) {
  Experiment e;
  e.problem = field(cfg, "", "problem").get<std::string>();
  e.diagnostics = diagnostics_of(cfg);
  RunOptions& o = e.options;
  o.schedule = schedule_of(cfg);
  o.steps = unsigned_or(cfg, "", "steps", 1000);
  o.seed = unsigned_or(cfg, "", "seed", 1);
  o.divergence_bound = number_or(cfg, "", "divergence_bound", std::numeric_limits<double>::infinity());
  const json init = cfg.value("initial", json::object());
  const json noise = cfg.value("noise", json::object());

  if (e.problem == "saddle_quadratic") {
    e.saddle = saddle_of(cfg);
    const SaddleProblem& p = *e.saddle;
    e.system_ = primal_dual_system(p);
    PrimalDualOptions po;
    po.schedule = o.schedule;
    po.noise_primal = noise_of(noise.value("primal", json()), "noise.primal");
    po.noise_dual = noise_of(noise.value("dual", json()), "noise.dual");
    po.select_primal = selection_of(cfg, "selection");
    po.x0 = init.contains("x") ? vector_of(init.at("x"), "initial.x") : Vector(Vector::Zero(p.d1()));
    po.y0 = init.contains("y") ? vector_of(init.at("y"), "initial.y") : Vector(Vector::Zero(p.d2()));
    po.s0 = unsigned_or(init, "initial.", "s", 0);
    po.steps = o.steps;
    po.seed = o.seed;
    if (po.x0.size() != p.d1() || po.y0.size() != p.d2()) throw ConfigError("field 'initial': wrong dimension");
    if (po.s0 >= p.alphabet()) throw ConfigError("field 'initial.s' is outside the alphabet");
    const double bound = o.divergence_bound;
    o = to_run_options(p, po);
    o.divergence_bound = bound;
    e.slow_field = dual_field(p);
    e.lambda = [p](const Vector& y) { return lambda_min(p, y); };
  } else if (e.problem == "linear_decay") {
    // H1 = {-x}, H2 = {-y}; lambda(y) = {0}.
    const auto d1 = static_cast<Eigen::Index>(unsigned_or(cfg, "", "d1", 1));
    const auto d2 = static_cast<Eigen::Index>(unsigned_or(cfg, "", "d2", 1));
    const std::size_t alphabet = unsigned_or(cfg, "", "alphabet", 1);
    if (d1 < 1 || d2 < 1 || alphabet < 1) throw ConfigError("fields 'd1', 'd2', 'alphabet' must be positive");
    FiniteKernel k1 = cfg.contains("kernel") ? kernel_of(cfg.at("kernel"), "kernel", alphabet)
                                             : FiniteKernel::constant(Matrix::Identity(1, 1));
    if (k1.alphabet_size() != alphabet) throw ConfigError("field 'kernel': size differs from 'alphabet'");
    SetValuedMap h1(MapDims{d1, d2, d1}, alphabet,
                    [](const Vector& x, const Vector&, std::size_t) { return ConvexSet::point(-x); }, 1.0, "H1");
    SetValuedMap h2(MapDims{d1, d2, d2}, alphabet,
                    [](const Vector&, const Vector& y, std::size_t) { return ConvexSet::point(-y); }, 1.0, "H2");
    e.system_ = TwoTimescaleSystem{h1, h2, k1, k1, false};
    o.noise_fast = noise_of(noise.value("fast", json()), "noise.fast");
    o.noise_slow = noise_of(noise.value("slow", json()), "noise.slow");
    o.select_fast = selection_of(cfg, "selection");
    o.select_slow = o.select_fast;
    o.x0 = init.contains("x") ? vector_of(init.at("x"), "initial.x") : Vector(Vector::Ones(d1));
    o.y0 = init.contains("y") ? vector_of(init.at("y"), "initial.y") : Vector(Vector::Ones(d2));
    o.s1_0 = o.s2_0 = unsigned_or(init, "initial.", "s", 0);
    if (o.x0.size() != d1 || o.y0.size() != d2) throw ConfigError("field 'initial': wrong dimension");
    if (o.s1_0 >= alphabet) throw ConfigError("field 'initial.s' is outside the alphabet");
    e.lambda = [d1](const Vector&) { return Vector(Vector::Zero(d1)); };
    e.slow_field = slow_mean_field(
        h2, k1, [d1](const Vector&) { return std::vector<Vector>{Vector::Zero(d1)}; }, 1.0);
  } else {
    throw ConfigError("field 'problem': unknown problem '" + e.problem + "' (saddle_quadratic, linear_decay)");
  }
  return e;
}

/// Differential inclusion job for `solve-di`.
struct DIJob {
  std::string field_name;
  std::optional<MeanField> field;
  std::optional<SaddleProblem> saddle;  // set for the dual ODE
  Vector z0;
  double horizon = 1.0;
  double dt = 1e-3;
  Selection selection = LeastNorm{};
};

inline MeanField sign_field() {
  return MeanField(
      1, 1,
      [](const Vector& z) {
        if (z[0] > 0.0) return ConvexSet::point(Vector::Constant(1, -1.0));
        if (z[0] < 0.0) return ConvexSet::point(Vector::Constant(1, 1.0));
        return ConvexSet::interval(-1.0, 1.0);
      },
      1.0, FieldKind::generic, "sign");
}

inline DIJob di_job_of(const json& cfg) {
  const json& d = field(cfg, "", "di");
  DIJob job;
  job.field_name = field(d, "di.", "field").get<std::string>();
  job.z0 = vector_of(field(d, "di.", "z0"), "di.z0");
  job.horizon = number(field(d, "di.", "horizon"), "di.horizon");
  job.dt = number(field(d, "di.", "dt"), "di.dt");
  if (job.field_name == "sign") {
    if (job.z0.size() != 1) throw ConfigError("field 'di.z0': the sign field is one-dimensional");
    job.field = sign_field();
  } else if (job.field_name == "linear_decay") {
    job.field = MeanField(
        job.z0.size(), job.z0.size(), [](const Vector& z) { return ConvexSet::point(-z); }, 1.0, FieldKind::generic,
        "linear_decay");
  } else if (job.field_name == "saddle_dual") {
    job.saddle = saddle_of(cfg);
    if (job.z0.size() != job.saddle->d2()) throw ConfigError("field 'di.z0': wrong dimension for the dual");
    job.field = dual_field(*job.saddle);
  } else {
    throw ConfigError("field 'di.field': unknown field '" + job.field_name + "' (sign, linear_decay, saddle_dual)");
  }
  if (d.contains("selection")) {
    const json& s = d.at("selection");
    if (s.is_string() && s.get<std::string>() == "least_norm") {
      job.selection = LeastNorm{};
    } else if (s.is_object() && s.contains("target")) {
      job.selection = TargetSelection{vector_of(s.at("target"), "di.selection.target")};
    } else if (s.is_object() && s.contains("param")) {
      job.selection = ParamSelection{vector_of(s.at("param"), "di.selection.param")};
    } else {
      throw ConfigError("field 'di.selection': expected \"least_norm\", {\"target\": [...]} or {\"param\": [...]}");
    }
  }
  return job;
}

}  // namespace sri::cli

#endif  // SRI_TOOLS_EXPERIMENT_HPP
