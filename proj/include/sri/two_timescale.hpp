#ifndef SRI_TWO_TIMESCALE_HPP
#define SRI_TWO_TIMESCALE_HPP

/**
 * Coupled stochastic recursive inclusions on two timescales:
 *
 *   Y_{n+1} - Y_n - b(n) M2_{n+1} ∈ b(n) H2(X_n, Y_n, S2_n)    (slow)
 *   X_{n+1} - X_n - a(n) M1_{n+1} ∈ a(n) H1(X_n, Y_n, S1_n)    (fast)
 *
 * with S1, S2 iterate-dependent Markov chains, b(n)/a(n) -> 0, and bounded
 * zero-mean additive noise. Alongside the driver live the diagnostics used to
 * check the asymptotic behaviour on finite runs: piecewise-linear
 * interpolation on either clock, the noise-free re-integration gap over
 * windows, occupation measures, and APT distances to the slow mean field.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <future>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sri/convex_set.hpp"
#include "sri/di.hpp"
#include "sri/markov.hpp"
#include "sri/mean_field.hpp"
#include "sri/rng.hpp"
#include "sri/set_valued_map.hpp"

namespace sri {

class ScheduleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an iterate stops being finite (or leaves the configured bound).
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(std::size_t step)
      : std::runtime_error("iterates diverged at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// a(n) = a0 (n+1)^-alpha, b(n) = b0 (n+1)^-beta.
struct StepSchedule {
  double alpha = 0.6;
  double beta = 0.9;
  double a0 = 1.0;
  double b0 = 1.0;

  double a(std::size_t n) const { return a0 * std::pow(static_cast<double>(n) + 1.0, -alpha); }
  double b(std::size_t n) const { return b0 * std::pow(static_cast<double>(n) + 1.0, -beta); }
};

struct ScheduleReport {
  std::vector<std::string> violations;
  double a_square_sum = 0.0;
  double b_square_sum = 0.0;

  bool ok() const { return violations.empty(); }
};

/**
 * Checks the step-size conditions over the first n_steps steps: a(0), b(0)
 * at most 1; both nonincreasing; b/a decreasing; 2α > 1 and 2β > 1; β > α;
 * exponents at most 1 so the sums diverge; partial sums of squares within
 * the zeta bound a0²·(1 + 1/(2α - 1)).
 */
inline ScheduleReport validate_schedule(const StepSchedule& s, std::size_t n_steps) {
  if (n_steps < 2) throw ScheduleError("validate_schedule: horizon must be at least 2");
  if (!std::isfinite(s.alpha) || !std::isfinite(s.beta) || !std::isfinite(s.a0) || !std::isfinite(s.b0))
    throw ScheduleError("validate_schedule: non-finite schedule parameter");
  ScheduleReport r;
  auto fail = [&](const std::string& what) { r.violations.push_back(what); };

  if (!(s.a0 > 0.0 && s.a0 <= 1.0)) fail("a0 must lie in (0, 1]");
  if (!(s.b0 > 0.0 && s.b0 <= 1.0)) fail("b0 must lie in (0, 1]");
  if (!(2.0 * s.alpha > 1.0)) fail("alpha: square summability requires 2*alpha > 1");
  if (!(2.0 * s.beta > 1.0)) fail("beta: square summability requires 2*beta > 1");
  if (!(s.alpha <= 1.0)) fail("alpha: sum of a(n) must diverge (alpha <= 1)");
  if (!(s.beta <= 1.0)) fail("beta: sum of b(n) must diverge (beta <= 1)");
  if (!(s.beta > s.alpha)) fail("timescale separation requires beta > alpha");
  if (!r.ok()) return r;

  double prev_a = s.a(0), prev_b = s.b(0), prev_ratio = prev_b / prev_a;
  r.a_square_sum = prev_a * prev_a;
  r.b_square_sum = prev_b * prev_b;
  bool mono = true, ratio_mono = true;
  for (std::size_t n = 1; n < n_steps; ++n) {
    const double an = s.a(n), bn = s.b(n), ratio = bn / an;
    mono = mono && an <= prev_a && bn <= prev_b;
    ratio_mono = ratio_mono && ratio <= prev_ratio;
    r.a_square_sum += an * an;
    r.b_square_sum += bn * bn;
    prev_a = an;
    prev_b = bn;
    prev_ratio = ratio;
  }
  if (!mono) fail("step sizes are not nonincreasing");
  if (!ratio_mono || !(prev_ratio < s.b(0) / s.a(0))) fail("b(n)/a(n) is not decreasing");
  if (r.a_square_sum > s.a0 * s.a0 * (1.0 + 1.0 / (2.0 * s.alpha - 1.0))) fail("sum of a(n)^2 exceeds the zeta bound");
  if (r.b_square_sum > s.b0 * s.b0 * (1.0 + 1.0 / (2.0 * s.beta - 1.0))) fail("sum of b(n)^2 exceeds the zeta bound");
  return r;
}

/// Bounded zero-mean iid additive noise.
struct NoiseModel {
  enum class Kind { none, uniform, gaussian };
  Kind kind = Kind::none;
  double scale = 0.0;  // half-width for uniform, sigma for gaussian (clipped at 6 sigma)

  static NoiseModel off() { return {}; }
  static NoiseModel uniform_box(double c) { return {Kind::uniform, c}; }
  static NoiseModel clipped_gaussian(double sigma) { return {Kind::gaussian, sigma}; }

  Vector draw(Eigen::Index dim, Rng& rng) const {
    Vector m = Vector::Zero(dim);
    if (kind == Kind::uniform) {
      for (Eigen::Index i = 0; i < dim; ++i) m[i] = uniform(rng, -scale, scale);
    } else if (kind == Kind::gaussian) {
      for (Eigen::Index i = 0; i < dim; ++i) m[i] = std::clamp(scale * standard_normal(rng), -6.0 * scale, 6.0 * scale);
    }
    return m;
  }

  /// Coordinatewise bound on |M|.
  double bound() const { return kind == Kind::uniform ? scale : kind == Kind::gaussian ? 6.0 * scale : 0.0; }
};

enum class SelectionRule { least_norm, random_vertex };

inline Vector select_from(const ConvexSet& set, SelectionRule rule, Rng& rng) {
  if (set.is_singleton()) return set.points().front();
  if (rule == SelectionRule::least_norm) return project(set, Vector::Zero(set.dim()));
  const ConvexSet h = reduce_hull(set);
  const auto i = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(h.size()));
  return h.points()[std::min(i, h.size() - 1)];
}

/// Drift maps and noise kernels of the coupled recursion.
struct TwoTimescaleSystem {
  SetValuedMap h1;
  SetValuedMap h2;
  FiniteKernel k1;
  FiniteKernel k2;
  // When set, one chain drives both recursions (S2_n = S1_n, sampled from k1).
  bool shared_noise_state = false;
};

struct RunOptions {
  StepSchedule schedule;
  SelectionRule select_fast = SelectionRule::least_norm;
  SelectionRule select_slow = SelectionRule::least_norm;
  NoiseModel noise_fast;
  NoiseModel noise_slow;
  Vector x0;
  Vector y0;
  std::size_t s1_0 = 0;
  std::size_t s2_0 = 0;
  std::size_t steps = 0;
  std::uint64_t seed = 1;
  double divergence_bound = std::numeric_limits<double>::infinity();
};

/**
 * Logged run. Index n runs over 0..N for iterates, states and clocks and over
 * 0..N-1 for selections V and noise M (M[n] is the noise M_{n+1} applied in
 * step n).
 */
struct Trajectory {
  StepSchedule schedule;
  std::vector<Vector> x, y;
  std::vector<std::size_t> s1, s2;
  std::vector<Vector> v1, v2;
  std::vector<Vector> m1, m2;
  std::vector<double> t_fast, t_slow;

  std::size_t steps() const { return x.empty() ? 0 : x.size() - 1; }
};

/// Runs the recursion. Markov states at n+1 are drawn from the kernels at the
/// pre-update iterates (X_n, Y_n). Deterministic given the seed.
inline Trajectory run(const TwoTimescaleSystem& sys, const RunOptions& opt) {
  const MapDims& d1 = sys.h1.dims();
  const MapDims& d2 = sys.h2.dims();
  if (d1.k != d1.d1 || d2.k != d2.d2 || d1.d1 != d2.d1 || d1.d2 != d2.d2)
    throw MapError("run: H1 must map into R^d1 and H2 into R^d2 over the same (x, y) space");
  if (opt.x0.size() != d1.d1 || opt.y0.size() != d1.d2) throw MapError("run: initial point has the wrong dimension");
  if (sys.h1.alphabet_size() != sys.k1.alphabet_size() || sys.h2.alphabet_size() != sys.k2.alphabet_size())
    throw MapError("run: map and kernel alphabets differ");
  if (opt.s1_0 >= sys.k1.alphabet_size() || opt.s2_0 >= sys.k2.alphabet_size())
    throw KernelError("run: initial noise state out of range");
  if (opt.steps > 0) {
    const ScheduleReport sr = validate_schedule(opt.schedule, std::max<std::size_t>(opt.steps, 2));
    if (!sr.ok()) throw ScheduleError("run: invalid schedule: " + sr.violations.front());
  }

  Rng rng_select(mix_seed(opt.seed, 1));
  Rng rng_noise(mix_seed(opt.seed, 2));
  Rng rng_chain(mix_seed(opt.seed, 3));

  Trajectory tr;
  tr.schedule = opt.schedule;
  const std::size_t n_steps = opt.steps;
  tr.x.reserve(n_steps + 1);
  tr.y.reserve(n_steps + 1);
  tr.s1.reserve(n_steps + 1);
  tr.s2.reserve(n_steps + 1);
  tr.t_fast.reserve(n_steps + 1);
  tr.t_slow.reserve(n_steps + 1);
  tr.v1.reserve(n_steps);
  tr.v2.reserve(n_steps);
  tr.m1.reserve(n_steps);
  tr.m2.reserve(n_steps);

  tr.x.push_back(opt.x0);
  tr.y.push_back(opt.y0);
  tr.s1.push_back(opt.s1_0);
  tr.s2.push_back(sys.shared_noise_state ? opt.s1_0 : opt.s2_0);
  tr.t_fast.push_back(0.0);
  tr.t_slow.push_back(0.0);

  for (std::size_t n = 0; n < n_steps; ++n) {
    const Vector& xn = tr.x.back();
    const Vector& yn = tr.y.back();
    const double an = opt.schedule.a(n);
    const double bn = opt.schedule.b(n);

    Vector v1, v2;
    try {
      v1 = select_from(sys.h1(xn, yn, tr.s1.back()), opt.select_fast, rng_select);
      v2 = select_from(sys.h2(xn, yn, tr.s2.back()), opt.select_slow, rng_select);
    } catch (const NonFiniteError&) {
      throw DivergenceError(n + 1);  // drift overflowed at the current iterate
    }
    Vector m1 = opt.noise_fast.draw(d1.d1, rng_noise);
    Vector m2 = opt.noise_slow.draw(d1.d2, rng_noise);

    Vector x_next = xn + an * (v1 + m1);
    Vector y_next = yn + bn * (v2 + m2);
    if (!x_next.allFinite() || !y_next.allFinite() || x_next.norm() + y_next.norm() > opt.divergence_bound)
      throw DivergenceError(n + 1);

    const std::size_t s1_next = sample_next(sys.k1, xn, yn, tr.s1.back(), rng_chain);
    const std::size_t s2_next = sys.shared_noise_state ? s1_next : sample_next(sys.k2, xn, yn, tr.s2.back(), rng_chain);

    tr.v1.push_back(std::move(v1));
    tr.v2.push_back(std::move(v2));
    tr.m1.push_back(std::move(m1));
    tr.m2.push_back(std::move(m2));
    tr.x.push_back(std::move(x_next));
    tr.y.push_back(std::move(y_next));
    tr.s1.push_back(s1_next);
    tr.s2.push_back(s2_next);
    tr.t_fast.push_back(tr.t_fast.back() + an);
    tr.t_slow.push_back(tr.t_slow.back() + bn);
  }
  return tr;
}

/// Independent replicas with seeds seed, seed+1, ...; results in replica order.
inline std::vector<Trajectory> run_replicas(const TwoTimescaleSystem& sys, const RunOptions& opt, std::size_t count) {
  std::vector<std::future<Trajectory>> jobs;
  for (std::size_t i = 0; i < count; ++i) {
    RunOptions o = opt;
    o.seed = opt.seed + i;
    jobs.push_back(std::async(std::launch::async, [&sys, o] { return run(sys, o); }));
  }
  std::vector<Trajectory> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

struct UpdateIdentityReport {
  double max_fast_distance = 0.0;
  double max_slow_distance = 0.0;
  std::size_t worst_fast_step = 0;
  std::size_t worst_slow_step = 0;

  bool ok(double tol) const { return max_fast_distance <= tol && max_slow_distance <= tol; }
};

/**
 * Re-verifies the recursion from the logs alone: the distance from
 * X_{n+1} - X_n - a(n)M1_{n+1} to a(n)·H1(X_n, Y_n, S1_n), and likewise for Y.
 */
inline UpdateIdentityReport verify_update_identity(const Trajectory& tr, const TwoTimescaleSystem& sys) {
  UpdateIdentityReport r;
  for (std::size_t n = 0; n < tr.steps(); ++n) {
    const double an = tr.schedule.a(n), bn = tr.schedule.b(n);
    const Vector dx = tr.x[n + 1] - tr.x[n] - an * tr.m1[n];
    const Vector dy = tr.y[n + 1] - tr.y[n] - bn * tr.m2[n];
    const double ex = an * distance(sys.h1(tr.x[n], tr.y[n], tr.s1[n]), dx / an);
    const double ey = bn * distance(sys.h2(tr.x[n], tr.y[n], tr.s2[n]), dy / bn);
    if (ex > r.max_fast_distance) {
      r.max_fast_distance = ex;
      r.worst_fast_step = n;
    }
    if (ey > r.max_slow_distance) {
      r.max_slow_distance = ey;
      r.worst_slow_step = n;
    }
  }
  return r;
}

enum class Scale { fast, slow };

namespace detail {

struct ScaleView {
  const std::vector<double>& clock;
  const std::vector<Vector>& iterate;
  const std::vector<Vector>& selection;
  const std::vector<Vector>& noise;
  bool slow;
};

inline ScaleView view(const Trajectory& tr, Scale scale) {
  if (scale == Scale::fast) return {tr.t_fast, tr.x, tr.v1, tr.m1, false};
  return {tr.t_slow, tr.y, tr.v2, tr.m2, true};
}

inline double step_size(const Trajectory& tr, const ScaleView& v, std::size_t n) {
  return v.slow ? tr.schedule.b(n) : tr.schedule.a(n);
}

}  // namespace detail

/// Piecewise-linear interpolation of X (fast clock) or Y (slow clock).
inline Vector interpolate(const Trajectory& tr, Scale scale, double t) {
  const auto v = detail::view(tr, scale);
  if (v.clock.empty()) throw ScheduleError("interpolate: empty trajectory");
  if (t < 0.0 || t > v.clock.back()) throw ScheduleError("interpolate: time outside the trajectory's clock range");
  if (v.clock.size() == 1 || t == v.clock.back()) return v.iterate.back();
  const auto it = std::upper_bound(v.clock.begin(), v.clock.end(), t);
  const auto n = static_cast<std::size_t>(it - v.clock.begin()) - 1;
  const double w = (t - v.clock[n]) / (v.clock[n + 1] - v.clock[n]);
  return w * v.iterate[n + 1] + (1.0 - w) * v.iterate[n];
}

/// One window [t(n), t(n) + T] of the interpolation-gap diagnostic.
struct GapWindow {
  std::size_t start = 0;  // n
  std::size_t end = 0;    // tau(n, T)
  double t_start = 0.0;
  double gap = 0.0;        // sup_q ||interpolated path - noise-free re-integration||
  double noise_sum = 0.0;  // sup_{n<=k<=tau} ||sum_{j=n..k} step(j) M_{j+1}||
};

/**
 * Consecutive windows of clock length T. In each, the interpolated iterate is
 * compared with its re-integration from the window start using the logged
 * selections only. A logged selection lies in H ⊆ H^(l), so it realizes the
 * level-l parametrization at some u for every l; the comparison is therefore
 * the same for every level and `level` is only range-checked.
 */
inline std::vector<GapWindow> interpolation_gap(const Trajectory& tr, int level, double window, Scale scale = Scale::slow) {
  if (level < 1) throw ScheduleError("interpolation_gap: level must be at least 1");
  if (!(window > 0.0)) throw ScheduleError("interpolation_gap: window must be positive");
  const auto v = detail::view(tr, scale);
  const std::size_t n_last = tr.steps();
  std::vector<GapWindow> out;
  std::size_t n = 0;
  while (n < n_last) {
    const double target = v.clock[n] + window;
    if (target > v.clock[n_last]) break;
    const auto it = std::lower_bound(v.clock.begin() + static_cast<std::ptrdiff_t>(n) + 1, v.clock.end(), target);
    const auto tau = static_cast<std::size_t>(it - v.clock.begin());

    GapWindow w;
    w.start = n;
    w.end = tau;
    w.t_start = v.clock[n];
    Vector recon = v.iterate[n];
    Vector noise = Vector::Zero(recon.size());
    Vector prev_diff = Vector::Zero(recon.size());
    for (std::size_t k = n; k <= tau; ++k) {
      const Vector diff = v.iterate[k] - recon;
      if (k < tau) {
        w.gap = std::max(w.gap, diff.norm());
      } else {
        const double frac = (target - v.clock[k - 1]) / (v.clock[k] - v.clock[k - 1]);
        w.gap = std::max(w.gap, ((1.0 - frac) * prev_diff + frac * diff).norm());
      }
      prev_diff = diff;
      if (k < n_last) {
        const double h = detail::step_size(tr, v, k);
        noise += h * v.noise[k];
        w.noise_sum = std::max(w.noise_sum, noise.norm());
        recon += h * v.selection[k];
      }
    }
    out.push_back(w);
    n = tau;
  }
  if (out.empty()) throw ScheduleError("interpolation_gap: window longer than the run");
  return out;
}

/// Uniform-weight atoms (X_n, S2_n) over a window.
struct EmpiricalMeasure {
  struct Atom {
    Vector x;
    std::size_t s = 0;
    double weight = 0.0;
  };
  std::vector<Atom> atoms;

  Vector s_marginal(std::size_t alphabet) const {
    Vector m = Vector::Zero(static_cast<Eigen::Index>(alphabet));
    for (const Atom& a : atoms) m[static_cast<Eigen::Index>(a.s)] += a.weight;
    return m;
  }

  /// Mass of atoms whose x lies within `radius` of `centre`.
  double mass_within(const Vector& centre, double radius) const {
    double m = 0.0;
    for (const Atom& a : atoms)
      if ((a.x - centre).norm() <= radius) m += a.weight;
    return m;
  }
};

inline EmpiricalMeasure occupation(const Trajectory& tr, std::size_t begin, std::size_t end) {
  if (end > tr.x.size()) end = tr.x.size();
  if (begin >= end) throw ScheduleError("occupation: empty window");
  EmpiricalMeasure m;
  const double w = 1.0 / static_cast<double>(end - begin);
  for (std::size_t n = begin; n < end; ++n) m.atoms.push_back({tr.x[n], tr.s2[n], w});
  return m;
}

inline double total_variation(const Vector& p, const Vector& q) { return 0.5 * (p - q).cwiseAbs().sum(); }

/// ||X_n - lambda(Y_n)|| for n in [begin, end).
inline std::vector<double> distance_to_lambda(const Trajectory& tr, const std::function<Vector(const Vector&)>& lambda,
                                              std::size_t begin, std::size_t end) {
  end = std::min(end, tr.x.size());
  std::vector<double> d;
  d.reserve(end > begin ? end - begin : 0);
  for (std::size_t n = begin; n < end; ++n) d.push_back((tr.x[n] - lambda(tr.y[n])).norm());
  return d;
}

/// ȳ(· + t) on [0, T_w], sampled at the slow-clock knots inside the window.
inline SampledPath shifted_slow_path(const Trajectory& tr, double t, double window) {
  if (t < 0.0 || t + window > tr.t_slow.back()) throw ScheduleError("shifted_slow_path: window outside the run");
  SampledPath p;
  p.times.push_back(0.0);
  p.values.push_back(interpolate(tr, Scale::slow, t));
  auto it = std::upper_bound(tr.t_slow.begin(), tr.t_slow.end(), t);
  for (; it != tr.t_slow.end() && *it < t + window; ++it) {
    p.times.push_back(*it - t);
    p.values.push_back(tr.y[static_cast<std::size_t>(it - tr.t_slow.begin())]);
  }
  p.times.push_back(window);
  p.values.push_back(interpolate(tr, Scale::slow, t + window));
  return p;
}

struct AptOptions {
  double window = 5.0;  // T_w
  double dt = 1e-2;
  int k_terms = 10;
};

/// apt_metric between ȳ(· + t) and the least-norm DI solution of the slow
/// field started at ȳ(t), for each requested t.
inline std::vector<double> apt_profile(const Trajectory& tr, const MeanField& slow_field, const std::vector<double>& ts,
                                       const AptOptions& opt = {}) {
  std::vector<double> out;
  for (double t : ts) {
    const SampledPath f = shifted_slow_path(tr, t, opt.window);
    const DIPath g = di_solve(slow_field, f.values.front(), opt.window, opt.dt, LeastNorm{});
    out.push_back(apt_metric(f, SampledPath::from(g), opt.k_terms));
  }
  return out;
}

}  // namespace sri

#endif  // SRI_TWO_TIMESCALE_HPP
