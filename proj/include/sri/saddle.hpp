#ifndef SRI_SADDLE_HPP
#define SRI_SADDLE_HPP

/**
 * Markov-averaged equality-constrained convex programs solved by primal
 * descent / dual ascent on two timescales.
 *
 *   minimize  J_mu(x) = sum_s mu(s) J(x, s)   s.t.  C_mu x = w_mu
 *
 * where mu is the stationary law of the noise chain. The objective is
 * regularized to Ĵ(x,s) = J(x,s) + (eps/2r²)||x||² + ((K+1)/2)·max(||x||²-r², 0)
 * so that the inner minimizer lambda(y) of the Lagrangian is unique.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sri/convex_set.hpp"
#include "sri/di.hpp"
#include "sri/markov.hpp"
#include "sri/mean_field.hpp"
#include "sri/rng.hpp"
#include "sri/set_valued_map.hpp"
#include "sri/two_timescale.hpp"

namespace sri {

class SaddleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the inner minimization of the Lagrangian cannot certify optimality.
class InnerSolverError : public SaddleError {
 public:
  InnerSolverError(const std::string& what, double residual) : SaddleError(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

struct CoercivityCheck {
  double m1 = 0.0;             // max_{s, s'} J(x_s, s')
  double min_on_sphere = 0.0;  // min over sampled ||x|| = r and s of J(x, s)
  bool ok() const { return min_on_sphere >= m1; }
};

struct SaddleData {
  Eigen::Index d1 = 0;
  Eigen::Index d2 = 0;
  std::size_t alphabet = 0;
  std::function<double(const Vector& x, std::size_t s)> objective;
  std::function<ConvexSet(const Vector& x, std::size_t s)> subgradient;
  std::vector<Matrix> c;  // d2 x d1 per state
  std::vector<Vector> w;
  Matrix kernel;  // transition matrix of the noise chain
  double eps = 0.01;
  double r = 1.0;
  double growth_k = 1.0;
  std::vector<Vector> feasible_points;  // x_s with C(s) x_s = w(s)
  std::optional<Vector> x_star;         // known primal solution, if any
};

class SaddleProblem {
 public:
  explicit SaddleProblem(SaddleData data) : d_(std::move(data)) {
    if (d_.d1 < 1 || d_.d2 < 1 || d_.alphabet < 1) throw SaddleError("SaddleProblem: invalid dimensions");
    if (!d_.objective || !d_.subgradient) throw SaddleError("SaddleProblem: missing objective or subgradient oracle");
    if (d_.c.size() != d_.alphabet || d_.w.size() != d_.alphabet || d_.feasible_points.size() != d_.alphabet)
      throw SaddleError("SaddleProblem: C, w and feasible points need one entry per state");
    if (!(d_.eps > 0.0) || !(d_.r > 0.0) || !(d_.growth_k > 0.0))
      throw SaddleError("SaddleProblem: eps, r and K must be positive");
    const auto n = static_cast<Eigen::Index>(d_.alphabet);
    if (d_.kernel.rows() != n || d_.kernel.cols() != n) throw SaddleError("SaddleProblem: kernel size differs from the alphabet");
    require_stochastic(d_.kernel);
    for (std::size_t s = 0; s < d_.alphabet; ++s) {
      if (d_.c[s].rows() != d_.d2 || d_.c[s].cols() != d_.d1 || d_.w[s].size() != d_.d2 ||
          d_.feasible_points[s].size() != d_.d1)
        throw SaddleError("SaddleProblem: constraint data for state " + std::to_string(s) + " has the wrong shape");
      const double res = (d_.c[s] * d_.feasible_points[s] - d_.w[s]).norm();
      if (res > 1e-9 * (1.0 + d_.w[s].norm()))
        throw SaddleError("SaddleProblem: feasible point for state " + std::to_string(s) + " violates C(s)x = w(s)");
      if (d_.feasible_points[s].norm() >= d_.r)
        throw SaddleError("SaddleProblem: r must exceed the norm of every feasible point");
    }
    if (d_.x_star && d_.x_star->size() != d_.d1) throw SaddleError("SaddleProblem: x_star has the wrong dimension");

    stationary_ = stationary_set(d_.kernel);
    coercivity_ = check_coercivity();
    if (!coercivity_.ok()) {
      std::ostringstream os;
      os << "SaddleProblem: coercivity check failed at radius r: min J = " << coercivity_.min_on_sphere
         << " < M1 = " << coercivity_.m1;
      throw SaddleError(os.str());
    }
    if (stationary_.unique()) {
      mu_ = stationary_.vertices.front();
      c_mu_ = Matrix::Zero(d_.d2, d_.d1);
      w_mu_ = Vector::Zero(d_.d2);
      for (std::size_t s = 0; s < d_.alphabet; ++s) {
        c_mu_ += mu_[static_cast<Eigen::Index>(s)] * d_.c[s];
        w_mu_ += mu_[static_cast<Eigen::Index>(s)] * d_.w[s];
      }
    }
  }

  const SaddleData& data() const { return d_; }
  Eigen::Index d1() const { return d_.d1; }
  Eigen::Index d2() const { return d_.d2; }
  std::size_t alphabet() const { return d_.alphabet; }
  const CoercivityCheck& coercivity() const { return coercivity_; }
  const StationarySet& stationary() const { return stationary_; }

  const Vector& mu() const {
    require_unique();
    return mu_;
  }
  const Matrix& c_mu() const {
    require_unique();
    return c_mu_;
  }
  const Vector& w_mu() const {
    require_unique();
    return w_mu_;
  }

  /// Growth constant of lambda: ||lambda(y)|| <= K'(1 + ||y||), K' = max(K, r, ||C_mu^T||).
  double lambda_growth() const { return std::max({d_.growth_k, d_.r, c_mu().transpose().operatorNorm()}); }

  double max_c_norm() const {
    double m = 0.0;
    for (const Matrix& c : d_.c) m = std::max(m, c.operatorNorm());
    return m;
  }
  double max_w_norm() const {
    double m = 0.0;
    for (const Vector& w : d_.w) m = std::max(m, w.norm());
    return m;
  }

 private:
  void require_unique() const {
    if (!stationary_.unique())
      throw SaddleError("SaddleProblem: the noise chain has " + std::to_string(stationary_.vertices.size()) +
                        " stationary vertices; a unique stationary law is required");
  }

  // Probabilistic: J is sampled on 64 directions of the sphere of radius r.
  CoercivityCheck check_coercivity() const {
    CoercivityCheck c;
    c.m1 = -std::numeric_limits<double>::infinity();
    for (const Vector& xs : d_.feasible_points)
      for (std::size_t s = 0; s < d_.alphabet; ++s) c.m1 = std::max(c.m1, d_.objective(xs, s));
    c.min_on_sphere = std::numeric_limits<double>::infinity();
    std::vector<Vector> dirs;
    if (d_.d1 == 1) {
      dirs = {Vector::Constant(1, 1.0), Vector::Constant(1, -1.0)};
    } else if (d_.d1 == 2) {
      for (int k = 0; k < 64; ++k) {
        const double a = 2.0 * std::numbers::pi * k / 64.0;
        dirs.push_back((Vector(2) << std::cos(a), std::sin(a)).finished());
      }
    } else {
      Rng rng(mix_seed(0x5AD, static_cast<std::uint64_t>(d_.d1)));
      for (int k = 0; k < 64; ++k) dirs.push_back(random_unit_vector(rng, d_.d1));
    }
    for (const Vector& u : dirs)
      for (std::size_t s = 0; s < d_.alphabet; ++s) c.min_on_sphere = std::min(c.min_on_sphere, d_.objective(d_.r * u, s));
    return c;
  }

  SaddleData d_;
  StationarySet stationary_;
  CoercivityCheck coercivity_;
  Vector mu_;
  Matrix c_mu_;
  Vector w_mu_;
};

/// J(x,s) = ½||x - theta_s||² with per-state linear equality constraints.
struct QuadraticSpec {
  std::vector<Vector> theta;
  std::vector<Matrix> c;
  std::vector<Vector> w;
  Matrix kernel;
  double eps = 0.01;
  double r = 1.0;
  double growth_k = 1.0;
  std::vector<Vector> feasible_points;
  std::optional<Vector> x_star;
};

inline SaddleProblem quadratic_problem(const QuadraticSpec& q) {
  if (q.theta.empty()) throw SaddleError("quadratic_problem: empty alphabet");
  SaddleData d;
  d.d1 = q.theta.front().size();
  d.d2 = q.c.empty() ? 0 : q.c.front().rows();
  d.alphabet = q.theta.size();
  const std::vector<Vector> theta = q.theta;
  d.objective = [theta](const Vector& x, std::size_t s) { return 0.5 * (x - theta.at(s)).squaredNorm(); };
  d.subgradient = [theta](const Vector& x, std::size_t s) { return ConvexSet::point(x - theta.at(s)); };
  d.c = q.c;
  d.w = q.w;
  d.kernel = q.kernel;
  d.eps = q.eps;
  d.r = q.r;
  d.growth_k = q.growth_k;
  d.feasible_points = q.feasible_points;
  d.x_star = q.x_star;
  return SaddleProblem(std::move(d));
}

inline double penalty_coefficient(const SaddleProblem& p) { return p.data().eps / (2.0 * p.data().r * p.data().r); }

/// Ĵ(x, s).
inline double penalized_objective(const SaddleProblem& p, const Vector& x, std::size_t s) {
  const SaddleData& d = p.data();
  const double sq = x.squaredNorm();
  return d.objective(x, s) + penalty_coefficient(p) * sq + 0.5 * (d.growth_k + 1.0) * std::max(sq - d.r * d.r, 0.0);
}

/// ∂Ĵ(x, s). On the sphere ||x|| = r (relative tolerance 1e-12) the outer
/// penalty contributes the segment [0, (K+1)x].
inline ConvexSet penalized_subgrad(const SaddleProblem& p, const Vector& x, std::size_t s) {
  const SaddleData& d = p.data();
  ConvexSet base = d.subgradient(x, s).translated((d.eps / (d.r * d.r)) * x);
  const double nx = x.norm();
  const Vector outer = (d.growth_k + 1.0) * x;
  if (std::abs(nx - d.r) <= 1e-12 * d.r) return minkowski_sum(base, ConvexSet::segment(Vector::Zero(x.size()), outer));
  if (nx > d.r) return base.translated(outer);
  return base;
}

/// J_mu(x), without the regularization.
inline double averaged_objective(const SaddleProblem& p, const Vector& x) {
  const Vector& mu = p.mu();
  double v = 0.0;
  for (std::size_t s = 0; s < p.alphabet(); ++s)
    if (mu[static_cast<Eigen::Index>(s)] > 0.0) v += mu[static_cast<Eigen::Index>(s)] * p.data().objective(x, s);
  return v;
}

/// Ĵ_mu(x).
inline double averaged_penalized_objective(const SaddleProblem& p, const Vector& x) {
  const Vector& mu = p.mu();
  double v = 0.0;
  for (std::size_t s = 0; s < p.alphabet(); ++s)
    if (mu[static_cast<Eigen::Index>(s)] > 0.0) v += mu[static_cast<Eigen::Index>(s)] * penalized_objective(p, x, s);
  return v;
}

/// L(x, y) = Ĵ_mu(x) + <y, C_mu x - w_mu>.
inline double lagrangian(const SaddleProblem& p, const Vector& x, const Vector& y) {
  if (x.size() != p.d1() || y.size() != p.d2()) throw SaddleError("lagrangian: dimension mismatch");
  return averaged_penalized_objective(p, x) + y.dot(p.c_mu() * x - p.w_mu());
}

/// ∂_x L(x, y) = sum_s mu(s) ∂Ĵ(x, s) + C_mu^T y.
inline ConvexSet lagrangian_subgrad(const SaddleProblem& p, const Vector& x, const Vector& y) {
  const Vector& mu = p.mu();
  std::vector<ConvexSet> parts;
  std::vector<double> weights;
  for (std::size_t s = 0; s < p.alphabet(); ++s) {
    const double m = mu[static_cast<Eigen::Index>(s)];
    if (m <= 0.0) continue;
    parts.push_back(penalized_subgrad(p, x, s));
    weights.push_back(m);
  }
  return minkowski_combine(weights, parts).translated(p.c_mu().transpose() * y);
}

struct InnerSolveOptions {
  double tol = 1e-9;          // target norm of the min-norm subgradient
  double verify_tol = 1e-6;   // 0 in the enlarged subdifferential within this distance
  std::size_t max_iter = 20000;
  std::optional<Vector> warm_start;
};

namespace detail {

// Subgradients near x: the exact set at x, at x ± delta e_i, and at the
// radial projection onto ||x|| = r when x is within delta of it.
inline ConvexSet enlarged_subdiff(const SaddleProblem& p, const Vector& x, const Vector& y, double delta) {
  std::vector<ConvexSet> parts{lagrangian_subgrad(p, x, y)};
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector e = Vector::Zero(x.size());
    e[i] = delta;
    parts.push_back(lagrangian_subgrad(p, x + e, y));
    parts.push_back(lagrangian_subgrad(p, x - e, y));
  }
  const double nx = x.norm();
  if (nx > 0.0 && std::abs(nx - p.data().r) <= delta) parts.push_back(lagrangian_subgrad(p, (p.data().r / nx) * x, y));
  return hull_union(parts);
}

}  // namespace detail

/**
 * lambda(y) = argmin_x L(x, y). Steepest descent along the min-norm
 * subgradient with Armijo backtracking; when the line search fails at a kink
 * the direction is taken from the hull of nearby subgradients with a
 * shrinking sampling radius. Optimality is certified by 0 lying within
 * verify_tol of a 1e-7-enlarged subdifferential.
 */
inline Vector lambda_min(const SaddleProblem& p, const Vector& y, const InnerSolveOptions& opt = {}) {
  if (y.size() != p.d2()) throw SaddleError("lambda_min: dual point has the wrong dimension");
  Vector x = opt.warm_start ? *opt.warm_start : Vector(Vector::Zero(p.d1()));
  if (x.size() != p.d1()) throw SaddleError("lambda_min: warm start has the wrong dimension");
  const Vector zero = Vector::Zero(p.d1());
  double f = lagrangian(p, x, y);
  double step = 1.0;
  double delta = 1e-3;
  double residual = std::numeric_limits<double>::infinity();

  for (std::size_t it = 0; it < opt.max_iter; ++it) {
    Vector g = project(lagrangian_subgrad(p, x, y), zero);
    residual = g.norm();
    if (residual <= opt.tol) break;

    bool moved = false;
    for (int attempt = 0; attempt < 2 && !moved; ++attempt) {
      if (attempt == 1) {
        g = project(detail::enlarged_subdiff(p, x, y, delta), zero);
        if (g.norm() <= opt.tol) {
          delta *= 0.1;
          if (delta < 1e-14) break;
          moved = true;  // retry at the smaller radius
          continue;
        }
      }
      const double gg = g.squaredNorm();
      double t = std::min(2.0 * step, 1e6);
      while (t > 1e-12) {
        const Vector xn = x - t * g;
        const double fn = lagrangian(p, xn, y);
        // Strict decrease: below rounding resolution an equal value is no progress.
        if (fn <= f - 1e-4 * t * gg && fn < f) {
          x = xn;
          f = fn;
          step = t;
          moved = true;
          break;
        }
        t *= 0.5;
      }
    }
    if (!moved) break;
  }

  if (residual > opt.tol) {
    const ConvexSet near = detail::enlarged_subdiff(p, x, y, 1e-7);
    if (!support_contains(near, zero, opt.verify_tol)) {
      std::ostringstream os;
      os << "lambda_min: inner solver stalled with subgradient residual " << residual;
      throw InnerSolverError(os.str(), residual);
    }
  }
  return x;
}

/// Q_mu(y) = L(lambda(y), y).
inline double dual_value(const SaddleProblem& p, const Vector& y, const InnerSolveOptions& opt = {}) {
  return lagrangian(p, lambda_min(p, y, opt), y);
}

/// H1(x, y, s) = -(∂Ĵ(x, s) + C(s)^T y).
inline SetValuedMap primal_drift(const SaddleProblem& p) {
  const SaddleData& d = p.data();
  const double k = std::max({d.growth_k, 2.0 * d.growth_k + 1.0 + d.eps / (d.r * d.r), p.max_c_norm()});
  return SetValuedMap(
      MapDims{d.d1, d.d2, d.d1}, d.alphabet,
      [p](const Vector& x, const Vector& y, std::size_t s) {
        return penalized_subgrad(p, x, s).translated(p.data().c[s].transpose() * y).scaled(-1.0);
      },
      k, "primal_drift");
}

/// H2(x, y, s) = {C(s)x - w(s)}.
inline SetValuedMap dual_drift(const SaddleProblem& p) {
  const SaddleData& d = p.data();
  double k = std::max(p.max_w_norm(), p.max_c_norm());
  if (!(k > 0.0)) k = 1.0;
  return SetValuedMap(
      MapDims{d.d1, d.d2, d.d2}, d.alphabet,
      [p](const Vector& x, const Vector&, std::size_t s) { return ConvexSet::point(p.data().c[s] * x - p.data().w[s]); },
      k, "dual_drift");
}

/// Both recursions are driven by one chain on the shared alphabet.
inline TwoTimescaleSystem primal_dual_system(const SaddleProblem& p) {
  const FiniteKernel k = FiniteKernel::constant(p.data().kernel);
  return TwoTimescaleSystem{primal_drift(p), dual_drift(p), k, k, true};
}

/// y -> {C_mu lambda(y) - w_mu}, assembled as the slow mean field of the dual drift.
inline MeanField dual_field(const SaddleProblem& p) {
  LambdaOracle lambda = [p](const Vector& y) { return std::vector<Vector>{lambda_min(p, y)}; };
  return slow_mean_field(dual_drift(p), FiniteKernel::constant(p.data().kernel), std::move(lambda), p.lambda_growth());
}

struct PrimalDualOptions {
  StepSchedule schedule;
  NoiseModel noise_primal;
  NoiseModel noise_dual;  // off unless explicitly requested
  SelectionRule select_primal = SelectionRule::least_norm;
  Vector x0;
  Vector y0;
  std::size_t s0 = 0;
  std::size_t steps = 0;
  std::uint64_t seed = 1;
};

inline RunOptions to_run_options(const SaddleProblem& p, const PrimalDualOptions& o) {
  RunOptions r;
  r.schedule = o.schedule;
  r.select_fast = o.select_primal;
  r.noise_fast = o.noise_primal;
  r.noise_slow = o.noise_dual;
  r.x0 = o.x0.size() ? o.x0 : Vector(Vector::Zero(p.d1()));
  r.y0 = o.y0.size() ? o.y0 : Vector(Vector::Zero(p.d2()));
  r.s1_0 = o.s0;
  r.s2_0 = o.s0;
  r.steps = o.steps;
  r.seed = o.seed;
  return r;
}

inline Trajectory run_primal_dual(const SaddleProblem& p, const PrimalDualOptions& o) {
  return run(primal_dual_system(p), to_run_options(p, o));
}

struct OptimalityReport {
  Vector x_bar;
  Vector y_bar;
  double feasibility_gap = 0.0;
  double primal_dual_gap = 0.0;
  double distance_to_lambda = 0.0;
  std::optional<double> eps_surplus;
};

/// Gaps at a candidate pair (x̄, ȳ).
inline OptimalityReport optimality_at(const SaddleProblem& p, const Vector& x_bar, const Vector& y_bar) {
  OptimalityReport r;
  r.x_bar = x_bar;
  r.y_bar = y_bar;
  r.feasibility_gap = (p.c_mu() * x_bar - p.w_mu()).norm();
  const Vector lam = lambda_min(p, y_bar);
  r.primal_dual_gap = std::abs(averaged_penalized_objective(p, x_bar) - lagrangian(p, lam, y_bar));
  r.distance_to_lambda = (x_bar - lam).norm();
  if (p.data().x_star) r.eps_surplus = averaged_objective(p, x_bar) - averaged_objective(p, *p.data().x_star);
  return r;
}

/// Tail means over the last `tail_fraction` of the iterates.
inline std::pair<Vector, Vector> tail_means(const Trajectory& tr, double tail_fraction) {
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) throw SaddleError("tail_means: fraction must lie in (0, 1]");
  const std::size_t total = tr.x.size();
  const auto count = static_cast<std::size_t>(std::floor(tail_fraction * static_cast<double>(total)));
  if (count == 0) throw SaddleError("tail_means: empty tail");
  Vector xs = Vector::Zero(tr.x.front().size());
  Vector ys = Vector::Zero(tr.y.front().size());
  for (std::size_t n = total - count; n < total; ++n) {
    xs += tr.x[n];
    ys += tr.y[n];
  }
  return {xs / static_cast<double>(count), ys / static_cast<double>(count)};
}

inline OptimalityReport optimality_report(const SaddleProblem& p, const Trajectory& tr, double tail_fraction) {
  if (tr.x.empty()) throw SaddleError("optimality_report: empty trajectory");
  const auto [xb, yb] = tail_means(tr, tail_fraction);
  return optimality_at(p, xb, yb);
}

struct EnvelopeReport {
  std::vector<double> times;
  std::vector<double> value;     // V(t) = Q_mu(y(t))
  std::vector<double> integral;  // ∫_0^t ||C_mu lambda(y) - w_mu||²
  std::vector<double> discrepancy;
  double max_discrepancy = 0.0;
  bool nondecreasing = true;
};

/// Compares V(t) with V(0) + ∫ ||C_mu lambda(y(q)) - w_mu||² dq (trapezoid rule) along a dual path.
inline EnvelopeReport verify_envelope(const SaddleProblem& p, const DIPath& path) {
  if (path.size() == 0) throw SaddleError("verify_envelope: empty path");
  EnvelopeReport r;
  Vector warm = Vector::Zero(p.d1());
  double prev_sq = 0.0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    InnerSolveOptions o;
    o.warm_start = warm;
    const Vector lam = lambda_min(p, path.states[i], o);
    warm = lam;
    const double v = lagrangian(p, lam, path.states[i]);
    const double sq = (p.c_mu() * lam - p.w_mu()).squaredNorm();
    const double acc =
        i == 0 ? 0.0 : r.integral.back() + 0.5 * (path.times[i] - path.times[i - 1]) * (prev_sq + sq);
    if (i > 0 && v < r.value.back() - 1e-9) r.nondecreasing = false;
    r.times.push_back(path.times[i]);
    r.value.push_back(v);
    r.integral.push_back(acc);
    r.discrepancy.push_back(std::abs(v - r.value.front() - acc));
    r.max_discrepancy = std::max(r.max_discrepancy, r.discrepancy.back());
    prev_sq = sq;
  }
  return r;
}

}  // namespace sri

#endif  // SRI_SADDLE_HPP
