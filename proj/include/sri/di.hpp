#ifndef SRI_DI_HPP
#define SRI_DI_HPP

/**
 * Differential inclusions dz/dt ∈ H(z) with Marchaud right-hand sides.
 *
 * The integrator is explicit Euler; at every step the velocity is a selection
 * from H(z) chosen by one of three rules:
 *   - least_norm: the minimum-norm element (projection of 0);
 *   - target(p):  the element closest to the unit-capped heading towards p;
 *   - param(u):   the parametrization of H(z) at a fixed u in the unit ball.
 * Solution sets of a DI are generally larger than any single rule reaches;
 * param(u) with several u is how callers probe that diversity.
 *
 * Also here: limit sets of sampled paths, a sampled attracting-set check, the
 * compact-open style metric used for asymptotic pseudotrajectories, and a
 * chain search that can only ever report "found" or "not found".
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "sri/convex_set.hpp"
#include "sri/mean_field.hpp"
#include "sri/rng.hpp"
#include "sri/set_valued_map.hpp"

namespace sri {

class DIError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LeastNorm {};
struct TargetSelection {
  Vector point;
};
struct ParamSelection {
  Vector u;
};
using Selection = std::variant<LeastNorm, TargetSelection, ParamSelection>;

/// Sampled solution: states[i] at times[i], velocities[i] ∈ H(states[i]).
/// The Euler identity z[i+1] = z[i] + (t[i+1] - t[i])·v[i] holds exactly.
struct DIPath {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> velocities;
  std::vector<std::string> warnings;

  std::size_t size() const { return times.size(); }
  double horizon() const { return times.back() - times.front(); }
};

inline Vector select_velocity(const MeanField& h, const ConvexSet& value, const Vector& z, const Selection& rule,
                              double dt) {
  return std::visit(
      [&](const auto& r) -> Vector {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, LeastNorm>) {
          return project(value, Vector::Zero(value.dim()));
        } else if constexpr (std::is_same_v<R, TargetSelection>) {
          const Vector delta = r.point - z;
          return project(value, delta / std::max(dt, delta.norm()));
        } else {
          const double radius =
              std::max(h.growth_bound(z) + value.centroid().norm(), value.covering_radius());
          return parametrize(value, r.u, radius);
        }
      },
      rule);
}

/// Explicit Euler for dz/dt ∈ H(z) on [0, horizon].
inline DIPath di_solve(const MeanField& h, const Vector& z0, double horizon, double dt,
                       const Selection& rule = LeastNorm{}) {
  if (!(dt > 0.0)) throw DIError("di_solve: step must be positive");
  if (!(horizon >= dt)) throw DIError("di_solve: horizon shorter than one step");
  if (h.in_dim() != h.out_dim()) throw DIError("di_solve: field must map R^k to subsets of R^k");
  if (z0.size() != h.in_dim()) throw DIError("di_solve: initial point has the wrong dimension");

  const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
  DIPath path;
  path.times.reserve(steps + 1);
  path.states.reserve(steps + 1);
  path.velocities.reserve(steps + 1);

  Vector z = z0;
  double t = 0.0;
  double max_norm = z.norm();
  for (std::size_t i = 0; i <= steps; ++i) {
    const ConvexSet value = h(z);
    Vector v = select_velocity(h, value, z, rule, dt);
    path.times.push_back(t);
    path.states.push_back(z);
    path.velocities.push_back(v);
    if (i == steps) break;
    const double t_next = (i + 1 == steps) ? horizon : std::min(horizon, static_cast<double>(i + 1) * dt);
    z = z + (t_next - t) * v;
    if (!z.allFinite()) {
      std::ostringstream os;
      os << "di_solve: non-finite state at step " << i + 1;
      throw DIError(os.str());
    }
    t = t_next;
    max_norm = std::max(max_norm, z.norm());
  }
  const double courant = dt * h.growth_k() * (1.0 + max_norm);
  if (courant > 0.1) {
    std::ostringstream os;
    os << "step size large for this field: dt·K·(1+max|z|) = " << courant << " > 0.1";
    path.warnings.push_back(os.str());
  }
  return path;
}

/// Distinct tail states after `burn_in`, clustered greedily at radius tol/2.
inline std::vector<Vector> limit_set(const DIPath& path, double burn_in, double tol = 1e-6) {
  if (path.times.empty() || burn_in >= path.times.back()) throw DIError("limit_set: burn-in is not before the horizon");
  std::vector<Vector> centres;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (path.times[i] < burn_in) continue;
    const Vector& z = path.states[i];
    const bool near = std::any_of(centres.begin(), centres.end(),
                                  [&](const Vector& c) { return (c - z).norm() <= 0.5 * tol; });
    if (!near) centres.push_back(z);
  }
  if (centres.empty()) throw DIError("limit_set: empty tail");
  return centres;
}

inline double distance_to_cloud(const std::vector<Vector>& cloud, const Vector& z) {
  double best = std::numeric_limits<double>::infinity();
  for (const Vector& c : cloud) best = std::min(best, (c - z).norm());
  return best;
}

enum class AttractorStatus { attracting, not_attracting, inconclusive };

inline const char* to_string(AttractorStatus s) {
  switch (s) {
    case AttractorStatus::attracting: return "attracting";
    case AttractorStatus::not_attracting: return "not_attracting";
    case AttractorStatus::inconclusive: return "inconclusive";
  }
  return "unknown";
}

struct AttractorResult {
  AttractorStatus status = AttractorStatus::attracting;
  DIPath witness;               // worst path found
  double worst_distance = 0.0;  // its final distance to A
  double latest_entry = 0.0;    // latest time after which a path stayed in N^eps(A)
};

struct AttractorOptions {
  double neighborhood_radius = 1.0;
  double eps = 0.1;
  double t_max = 10.0;
  std::size_t n_starts = 8;
  double dt = 1e-2;
  std::uint64_t seed = 1;
};

/**
 * Sampled attracting-set check. Starts are drawn in the radius-neighbourhood
 * of A; each is integrated to 2·t_max under least_norm and four random
 * param(u) rules. A path passes if it enters N^eps(A) by t_max and stays there
 * until 2·t_max. A failing path whose distance to A still shrank makes the
 * verdict inconclusive rather than negative.
 */
inline AttractorResult attractor_check(const MeanField& h, const std::vector<Vector>& a, const AttractorOptions& opt) {
  if (a.empty()) throw DIError("attractor_check: empty candidate set");
  Rng rng(opt.seed);
  AttractorResult result;
  bool escaped = false;     // some path failed and ended no closer to A
  bool stalled = false;     // some path failed while still approaching A
  double worst_score = -std::numeric_limits<double>::infinity();

  for (std::size_t k = 0; k < opt.n_starts; ++k) {
    const auto pick = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(a.size()));
    const Vector& anchor = a[std::min(pick, a.size() - 1)];
    const Vector z0 = anchor + opt.neighborhood_radius * random_in_ball(rng, anchor.size());
    std::vector<Selection> rules{LeastNorm{}};
    for (int r = 0; r < 4; ++r) rules.emplace_back(ParamSelection{random_in_ball(rng, h.out_dim())});

    for (const Selection& rule : rules) {
      DIPath path = di_solve(h, z0, 2.0 * opt.t_max, opt.dt, rule);
      std::optional<double> entry;
      for (std::size_t i = path.size(); i-- > 0;) {
        if (distance_to_cloud(a, path.states[i]) > opt.eps) break;
        entry = path.times[i];
      }
      const double d_start = distance_to_cloud(a, path.states.front());
      const double d_end = distance_to_cloud(a, path.states.back());
      const bool pass = entry.has_value() && *entry <= opt.t_max;
      if (pass) {
        result.latest_entry = std::max(result.latest_entry, *entry);
      } else if (d_end < d_start) {
        stalled = true;
      } else {
        escaped = true;
      }
      // Failing paths outrank passing ones; ties broken by final distance.
      const double score = (pass ? 0.0 : 1e300) + d_end;
      if (score > worst_score) {
        worst_score = score;
        result.worst_distance = d_end;
        result.witness = std::move(path);
      }
    }
  }
  if (escaped) {
    result.status = AttractorStatus::not_attracting;
  } else if (stalled) {
    result.status = AttractorStatus::inconclusive;
  }
  return result;
}

/// A path sampled at increasing times, linear between samples.
struct SampledPath {
  std::vector<double> times;
  std::vector<Vector> values;

  static SampledPath from(const DIPath& p) { return {p.times, p.states}; }

  Vector at(double t) const {
    if (times.empty()) throw DIError("SampledPath: empty");
    if (t <= times.front()) return values.front();
    if (t >= times.back()) return values.back();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t j = static_cast<std::size_t>(it - times.begin());
    const double w = (t - times[j - 1]) / (times[j] - times[j - 1]);
    return (1.0 - w) * values[j - 1] + w * values[j];
  }
};

/**
 * sum_{k=1..K} 2^-k · min(sup_{[0, min(k, T_w)]} ||f - g||, 1) for two paths
 * on the same window [t0, t0 + T_w]. Both are piecewise linear, so the
 * supremum is attained on the merged knot set and is computed exactly.
 */
inline double apt_metric(const SampledPath& f, const SampledPath& g, int k_terms) {
  if (k_terms < 1) throw DIError("apt_metric: need at least one term");
  if (f.times.empty() || g.times.empty()) throw DIError("apt_metric: empty path");
  const double t0 = f.times.front();
  const double window = f.times.back() - t0;
  const double scale = std::max(1.0, std::abs(window));
  if (std::abs(g.times.front() - t0) > 1e-9 * scale || std::abs(g.times.back() - f.times.back()) > 1e-9 * scale)
    throw DIError("apt_metric: paths live on different windows");

  std::vector<double> knots = f.times;
  knots.insert(knots.end(), g.times.begin(), g.times.end());
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

  double total = 0.0;
  double running = 0.0;
  std::size_t next = 0;
  for (int k = 1; k <= k_terms; ++k) {
    const double bound = t0 + std::min(static_cast<double>(k), window);
    while (next < knots.size() && knots[next] <= bound) {
      running = std::max(running, (f.at(knots[next]) - g.at(knots[next])).norm());
      ++next;
    }
    const double sup = std::max(running, (f.at(bound) - g.at(bound)).norm());
    total += std::ldexp(1.0, -k) * std::min(sup, 1.0);
  }
  return total;
}

enum class ChainSearch { found, not_found };

/**
 * Searches for an (eps, T)-chain from `from` to `to` through the point cloud:
 * consecutive links are DI solution fragments of duration T (least_norm and
 * `extra_rules` param selections) ending within eps of the next point.
 * A "not_found" result means the budget ran out; it proves nothing.
 */
inline ChainSearch find_chain(const MeanField& h, const std::vector<Vector>& cloud, std::size_t from, std::size_t to,
                              double eps, double t_link, double dt, std::size_t budget = 1000,
                              int extra_rules = 2, std::uint64_t seed = 7) {
  if (from >= cloud.size() || to >= cloud.size()) throw DIError("find_chain: index out of range");
  Rng rng(seed);
  std::vector<bool> seen(cloud.size(), false);
  std::deque<std::size_t> queue{from};
  seen[from] = true;
  std::size_t expanded = 0;
  while (!queue.empty() && expanded < budget) {
    const std::size_t i = queue.front();
    queue.pop_front();
    ++expanded;
    std::vector<Selection> rules{LeastNorm{}};
    for (int r = 0; r < extra_rules; ++r) rules.emplace_back(ParamSelection{random_in_ball(rng, h.out_dim())});
    for (const Selection& rule : rules) {
      const Vector end = di_solve(h, cloud[i], t_link, dt, rule).states.back();
      for (std::size_t j = 0; j < cloud.size(); ++j) {
        if ((cloud[j] - end).norm() > eps) continue;
        if (j == to) return ChainSearch::found;
        if (seen[j]) continue;
        seen[j] = true;
        queue.push_back(j);
      }
    }
  }
  return ChainSearch::not_found;
}

}  // namespace sri

#endif  // SRI_DI_HPP
