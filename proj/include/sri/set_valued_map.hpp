#ifndef SRI_SET_VALUED_MAP_HPP
#define SRI_SET_VALUED_MAP_HPP

// Set-valued drift maps (x, y, s) -> ConvexSet over a finite noise alphabet,
// their validation, the outer approximants F^(l) and single-valued
// parametrizations of those approximants.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "sri/convex_set.hpp"
#include "sri/rng.hpp"

namespace sri {

class MapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MapDims {
  Eigen::Index d1 = 1;  // fast iterate x
  Eigen::Index d2 = 0;  // slow iterate y
  Eigen::Index k = 1;   // output
};

/// A point (x, y, s) at which a map is evaluated.
struct Probe {
  Vector x;
  Vector y;
  std::size_t s = 0;
};

/// Closed-graph witness: z_n in F(p_n) with (p_n, z_n) -> (limit, limit_value).
struct SequenceProbe {
  std::vector<Probe> points;
  std::vector<Vector> values;
  Probe limit;
  Vector limit_value;
};

/// Outcome of a structural check; `failures` names every violated probe.
struct CheckReport {
  bool convex_compact = true;
  bool growth_ok = true;
  bool closed_graph_ok = true;
  std::vector<std::string> failures;

  bool ok() const { return convex_compact && growth_ok && closed_graph_ok; }
};

class SetValuedMap {
 public:
  using Oracle = std::function<ConvexSet(const Vector& x, const Vector& y, std::size_t s)>;

  SetValuedMap(MapDims dims, std::size_t alphabet_size, Oracle oracle, double growth_k, std::string name = {})
      : dims_(dims), alphabet_(alphabet_size), oracle_(std::move(oracle)), growth_k_(growth_k), name_(std::move(name)) {
    if (dims_.d1 < 1 || dims_.d2 < 0 || dims_.k < 1) throw MapError("SetValuedMap: invalid dimensions");
    if (alphabet_ < 1) throw MapError("SetValuedMap: alphabet must be nonempty");
    if (!(growth_k_ > 0.0)) throw MapError("SetValuedMap: growth constant must be positive");
    if (!oracle_) throw MapError("SetValuedMap: empty oracle");
  }

  ConvexSet operator()(const Vector& x, const Vector& y, std::size_t s) const {
    if (x.size() != dims_.d1 || y.size() != dims_.d2) {
      std::ostringstream os;
      os << describe() << ": argument dimension mismatch (got x:" << x.size() << " y:" << y.size()
         << ", expected x:" << dims_.d1 << " y:" << dims_.d2 << ")";
      throw MapError(os.str());
    }
    if (s >= alphabet_) throw MapError(describe() + ": noise index out of range");
    ConvexSet out = oracle_(x, y, s);
    if (out.dim() != dims_.k) throw MapError(describe() + ": oracle returned a set of the wrong dimension");
    return out;
  }

  ConvexSet operator()(const Probe& p) const { return (*this)(p.x, p.y, p.s); }

  const MapDims& dims() const { return dims_; }
  std::size_t alphabet_size() const { return alphabet_; }
  double growth_k() const { return growth_k_; }
  const std::string& name() const { return name_; }

  /// growth_K·(1 + ||x|| + ||y||)
  double growth_bound(const Vector& x, const Vector& y) const {
    return growth_k_ * (1.0 + x.norm() + (y.size() ? y.norm() : 0.0));
  }

 private:
  std::string describe() const { return name_.empty() ? std::string("SetValuedMap") : name_; }

  MapDims dims_;
  std::size_t alphabet_;
  Oracle oracle_;
  double growth_k_;
  std::string name_;
};

namespace detail {

inline std::string probe_label(const Probe& p) {
  std::ostringstream os;
  os << "(x=" << p.x.transpose() << "; y=" << p.y.transpose() << "; s=" << p.s << ")";
  return os.str();
}

/// Shared by validate_sam and check_marchaud: growth and closed-graph sweeps.
template <class Eval, class Bound>
CheckReport run_structural_checks(Eval&& eval, Bound&& bound, std::span<const Probe> grid,
                                  std::span<const SequenceProbe> sequences, double tol) {
  CheckReport report;
  for (const Probe& p : grid) {
    const ConvexSet v = eval(p);
    const double b = bound(p);
    if (v.max_norm() > b * (1.0 + 1e-12) + 1e-12) {
      report.growth_ok = false;
      std::ostringstream os;
      os << "growth bound violated at " << probe_label(p) << ": sup norm " << v.max_norm() << " > " << b;
      report.failures.push_back(os.str());
    }
  }
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const SequenceProbe& seq = sequences[i];
    if (seq.points.size() != seq.values.size())
      throw MapError("closed-graph probe: points and values differ in length");
    for (std::size_t n = 0; n < seq.points.size(); ++n) {
      if (!contains(eval(seq.points[n]), seq.values[n], tol)) {
        std::ostringstream os;
        os << "closed-graph probe " << i << ": witness value " << n << " is not in the map at "
           << probe_label(seq.points[n]);
        report.failures.push_back(os.str());
        report.closed_graph_ok = false;
      }
    }
    const double d = distance(eval(seq.limit), seq.limit_value);
    if (d > tol) {
      report.closed_graph_ok = false;
      std::ostringstream os;
      os << "closed graph violated at " << probe_label(seq.limit) << ": limit value at distance " << d;
      report.failures.push_back(os.str());
    }
  }
  return report;
}

}  // namespace detail

/**
 * Checks the stochastic-approximation-map conditions on sampled probes:
 * convex compact values (structural), the declared linear growth bound, and
 * closed-graph witnesses.
 */
inline CheckReport validate_sam(const SetValuedMap& f, std::span<const Probe> grid,
                                std::span<const SequenceProbe> sequences = {}, double tol = 1e-6) {
  if (grid.empty()) throw MapError("validate_sam: empty probe grid");
  return detail::run_structural_checks([&](const Probe& p) { return f(p); },
                                       [&](const Probe& p) { return f.growth_bound(p.x, p.y); }, grid, sequences,
                                       tol);
}

/**
 * Level l of the outer approximation: union radius 3·2^-l, inflation 2^-l.
 * growth_kl bounds the approximant's growth; it tends to growth_k and never
 * exceeds the uniform constant `uniform_growth_bound(growth_k)`.
 */
struct ApproxLevel {
  int l = 1;
  double radius = 1.5;
  double inflation = 0.5;
  double growth_kl = 1.0;

  static ApproxLevel make(int l, double growth_k) {
    if (l < 1) throw MapError("ApproxLevel: level must be at least 1");
    ApproxLevel lv;
    lv.l = l;
    lv.inflation = std::ldexp(1.0, -l);
    lv.radius = 3.0 * lv.inflation;
    // ||x'|| + ||y'|| <= ||x|| + ||y|| + sqrt(2)·radius on the union ball.
    lv.growth_kl = growth_k + (std::sqrt(2.0) * growth_k * 3.0 + 1.0) * lv.inflation;
    return lv;
  }

  static double uniform_growth_bound(double growth_k) { return growth_k + (3.0 * std::sqrt(2.0) * growth_k + 1.0) / 2.0; }
};

// Ball nets are nested: the net for level l contains the nets of every level
// up to kNestedLevelCap, which makes F^(l+1) ⊆ F^(l) hold exactly.
inline constexpr int kNestedLevelCap = 12;

/// Level-l sample of the closed unit ball of R^dim: origin, signed axes and
/// seeded uniform points, 2^min(l+3, 8) points in total.
inline const std::vector<Vector>& unit_ball_net(Eigen::Index dim, int l) {
  static std::mutex mutex;
  static std::map<std::pair<Eigen::Index, int>, std::vector<Vector>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  const auto key = std::make_pair(dim, l);
  if (auto it = cache.find(key); it != cache.end()) return it->second;

  const std::size_t count = std::size_t{1} << std::min(l + 3, 8);
  std::vector<Vector> net;
  net.push_back(Vector::Zero(dim));
  for (Eigen::Index i = 0; i < dim; ++i) {
    net.push_back(Vector::Unit(dim, i));
    net.push_back(-Vector::Unit(dim, i));
  }
  Rng rng(mix_seed(mix_seed(0x73766d2d62616c6cULL, static_cast<std::uint64_t>(dim)), static_cast<std::uint64_t>(l)));
  while (net.size() < count) net.push_back(random_in_ball(rng, dim));
  return cache.emplace(key, std::move(net)).first->second;
}

/// Offsets (dx, dy) sampled for level l, including the nested finer levels.
inline std::vector<Vector> approx_offsets(Eigen::Index dim, int l) {
  std::vector<Vector> offsets;
  const int last = l >= kNestedLevelCap ? l : kNestedLevelCap;
  for (int level = l; level <= last; ++level) {
    const double r = 3.0 * std::ldexp(1.0, -level);
    for (const Vector& u : unit_ball_net(dim, level)) offsets.push_back(r * u);
  }
  return offsets;
}

/**
 * F^(l)(x, y, s) = conv(∪ F(x', y', s) over sampled (x', y') within radius
 * 3·2^-l of (x, y)) ⊕ 2^-l·(unit ball polytope). The noise index is held
 * fixed.
 */
inline ConvexSet upper_approx(const SetValuedMap& f, const ApproxLevel& level, const Vector& x, const Vector& y,
                              std::size_t s) {
  const Eigen::Index d1 = f.dims().d1;
  const Eigen::Index d2 = f.dims().d2;
  std::vector<ConvexSet> pieces;
  for (const Vector& off : approx_offsets(d1 + d2, level.l)) {
    const Vector xs = x + off.head(d1);
    const Vector ys = y + off.tail(d2);
    pieces.push_back(f(xs, ys, s));
  }
  const ConvexSet core = hull_union(pieces);
  return minkowski_sum(core, ball(Vector::Zero(f.dims().k), level.inflation));
}

/// The approximant wrapped as a map, with growth constant growth_kl.
inline SetValuedMap approximant(const SetValuedMap& f, const ApproxLevel& level) {
  return SetValuedMap(
      f.dims(), f.alphabet_size(),
      [f, level](const Vector& x, const Vector& y, std::size_t s) { return upper_approx(f, level, x, y, s); },
      level.growth_kl, f.name() + "^(" + std::to_string(level.l) + ")");
}

/**
 * Largest ratio hausdorff(F(x', y', s), F(x, y, s)) / ||(x', y') - (x, y)||
 * over the level-l offsets: a measured local Lipschitz constant.
 */
inline double local_variation(const SetValuedMap& f, const ApproxLevel& level, const Vector& x, const Vector& y,
                              std::size_t s) {
  const Eigen::Index d1 = f.dims().d1;
  const Eigen::Index d2 = f.dims().d2;
  const ConvexSet centre = f(x, y, s);
  double lip = 0.0;
  for (const Vector& off : approx_offsets(d1 + d2, level.l)) {
    const double n = off.norm();
    if (n == 0.0) continue;
    lip = std::max(lip, hausdorff(f(x + off.head(d1), y + off.tail(d2), s), centre) / n);
  }
  return lip;
}

/**
 * Single-valued parametrization of a set: u in the closed unit ball maps to
 * the projection of c + R·u onto the set, c the generator centroid. The ball
 * c + R·U must cover the set, so every point of the set is hit.
 */
inline Vector parametrize(const ConvexSet& set, const Vector& u, double radius) {
  if (u.size() != set.dim()) throw MapError("parametrize: u has the wrong dimension");
  if (u.norm() > 1.0 + 1e-12) throw MapError("parametrize: u lies outside the closed unit ball");
  const Vector c = set.centroid();
  if (set.covering_radius() > radius * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "parametrize: radius " << radius << " does not cover the set (needs " << set.covering_radius() << ")";
    throw MapError(os.str());
  }
  return project(set, c + radius * u);
}

/// f^(l)(x, y, s, u) for the level-l approximant of F.
class Parametrization {
 public:
  Parametrization(SetValuedMap f, ApproxLevel level) : f_(std::move(f)), level_(level) {}

  Vector operator()(const Vector& x, const Vector& y, std::size_t s, const Vector& u) const {
    const ConvexSet set = upper_approx(f_, level_, x, y, s);
    return parametrize(set, u, radius_for(set, x, y));
  }

  /// Covering radius used at (x, y): the growth bound plus the centroid norm.
  double radius_for(const ConvexSet& set, const Vector& x, const Vector& y) const {
    return level_.growth_kl * (1.0 + x.norm() + (y.size() ? y.norm() : 0.0)) + set.centroid().norm();
  }

  const ApproxLevel& level() const { return level_; }

 private:
  SetValuedMap f_;
  ApproxLevel level_;
};

}  // namespace sri

#endif  // SRI_SET_VALUED_MAP_HPP
