#ifndef SRI_CONVEX_SET_HPP
#define SRI_CONVEX_SET_HPP

/**
 * Convex compact sets in R^k stored as finite generator clouds (the set is
 * the convex hull of the generators), together with the arithmetic the rest
 * of the library needs: support functions, weighted Minkowski sums, Euclidean
 * projection, and Hausdorff distance.
 *
 * Values are immutable once built, so every function here is pure and may be
 * called concurrently.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sri/rng.hpp"

namespace sri {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A generator with an infinite or NaN coordinate, typically an overflowed map value.
class NonFiniteError : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

/// Raised when the projection active-set loop exhausts its iteration budget.
class ProjectionError : public GeometryError {
 public:
  ProjectionError(std::size_t iterations, double gap)
      : GeometryError(make_message(iterations, gap)), iterations_(iterations), gap_(gap) {}

  std::size_t iterations() const { return iterations_; }
  double gap() const { return gap_; }

 private:
  static std::string make_message(std::size_t iterations, double gap) {
    std::ostringstream os;
    os << "projection did not converge after " << iterations
       << " active-set iterations (optimality gap " << gap << ")";
    return os.str();
  }

  std::size_t iterations_;
  double gap_;
};

namespace detail {

inline void require_same_dim(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    std::ostringstream os;
    os << what << ": dimension mismatch (" << a << " vs " << b << ")";
    throw GeometryError(os.str());
  }
}

}  // namespace detail

class ConvexSet {
 public:
  explicit ConvexSet(std::vector<Vector> points) : points_(std::move(points)) {
    if (points_.empty()) throw GeometryError("ConvexSet: empty generator list");
    const Eigen::Index dim = points_.front().size();
    if (dim < 1) throw GeometryError("ConvexSet: dimension must be at least 1");
    for (const Vector& p : points_) {
      detail::require_same_dim(p.size(), dim, "ConvexSet");
      if (!p.allFinite()) throw NonFiniteError("ConvexSet: non-finite generator coordinate");
    }
    // All generators coincide: keep exactly one.
    const bool all_equal = std::all_of(points_.begin() + 1, points_.end(),
                                       [&](const Vector& p) { return p == points_.front(); });
    if (all_equal) points_.resize(1);
  }

  static ConvexSet point(Vector p) { return ConvexSet(std::vector<Vector>{std::move(p)}); }

  static ConvexSet interval(double lo, double hi) {
    if (lo > hi) std::swap(lo, hi);
    return ConvexSet({Vector::Constant(1, lo), Vector::Constant(1, hi)});
  }

  /// Segment between two points of equal dimension.
  static ConvexSet segment(Vector a, Vector b) { return ConvexSet({std::move(a), std::move(b)}); }

  Eigen::Index dim() const { return points_.front().size(); }
  std::size_t size() const { return points_.size(); }
  bool is_singleton() const { return points_.size() == 1; }
  const std::vector<Vector>& points() const { return points_; }

  Vector centroid() const {
    Vector c = Vector::Zero(dim());
    for (const Vector& p : points_) c += p;
    return c / static_cast<double>(points_.size());
  }

  /// Largest distance from the centroid to a generator.
  double covering_radius() const {
    const Vector c = centroid();
    double r = 0.0;
    for (const Vector& p : points_) r = std::max(r, (p - c).norm());
    return r;
  }

  /// Largest generator norm, i.e. sup of ||z|| over the set.
  double max_norm() const {
    double r = 0.0;
    for (const Vector& p : points_) r = std::max(r, p.norm());
    return r;
  }

  ConvexSet translated(const Vector& t) const {
    detail::require_same_dim(t.size(), dim(), "ConvexSet::translated");
    std::vector<Vector> out;
    out.reserve(points_.size());
    for (const Vector& p : points_) out.push_back(p + t);
    return ConvexSet(std::move(out));
  }

  ConvexSet scaled(double a) const {
    std::vector<Vector> out;
    out.reserve(points_.size());
    for (const Vector& p : points_) out.push_back(a * p);
    return ConvexSet(std::move(out));
  }

  /// Image under a linear map.
  ConvexSet mapped(const Matrix& m) const {
    detail::require_same_dim(m.cols(), dim(), "ConvexSet::mapped");
    std::vector<Vector> out;
    out.reserve(points_.size());
    for (const Vector& p : points_) out.push_back(m * p);
    return ConvexSet(std::move(out));
  }

  // 1-D endpoints.
  double lower() const {
    require_interval();
    double v = points_.front()[0];
    for (const Vector& p : points_) v = std::min(v, p[0]);
    return v;
  }
  double upper() const {
    require_interval();
    double v = points_.front()[0];
    for (const Vector& p : points_) v = std::max(v, p[0]);
    return v;
  }

 private:
  void require_interval() const {
    if (dim() != 1) throw GeometryError("ConvexSet: endpoint access requires dimension 1");
  }

  std::vector<Vector> points_;
};

inline double support(const ConvexSet& k, const Vector& d) {
  detail::require_same_dim(d.size(), k.dim(), "support");
  double best = -std::numeric_limits<double>::infinity();
  for (const Vector& p : k.points()) best = std::max(best, p.dot(d));
  return best;
}

/**
 * Fixed direction net on the unit sphere of R^dim. Dimension 1 uses {-1, +1};
 * dimension 2 uses 256 equally spaced angles; higher dimensions use the 2·dim
 * signed axes followed by seeded uniform directions, 256 in total.
 */
inline const std::vector<Vector>& direction_net(Eigen::Index dim) {
  constexpr std::size_t kNetSize = 256;
  static std::mutex mutex;
  static std::map<Eigen::Index, std::vector<Vector>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(dim);
  if (it != cache.end()) return it->second;

  if (dim < 1) throw GeometryError("direction_net: dimension must be at least 1");
  std::vector<Vector> net;
  if (dim == 1) {
    net = {Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)};
  } else if (dim == 2) {
    for (std::size_t i = 0; i < kNetSize; ++i) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / kNetSize;
      Vector v(2);
      v << std::cos(a), std::sin(a);
      net.push_back(v);
    }
  } else {
    for (Eigen::Index i = 0; i < dim; ++i) {
      net.push_back(Vector::Unit(dim, i));
      net.push_back(-Vector::Unit(dim, i));
    }
    Rng rng(mix_seed(0x6e6574ULL, static_cast<std::uint64_t>(dim)));
    while (net.size() < kNetSize) net.push_back(random_unit_vector(rng, dim));
  }
  return cache.emplace(dim, std::move(net)).first->second;
}

/// Polytope inscribed in the closed ball, with vertices center + radius·(net direction).
inline ConvexSet ball(const Vector& center, double radius) {
  if (radius == 0.0) return ConvexSet::point(center);
  std::vector<Vector> pts;
  for (const Vector& d : direction_net(center.size())) pts.push_back(center + radius * d);
  return ConvexSet(std::move(pts));
}

namespace detail {

/// Solves min ||sum_i a_i q_i|| subject to sum_i a_i = 1 over the given columns.
inline Vector affine_min_norm_weights(const Matrix& q) {
  const Eigen::Index m = q.cols();
  Matrix kkt = Matrix::Zero(m + 1, m + 1);
  kkt.topLeftCorner(m, m) = q.transpose() * q;
  kkt.topRightCorner(m, 1).setOnes();
  kkt.bottomLeftCorner(1, m).setOnes();
  Vector rhs = Vector::Zero(m + 1);
  rhs[m] = 1.0;
  const Vector sol = kkt.completeOrthogonalDecomposition().solve(rhs);
  return sol.head(m);
}

/**
 * Wolfe's minimum-norm-point method over conv{q_i}. Returns the minimizer.
 * Termination when ||x||^2 - min_j <x, q_j> <= tol, which is exactly the
 * variational inequality for the projection.
 */
inline Vector min_norm_point(const std::vector<Vector>& q, double tol, std::size_t max_iter) {
  const std::size_t n = q.size();
  std::size_t start = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (q[i].squaredNorm() < q[start].squaredNorm()) start = i;

  std::vector<std::size_t> active{start};
  std::vector<double> lambda{1.0};
  Vector x = q[start];
  double gap = 0.0;

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    std::size_t j = 0;
    double best = x.dot(q[0]);
    for (std::size_t i = 1; i < n; ++i) {
      const double v = x.dot(q[i]);
      if (v < best) {
        best = v;
        j = i;
      }
    }
    gap = x.squaredNorm() - best;
    if (gap <= tol) return x;
    if (std::find(active.begin(), active.end(), j) != active.end()) {
      // Round-off stall: the best vertex is already active.
      if (gap <= 1e3 * tol) return x;
      throw ProjectionError(iter, gap);
    }
    active.push_back(j);
    lambda.push_back(0.0);

    for (std::size_t minor = 0; minor <= active.size() + 1; ++minor) {
      Matrix cols(x.size(), static_cast<Eigen::Index>(active.size()));
      for (std::size_t c = 0; c < active.size(); ++c) cols.col(static_cast<Eigen::Index>(c)) = q[active[c]];
      const Vector alpha = affine_min_norm_weights(cols);
      constexpr double kPos = 1e-15;
      if ((alpha.array() > kPos).all()) {
        for (std::size_t c = 0; c < active.size(); ++c) lambda[c] = alpha[static_cast<Eigen::Index>(c)];
        break;
      }
      double theta = 1.0;
      for (std::size_t c = 0; c < active.size(); ++c) {
        const double a = alpha[static_cast<Eigen::Index>(c)];
        if (a <= kPos) {
          const double denom = lambda[c] - a;
          if (denom > 0.0) theta = std::min(theta, lambda[c] / denom);
        }
      }
      for (std::size_t c = 0; c < active.size(); ++c)
        lambda[c] += theta * (alpha[static_cast<Eigen::Index>(c)] - lambda[c]);
      // Drop vertices whose weight hit zero; at least one always does.
      std::size_t weakest = 0;
      for (std::size_t c = 1; c < active.size(); ++c)
        if (lambda[c] < lambda[weakest]) weakest = c;
      std::vector<std::size_t> keep_idx;
      std::vector<double> keep_lam;
      for (std::size_t c = 0; c < active.size(); ++c) {
        if (c == weakest || lambda[c] <= kPos) continue;
        keep_idx.push_back(active[c]);
        keep_lam.push_back(lambda[c]);
      }
      active = std::move(keep_idx);
      lambda = std::move(keep_lam);
      double s = 0.0;
      for (double l : lambda) s += l;
      for (double& l : lambda) l /= s;
    }

    x.setZero();
    for (std::size_t c = 0; c < active.size(); ++c) x += lambda[c] * q[active[c]];
  }
  throw ProjectionError(max_iter, gap);
}

}  // namespace detail

/**
 * Euclidean projection of p onto the hull. Active-set (Wolfe) iteration with
 * tolerance 1e-15 (relative to the squared generator spread) and at most
 * 10·(#generators) iterations; throws ProjectionError on non-convergence.
 */
inline Vector project(const ConvexSet& k, const Vector& p) {
  detail::require_same_dim(p.size(), k.dim(), "project");
  if (k.is_singleton()) return k.points().front();
  if (k.dim() == 1) return Vector::Constant(1, std::clamp(p[0], k.lower(), k.upper()));

  std::vector<Vector> q;
  q.reserve(k.size());
  double scale = 1.0;
  for (const Vector& g : k.points()) {
    q.push_back(g - p);
    scale = std::max(scale, q.back().squaredNorm());
  }
  return p + detail::min_norm_point(q, 1e-15 * scale, 10 * k.size());
}

inline double distance(const ConvexSet& k, const Vector& p) { return (project(k, p) - p).norm(); }

inline bool contains(const ConvexSet& k, const Vector& p, double tol) { return distance(k, p) <= tol; }

/// Membership test through the support function on the direction net:
/// <p, d> <= support(K, d) + tol for every net direction d.
inline bool support_contains(const ConvexSet& k, const Vector& p, double tol) {
  detail::require_same_dim(p.size(), k.dim(), "support_contains");
  for (const Vector& d : direction_net(k.dim()))
    if (p.dot(d) > support(k, d) + tol) return false;
  return true;
}

namespace detail {

inline double cross2(const Vector& o, const Vector& a, const Vector& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

/// Andrew's monotone chain; collinear boundary points are dropped.
inline std::vector<Vector> hull2d(std::vector<Vector> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vector& a, const Vector& b) {
    return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]);
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() <= 2) return pts;
  double scale = 0.0;
  for (const Vector& p : pts) scale = std::max(scale, p.cwiseAbs().maxCoeff());
  const double eps = 1e-14 * std::max(1.0, scale * scale);

  std::vector<Vector> h(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross2(h[k - 2], h[k - 1], pts[i]) <= eps) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross2(h[k - 2], h[k - 1], pts[i]) <= eps) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  if (h.empty()) h.push_back(pts.front());
  return h;
}

/// Removes generators that lie (within tolerance) in the hull of the others.
inline std::vector<Vector> filter_redundant(std::vector<Vector> pts) {
  double scale = 1.0;
  for (const Vector& p : pts) scale = std::max(scale, p.norm());
  const double tol = 1e-10 * scale;

  std::vector<Vector> uniq;
  for (Vector& p : pts) {
    const bool dup = std::any_of(uniq.begin(), uniq.end(),
                                 [&](const Vector& u) { return (u - p).norm() <= tol; });
    if (!dup) uniq.push_back(std::move(p));
  }
  for (std::size_t i = 0; i < uniq.size() && uniq.size() > 1;) {
    std::vector<Vector> others;
    others.reserve(uniq.size() - 1);
    for (std::size_t j = 0; j < uniq.size(); ++j)
      if (j != i) others.push_back(uniq[j]);
    if (distance(ConvexSet(others), uniq[i]) <= tol) {
      uniq.erase(uniq.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      ++i;
    }
  }
  return uniq;
}

}  // namespace detail

/// Hull reduction: exact in dimensions 1 and 2, tolerance filtering above.
inline ConvexSet reduce_hull(const ConvexSet& k) {
  if (k.is_singleton()) return k;
  if (k.dim() == 1) return ConvexSet::interval(k.lower(), k.upper());
  if (k.dim() == 2) return ConvexSet(detail::hull2d(k.points()));
  return ConvexSet(detail::filter_redundant(k.points()));
}

namespace detail {

// Above dimension 2 the generator cloud is only reduced once it exceeds four
// times an estimate of the hull size; the estimate is the summed input size.
inline ConvexSet maybe_reduce(std::vector<Vector> pts, std::size_t hull_estimate) {
  ConvexSet out(std::move(pts));
  if (out.dim() <= 2 || out.size() > 4 * hull_estimate) return reduce_hull(out);
  return out;
}

}  // namespace detail

inline ConvexSet minkowski_sum(const ConvexSet& a, const ConvexSet& b) {
  detail::require_same_dim(a.dim(), b.dim(), "minkowski_sum");
  if (b.is_singleton()) return a.translated(b.points().front());
  if (a.is_singleton()) return b.translated(a.points().front());
  std::vector<Vector> pts;
  pts.reserve(a.size() * b.size());
  for (const Vector& p : a.points())
    for (const Vector& q : b.points()) pts.push_back(p + q);
  return detail::maybe_reduce(std::move(pts), a.size() + b.size());
}

/**
 * Weighted Minkowski sum sum_i w_i·K_i. For a probability row this is the
 * Aumann integral of the finite-alphabet set-valued map s -> K_s.
 */
inline ConvexSet minkowski_combine(std::span<const double> weights, std::span<const ConvexSet> sets) {
  if (weights.size() != sets.size())
    throw GeometryError("minkowski_combine: weights and sets differ in length");
  if (sets.empty()) throw GeometryError("minkowski_combine: no sets given");
  const Eigen::Index dim = sets.front().dim();
  for (const ConvexSet& s : sets) detail::require_same_dim(s.dim(), dim, "minkowski_combine");
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw GeometryError("minkowski_combine: negative or non-finite weight");
  }

  ConvexSet acc = ConvexSet::point(Vector::Zero(dim));
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (weights[i] == 0.0) continue;
    acc = minkowski_sum(acc, sets[i].scaled(weights[i]));
  }
  return acc;
}

/// Convex hull of a union of sets.
inline ConvexSet hull_union(std::span<const ConvexSet> sets) {
  if (sets.empty()) throw GeometryError("hull_union: no sets given");
  std::vector<Vector> pts;
  std::size_t estimate = 0;
  for (const ConvexSet& s : sets) {
    detail::require_same_dim(s.dim(), sets.front().dim(), "hull_union");
    pts.insert(pts.end(), s.points().begin(), s.points().end());
    estimate += s.size();
  }
  return detail::maybe_reduce(std::move(pts), std::max<std::size_t>(1, estimate / 4));
}

/**
 * Hausdorff distance between two convex compact sets. Exact in dimension 1;
 * otherwise the larger of the support-function discrepancy on the direction
 * net and the generator-to-set projection distances. For polytopes the
 * latter term is the exact value, since dist(., B) is convex and peaks at a
 * vertex of A.
 */
inline double hausdorff(const ConvexSet& a, const ConvexSet& b) {
  detail::require_same_dim(a.dim(), b.dim(), "hausdorff");
  if (a.dim() == 1)
    return std::max(std::abs(a.lower() - b.lower()), std::abs(a.upper() - b.upper()));
  double h = 0.0;
  for (const Vector& d : direction_net(a.dim())) h = std::max(h, std::abs(support(a, d) - support(b, d)));
  for (const Vector& p : a.points()) h = std::max(h, distance(b, p));
  for (const Vector& p : b.points()) h = std::max(h, distance(a, p));
  return h;
}

}  // namespace sri

#endif  // SRI_CONVEX_SET_HPP
