#ifndef SRI_MARKOV_HPP
#define SRI_MARKOV_HPP

// Finite-alphabet, iterate-dependent Markov noise: transition kernels,
// stationary-distribution polytopes of frozen kernels, sampling, and the
// generating family of the slow measure map D(y).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sri/convex_set.hpp"
#include "sri/rng.hpp"

namespace sri {

class KernelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kStochasticTol = 1e-12;

namespace detail {

inline void require_probability_row(const Vector& row, double tol, const std::string& where) {
  double sum = 0.0;
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    if (!std::isfinite(row[j]) || row[j] < -tol) {
      std::ostringstream os;
      os << where << ": entry " << j << " is negative or non-finite (" << row[j] << ")";
      throw KernelError(os.str());
    }
    sum += row[j];
  }
  if (std::abs(sum - 1.0) > tol) {
    std::ostringstream os;
    os << where << ": sums to " << sum << " instead of 1";
    throw KernelError(os.str());
  }
}

}  // namespace detail

/// Validates that P is square and row-stochastic; the message names the offending row.
inline void require_stochastic(const Matrix& p, double tol = kStochasticTol) {
  if (p.rows() != p.cols() || p.rows() == 0) throw KernelError("transition matrix must be square and nonempty");
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    detail::require_probability_row(p.row(i).transpose(), tol, "transition matrix row " + std::to_string(i));
}

/**
 * Transition kernel (x, y, s) -> probability row over {0, ..., |S|-1}.
 * Every row is checked on evaluation.
 */
class FiniteKernel {
 public:
  using RowOracle = std::function<Vector(const Vector& x, const Vector& y, std::size_t s)>;

  FiniteKernel(std::size_t alphabet_size, RowOracle row) : alphabet_(alphabet_size), row_(std::move(row)) {
    if (alphabet_ < 1) throw KernelError("FiniteKernel: alphabet must be nonempty");
    if (!row_) throw KernelError("FiniteKernel: empty row oracle");
  }

  /// Kernel that ignores the iterates.
  static FiniteKernel constant(Matrix p) {
    require_stochastic(p);
    const auto n = static_cast<std::size_t>(p.rows());
    return FiniteKernel(n, [p = std::move(p)](const Vector&, const Vector&, std::size_t s) -> Vector {
      return p.row(static_cast<Eigen::Index>(s)).transpose();
    });
  }

  Vector row(const Vector& x, const Vector& y, std::size_t s) const {
    if (s >= alphabet_) throw KernelError("FiniteKernel: state index " + std::to_string(s) + " out of range");
    Vector r = row_(x, y, s);
    if (static_cast<std::size_t>(r.size()) != alphabet_) throw KernelError("FiniteKernel: row has wrong length");
    detail::require_probability_row(r, kStochasticTol, "kernel row for state " + std::to_string(s));
    return r;
  }

  /// The transition matrix with the iterates frozen at (x, y).
  Matrix frozen(const Vector& x, const Vector& y) const {
    const auto n = static_cast<Eigen::Index>(alphabet_);
    Matrix p(n, n);
    for (Eigen::Index s = 0; s < n; ++s) p.row(s) = row(x, y, static_cast<std::size_t>(s)).transpose();
    return p;
  }

  std::size_t alphabet_size() const { return alphabet_; }

 private:
  std::size_t alphabet_;
  RowOracle row_;
};

/// Vertices of the stationary polytope {mu : mu P = mu, mu >= 0, sum mu = 1}.
struct StationarySet {
  std::vector<Vector> vertices;

  bool unique() const { return vertices.size() == 1; }
};

namespace detail {

/// Tarjan's strongly connected components on the support graph of P.
inline std::vector<int> strongly_connected_components(const Matrix& p, int& count) {
  const auto n = static_cast<int>(p.rows());
  std::vector<int> index(n, -1), low(n, 0), comp(n, -1), stack;
  std::vector<bool> on_stack(n, false);
  int next = 0;
  count = 0;

  // Iterative DFS; each frame is (node, next neighbour to visit).
  std::vector<std::pair<int, int>> frames;
  for (int root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    frames.emplace_back(root, 0);
    index[root] = low[root] = next++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!frames.empty()) {
      auto& [v, j] = frames.back();
      if (j < n) {
        const int w = j++;
        if (p(v, w) <= 0.0) continue;
        if (index[w] == -1) {
          index[w] = low[w] = next++;
          stack.push_back(w);
          on_stack[w] = true;
          frames.emplace_back(w, 0);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        int w = -1;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = count;
        } while (w != v);
        ++count;
      }
      const int finished = v;
      frames.pop_back();
      if (!frames.empty()) {
        const int parent = frames.back().first;
        low[parent] = std::min(low[parent], low[finished]);
      }
    }
  }
  return comp;
}

}  // namespace detail

/**
 * Stationary polytope of a frozen transition matrix. Each closed (recurrent)
 * communicating class carries exactly one stationary law, obtained from an LU
 * solve of mu (P_CC - I) = 0 with the normalization replacing one equation;
 * these per-class laws are the polytope's vertices.
 */
inline StationarySet stationary_set(const Matrix& p) {
  require_stochastic(p);
  const Eigen::Index n = p.rows();
  int ncomp = 0;
  const std::vector<int> comp = detail::strongly_connected_components(p, ncomp);

  std::vector<bool> closed(static_cast<std::size_t>(ncomp), true);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (p(i, j) > 0.0 && comp[i] != comp[j]) closed[static_cast<std::size_t>(comp[i])] = false;

  StationarySet out;
  for (int c = 0; c < ncomp; ++c) {
    if (!closed[static_cast<std::size_t>(c)]) continue;
    std::vector<Eigen::Index> members;
    for (Eigen::Index i = 0; i < n; ++i)
      if (comp[i] == c) members.push_back(i);
    const auto m = static_cast<Eigen::Index>(members.size());
    Matrix a(m, m);
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index k = 0; k < m; ++k) a(r, k) = p(members[k], members[r]) - (r == k ? 1.0 : 0.0);
    a.row(m - 1).setOnes();
    Vector rhs = Vector::Zero(m);
    rhs[m - 1] = 1.0;
    const Vector mu_c = a.partialPivLu().solve(rhs);
    const double residual = (a * mu_c - rhs).cwiseAbs().maxCoeff();
    if (!(residual <= 1e-10)) throw KernelError("stationary_set: linear solve residual " + std::to_string(residual));

    Vector mu = Vector::Zero(n);
    for (Eigen::Index r = 0; r < m; ++r) mu[members[r]] = std::max(0.0, mu_c[r]);
    mu /= mu.sum();
    out.vertices.push_back(std::move(mu));
  }
  return out;
}

/// ||mu P - mu||_inf
inline double stationarity_residual(const Matrix& p, const Vector& mu) {
  return (p.transpose() * mu - mu).cwiseAbs().maxCoeff();
}

/// Inverse-CDF draw from a probability row.
inline std::size_t sample_from_row(const Vector& row, Rng& rng) {
  const double u = uniform01(rng);
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    if (row[j] <= 0.0) continue;
    last_positive = static_cast<std::size_t>(j);
    cum += row[j];
    if (u < cum) return static_cast<std::size_t>(j);
  }
  return last_positive;
}

/// Next noise state given the current iterates and state; advances rng.
inline std::size_t sample_next(const FiniteKernel& k, const Vector& x, const Vector& y, std::size_t s, Rng& rng) {
  return sample_from_row(k.row(x, y, s), rng);
}

/// A joint law on R^d1 × S with finitely many atoms.
struct SlowMeasure {
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
};

/// theta·a + (1 - theta)·b as an atom list.
inline SlowMeasure mix(const SlowMeasure& a, const SlowMeasure& b, double theta) {
  if (theta < 0.0 || theta > 1.0) throw KernelError("mix: theta outside [0, 1]");
  SlowMeasure out;
  for (const auto& at : a.atoms) out.atoms.push_back({at.x, at.s, theta * at.weight});
  for (const auto& at : b.atoms) out.atoms.push_back({at.x, at.s, (1.0 - theta) * at.weight});
  return out;
}

struct SlowMeasureCheck {
  bool normalized = false;
  bool support_ok = false;
  bool stationary_ok = false;
  double support_distance = 0.0;
  double stationarity_error = 0.0;

  bool ok() const { return normalized && support_ok && stationary_ok; }
};

/**
 * Membership in D(y): weights sum to one, every x-atom lies within
 * `support_tol` of the supplied sample of lambda(y), and the s-marginal equals
 * its one-step image under the kernel at (x, y).
 */
inline SlowMeasureCheck check_slow_measure(const SlowMeasure& m, const Vector& y, std::span<const Vector> lambda_points,
                                           const FiniteKernel& kernel, double support_tol = 1e-8,
                                           double stationary_tol = 1e-8) {
  SlowMeasureCheck c;
  double total = 0.0;
  bool nonneg = true;
  for (const auto& a : m.atoms) {
    total += a.weight;
    nonneg = nonneg && a.weight >= 0.0;
  }
  c.normalized = nonneg && std::abs(total - 1.0) <= 1e-12 && !m.atoms.empty();

  for (const auto& a : m.atoms) {
    if (a.weight == 0.0) continue;
    double best = std::numeric_limits<double>::infinity();
    for (const Vector& l : lambda_points) best = std::min(best, (a.x - l).norm());
    c.support_distance = std::max(c.support_distance, best);
  }
  c.support_ok = c.support_distance <= support_tol;

  const std::size_t n = kernel.alphabet_size();
  const Vector marginal = m.s_marginal(n);
  Vector image = Vector::Zero(static_cast<Eigen::Index>(n));
  for (const auto& a : m.atoms) image += a.weight * kernel.row(a.x, y, a.s);
  c.stationarity_error = (image - marginal).cwiseAbs().maxCoeff();
  c.stationary_ok = c.stationarity_error <= stationary_tol;
  return c;
}

/**
 * Generating family of D(y): for each x* in the sample of lambda(y), freeze
 * the kernel at (x*, y) and emit delta_{x*} ⊗ nu for every stationary vertex nu.
 */
inline std::vector<SlowMeasure> slow_measure_family(const Vector& y, std::span<const Vector> lambda_points,
                                                    const FiniteKernel& kernel) {
  if (lambda_points.empty()) throw KernelError("slow_measure_family: empty sample of lambda(y)");
  std::vector<SlowMeasure> family;
  for (const Vector& xs : lambda_points) {
    const StationarySet st = stationary_set(kernel.frozen(xs, y));
    for (const Vector& nu : st.vertices) {
      SlowMeasure m;
      for (Eigen::Index s = 0; s < nu.size(); ++s)
        if (nu[s] > 0.0) m.atoms.push_back({xs, static_cast<std::size_t>(s), nu[s]});
      family.push_back(std::move(m));
    }
  }
  return family;
}

}  // namespace sri

#endif  // SRI_MARKOV_HPP
