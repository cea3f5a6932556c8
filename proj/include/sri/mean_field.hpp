#ifndef SRI_MEAN_FIELD_HPP
#define SRI_MEAN_FIELD_HPP

// Averaged set-valued vector fields. The fast field averages H1 over the
// stationary polytope of the frozen fast kernel; the slow field averages H2
// over the generating family of D(y).

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sri/convex_set.hpp"
#include "sri/markov.hpp"
#include "sri/set_valued_map.hpp"

namespace sri {

enum class FieldKind { fast, slow, generic };

/// A Marchaud map z -> ConvexSet with declared growth constant.
class MeanField {
 public:
  using Oracle = std::function<ConvexSet(const Vector& z)>;

  MeanField(Eigen::Index in_dim, Eigen::Index out_dim, Oracle oracle, double growth_k,
            FieldKind kind = FieldKind::generic, std::string name = {})
      : in_dim_(in_dim), out_dim_(out_dim), oracle_(std::move(oracle)), growth_k_(growth_k), kind_(kind),
        name_(std::move(name)) {
    if (in_dim_ < 1 || out_dim_ < 1) throw MapError("MeanField: invalid dimensions");
    if (!(growth_k_ > 0.0)) throw MapError("MeanField: growth constant must be positive");
  }

  ConvexSet operator()(const Vector& z) const {
    if (z.size() != in_dim_) throw MapError(label() + ": argument dimension mismatch");
    ConvexSet out = oracle_(z);
    if (out.dim() != out_dim_) throw MapError(label() + ": oracle returned a set of the wrong dimension");
    return out;
  }

  Eigen::Index in_dim() const { return in_dim_; }
  Eigen::Index out_dim() const { return out_dim_; }
  double growth_k() const { return growth_k_; }
  double growth_bound(const Vector& z) const { return growth_k_ * (1.0 + z.norm()); }
  FieldKind kind() const { return kind_; }
  const std::string& name() const { return name_; }

 private:
  std::string label() const { return name_.empty() ? std::string("MeanField") : name_; }

  Eigen::Index in_dim_;
  Eigen::Index out_dim_;
  Oracle oracle_;
  double growth_k_;
  FieldKind kind_;
  std::string name_;
};

/// Aumann integral of the finite-alphabet map s -> slices[s] against mu.
inline ConvexSet aumann(std::span<const ConvexSet> slices, const Vector& mu) {
  if (static_cast<Eigen::Index>(slices.size()) != mu.size())
    throw GeometryError("aumann: measure length differs from the alphabet size");
  detail::require_probability_row(mu, 1e-12, "aumann measure");
  const std::vector<double> w(mu.data(), mu.data() + mu.size());
  return minkowski_combine(w, slices);
}

/**
 * Ĥ1(x, y): union over stationary laws mu of the frozen kernel of the Aumann
 * integral of H1(x, y, ·). The integral is affine in mu, so the union's hull
 * is the hull of the integrals at the polytope's vertices.
 */
inline ConvexSet h1_hat(const SetValuedMap& h1, const FiniteKernel& k1, const Vector& x, const Vector& y) {
  if (h1.alphabet_size() != k1.alphabet_size()) throw MapError("h1_hat: map and kernel alphabets differ");
  std::vector<ConvexSet> slices;
  for (std::size_t s = 0; s < h1.alphabet_size(); ++s) slices.push_back(h1(x, y, s));
  const StationarySet st = stationary_set(k1.frozen(x, y));
  std::vector<ConvexSet> parts;
  for (const Vector& mu : st.vertices) parts.push_back(aumann(slices, mu));
  return hull_union(parts);
}

/// Ĥ2(y) over a family of slow measures: hull of sum_atoms w·H2(x, y, s).
inline ConvexSet h2_hat(const SetValuedMap& h2, std::span<const SlowMeasure> family, const Vector& y) {
  if (family.empty()) throw MapError("h2_hat: empty measure family");
  std::vector<ConvexSet> parts;
  for (const SlowMeasure& m : family) {
    std::vector<ConvexSet> sets;
    std::vector<double> weights;
    for (const auto& atom : m.atoms) {
      sets.push_back(h2(atom.x, y, atom.s));
      weights.push_back(atom.weight);
    }
    parts.push_back(minkowski_combine(weights, sets));
  }
  return hull_union(parts);
}

/// x -> Ĥ1(x, y0). Growth constant K·(1 + ||y0||) bounds K·(1 + ||x|| + ||y0||).
inline MeanField fast_mean_field(const SetValuedMap& h1, const FiniteKernel& k1, const Vector& y0) {
  const double growth = h1.growth_k() * (1.0 + (y0.size() ? y0.norm() : 0.0));
  return MeanField(
      h1.dims().d1, h1.dims().k, [h1, k1, y0](const Vector& x) { return h1_hat(h1, k1, x, y0); }, growth,
      FieldKind::fast, "H1_hat");
}

/// Sample of the fast attractor lambda(y).
using LambdaOracle = std::function<std::vector<Vector>(const Vector& y)>;

/**
 * y -> Ĥ2(y) built from the generating family of D(y). With lambda growth
 * sup ||x|| <= K_lambda·(1 + ||y||) the growth constant is K·(1 + K_lambda).
 */
inline MeanField slow_mean_field(const SetValuedMap& h2, const FiniteKernel& k2, LambdaOracle lambda,
                                 double lambda_growth) {
  const double growth = h2.growth_k() * (1.0 + lambda_growth);
  return MeanField(
      h2.dims().d2, h2.dims().k,
      [h2, k2, lambda = std::move(lambda)](const Vector& y) {
        const std::vector<Vector> pts = lambda(y);
        const std::vector<SlowMeasure> family = slow_measure_family(y, pts, k2);
        return h2_hat(h2, family, y);
      },
      growth, FieldKind::slow, "H2_hat");
}

/// Ĥ1^(l): the fast field with H1 replaced by its level-l approximant.
inline MeanField approx_fast_mean_field(const SetValuedMap& h1, const FiniteKernel& k1, const Vector& y0,
                                        const ApproxLevel& level) {
  return fast_mean_field(approximant(h1, level), k1, y0);
}

/// Ĥ2^(l): the slow field with H2 replaced by its level-l approximant.
inline MeanField approx_slow_mean_field(const SetValuedMap& h2, const FiniteKernel& k2, LambdaOracle lambda,
                                        double lambda_growth, const ApproxLevel& level) {
  return slow_mean_field(approximant(h2, level), k2, std::move(lambda), lambda_growth);
}

/// Closed-graph witness for a mean field: v_n in M(z_n), (z_n, v_n) -> (limit, limit_value).
struct FieldSequence {
  std::vector<Vector> points;
  std::vector<Vector> values;
  Vector limit;
  Vector limit_value;
};

/// Marchaud conditions on sampled probes: convex compact values, growth, closed graph.
inline CheckReport check_marchaud(const MeanField& m, std::span<const Vector> grid,
                                  std::span<const FieldSequence> sequences = {}, double tol = 1e-6) {
  std::vector<Probe> probes;
  for (const Vector& z : grid) probes.push_back({z, Vector(0), 0});
  std::vector<SequenceProbe> seqs;
  for (const FieldSequence& f : sequences) {
    SequenceProbe sp;
    for (const Vector& z : f.points) sp.points.push_back({z, Vector(0), 0});
    sp.values = f.values;
    sp.limit = {f.limit, Vector(0), 0};
    sp.limit_value = f.limit_value;
    seqs.push_back(std::move(sp));
  }
  return detail::run_structural_checks([&](const Probe& p) { return m(p.x); },
                                       [&](const Probe& p) { return m.growth_bound(p.x); }, probes, seqs, tol);
}

}  // namespace sri

#endif  // SRI_MEAN_FIELD_HPP
