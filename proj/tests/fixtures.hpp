#ifndef SRI_TESTS_FIXTURES_HPP
#define SRI_TESTS_FIXTURES_HPP

#include <initializer_list>

#include "sri/sri.hpp"

namespace fx {

using sri::ConvexSet;
using sri::Matrix;
using sri::Vector;

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline Vector scalar(double x) { return Vector::Constant(1, x); }

inline ConvexSet unit_square() {
  return ConvexSet({vec({0, 0}), vec({1, 0}), vec({0, 1}), vec({1, 1})});
}

// Two states with iid uniform switching; J(x,s) = ½||x - theta_s||²,
// C(0) = [1 0], w(0) = 2, C(1) = [0 1], w(1) = 0, eps = 0.01, r = 4, K = 2.
// Saddle of the penalized program: x* = (1, 1), y* = -(1 + 4c), c = eps/(2r²).
inline sri::QuadraticSpec canonical_quadratic() {
  sri::QuadraticSpec q;
  q.theta = {vec({1, 0}), vec({0, 1})};
  q.c = {(Matrix(1, 2) << 1, 0).finished(), (Matrix(1, 2) << 0, 1).finished()};
  q.w = {scalar(2.0), scalar(0.0)};
  q.kernel = Matrix::Constant(2, 2, 0.5);
  q.eps = 0.01;
  q.r = 4.0;
  q.growth_k = 2.0;
  q.feasible_points = {vec({2, 0}), vec({0, 0})};
  q.x_star = vec({1, 1});
  return q;
}

inline sri::SaddleProblem canonical_problem() { return sri::quadratic_problem(canonical_quadratic()); }

inline constexpr double kPenalty = 0.01 / 32.0;
inline constexpr double kDualStar = -(1.0 + 4.0 * kPenalty);

inline sri::StepSchedule canonical_schedule() { return {0.6, 0.9, 0.25, 1.0}; }

inline sri::PrimalDualOptions canonical_options(std::uint64_t seed, std::size_t steps = 200000) {
  sri::PrimalDualOptions o;
  o.schedule = canonical_schedule();
  o.noise_primal = sri::NoiseModel::uniform_box(0.1);
  o.steps = steps;
  o.seed = seed;
  return o;
}

// Single-state map F(x, y, s) = {A x + B y} style helpers.
inline sri::SetValuedMap singleton_map(Eigen::Index d1, Eigen::Index d2, Eigen::Index k,
                                       std::function<Vector(const Vector&, const Vector&)> f, double growth = 1.0,
                                       std::size_t alphabet = 1) {
  return sri::SetValuedMap(
      sri::MapDims{d1, d2, k}, alphabet,
      [f](const Vector& x, const Vector& y, std::size_t) { return ConvexSet::point(f(x, y)); }, growth);
}

}  // namespace fx

#endif  // SRI_TESTS_FIXTURES_HPP
