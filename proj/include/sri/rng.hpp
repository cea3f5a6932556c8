#ifndef SRI_RNG_HPP
#define SRI_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include <Eigen/Dense>

namespace sri {

// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. The distributions below are written out by hand so that a seed
// reproduces the same draws on every standard library.
using Rng = std::mt19937_64;

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Box-Muller; consumes two draws per call.
inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Uniform direction on the unit sphere of R^dim.
inline Eigen::VectorXd random_unit_vector(Rng& rng, Eigen::Index dim) {
  Eigen::VectorXd v(dim);
  double n = 0.0;
  do {
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = standard_normal(rng);
    n = v.norm();
  } while (n < 1e-12);
  return v / n;
}

/// Uniform point in the closed unit ball of R^dim.
inline Eigen::VectorXd random_in_ball(Rng& rng, Eigen::Index dim) {
  const Eigen::VectorXd dir = random_unit_vector(rng, dim);
  const double radius = std::pow(uniform01(rng), 1.0 / static_cast<double>(dim));
  return radius * dir;
}

/// Stable 64-bit mix used to derive sub-seeds from (tag, index) pairs.
constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace sri

#endif  // SRI_RNG_HPP
