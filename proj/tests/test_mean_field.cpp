#include <gtest/gtest.h>

#include <vector>

#include "fixtures.hpp"

using namespace sri;
using fx::scalar;
using fx::vec;

namespace {

const Matrix kIrreducible = (Matrix(2, 2) << 0.5, 0.5, 0.25, 0.75).finished();

// H1(x, y, s): s = 0 -> [0, 1], s = 1 -> {2}, independent of the iterates.
SetValuedMap interval_point_slices() {
  return SetValuedMap(
      MapDims{1, 1, 1}, 2,
      [](const Vector&, const Vector&, std::size_t s) {
        return s == 0 ? ConvexSet::interval(0, 1) : ConvexSet::point(scalar(2));
      },
      2.0);
}

// Linear state-dependent slices: H1(x, y, s) = {-x + (s + 1) y}.
SetValuedMap linear_slices() {
  return SetValuedMap(
      MapDims{1, 1, 1}, 2,
      [](const Vector& x, const Vector& y, std::size_t s) { return ConvexSet::point(-x + (s + 1.0) * y); }, 2.0);
}

}  // namespace

TEST(Aumann, WorkedExamples) {
  const std::vector<ConvexSet> slices{ConvexSet::interval(0, 1), ConvexSet::point(scalar(2))};
  const ConvexSet dirac = aumann(slices, vec({1, 0}));
  EXPECT_DOUBLE_EQ(dirac.lower(), 0.0);
  EXPECT_DOUBLE_EQ(dirac.upper(), 1.0);
  const ConvexSet half = aumann(slices, vec({0.5, 0.5}));
  EXPECT_NEAR(half.lower(), 1.0, 1e-15);
  EXPECT_NEAR(half.upper(), 1.5, 1e-15);
  const ConvexSet third = aumann(slices, vec({1.0 / 3.0, 2.0 / 3.0}));
  EXPECT_NEAR(third.lower(), 4.0 / 3.0, 1e-15);
  EXPECT_NEAR(third.upper(), 5.0 / 3.0, 1e-15);
}

TEST(Aumann, RejectsBadMeasures) {
  const std::vector<ConvexSet> slices{ConvexSet::interval(0, 1), ConvexSet::point(scalar(2))};
  EXPECT_THROW(aumann(slices, vec({0.5, 0.6})), KernelError);
  EXPECT_THROW(aumann(slices, vec({1, 0, 0})), GeometryError);
}

TEST(H1Hat, UniqueStationaryLaw) {
  const ConvexSet h = h1_hat(interval_point_slices(), FiniteKernel::constant(kIrreducible), scalar(0), scalar(0));
  EXPECT_NEAR(h.lower(), 4.0 / 3.0, 1e-13);
  EXPECT_NEAR(h.upper(), 5.0 / 3.0, 1e-13);
}

TEST(H1Hat, IdentityKernelGivesSegment) {
  const Vector a = vec({1, 0}), b = vec({0, 3});
  const SetValuedMap h1(
      MapDims{2, 0, 2}, 2, [&](const Vector&, const Vector&, std::size_t s) { return ConvexSet::point(s ? b : a); }, 3.0);
  const ConvexSet h = h1_hat(h1, FiniteKernel::constant(Matrix::Identity(2, 2)), vec({0, 0}), Vector(0));
  EXPECT_LE(hausdorff(h, ConvexSet::segment(a, b)), 1e-12);
}

TEST(H1Hat, SingleStateDegenerates) {
  const SetValuedMap h1 = fx::singleton_map(1, 1, 1, [](const Vector& x, const Vector& y) { return Vector(y - x); });
  const ConvexSet h = h1_hat(h1, FiniteKernel::constant(Matrix::Ones(1, 1)), scalar(2), scalar(5));
  ASSERT_TRUE(h.is_singleton());
  EXPECT_DOUBLE_EQ(h.points()[0][0], 3.0);
}

TEST(H1Hat, MatchesEigenvectorWeightedSum) {
  Rng rng(71);
  const SetValuedMap h1 = linear_slices();
  for (int trial = 0; trial < 20; ++trial) {
    Matrix p(2, 2);
    const double a = uniform(rng, 0.05, 0.95), b = uniform(rng, 0.05, 0.95);
    p << 1 - a, a, b, 1 - b;
    // Closed form of the two-state stationary law.
    const Vector mu = vec({b / (a + b), a / (a + b)});
    const double x = uniform(rng, -3, 3), y = uniform(rng, -3, 3);
    const ConvexSet h = h1_hat(h1, FiniteKernel::constant(p), scalar(x), scalar(y));
    EXPECT_NEAR(h.points()[0][0], -x + (mu[0] + 2.0 * mu[1]) * y, 1e-12);
  }
}

TEST(H2Hat, SingletonLambdaUniqueLaw) {
  const SetValuedMap h2(
      MapDims{1, 1, 1}, 2,
      [](const Vector& x, const Vector& y, std::size_t s) { return ConvexSet::point((s + 1.0) * x - y); }, 3.0);
  const FiniteKernel k = FiniteKernel::constant(kIrreducible);
  const std::vector<Vector> lam{scalar(1.5)};
  const ConvexSet h = h2_hat(h2, slow_measure_family(scalar(0.5), lam, k), scalar(0.5));
  EXPECT_NEAR(h.points()[0][0], (1.0 / 3.0) * (1.5 - 0.5) + (2.0 / 3.0) * (3.0 - 0.5), 1e-13);
}

TEST(H2Hat, DummyAlphabetIsHullOverLambda) {
  const SetValuedMap h2 = fx::singleton_map(1, 1, 1, [](const Vector& x, const Vector& y) { return Vector(x - y); });
  const FiniteKernel k = FiniteKernel::constant(Matrix::Ones(1, 1));
  const std::vector<Vector> lam{scalar(-1), scalar(0.5), scalar(2)};
  const ConvexSet h = h2_hat(h2, slow_measure_family(scalar(1), lam, k), scalar(1));
  EXPECT_DOUBLE_EQ(h.lower(), -2.0);
  EXPECT_DOUBLE_EQ(h.upper(), 1.0);
  EXPECT_THROW(h2_hat(h2, std::vector<SlowMeasure>{}, scalar(1)), MapError);
}

TEST(H2Hat, CanonicalDualDriftAveragesConstraints) {
  const SaddleProblem p = fx::canonical_problem();
  const MeanField f = dual_field(p);
  for (double y : {-2.0, -1.0, 0.0, 0.7}) {
    const Vector lam = lambda_min(p, scalar(y));
    const ConvexSet h = f(scalar(y));
    ASSERT_TRUE(h.is_singleton());
    EXPECT_NEAR(h.points()[0][0], 0.5 * lam[0] + 0.5 * lam[1] - 1.0, 1e-12);
  }
}

TEST(CheckMarchaud, LinearFastFieldPasses) {
  const SetValuedMap h1 = fx::singleton_map(2, 1, 2, [](const Vector& x, const Vector&) { return Vector(-x); });
  const MeanField f = fast_mean_field(h1, FiniteKernel::constant(Matrix::Ones(1, 1)), scalar(0.3));
  std::vector<Vector> grid;
  for (int i = -3; i <= 3; ++i)
    for (int j = -3; j <= 3; ++j) grid.push_back(vec({double(i), double(j)}));
  EXPECT_TRUE(check_marchaud(f, grid).ok());
}

TEST(CheckMarchaud, JumpFailsClosedGraph) {
  const MeanField f(1, 1, [](const Vector& z) { return ConvexSet::point(scalar(z[0] < 0 ? 0.0 : 1.0)); }, 1.0);
  const std::vector<Vector> grid{scalar(-1), scalar(1)};
  FieldSequence seq;
  for (int n = 1; n <= 20; ++n) {
    seq.points.push_back(scalar(-1.0 / n));
    seq.values.push_back(scalar(0));
  }
  seq.limit = scalar(0);
  seq.limit_value = scalar(0);
  const std::vector<FieldSequence> seqs{seq};
  EXPECT_FALSE(check_marchaud(f, grid, seqs).closed_graph_ok);
}

TEST(CheckMarchaud, CanonicalDualFieldPasses) {
  const MeanField f = dual_field(fx::canonical_problem());
  std::vector<Vector> grid;
  for (double y = -20.0; y <= 20.0; y += 0.5) grid.push_back(scalar(y));
  EXPECT_TRUE(check_marchaud(f, grid).ok());
}

TEST(ApproxMeanField, ConstantSlicesInflateByBall) {
  const SetValuedMap h1(
      MapDims{2, 1, 2}, 2,
      [](const Vector&, const Vector&, std::size_t s) {
        return s == 0 ? ConvexSet::segment(fx::vec({0, 0}), fx::vec({1, 0})) : ConvexSet::point(fx::vec({0, 2}));
      },
      3.0);
  const FiniteKernel k = FiniteKernel::constant(kIrreducible);
  const MeanField exact = fast_mean_field(h1, k, scalar(0));
  for (int l = 1; l <= 5; ++l) {
    const MeanField approx = approx_fast_mean_field(h1, k, scalar(0), ApproxLevel::make(l, 3.0));
    const Vector z = vec({0.3, -0.2});
    const ConvexSet expected = minkowski_sum(exact(z), ball(vec({0, 0}), std::ldexp(1.0, -l)));
    EXPECT_LE(hausdorff(approx(z), expected), 1e-12);
  }
}

TEST(ApproxMeanField, NestedAndShrinking) {
  const SetValuedMap h1(
      MapDims{2, 1, 2}, 2,
      [](const Vector& x, const Vector& y, std::size_t s) {
        const Vector a = 0.5 * x;
        return ConvexSet::segment(-a, a + (s + 1.0) * y[0] * fx::vec({1, 1}));
      },
      3.0);
  const FiniteKernel k = FiniteKernel::constant(kIrreducible);
  const MeanField exact = fast_mean_field(h1, k, scalar(0.4));
  Rng rng(73);
  for (int probe = 0; probe < 8; ++probe) {
    const Vector z = 2.0 * random_in_ball(rng, 2);
    double prev = 1e9;
    ConvexSet coarse = approx_fast_mean_field(h1, k, scalar(0.4), ApproxLevel::make(1, 3.0))(z);
    for (int l = 1; l <= 7; ++l) {
      const ConvexSet fine = approx_fast_mean_field(h1, k, scalar(0.4), ApproxLevel::make(l + 1, 3.0))(z);
      const ConvexSet ex = exact(z);
      for (const Vector& d : direction_net(2)) {
        EXPECT_GE(support(coarse, d) - support(fine, d), -1e-9);
        EXPECT_GE(support(fine, d) - support(ex, d), -1e-9);
      }
      // Each slice moves at most 0.5·||dx|| + 2·|dy| under the offsets.
      const double h = hausdorff(coarse, ex);
      EXPECT_LE(h, (3.0 * (0.5 + 2.0 * std::sqrt(2.0)) + 1.0) * std::ldexp(1.0, -l) + 1e-12);
      EXPECT_LE(h, prev + 1e-12);
      prev = h;
      coarse = fine;
    }
  }
}

TEST(SlowMeanField, GrowthComposesWithLambdaGrowth) {
  const SaddleProblem p = fx::canonical_problem();
  const MeanField f = dual_field(p);
  EXPECT_DOUBLE_EQ(f.growth_k(), dual_drift(p).growth_k() * (1.0 + p.lambda_growth()));
  EXPECT_EQ(f.kind(), FieldKind::slow);
}
