#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fixtures.hpp"

using namespace sri;
using fx::scalar;
using fx::vec;

namespace {

// Distance from p to the axis-aligned box [lo, hi] by clamping.
double box_distance(const Vector& p, const Vector& lo, const Vector& hi) {
  return (p - p.cwiseMax(lo).cwiseMin(hi)).norm();
}

}  // namespace

TEST(Support, SquareInDiagonalDirection) {
  EXPECT_DOUBLE_EQ(support(fx::unit_square(), vec({1, 1})), 2.0);
}

TEST(Support, IntervalNegativeDirection) {
  EXPECT_DOUBLE_EQ(support(ConvexSet::interval(-1, 1), scalar(-1)), 1.0);
  EXPECT_DOUBLE_EQ(support(ConvexSet::interval(-2, 3), scalar(-1)), 2.0);
}

TEST(Support, SingletonIsLinear) {
  EXPECT_DOUBLE_EQ(support(ConvexSet::point(scalar(3)), scalar(1)), 3.0);
  EXPECT_DOUBLE_EQ(support(ConvexSet::point(scalar(3)), scalar(-1)), -3.0);
  EXPECT_DOUBLE_EQ(support(ConvexSet::point(vec({1, 2})), vec({3, -1})), 1.0);
}

TEST(Support, DimensionMismatchThrows) {
  EXPECT_THROW(support(fx::unit_square(), scalar(1)), GeometryError);
}

TEST(ConvexSetCtor, RejectsEmptyAndMixedDimensions) {
  EXPECT_THROW(ConvexSet(std::vector<Vector>{}), GeometryError);
  EXPECT_THROW(ConvexSet({vec({1, 2}), scalar(1)}), GeometryError);
  EXPECT_THROW(ConvexSet::point(vec({1, NAN})), GeometryError);
}

TEST(Support, SublinearOnRandomPolytopes) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vector> pts;
    for (int i = 0; i < 6; ++i) pts.push_back(3.0 * random_in_ball(rng, 3));
    const ConvexSet k(pts);
    const Vector d1 = random_unit_vector(rng, 3), d2 = random_unit_vector(rng, 3);
    const double a = uniform(rng, 0, 5);
    EXPECT_NEAR(support(k, a * d1), a * support(k, d1), 1e-12);
    EXPECT_LE(support(k, d1 + d2), support(k, d1) + support(k, d2) + 1e-12);
  }
}

TEST(MinkowskiCombine, SquareAndSegment) {
  const std::vector<double> w{0.5, 0.5};
  const std::vector<ConvexSet> s{fx::unit_square(), ConvexSet::segment(vec({0, 0}), vec({2, 0}))};
  const ConvexSet c = minkowski_combine(w, s);
  const ConvexSet expected({vec({0, 0}), vec({1.5, 0}), vec({1.5, 0.5}), vec({0, 0.5})});
  EXPECT_LE(hausdorff(c, expected), 1e-12);
}

TEST(MinkowskiCombine, IntervalAndPoint) {
  const std::vector<ConvexSet> one{ConvexSet::interval(0, 1)};
  const std::vector<double> w1{1.0};
  const ConvexSet id = minkowski_combine(w1, one);
  EXPECT_DOUBLE_EQ(id.lower(), 0.0);
  EXPECT_DOUBLE_EQ(id.upper(), 1.0);
  const std::vector<ConvexSet> s{ConvexSet::interval(0, 1), ConvexSet::point(scalar(2))};
  const std::vector<double> half{0.5, 0.5}, third{1.0 / 3.0, 2.0 / 3.0};
  const ConvexSet a = minkowski_combine(half, s), b = minkowski_combine(third, s);
  EXPECT_NEAR(a.lower(), 1.0, 1e-15);
  EXPECT_NEAR(a.upper(), 1.5, 1e-15);
  EXPECT_NEAR(b.lower(), 4.0 / 3.0, 1e-15);
  EXPECT_NEAR(b.upper(), 5.0 / 3.0, 1e-15);
  // Oracle: brute force over discretized selections f(s1) in [0, 1], f(s2) = 2.
  double lo = 1e9, hi = -1e9;
  for (int i = 0; i <= 1000; ++i) {
    const double v = third[0] * (i / 1000.0) + third[1] * 2.0;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_NEAR(b.lower(), lo, 1e-12);
  EXPECT_NEAR(b.upper(), hi, 1e-12);
}

TEST(MinkowskiCombine, IntervalsAddEndpoints) {
  const std::vector<double> w{1, 1};
  const std::vector<ConvexSet> s{ConvexSet::interval(0, 1), ConvexSet::interval(-1, 0)};
  const ConvexSet c = minkowski_combine(w, s);
  EXPECT_DOUBLE_EQ(c.lower(), -1.0);
  EXPECT_DOUBLE_EQ(c.upper(), 1.0);
}

TEST(MinkowskiCombine, ZeroWeightDropsSet) {
  const std::vector<double> w{0.3, 0.0};
  const std::vector<ConvexSet> s{ConvexSet::point(vec({1, 1})), fx::unit_square()};
  const ConvexSet c = minkowski_combine(w, s);
  ASSERT_TRUE(c.is_singleton());
  EXPECT_NEAR((c.points().front() - vec({0.3, 0.3})).norm(), 0.0, 1e-15);
}

TEST(MinkowskiCombine, RejectsNegativeWeightAndShapeErrors) {
  const std::vector<ConvexSet> s{ConvexSet::interval(0, 1), ConvexSet::interval(0, 1)};
  const std::vector<double> neg{1.0, -0.5};
  EXPECT_THROW(minkowski_combine(neg, s), GeometryError);
  const std::vector<double> one{1.0};
  EXPECT_THROW(minkowski_combine(one, s), GeometryError);
  const std::vector<ConvexSet> mixed{ConvexSet::interval(0, 1), fx::unit_square()};
  const std::vector<double> two{1.0, 1.0};
  EXPECT_THROW(minkowski_combine(two, mixed), GeometryError);
}

TEST(MinkowskiCombine, SupportIsAdditive) {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<ConvexSet> sets;
    std::vector<double> w;
    for (int j = 0; j < 3; ++j) {
      std::vector<Vector> pts;
      for (int i = 0; i < 5; ++i) pts.push_back(random_in_ball(rng, 2));
      sets.emplace_back(pts);
      w.push_back(uniform(rng, 0, 2));
    }
    const ConvexSet c = minkowski_combine(w, sets);
    for (int k = 0; k < 10; ++k) {
      const Vector d = random_unit_vector(rng, 2);
      double expect = 0.0;
      for (int j = 0; j < 3; ++j) expect += w[j] * support(sets[j], d);
      EXPECT_NEAR(support(c, d), expect, 1e-12);
    }
  }
}

TEST(Hausdorff, WorkedExamples) {
  EXPECT_DOUBLE_EQ(hausdorff(ConvexSet::interval(0, 1), ConvexSet::interval(0, 1)), 0.0);
  EXPECT_DOUBLE_EQ(hausdorff(ConvexSet::interval(0, 1), ConvexSet::interval(0, 2)), 1.0);
  const ConvexSet shifted = fx::unit_square().translated(vec({1, 0}));
  EXPECT_NEAR(hausdorff(fx::unit_square(), shifted), 1.0, 1e-12);
}

TEST(Hausdorff, OneDimensionalEqualsEndpointGap) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = uniform(rng, -5, 5), b = uniform(rng, -5, 5), c = uniform(rng, -5, 5), d = uniform(rng, -5, 5);
    const ConvexSet i1 = ConvexSet::interval(a, b), i2 = ConvexSet::interval(c, d);
    const double expect = std::max(std::abs(i1.lower() - i2.lower()), std::abs(i1.upper() - i2.upper()));
    EXPECT_NEAR(hausdorff(i1, i2), expect, 1e-12);
  }
}

// Independent oracle: dense boundary sampling of two boxes, distance by clamping.
TEST(Hausdorff, BoxesAgainstDenseBoundarySampling) {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector lo1 = vec({uniform(rng, -2, 0), uniform(rng, -2, 0)});
    const Vector hi1 = lo1 + vec({uniform(rng, 0.1, 2), uniform(rng, 0.1, 2)});
    const Vector lo2 = vec({uniform(rng, -2, 0), uniform(rng, -2, 0)});
    const Vector hi2 = lo2 + vec({uniform(rng, 0.1, 2), uniform(rng, 0.1, 2)});
    auto box = [](const Vector& lo, const Vector& hi) {
      return ConvexSet({lo, vec({hi[0], lo[1]}), hi, vec({lo[0], hi[1]})});
    };
    auto one_sided = [](const Vector& lo, const Vector& hi, const Vector& lo2, const Vector& hi2) {
      double worst = 0.0;
      const int m = 400;
      for (int i = 0; i <= m; ++i) {
        const double u = static_cast<double>(i) / m;
        const Vector pts[4] = {vec({lo[0] + u * (hi[0] - lo[0]), lo[1]}), vec({lo[0] + u * (hi[0] - lo[0]), hi[1]}),
                               vec({lo[0], lo[1] + u * (hi[1] - lo[1])}), vec({hi[0], lo[1] + u * (hi[1] - lo[1])})};
        for (const auto& p : pts) worst = std::max(worst, box_distance(p, lo2, hi2));
      }
      return worst;
    };
    const double oracle = std::max(one_sided(lo1, hi1, lo2, hi2), one_sided(lo2, hi2, lo1, hi1));
    EXPECT_NEAR(hausdorff(box(lo1, hi1), box(lo2, hi2)), oracle, 1e-9);
  }
}

TEST(Hausdorff, TriangleInequalityAndSymmetry) {
  Rng rng(23);
  auto random_set = [&] {
    std::vector<Vector> pts;
    for (int i = 0; i < 4; ++i) pts.push_back(random_in_ball(rng, 2) + vec({uniform(rng, -1, 1), 0}));
    return ConvexSet(pts);
  };
  for (int trial = 0; trial < 30; ++trial) {
    const ConvexSet a = random_set(), b = random_set(), c = random_set();
    EXPECT_NEAR(hausdorff(a, b), hausdorff(b, a), 1e-12);
    EXPECT_LE(hausdorff(a, c), hausdorff(a, b) + hausdorff(b, c) + 1e-9);
  }
}

TEST(Project, WorkedExamples) {
  const ConvexSet tri({vec({0, 0}), vec({1, 0}), vec({0, 1})});
  EXPECT_LE((project(tri, vec({2, 0})) - vec({1, 0})).norm(), 1e-12);
  EXPECT_LE((project(tri, vec({0.2, 0.3})) - vec({0.2, 0.3})).norm(), 1e-12);
  EXPECT_DOUBLE_EQ(project(ConvexSet::interval(-1, 1), scalar(-3))[0], -1.0);
  EXPECT_LE((project(fx::unit_square(), vec({2, 0.5})) - vec({1, 0.5})).norm(), 1e-12);
  EXPECT_DOUBLE_EQ(project(ConvexSet::interval(-1, 1), scalar(0.3))[0], 0.3);
  EXPECT_LE((project(ConvexSet::segment(vec({0, 0}), vec({2, 0})), vec({1, 5})) - vec({1, 0})).norm(), 1e-12);
}

TEST(Project, DimensionMismatchThrows) {
  EXPECT_THROW(project(fx::unit_square(), scalar(1)), GeometryError);
}

// Variational inequality <p - P(p), q - P(p)> <= 0 for every generator q.
TEST(Project, VariationalInequalityOnRandomPolytopes) {
  Rng rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vector> pts;
    for (int i = 0; i < 7; ++i) pts.push_back(random_in_ball(rng, 3));
    const ConvexSet k(pts);
    const Vector p = 3.0 * random_in_ball(rng, 3);
    const Vector q = project(k, p);
    EXPECT_TRUE(contains(k, q, 1e-9));
    for (const Vector& g : k.points()) EXPECT_LE((p - q).dot(g - q), 1e-9);
  }
}

TEST(Project, NonExpansive) {
  Rng rng(31);
  std::vector<Vector> pts;
  for (int i = 0; i < 8; ++i) pts.push_back(random_in_ball(rng, 2));
  const ConvexSet k(pts);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector p = 4.0 * random_in_ball(rng, 2), q = 4.0 * random_in_ball(rng, 2);
    EXPECT_LE((project(k, p) - project(k, q)).norm(), (p - q).norm() + 1e-9);
  }
}

TEST(ReduceHull, DropsInteriorPointsInTwoAndThreeDimensions) {
  std::vector<Vector> sq{vec({0, 0}), vec({1, 0}), vec({0, 1}), vec({1, 1}), vec({0.5, 0.5}), vec({0.2, 0.7})};
  EXPECT_EQ(reduce_hull(ConvexSet(sq)).size(), 4u);
  std::vector<Vector> cube;
  for (int i = 0; i < 8; ++i) cube.push_back(vec({double(i & 1), double((i >> 1) & 1), double((i >> 2) & 1)}));
  cube.push_back(vec({0.5, 0.5, 0.5}));
  cube.push_back(vec({0.1, 0.2, 0.3}));
  const ConvexSet r = reduce_hull(ConvexSet(cube));
  EXPECT_EQ(r.size(), 8u);
  EXPECT_LE(hausdorff(r, ConvexSet(cube)), 1e-12);
}

TEST(Ball, SupportMatchesRadiusAlongNet) {
  const ConvexSet b = ball(vec({1, -1}), 0.5);
  for (const Vector& d : direction_net(2)) EXPECT_NEAR(support(b, d), d.dot(vec({1, -1})) + 0.5 * d.norm(), 1e-12);
  EXPECT_LE(b.max_norm(), std::sqrt(2.0) + 0.5 + 1e-12);
}

TEST(HullUnion, ContainsEveryInput) {
  const std::vector<ConvexSet> sets{ConvexSet::point(vec({0, 0})), ConvexSet::point(vec({2, 0})),
                                    ConvexSet::segment(vec({1, -1}), vec({1, 1}))};
  const ConvexSet u = hull_union(sets);
  for (const auto& s : sets)
    for (const auto& p : s.points()) EXPECT_TRUE(contains(u, p, 1e-12));
  EXPECT_NEAR(support(u, vec({0, 1})), 1.0, 1e-12);
}
