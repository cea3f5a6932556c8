#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fixtures.hpp"

using namespace sri;
using fx::scalar;
using fx::vec;

namespace {

FiniteKernel single_state() { return FiniteKernel::constant(Matrix::Ones(1, 1)); }

// Fast: dx ∈ {y - x} so lambda(y) = y. Slow: dy ∈ {-y}.
TwoTimescaleSystem tracking_toy() {
  return {fx::singleton_map(1, 1, 1, [](const Vector& x, const Vector& y) { return Vector(y - x); }),
          fx::singleton_map(1, 1, 1, [](const Vector&, const Vector& y) { return Vector(-y); }), single_state(),
          single_state()};
}

TwoTimescaleSystem decoupled_decay() {
  return {fx::singleton_map(1, 1, 1, [](const Vector& x, const Vector&) { return Vector(-x); }),
          fx::singleton_map(1, 1, 1, [](const Vector&, const Vector& y) { return Vector(-y); }), single_state(),
          single_state()};
}

TwoTimescaleSystem zero_drift(const Matrix& k2 = Matrix::Ones(1, 1)) {
  const auto n = static_cast<std::size_t>(k2.rows());
  auto zero = [](Eigen::Index d) {
    return [d](const Vector&, const Vector&, std::size_t) { return ConvexSet::point(Vector::Zero(d)); };
  };
  return {SetValuedMap(MapDims{2, 1, 2}, 1, zero(2), 1.0), SetValuedMap(MapDims{2, 1, 1}, n, zero(1), 1.0),
          single_state(), FiniteKernel::constant(k2)};
}

// Set-valued fast drift with a two-state chain on each side.
TwoTimescaleSystem set_valued_system() {
  const Matrix p = (Matrix(2, 2) << 0.7, 0.3, 0.4, 0.6).finished();
  return {SetValuedMap(
              MapDims{2, 1, 2}, 2,
              [](const Vector& x, const Vector& y, std::size_t s) {
                const Vector c = -x + y[0] * vec({1, 0});
                return ConvexSet({c, c + vec({0.2, 0}), c + vec({0, 0.1 * (s + 1.0)})});
              },
              2.0),
          SetValuedMap(
              MapDims{2, 1, 1}, 2,
              [](const Vector& x, const Vector& y, std::size_t s) {
                return ConvexSet::interval(x[1] - y[0], x[1] - y[0] + 0.1 * s);
              },
              2.0),
          FiniteKernel::constant(p), FiniteKernel::constant(p)};
}

RunOptions options(std::size_t steps, std::uint64_t seed = 1) {
  RunOptions o;
  o.x0 = scalar(1);
  o.y0 = scalar(1);
  o.steps = steps;
  o.seed = seed;
  return o;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST(Schedule, WorkedExamples) {
  const StepSchedule s{0.6, 0.9, 1.0, 1.0};
  EXPECT_DOUBLE_EQ(s.a(0), 1.0);
  EXPECT_DOUBLE_EQ(s.b(0), 1.0);
  EXPECT_NEAR(s.a(999), 0.015849, 1e-6);
  EXPECT_NEAR(s.b(999), 0.0019953, 1e-7);
  EXPECT_TRUE(validate_schedule(s, 100000).ok());
}

TEST(Schedule, ViolationsAreNamed) {
  const auto r = validate_schedule({0.4, 0.9, 1.0, 1.0}, 1000);
  ASSERT_FALSE(r.ok());
  EXPECT_NE(r.violations.front().find("alpha"), std::string::npos);
  EXPECT_FALSE(validate_schedule({0.7, 0.6, 1.0, 1.0}, 1000).ok());
  EXPECT_FALSE(validate_schedule({0.6, 0.9, 1.5, 1.0}, 1000).ok());
  EXPECT_FALSE(validate_schedule({0.6, 1.2, 1.0, 1.0}, 1000).ok());
  EXPECT_THROW(validate_schedule({0.6, 0.9, 1.0, 1.0}, 1), ScheduleError);
  EXPECT_THROW(validate_schedule({NAN, 0.9, 1.0, 1.0}, 100), ScheduleError);
}

TEST(Schedule, SquareSumsWithinZetaBound) {
  const auto r = validate_schedule(fx::canonical_schedule(), 200000);
  ASSERT_TRUE(r.ok());
  EXPECT_LE(r.a_square_sum, 0.0625 * (1.0 + 1.0 / 0.2));
  EXPECT_LE(r.b_square_sum, 1.0 + 1.0 / 0.8);
}

TEST(Run, DecoupledDecayIsMonotoneAndSlowLags) {
  RunOptions o = options(2000);
  o.schedule = {0.6, 0.9, 0.5, 0.5};
  const Trajectory tr = run(decoupled_decay(), o);
  for (std::size_t n = 0; n < tr.steps(); ++n) {
    EXPECT_LE(tr.x[n + 1][0], tr.x[n][0]);
    EXPECT_LE(tr.y[n + 1][0], tr.y[n][0]);
    EXPECT_GE(tr.y[n + 1][0], tr.x[n + 1][0]);
    EXPECT_GE(tr.x[n + 1][0], 0.0);
  }
  // Product formula as an independent oracle.
  double px = 1.0, py = 1.0;
  for (std::size_t n = 0; n < 2000; ++n) {
    px *= 1.0 - o.schedule.a(n);
    py *= 1.0 - o.schedule.b(n);
  }
  EXPECT_NEAR(tr.x.back()[0], px, 1e-12);
  EXPECT_NEAR(tr.y.back()[0], py, 1e-12);
}

TEST(Run, ZeroDriftIsConstantAndZeroStepsIsInitialData) {
  RunOptions o;
  o.x0 = vec({1, 2});
  o.y0 = scalar(3);
  o.steps = 100;
  const Trajectory tr = run(zero_drift(), o);
  for (std::size_t n = 0; n <= 100; ++n) {
    EXPECT_EQ(tr.x[n], o.x0);
    EXPECT_EQ(tr.y[n], o.y0);
  }
  o.steps = 0;
  const Trajectory empty = run(zero_drift(), o);
  EXPECT_EQ(empty.x.size(), 1u);
  EXPECT_EQ(empty.steps(), 0u);
  EXPECT_EQ(empty.x[0], o.x0);
  EXPECT_TRUE(empty.v1.empty());
}

TEST(Run, LogShapesAndClocks) {
  RunOptions o = options(500);
  o.x0 = vec({1, -1});
  o.noise_fast = NoiseModel::uniform_box(0.1);
  const Trajectory tr = run(set_valued_system(), o);
  EXPECT_EQ(tr.x.size(), 501u);
  EXPECT_EQ(tr.s1.size(), 501u);
  EXPECT_EQ(tr.v1.size(), 500u);
  EXPECT_EQ(tr.m2.size(), 500u);
  for (std::size_t n = 0; n < 500; ++n) {
    EXPECT_GT(tr.t_fast[n + 1], tr.t_fast[n]);
    EXPECT_GT(tr.t_slow[n + 1], tr.t_slow[n]);
    EXPECT_LE(tr.m1[n].cwiseAbs().maxCoeff(), 0.1);
  }
}

TEST(Run, SeedDeterminism) {
  RunOptions o = options(1000, 42);
  o.x0 = vec({1, -1});
  o.noise_fast = NoiseModel::uniform_box(0.1);
  o.noise_slow = NoiseModel::clipped_gaussian(0.05);
  o.select_fast = SelectionRule::random_vertex;
  const auto sys = set_valued_system();
  const Trajectory a = run(sys, o), b = run(sys, o);
  for (std::size_t n = 0; n <= 1000; ++n) {
    ASSERT_EQ(a.x[n], b.x[n]);
    ASSERT_EQ(a.y[n], b.y[n]);
    ASSERT_EQ(a.s1[n], b.s1[n]);
  }
  o.seed = 43;
  const Trajectory c = run(sys, o);
  EXPECT_NE(a.x.back(), c.x.back());
}

TEST(Run, ReplicasMatchIndividualRuns) {
  RunOptions o = options(300, 10);
  o.x0 = vec({1, -1});
  o.noise_fast = NoiseModel::uniform_box(0.1);
  const auto sys = set_valued_system();
  const auto reps = run_replicas(sys, o, 3);
  ASSERT_EQ(reps.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    RunOptions oi = o;
    oi.seed = o.seed + i;
    EXPECT_EQ(reps[i].x.back(), run(sys, oi).x.back());
  }
}

TEST(Run, UpdateIdentityHoldsForEveryRule) {
  const auto sys = set_valued_system();
  for (SelectionRule rule : {SelectionRule::least_norm, SelectionRule::random_vertex}) {
    RunOptions o = options(3000, 5);
    o.x0 = vec({2, -1});
    o.select_fast = rule;
    o.select_slow = rule;
    o.noise_fast = NoiseModel::uniform_box(0.2);
    o.noise_slow = NoiseModel::uniform_box(0.2);
    const Trajectory tr = run(sys, o);
    EXPECT_TRUE(verify_update_identity(tr, sys).ok(1e-8));
  }
}

TEST(Run, TamperedLogFailsUpdateIdentity) {
  const auto sys = tracking_toy();
  Trajectory tr = run(sys, options(200));
  tr.x[100][0] += 0.01;
  const auto r = verify_update_identity(tr, sys);
  EXPECT_FALSE(r.ok(1e-8));
  EXPECT_TRUE(r.worst_fast_step == 99 || r.worst_fast_step == 100);
}

TEST(Run, SharedNoiseStateCouplesChains) {
  TwoTimescaleSystem sys = set_valued_system();
  sys.shared_noise_state = true;
  RunOptions o = options(500);
  o.x0 = vec({0, 0});
  o.s2_0 = 1;
  const Trajectory tr = run(sys, o);
  EXPECT_EQ(tr.s1, tr.s2);
}

TEST(Run, DivergenceReportsStep) {
  const TwoTimescaleSystem sys{
      fx::singleton_map(1, 1, 1, [](const Vector& x, const Vector&) { return Vector(2.0 * x); }, 2.0),
      fx::singleton_map(1, 1, 1, [](const Vector&, const Vector&) { return scalar(0); }), single_state(),
      single_state()};
  RunOptions o = options(1000);
  o.y0 = scalar(0);
  o.divergence_bound = 1e6;
  // Independent recomputation of the first step whose iterate crosses the bound.
  std::size_t expect = 0;
  double x = 1.0;
  for (std::size_t n = 0; n < 1000; ++n) {
    x += o.schedule.a(n) * 2.0 * x;
    if (x > 1e6) {
      expect = n + 1;
      break;
    }
  }
  ASSERT_GT(expect, 0u);
  try {
    run(sys, o);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.step(), expect);
  }
  o.divergence_bound = std::numeric_limits<double>::infinity();
  o.x0 = scalar(1e308);
  try {
    run(sys, o);
    FAIL() << "expected overflow";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.step(), 1u);
  }
}

TEST(Run, RejectsBadInputs) {
  RunOptions o = options(10);
  o.schedule.alpha = 0.4;
  EXPECT_THROW(run(tracking_toy(), o), ScheduleError);
  o = options(10);
  o.x0 = vec({1, 1});
  EXPECT_THROW(run(tracking_toy(), o), MapError);
  o = options(10);
  o.s1_0 = 4;
  EXPECT_THROW(run(tracking_toy(), o), KernelError);
}

TEST(FastTracking, IterateFollowsLambdaOfSlowIterate) {
  RunOptions o = options(100000, 3);
  o.schedule = fx::canonical_schedule();
  o.x0 = scalar(5);
  o.y0 = scalar(1);
  o.noise_fast = NoiseModel::uniform_box(0.1);
  const Trajectory tr = run(tracking_toy(), o);
  const auto d = distance_to_lambda(tr, [](const Vector& y) { return y; }, 90000, 100001);
  EXPECT_LE(*std::max_element(d.begin(), d.end()), 5e-2);
}

TEST(Interpolate, WorkedExamples) {
  Trajectory tr;
  tr.schedule = {0.6, 0.9, 1.0, 1.0};
  tr.t_slow = {0.0, 1.0};
  tr.t_fast = {0.0, 1.0};
  tr.y = {scalar(0), scalar(1)};
  tr.x = {scalar(0), scalar(0)};
  EXPECT_DOUBLE_EQ(interpolate(tr, Scale::slow, 0.5)[0], 0.5);
  EXPECT_THROW(interpolate(tr, Scale::slow, 1.5), ScheduleError);
  EXPECT_THROW(interpolate(tr, Scale::slow, -0.1), ScheduleError);

  const Trajectory run_tr = run(decoupled_decay(), options(100));
  for (std::size_t n = 0; n <= 100; n += 7) {
    EXPECT_EQ(interpolate(run_tr, Scale::slow, run_tr.t_slow[n]), run_tr.y[n]);
    EXPECT_EQ(interpolate(run_tr, Scale::fast, run_tr.t_fast[n]), run_tr.x[n]);
  }
}

TEST(InterpolationGap, ZeroNoiseIsIdenticallyZero) {
  const Trajectory tr = run(set_valued_system(), [] {
    RunOptions o = options(20000);
    o.x0 = vec({1, -1});
    o.select_fast = SelectionRule::random_vertex;
    return o;
  }());
  for (int l : {1, 4}) {
    const auto gaps = interpolation_gap(tr, l, 1.0);
    ASSERT_FALSE(gaps.empty());
    for (const auto& g : gaps) EXPECT_EQ(g.gap, 0.0);
  }
}

TEST(InterpolationGap, BoundedByNoisePartialSums) {
  RunOptions o = options(100000, 8);
  o.x0 = vec({1, -1});
  o.noise_fast = NoiseModel::uniform_box(0.2);
  o.noise_slow = NoiseModel::uniform_box(0.2);
  const Trajectory tr = run(set_valued_system(), o);
  for (Scale sc : {Scale::slow, Scale::fast}) {
    const auto gaps = interpolation_gap(tr, 2, 1.0, sc);
    ASSERT_GE(gaps.size(), 4u);
    for (const auto& g : gaps) EXPECT_LE(g.gap, g.noise_sum + 1e-12);
  }
  // Late windows have smaller partial sums than early ones.
  const auto gaps = interpolation_gap(tr, 2, 1.0, Scale::fast);
  std::vector<double> early, late;
  for (std::size_t i = 0; i < gaps.size(); ++i) (i < gaps.size() / 3 ? early : late).push_back(gaps[i].noise_sum);
  EXPECT_LT(median(late), median(early));
}

TEST(InterpolationGap, SingleStepWindow) {
  RunOptions o = options(50);
  o.noise_slow = NoiseModel::uniform_box(0.3);
  const Trajectory tr = run(tracking_toy(), o);
  const auto gaps = interpolation_gap(tr, 1, tr.schedule.b(0));
  EXPECT_EQ(gaps.front().end, 1u);
  EXPECT_NEAR(gaps.front().gap, tr.schedule.b(0) * tr.m2[0].norm(), 1e-15);
  EXPECT_THROW(interpolation_gap(tr, 1, 1e6), ScheduleError);
  EXPECT_THROW(interpolation_gap(tr, 0, 1.0), ScheduleError);
}

TEST(Occupation, ConstantTrajectoryIsDirac) {
  RunOptions o;
  o.x0 = vec({1, 2});
  o.y0 = scalar(0);
  o.steps = 100;
  const Trajectory tr = run(zero_drift(), o);
  const EmpiricalMeasure m = occupation(tr, 0, 101);
  EXPECT_NEAR(m.mass_within(o.x0, 0.0), 1.0, 1e-12);
  EXPECT_NEAR(m.s_marginal(1)[0], 1.0, 1e-12);
  const EmpiricalMeasure one = occupation(tr, 50, 51);
  ASSERT_EQ(one.atoms.size(), 1u);
  EXPECT_DOUBLE_EQ(one.atoms[0].weight, 1.0);
  EXPECT_THROW(occupation(tr, 10, 10), ScheduleError);
}

TEST(Occupation, ErgodicChainMarginal) {
  RunOptions o;
  o.x0 = vec({0, 0});
  o.y0 = scalar(0);
  o.steps = 100000;
  o.seed = 99;
  const Trajectory tr = run(zero_drift((Matrix(2, 2) << 0.5, 0.5, 0.25, 0.75).finished()), o);
  const EmpiricalMeasure m = occupation(tr, 0, tr.x.size());
  EXPECT_LE(total_variation(m.s_marginal(2), vec({1.0 / 3.0, 2.0 / 3.0})), 0.05);
  EXPECT_DOUBLE_EQ(total_variation(vec({1, 0}), vec({0, 1})), 1.0);
}

TEST(AptProfile, DecreasesAlongTheRun) {
  RunOptions o = options(200000, 4);
  o.schedule = fx::canonical_schedule();
  o.x0 = scalar(3);
  o.y0 = scalar(3);
  o.noise_fast = NoiseModel::uniform_box(0.1);
  o.noise_slow = NoiseModel::uniform_box(0.1);
  const Trajectory tr = run(tracking_toy(), o);
  const MeanField slow(1, 1, [](const Vector& y) { return ConvexSet::point(Vector(-y)); }, 1.0);
  AptOptions ao;
  ao.window = 2.0;
  std::vector<double> ts;
  const double t_end = tr.t_slow.back() - ao.window;
  for (int i = 0; i < 10; ++i) ts.push_back(1.0 + (t_end - 1.0) * i / 9.0);
  const auto d = apt_profile(tr, slow, ts, ao);
  EXPECT_LT(median({d.begin() + 5, d.end()}), median({d.begin(), d.begin() + 5}));
  EXPECT_LE(d.back(), 0.05);
  EXPECT_THROW(shifted_slow_path(tr, tr.t_slow.back(), 1.0), ScheduleError);
}
