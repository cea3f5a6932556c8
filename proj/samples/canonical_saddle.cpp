// Primal descent / dual ascent on the two-state quadratic program
//   min ½||x - theta_s||² averaged over s  s.t.  C_mu x = w_mu
// whose penalized saddle point is x* = (1, 1), y* = -(1 + 4c), c = eps/(2r²).

#include <cstdio>

#include "sri/sri.hpp"

int main() {
  using namespace sri;
  QuadraticSpec q;
  q.theta = {(Vector(2) << 1, 0).finished(), (Vector(2) << 0, 1).finished()};
  q.c = {(Matrix(1, 2) << 1, 0).finished(), (Matrix(1, 2) << 0, 1).finished()};
  q.w = {Vector::Constant(1, 2.0), Vector::Constant(1, 0.0)};
  q.kernel = Matrix::Constant(2, 2, 0.5);
  q.eps = 0.01;
  q.r = 4.0;
  q.growth_k = 2.0;
  q.feasible_points = {(Vector(2) << 2, 0).finished(), Vector::Zero(2)};
  q.x_star = (Vector(2) << 1, 1).finished();
  const SaddleProblem p = quadratic_problem(q);

  PrimalDualOptions o;
  o.schedule = {0.6, 0.9, 0.25, 1.0};
  o.noise_primal = NoiseModel::uniform_box(0.1);
  o.steps = 200000;
  o.seed = 1;
  const Trajectory tr = run_primal_dual(p, o);
  const OptimalityReport r = optimality_report(p, tr, 0.1);

  std::printf("tail mean x = (%.6f, %.6f), y = %.6f\n", r.x_bar[0], r.x_bar[1], r.y_bar[0]);
  std::printf("feasibility gap %.3e, primal-dual gap %.3e, surplus %.3e\n", r.feasibility_gap, r.primal_dual_gap,
              *r.eps_surplus);
  std::printf("lambda(y_bar) = (%.6f, %.6f)\n", lambda_min(p, r.y_bar)[0], lambda_min(p, r.y_bar)[1]);
}
