// dz/dt ∈ -sign(z) with sign(0) = [-1, 1]: from z0 = 1 the least-norm Euler
// path slides to 0 at t = 1 and stays there.

#include <cstdio>

#include "sri/sri.hpp"

int main() {
  using namespace sri;
  const MeanField sign(
      1, 1,
      [](const Vector& z) {
        if (z[0] > 0.0) return ConvexSet::point(Vector::Constant(1, -1.0));
        if (z[0] < 0.0) return ConvexSet::point(Vector::Constant(1, 1.0));
        return ConvexSet::interval(-1.0, 1.0);
      },
      1.0);
  const DIPath path = di_solve(sign, Vector::Constant(1, 1.0), 2.0, 1e-3);
  for (double t : {0.0, 0.5, 0.999, 1.0, 1.5, 2.0}) {
    const auto i = static_cast<std::size_t>(t / 1e-3 + 0.5);
    std::printf("t = %.3f  z = %.6f\n", path.times[i], path.states[i][0]);
  }
}
