#pragma once

// Helpers shared by the unit and acceptance tests.

#include <cmath>

#include "torsilab/metric.hpp"

namespace torsilab::test_support {

/// The metric m written in the coordinates y with x = y + a sin(y) componentwise.
/// Curvature scalars are coordinate invariant, so this gives a non-polynomial
/// chart of the same geometry.
inline MetricField warped_chart(const MetricField& m, double a = 0.1) {
  const int n = m.dim();
  return MetricField(
      n,
      [m, a, n](const Point& y) {
        Point x = y;
        Matrix J = Matrix::Zero(n, n);
        for (int i = 0; i < n; ++i) {
          x(i) = y(i) + a * std::sin(y(i));
          J(i, i) = 1.0 + a * std::cos(y(i));
        }
        return Matrix(J.transpose() * m.at(x) * J);
      },
      {}, false, m.name() + "-warped");
}

}  // namespace torsilab::test_support
