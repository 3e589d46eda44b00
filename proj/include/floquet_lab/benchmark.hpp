#pragma once

// Stuart-Landau oscillator
//   x' = x - y - x (x^2 + y^2)
//   y' = x + y - y (x^2 + y^2)
// with a stable limit cycle on the unit circle, period 2 pi, and
// Tr Df = 2 - 4 (x^2 + y^2) (so -2 on the cycle).

#include <numbers>

#include "floquet_lab/flow.hpp"
#include "floquet_lab/numerics.hpp"

namespace flab {

Eigen::Vector2d sl_field(double x, double y);
Eigen::Matrix2d sl_jacobian(double x, double y);

struct SlReference {
  double period = 2 * std::numbers::pi;
  double ln_det = -4 * std::numbers::pi;
  double det = 0;  // e^{-4 pi}
  double trace_on_cycle = -2;
};

SlReference sl_reference();

VectorField sl_vector_field();

/// gamma(t) = (cos t, sin t), the limit cycle started at (1, 0).
ReferenceCurve sl_limit_cycle();

/// n equispaced points of the unit circle, starting at angle 0.
std::vector<Vector> unit_circle_points(std::size_t n);

}  // namespace flab
