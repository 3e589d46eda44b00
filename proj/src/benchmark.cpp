#include "floquet_lab/benchmark.hpp"

#include <cmath>

namespace flab {

Eigen::Vector2d sl_field(double x, double y) {
  const double r2 = x * x + y * y;
  return {x - y - x * r2, x + y - y * r2};
}

Eigen::Matrix2d sl_jacobian(double x, double y) {
  Eigen::Matrix2d j;
  j << 1 - 3 * x * x - y * y, -1 - 2 * x * y,  //
      1 - 2 * x * y, 1 - x * x - 3 * y * y;
  return j;
}

SlReference sl_reference() {
  SlReference ref;
  ref.det = std::exp(ref.ln_det);
  return ref;
}

VectorField sl_vector_field() {
  return VectorField{
      2,
      [](const Vector& s) -> Vector { return sl_field(s(0), s(1)); },
      [](const Vector& s) -> Matrix { return sl_jacobian(s(0), s(1)); },
  };
}

ReferenceCurve sl_limit_cycle() {
  return [](double t) -> Vector { return Eigen::Vector2d(std::cos(t), std::sin(t)); };
}

std::vector<Vector> unit_circle_points(std::size_t n) {
  std::vector<Vector> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double th = 2 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    pts.push_back(Eigen::Vector2d(std::cos(th), std::sin(th)));
  }
  return pts;
}

}  // namespace flab
