#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "floquet_lab/benchmark.hpp"
#include "floquet_lab/io.hpp"
#include "test_util.hpp"

using namespace flab;

TEST_CASE("Stuart-Landau field and trace at reference points") {
  CHECK(sl_field(0, 0).isZero(0));
  CHECK(sl_jacobian(0, 0).trace() == 2.0);
  CHECK((sl_field(1, 0) - Eigen::Vector2d(0, 1)).isZero(0));
  CHECK(sl_jacobian(1, 0).trace() == -2.0);
  CHECK(sl_jacobian(0.6, 0.8).trace() == doctest::Approx(-2.0).epsilon(1e-15));
}

TEST_CASE("Stuart-Landau Jacobian matches finite differences") {
  std::mt19937_64 rng(1);
  auto f = [](const Vector& v) -> Vector { return sl_field(v(0), v(1)); };
  for (int i = 0; i < 200; ++i) {
    const Vector p = test::random_vector(rng, 2, 2.0);
    const Matrix fd = test::fd_jacobian(f, p, 1e-5);
    CHECK((Matrix(sl_jacobian(p(0), p(1))) - fd).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("trace identity 2 - 4 r^2") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 500; ++i) {
    const Vector p = test::random_vector(rng, 2, 3.0);
    const double r2 = p.squaredNorm();
    CHECK(sl_jacobian(p(0), p(1)).trace() == doctest::Approx(2 - 4 * r2).epsilon(1e-14));
  }
  for (const auto& p : unit_circle_points(1000)) CHECK(std::abs(sl_jacobian(p(0), p(1)).trace() + 2.0) < 1e-14);
}

TEST_CASE("reference constants") {
  const auto ref = sl_reference();
  CHECK(ref.period == doctest::Approx(2 * std::numbers::pi));
  CHECK(ref.ln_det / ref.period == doctest::Approx(-2.0));
  // e^{-4 pi} evaluated to 20 digits with mpmath.
  CHECK(std::abs(ref.det - 3.4873423562089e-6) / 3.4873423562089e-6 < 1e-10);
}

TEST_CASE("limit cycle and circle samples") {
  const auto g = sl_limit_cycle();
  CHECK((g(0.0) - Vector{{1.0, 0.0}}).norm() == 0.0);
  CHECK((g(std::numbers::pi / 2) - Vector{{0.0, 1.0}}).norm() < 1e-15);
  // The curve solves the field.
  const double t = 0.7, h = 1e-6;
  const Vector deriv = (g(t + h) - g(t - h)) / (2 * h);
  const Vector p = g(t);
  CHECK((deriv - Vector(sl_field(p(0), p(1)))).norm() < 1e-8);
  const auto pts = unit_circle_points(8);
  REQUIRE(pts.size() == 8);
  for (const auto& q : pts) CHECK(q.norm() == doctest::Approx(1.0));
  CHECK(pts[2](1) == doctest::Approx(1.0));
}

TEST_CASE("io helpers") {
  CHECK(format_float(1.0 / 3.0) == "0.333333333");
  CHECK(format_float(-12.566370614359172) == "-12.5663706");
  CHECK(format_float(3.4873423562089e-6) == "3.48734236e-06");
  CHECK(format_float(std::nan("")) == "nan");
  CHECK(content_hash("") == "cbf29ce484222325");
  CHECK(content_hash("a") == "af63dc4c8601ec8c");

  CsvTable t({"s", "value"});
  t.add_row(std::vector<double>{1.0, 0.5});
  CHECK_THROWS_AS(t.add_row(std::vector<double>{1.0}), Error);
  CHECK(t.str() == "s,value\n1,0.5\n");

  const auto dir = std::filesystem::temp_directory_path() / "floquet_lab_test_io";
  t.write(dir / "sub" / "t.csv");
  CHECK(std::filesystem::exists(dir / "sub" / "t.csv"));
  CHECK_FALSE(std::filesystem::exists(dir / "sub" / "t.csv.tmp"));
  CHECK_THROWS_AS(read_json_file(dir / "missing.json"), Error);
  std::filesystem::remove_all(dir);
}
