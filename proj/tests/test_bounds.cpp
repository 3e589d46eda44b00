#include <doctest.h>

#include <cmath>
#include <numbers>

#include "floquet_lab/benchmark.hpp"
#include "floquet_lab/bounds.hpp"
#include "test_util.hpp"

using namespace flab;

namespace {

RegionSamples random_region(std::mt19937_64& rng, Eigen::Index d, int n, double radius) {
  RegionSamples u;
  u.descriptor = "random cloud";
  for (int i = 0; i < n; ++i) u.points.push_back(test::random_vector(rng, d, radius));
  return u;
}

Mlp single_layer(const Matrix& w1, const Vector& b1, const Matrix& w2, Activation act, double s = 1.0) {
  return Mlp({{w1, b1}, {w2, Vector::Zero(w2.rows())}}, act, s);
}

}  // namespace

TEST_CASE("identity activation: M_k = s and nothing saturates") {
  std::mt19937_64 rng(1);
  const Mlp m = test::random_mlp(rng, {2, 6, 5, 2}, ActivationKind::Identity, 1.5);
  const auto u = random_region(rng, 2, 50, 1.0);
  const auto sr = analyze_saturation(m, u, 1.0);
  REQUIRE(sr.per_layer_max_deriv.size() == 2);
  for (double mk : sr.per_layer_max_deriv) CHECK(mk == doctest::Approx(1.5));
  CHECK(sr.q() == 0);
  CHECK(sr.c_of_u == doctest::Approx(weight_norm_product(m) * 1.5 * 1.5));
  CHECK(sr.c_w == doctest::Approx(weight_norm_product(m)));

  const auto unit = analyze_saturation(m.with_scale(1.0), u, 0.5);
  CHECK(unit.c_of_u == doctest::Approx(unit.c_w).epsilon(1e-12));
}

TEST_CASE("forced-positive pre-activations are bounded by sech^2(r) s") {
  // b1 keeps every unit at pre-activation >= r on the unit disc.
  std::mt19937_64 rng(2);
  const double r = 1.5;
  Matrix w1 = test::random_matrix(rng, 8, 2, 0.5);
  Vector b1(8);
  for (Eigen::Index j = 0; j < 8; ++j) b1(j) = r + w1.row(j).norm();
  for (double s : {1.0, 2.0}) {
    const Mlp m = single_layer(w1, b1, test::random_matrix(rng, 2, 8), ActivationKind::Tanh, s);
    const auto sr = analyze_saturation(m, unit_circle_region(500), s);
    CHECK(sr.per_layer_max_deriv[0] <= saturation_radius_delta(ActivationKind::Tanh, r * s) * s + 1e-15);
  }
}

TEST_CASE("single hidden layer bound at h0") {
  std::mt19937_64 rng(3);
  const Matrix w1 = test::random_matrix(rng, 16, 2);
  const Vector b1 = test::random_vector(rng, 16);
  const Matrix w2 = test::random_matrix(rng, 2, 16);
  Vector h0(2);
  h0 << 0.8, 0.4;
  for (double s : {1.0, 4.0, 12.0}) {
    const Mlp m = single_layer(w1, b1, w2, ActivationKind::Tanh, s);
    const auto sr = analyze_saturation_tight(m, RegionSamples{{h0}, "h0"});
    const Vector a = w1 * h0 + b1;
    double sech_max = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) sech_max = std::max(sech_max, 1.0 / std::pow(std::cosh(s * a(i)), 2));
    const double expect = s * spectral_norm(w1) * spectral_norm(w2) * sech_max;
    CHECK(sr.c_of_u == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("saturation report invariants and validation") {
  std::mt19937_64 rng(4);
  const Mlp m = test::random_mlp(rng, {2, 10, 2}, ActivationKind::Tanh, 2.0);
  const auto u = random_region(rng, 2, 40, 1.0);
  const auto sr = analyze_saturation(m, u, 0.5);
  CHECK(sr.c_tilde_of_u <= sr.c_of_u + 1e-12);
  CHECK(sr.rho >= 1 - 1e-12);
  CHECK(sr.bottleneck_r == 10);
  CHECK(sr.num_points == 40);
  CHECK_THROWS_AS(analyze_saturation(m, RegionSamples{}, 0.5), Error);
  CHECK_THROWS_AS(analyze_saturation(m, u, 0.0), Error);
  CHECK_THROWS_AS(analyze_saturation(m, u, 2.5), Error);
  CHECK_NOTHROW(analyze_saturation(m, u, 2.0));

  const auto relu = analyze_saturation(m.with_activation(ActivationKind::Relu), u, 1.0);
  CHECK_FALSE(relu.refined_available);
  CHECK(relu.c_tilde_of_u == relu.c_of_u);
  const auto j = to_json(sr);
  CHECK(j.at("q") == sr.q());
}

TEST_CASE("main bound (iii): Lambda s <= 1 gives C(U) <= c_w delta^q") {
  std::mt19937_64 rng(5);
  for (int n = 0; n < 200; ++n) {
    const Mlp m = test::random_architecture(rng, 2, 4, 8, ActivationKind::Tanh, 0.9);
    const auto u = random_region(rng, 2, 20, 2.0);
    std::uniform_real_distribution<double> pick(0.01, 0.9);
    const double delta = pick(rng);
    const auto sr = analyze_saturation(m, u, delta);
    CHECK(sr.c_of_u <= sr.c_w * std::pow(delta, static_cast<double>(sr.q())) + 1e-12);
  }
}

TEST_CASE("enlarging the region never decreases M_k or C(U)") {
  std::mt19937_64 rng(6);
  for (int n = 0; n < 30; ++n) {
    const Mlp m = test::random_architecture(rng, 2, 4, 8, ActivationKind::Tanh, 2.0);
    auto small = random_region(rng, 2, 10, 1.5);
    auto big = small;
    for (const auto& p : random_region(rng, 2, 15, 1.5).points) big.points.push_back(p);
    const auto a = analyze_saturation(m, small, 0.3);
    const auto b = analyze_saturation(m, big, 0.3);
    for (std::size_t k = 0; k < a.per_layer_max_deriv.size(); ++k) {
      CHECK(b.per_layer_max_deriv[k] >= a.per_layer_max_deriv[k]);
    }
    // A layer can move out of the saturated set, which only raises its factor.
    CHECK(b.c_of_u >= a.c_of_u);
  }
}

TEST_CASE("C(U) is a Lipschitz constant on the sampled segment") {
  std::mt19937_64 rng(7);
  for (int n = 0; n < 50; ++n) {
    const Mlp m = test::random_architecture(rng, 2, 3, 8, ActivationKind::Tanh, 1.5);
    const Vector x = test::random_vector(rng, 2), y = test::random_vector(rng, 2);
    RegionSamples seg;
    for (int i = 0; i <= 400; ++i) seg.points.push_back(x + (y - x) * (i / 400.0));
    const auto sr = analyze_saturation_tight(m, seg);
    CHECK((m(x) - m(y)).norm() <= sr.c_of_u * (x - y).norm() + 1e-9);
  }
}

TEST_CASE("pointwise chain: actual <= refined <= original") {
  std::mt19937_64 rng(8);
  double worst = 0;
  for (int n = 0; n < 300; ++n) {
    const Activation act = n % 3 == 0 ? ActivationKind::Sigmoid : ActivationKind::Tanh;
    const Mlp m = test::random_architecture(rng, 2 + n % 2, 4, 12, act, 1.0 + n % 5);
    const auto b = pointwise_jacobian_bound(m, test::random_vector(rng, m.state_dim(), 2.0));
    worst = std::min({worst, b.refined - b.actual, b.original - b.refined});
  }
  CHECK(worst >= -1e-12);
}

TEST_CASE("identity activation: refined equals original") {
  std::mt19937_64 rng(9);
  const Mlp m = test::random_mlp(rng, {2, 5, 2}, ActivationKind::Identity);
  const auto b = pointwise_jacobian_bound(m, test::random_vector(rng, 2));
  CHECK(b.refined == doctest::Approx(b.original).epsilon(1e-12));
  CHECK(b.actual <= b.refined + 1e-12);
}

TEST_CASE("refined bound rejects activations with vanishing derivative") {
  std::mt19937_64 rng(10);
  const Mlp m = test::random_mlp(rng, {2, 5, 2}, ActivationKind::Relu);
  try {
    (void)pointwise_jacobian_bound(m, test::random_vector(rng, 2));
    FAIL("expected a domain error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Domain);
  }
  CHECK_THROWS_AS(pointwise_jacobian_bound(m.with_activation(ActivationKind::Silu), test::random_vector(rng, 2)),
                  Error);
}

TEST_CASE("sharp construction attains equality") {
  auto check_pair = [](const Vector& d, const Vector& v) {
    const auto p = sharp_construction(d, v);
    const Matrix dm = d.asDiagonal();
    const Matrix root = diag_sqrt(d);
    const double lhs = spectral_norm(p.w2 * dm * p.w1);
    const double rhs = spectral_norm(p.w2 * root) * spectral_norm(root * p.w1);
    CHECK(std::abs(lhs - rhs) <= 1e-10);
    CHECK(lhs == doctest::Approx(1.0).epsilon(1e-12));
    // As a network with identity activation: actual = refined.
    const Mlp m({{p.w1, Vector::Zero(d.size())}, {p.w2, Vector::Zero(2)}}, ActivationKind::Identity);
    JacobianFactors f{{p.w1, p.w2}, {d}};
    CHECK(std::abs(refined_product(f) - spectral_norm(assemble(f))) <= 1e-10);
  };
  check_pair(Vector::Ones(2), Vector::Unit(2, 0));
  check_pair(Vector{{4.0, 1.0}}, Vector{{1 / std::sqrt(2.0), 1 / std::sqrt(2.0)}});
  std::mt19937_64 rng(11);
  for (int n = 0; n < 50; ++n) {
    const Eigen::Index k = 1 + n % 7;
    const Vector d = test::random_vector(rng, k).cwiseAbs().array() + 0.01;
    const Vector v = test::random_vector(rng, k).normalized();
    check_pair(d, v);
  }
  CHECK_THROWS_AS(sharp_construction(Vector{{1.0, 0.0}}, Vector::Unit(2, 0)), Error);
  CHECK_THROWS_AS(sharp_construction(Vector{{1.0, 2.0}}, Vector{{1.0, 1.0}}), Error);
}

TEST_CASE("comparison integral") {
  std::mt19937_64 rng(12);
  const Mlp m = test::random_mlp(rng, {2, 8, 2}, ActivationKind::Tanh, 2.0);
  const Trajectory empty;
  const auto z = comparison_integral(m, ActivationKind::Tanh, empty);
  CHECK(z.lhs == 0.0);
  CHECK(z.rhs == 0.0);

  Trajectory traj;
  for (int i = 0; i <= 200; ++i) {
    const double t = 2 * std::numbers::pi * i / 200.0;
    traj.push_back({t, Vector{{std::cos(t), std::sin(t)}}});
  }
  const auto same = comparison_integral(m, ActivationKind::Tanh, traj);
  CHECK(same.hypothesis_holds);
  CHECK(same.lhs <= same.rhs + 1e-12);

  // Deep positive saturation: tanh' -> 0 while silu' -> 1.
  Matrix w1 = test::random_matrix(rng, 8, 2, 0.5);
  Vector b1 = Vector::Constant(8, 3.0);
  const Mlp sat = single_layer(w1, b1, test::random_matrix(rng, 2, 8), ActivationKind::Tanh, 3.0);
  const auto cmp = comparison_integral(sat, ActivationKind::Silu, traj);
  CHECK(cmp.hypothesis_holds);
  CHECK(cmp.lhs * 1e3 < cmp.rhs);

  const auto flipped = comparison_integral(sat.with_activation(ActivationKind::Silu), ActivationKind::Tanh, traj);
  CHECK_FALSE(flipped.hypothesis_holds);
  CHECK(flipped.violations == traj.size());
}

TEST_CASE("contraction threshold") {
  const double T = 2 * std::numbers::pi;
  CHECK(contraction_threshold(2 * 3.0 * T, 2, 3.0, T, 1) == doctest::Approx(1.0));
  CHECK(contraction_threshold(4 * std::numbers::pi, 2, 10.0, T, 1) == doctest::Approx(0.1));
  CHECK(contraction_threshold(4 * std::numbers::pi, 2, 10.0, T, 2) == doctest::Approx(std::sqrt(0.1)));
  CHECK_THROWS_AS(contraction_threshold(1.0, 2, 1.0, 1.0, 0), Error);
}

TEST_CASE("global Lipschitz and stiffness proxy") {
  std::mt19937_64 rng(13);
  const Mlp id = test::random_mlp(rng, {2, 6, 2}, ActivationKind::Identity);
  CHECK(global_lipschitz(id) == doctest::Approx(weight_norm_product(id)));
  const Mlp th = test::random_mlp(rng, {2, 6, 2}, ActivationKind::Tanh);
  CHECK(global_lipschitz(th) == doctest::Approx(weight_norm_product(th)));
  CHECK(global_lipschitz(th.with_scale(3.0)) == doctest::Approx(3 * weight_norm_product(th)));
  CHECK(stiffness_proxy(0.0, 0.0, 5.0) == 0.0);
  CHECK(stiffness_proxy(2.0, 1.0, 4.0) == doctest::Approx(6.0));
  CHECK_THROWS_AS(stiffness_proxy(1.0, 2.0, 1.0), Error);

  // The global bound dominates every sampled pointwise Jacobian norm.
  for (int i = 0; i < 100; ++i) {
    const Vector x = test::random_vector(rng, 2, 3.0);
    CHECK(spectral_norm(th.jacobian_matrix(x)) <= global_lipschitz(th) + 1e-12);
  }
}
