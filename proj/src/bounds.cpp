#include "floquet_lab/bounds.hpp"

#include <cmath>
#include <limits>

#include "floquet_lab/benchmark.hpp"

namespace flab {

RegionSamples unit_circle_region(std::size_t n) {
  return {unit_circle_points(n), "unit circle, " + std::to_string(n) + " points"};
}

RegionSamples region_from_trajectory(const Trajectory& traj, std::string descriptor) {
  RegionSamples u;
  u.descriptor = std::move(descriptor);
  u.points.reserve(traj.size());
  for (const auto& p : traj) u.points.push_back(p.state);
  return u;
}

double weight_norm_product(const Mlp& m) {
  double c = 1.0;
  for (const auto& l : m.layers()) c *= spectral_norm(l.weight);
  return c;
}

double refined_product(const JacobianFactors& f) {
  const auto& w = f.weight_factors;
  const auto& dg = f.diag_factors;
  if (dg.empty()) return spectral_norm(w.front());
  std::vector<Vector> roots;
  roots.reserve(dg.size());
  for (const auto& d : dg) roots.push_back(d.cwiseMax(0.0).cwiseSqrt());
  const std::size_t hidden = dg.size();
  // Right edge D_1^{1/2} W_1, interior D_k^{1/2} W_k D_{k-1}^{1/2}, left edge W_L D_{L-1}^{1/2}.
  double p = spectral_norm(roots.front().asDiagonal() * w.front());
  for (std::size_t k = 1; k < hidden; ++k) {
    p *= spectral_norm(roots[k].asDiagonal() * w[k] * roots[k - 1].asDiagonal());
  }
  p *= spectral_norm(w.back() * roots.back().asDiagonal());
  return p;
}

namespace {

double original_product(const JacobianFactors& f) {
  double p = 1.0;
  for (const auto& w : f.weight_factors) p *= spectral_norm(w);
  for (const auto& d : f.diag_factors) p *= d.size() ? d.cwiseAbs().maxCoeff() : 0.0;
  return p;
}

}  // namespace

SaturationReport analyze_saturation(const Mlp& m, const RegionSamples& u, double delta_threshold) {
  if (u.points.empty()) fail(ErrorKind::InvalidInput, "region has no sample points");
  const double cap = m.activation().lambda_sigma() * m.scale();
  if (!(delta_threshold > 0) || delta_threshold > cap * (1 + 1e-12)) {
    fail(ErrorKind::InvalidInput, "delta threshold must lie in (0, Lambda_sigma * s] = (0, " + std::to_string(cap) +
                                      "], got " + std::to_string(delta_threshold));
  }
  const std::size_t hidden = m.num_hidden();
  SaturationReport sr;
  sr.delta_threshold = delta_threshold;
  sr.per_layer_max_deriv.assign(hidden, 0.0);
  sr.refined_available = m.activation().strictly_increasing();
  sr.c_w = weight_norm_product(m);
  sr.bottleneck_r = m.bottleneck_width();
  sr.num_points = u.points.size();
  sr.region = u.descriptor;

  double c_tilde = 0.0;
  for (const auto& x : u.points) {
    const auto jac = m.jacobian(x);
    for (std::size_t k = 0; k < hidden; ++k) {
      const auto& dk = jac.factors.diag_factors[k];
      if (dk.size()) sr.per_layer_max_deriv[k] = std::max(sr.per_layer_max_deriv[k], dk.cwiseAbs().maxCoeff());
    }
    if (sr.refined_available) c_tilde = std::max(c_tilde, refined_product(jac.factors));
  }

  double c = sr.c_w;
  for (std::size_t k = 0; k < hidden; ++k) {
    if (sr.per_layer_max_deriv[k] <= delta_threshold) {
      sr.saturated_set.push_back(k + 1);
      c *= delta_threshold;
    } else {
      c *= sr.per_layer_max_deriv[k];
    }
  }
  sr.c_of_u = c;
  sr.c_tilde_of_u = sr.refined_available ? c_tilde : sr.c_of_u;
  if (sr.c_tilde_of_u > 0) {
    sr.rho = sr.c_of_u / sr.c_tilde_of_u;
  } else {
    sr.rho = sr.c_of_u > 0 ? std::numeric_limits<double>::infinity() : 1.0;
  }
  return sr;
}

SaturationReport analyze_saturation_tight(const Mlp& m, const RegionSamples& u) {
  if (u.points.empty()) fail(ErrorKind::InvalidInput, "region has no sample points");
  double top = 0.0;
  for (const auto& x : u.points) {
    for (const auto& a : m.forward(x).pre_activations) {
      for (Eigen::Index i = 0; i < a.size(); ++i) top = std::max(top, std::abs(m.scale() * m.activation().deriv(a(i))));
    }
  }
  // Underflowed derivatives still need a strictly positive threshold.
  top = std::max(top, std::numeric_limits<double>::min());
  return analyze_saturation(m, u, std::min(top, m.activation().lambda_sigma() * m.scale()));
}

PointwiseBound pointwise_jacobian_bound(const Mlp& m, const Vector& x) {
  const auto jac = m.jacobian(x);
  for (std::size_t k = 0; k < jac.factors.diag_factors.size(); ++k) {
    const auto& d = jac.factors.diag_factors[k];
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      if (d(i) < 0 || (d(i) == 0 && !m.activation().strictly_increasing())) {
        fail(ErrorKind::Domain, "refined bound needs sigma' > 0; layer " + std::to_string(k + 1) + " unit " +
                                    std::to_string(i) + " has " + std::to_string(d(i)));
      }
    }
  }
  if (!m.activation().strictly_increasing()) {
    fail(ErrorKind::Domain, "refined bound needs sigma' > 0 everywhere; " + std::string(m.activation().name()) +
                                " does not guarantee it");
  }
  PointwiseBound b;
  b.actual = spectral_norm(jac.matrix);
  b.refined = refined_product(jac.factors);
  b.original = original_product(jac.factors);
  return b;
}

ComparisonResult comparison_integral(const Mlp& m1, Activation sigma2, const Trajectory& trajectory) {
  ComparisonResult res;
  if (trajectory.size() < 2) return res;
  const double c_w = weight_norm_product(m1);
  const double s = m1.scale();
  const Activation sigma1 = m1.activation();
  std::vector<double> lhs_f, rhs_f;
  lhs_f.reserve(trajectory.size());
  rhs_f.reserve(trajectory.size());
  for (const auto& p : trajectory) {
    const auto jac = m1.jacobian(p.state);
    lhs_f.push_back(spectral_norm(jac.matrix));
    const auto trace = m1.forward(p.state);
    double prod = 1.0;
    bool ok = true;
    for (const auto& a : trace.pre_activations) {
      double m_1 = 0, m_2 = 0;
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        m_1 = std::max(m_1, std::abs(sigma1.deriv(a(i))));
        m_2 = std::max(m_2, std::abs(sigma2.deriv(a(i))));
      }
      ok = ok && m_1 <= m_2;
      prod *= s * m_2;
    }
    rhs_f.push_back(c_w * prod);
    if (!ok) ++res.violations;
  }
  res.hypothesis_holds = res.violations == 0;
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    const double dt = trajectory[i].t - trajectory[i - 1].t;
    res.lhs += 0.5 * dt * (lhs_f[i] + lhs_f[i - 1]);
    res.rhs += 0.5 * dt * (rhs_f[i] + rhs_f[i - 1]);
  }
  return res;
}

double contraction_threshold(double eta, Eigen::Index d, double c_w, double T, std::size_t q) {
  if (q == 0) fail(ErrorKind::Domain, "contraction threshold needs q >= 1 saturated layers");
  if (!(eta > 0) || d < 1 || !(c_w > 0) || !(T > 0)) {
    fail(ErrorKind::Domain, "contraction threshold needs positive eta, d, c_w and T");
  }
  return std::pow(eta / (static_cast<double>(d) * c_w * T), 1.0 / static_cast<double>(q));
}

double global_lipschitz(const Mlp& m) {
  return weight_norm_product(m) *
         std::pow(m.activation().lambda_sigma() * m.scale(), static_cast<double>(m.num_hidden()));
}

double stiffness_proxy(double c_of_u, double t0, double t) {
  if (t < t0) fail(ErrorKind::Domain, "stiffness proxy needs t >= t0");
  return c_of_u * (t - t0);
}

SharpPair sharp_construction(const Vector& diag_values, const Vector& v, Eigen::Index dim) {
  if (diag_values.size() != v.size()) fail(ErrorKind::Dimension, "diagonal and direction lengths differ");
  if (dim < 1) fail(ErrorKind::Dimension, "state dimension must be >= 1");
  if (std::abs(v.norm() - 1.0) > 1e-12) fail(ErrorKind::Domain, "direction v must be a unit vector");
  const Matrix root = diag_sqrt(diag_values);
  const Vector inv_root_v = v.cwiseQuotient(root.diagonal());
  const Eigen::Index n = diag_values.size();
  SharpPair out{Matrix::Zero(n, dim), Matrix::Zero(dim, n)};
  out.w1.col(0) = inv_root_v;
  out.w2.row(0) = inv_root_v.transpose();
  return out;
}

nlohmann::json to_json(const SaturationReport& sr) {
  return {{"per_layer_max_deriv", sr.per_layer_max_deriv},
          {"saturated_set", sr.saturated_set},
          {"q", sr.q()},
          {"delta_threshold", sr.delta_threshold},
          {"c_w", sr.c_w},
          {"c_of_u", sr.c_of_u},
          {"c_tilde_of_u", sr.c_tilde_of_u},
          {"refined_available", sr.refined_available},
          {"rho", std::isfinite(sr.rho) ? nlohmann::json(sr.rho) : nlohmann::json(nullptr)},
          {"bottleneck_r", sr.bottleneck_r},
          {"num_points", sr.num_points},
          {"region", sr.region}};
}

}  // namespace flab
