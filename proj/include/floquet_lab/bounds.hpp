#pragma once

// Certified Jacobian bounds over a sampled region U. All suprema are maxima
// over the supplied sample points, so every certified claim holds "on the
// sampled set".
//
// Scale convention: the diagonal factors are D_k = diag(s * sigma'(a_k)), so
// per-layer maxima M_k(U) and the threshold delta live on that scale, while
// c_w = prod ||W_l|| uses the raw weights.

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "floquet_lab/flow.hpp"
#include "floquet_lab/network.hpp"

namespace flab {

struct RegionSamples {
  std::vector<Vector> points;
  std::string descriptor;
};

RegionSamples unit_circle_region(std::size_t n);
/// Region from trajectory states.
RegionSamples region_from_trajectory(const Trajectory& traj, std::string descriptor);

struct SaturationReport {
  std::vector<double> per_layer_max_deriv;  // M_k(U), k = 1 .. L-1
  std::vector<std::size_t> saturated_set;   // 1-based layer indices with M_k <= delta
  double delta_threshold = 0;
  double c_w = 0;
  double c_of_u = 0;        // c_w * delta^q * prod_{k not saturated} M_k
  double c_tilde_of_u = 0;  // sup_x of the grouped square-root product
  bool refined_available = false;
  double rho = 1;  // c_of_u / c_tilde_of_u
  Eigen::Index bottleneck_r = 0;
  std::size_t num_points = 0;
  std::string region;

  std::size_t q() const { return saturated_set.size(); }
};

/// Requires delta_threshold in (0, Lambda_sigma * s] and a nonempty region.
/// When sigma' can vanish or go negative (relu, silu) the refined bound is not
/// defined; the report then carries c_tilde_of_u = c_of_u and
/// refined_available = false.
SaturationReport analyze_saturation(const Mlp& m, const RegionSamples& u, double delta_threshold);

/// Same report with delta_threshold set to the largest measured M_k, so every
/// hidden layer counts as saturated and C(U) = c_w * prod M_k(U).
SaturationReport analyze_saturation_tight(const Mlp& m, const RegionSamples& u);

/// prod ||W_l||.
double weight_norm_product(const Mlp& m);

struct PointwiseBound {
  double actual = 0;    // ||Df(x)||
  double refined = 0;   // ||W_L D^{1/2}|| prod ||D^{1/2} W D^{1/2}|| ||D^{1/2} W_1||
  double original = 0;  // prod ||W_l|| prod ||D_k||
};

/// Throws Domain (naming layer and unit) if some sigma' <= 0.
PointwiseBound pointwise_jacobian_bound(const Mlp& m, const Vector& x);

/// Grouped square-root product of a factor sequence.
double refined_product(const JacobianFactors& f);

struct ComparisonResult {
  double lhs = 0;  // int ||Df^(1)|| dt
  double rhs = 0;  // c_w int prod_k s max_i |sigma2'(a_k)| dt
  bool hypothesis_holds = true;
  std::size_t violations = 0;  // samples where the per-layer hypothesis fails
};

/// Activation comparison along a trajectory of the sigma1 system (trapezoid
/// rule over the samples).
ComparisonResult comparison_integral(const Mlp& m1, Activation sigma2, const Trajectory& trajectory);

/// (eta / (d c_w T))^{1/q}.
double contraction_threshold(double eta, Eigen::Index d, double c_w, double T, std::size_t q);

/// c_w (Lambda_sigma s)^{L-1}.
double global_lipschitz(const Mlp& m);
/// C(U) (t - t0), the upper bound on int ||Df|| dt.
double stiffness_proxy(double c_of_u, double t0, double t);

struct SharpPair {
  Matrix w1;  // n x dim
  Matrix w2;  // dim x n
};

/// W1 = D^{-1/2} v e_1^T, W2 = e_1 v^T D^{-1/2}; attains
/// ||W2 D W1|| = ||W2 D^{1/2}|| ||D^{1/2} W1|| = 1.
SharpPair sharp_construction(const Vector& diag_values, const Vector& v, Eigen::Index dim = 2);

nlohmann::json to_json(const SaturationReport& sr);

}  // namespace flab
