#pragma once

// Least-squares fitting of the MLP vector field to a target field on an
// annulus, with the optional bias-shift protocol: a frozen offset c inside
// every hidden pre-activation, b_1 frozen at zero, and rows of W_1 projected
// onto ||W_{1,j.}|| <= row_norm_cap after every step.

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "floquet_lab/flow.hpp"
#include "floquet_lab/network.hpp"

namespace flab {

struct AdamSettings {
  double learning_rate = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 5000;
};

struct TrainConfig {
  Eigen::Index state_dim = 2;
  std::vector<Eigen::Index> hidden_widths{32};
  Activation activation{ActivationKind::Tanh};
  double scale_s = 1.0;
  double offset_c = 0.0;
  double row_norm_cap = 0.0;  // <= 0 disables the projection
  double r_min = 0.1;
  double r_max = 2.0;
  std::size_t n_samples = 4096;
  AdamSettings optimizer;
  std::uint64_t seed = 0;
  bool freeze_b1 = false;

  bool protocol_active() const { return row_norm_cap > 0; }
  void validate() const;

  /// 256-unit bias-shift protocol net: c = 2.5, cap = c - 0.5, b_1 frozen.
  static TrainConfig protocol(std::uint64_t seed = 0);
};

struct Dataset {
  Matrix inputs;   // d x n
  Matrix targets;  // d x n
  std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }
};

/// Points uniform by area in the annulus r_min <= ||x|| <= r_max (2-D states);
/// targets from the supplied field (Stuart-Landau when omitted).
Dataset sample_dataset(const TrainConfig& cfg);
Dataset sample_dataset(const TrainConfig& cfg, const VectorField& target);

/// Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation.
Mlp initialize_mlp(const TrainConfig& cfg);

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

/// MSE = mean_i ||f(x_i) - y_i||^2 over the batch columns.
double mse(const Mlp& m, const Dataset& batch);

/// Exact reverse-mode gradient of the MSE with respect to every W_l, b_l.
/// With freeze_b1 the b_1 gradient is reported as zero.
Gradients parameter_gradients(const Mlp& m, const Dataset& batch, bool freeze_b1 = false, double* loss = nullptr);

struct TrainReport {
  double final_mse = 0;
  std::vector<double> loss_history;
  std::size_t constraint_violations_after_projection = 0;
  double max_row_norm = 0;
  Mlp trained_model;
};

/// Full-batch Adam. On completion the offset is absorbed into the biases when
/// offset_c > 0. Throws Divergence with the epoch index on a non-finite loss.
TrainReport train(const TrainConfig& cfg, const VectorField& target);
TrainReport train(const TrainConfig& cfg);

TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const TrainReport& report);

}  // namespace flab
