#include "floquet_lab/training.hpp"

#include <cmath>
#include <random>

#include "floquet_lab/benchmark.hpp"
#include "floquet_lab/network_io.hpp"

namespace flab {

namespace {

constexpr std::uint64_t kDatasetStream = 0x9E3779B97F4A7C15ULL;
constexpr Eigen::Index kGradientBlock = 32;

// Per-block buffers, reused across blocks so large networks do not hit the
// allocator on every block.
struct Workspace {
  std::vector<Matrix> post;  // Z_0 = X, Z_1 .. Z_{L-1}
  std::vector<Matrix> pre;   // A_1 .. A_{L-1} (scaled)
  Matrix output;
  Matrix upstream;
  Matrix grad_z;
  Matrix d_inner;
};

template <typename Derived>
void forward_block(const Mlp& m, const Eigen::MatrixBase<Derived>& x, Workspace& ws) {
  const auto& layers = m.layers();
  const Activation act = m.activation();
  ws.post.resize(layers.size());
  ws.pre.resize(layers.size() - 1);
  ws.post[0] = x;
  for (std::size_t k = 0; k + 1 < layers.size(); ++k) {
    Matrix& a = ws.pre[k];
    a.noalias() = layers[k].weight * ws.post[k];
    a.colwise() += layers[k].bias;
    a.array() = m.scale() * (a.array() + m.offset());
    if (act.kind() == ActivationKind::Tanh) {
      // exp is vectorised for doubles where tanh is not.
      ws.post[k + 1] = (1.0 - 2.0 / ((2.0 * a.array()).exp() + 1.0)).matrix();
    } else {
      ws.post[k + 1] = a.unaryExpr([act](double v) { return act.eval(v); });
    }
  }
  ws.output.noalias() = layers.back().weight * ws.post.back();
  ws.output.colwise() += layers.back().bias;
}

void check_batch(const Mlp& m, const Dataset& batch) {
  if (batch.inputs.rows() != m.state_dim() || batch.targets.rows() != m.state_dim() ||
      batch.inputs.cols() != batch.targets.cols()) {
    fail(ErrorKind::Dimension, "batch shape does not match the network");
  }
}

double row_norm_max(const Matrix& w) { return w.rows() ? w.rowwise().norm().maxCoeff() : 0.0; }

}  // namespace

void TrainConfig::validate() const {
  if (state_dim != 2) fail(ErrorKind::InvalidInput, "annulus sampling is defined for 2-D states");
  if (hidden_widths.empty()) fail(ErrorKind::InvalidInput, "need at least one hidden layer");
  for (auto w : hidden_widths)
    if (w < 1) fail(ErrorKind::InvalidInput, "hidden widths must be >= 1");
  if (!(scale_s > 0)) fail(ErrorKind::InvalidInput, "scale_s must be positive");
  if (!(offset_c >= 0)) fail(ErrorKind::InvalidInput, "offset_c must be >= 0");
  if (!(r_min >= 0) || !(r_min < r_max)) fail(ErrorKind::InvalidInput, "annulus needs 0 <= r_min < r_max");
  if (protocol_active() && offset_c > 0 && !(row_norm_cap < offset_c)) {
    fail(ErrorKind::InvalidInput, "row_norm_cap must be below offset_c when the protocol is active");
  }
  if (!(optimizer.learning_rate > 0) || optimizer.epochs < 0 || !(optimizer.epsilon > 0) ||
      !(optimizer.beta1 >= 0 && optimizer.beta1 < 1) || !(optimizer.beta2 >= 0 && optimizer.beta2 < 1)) {
    fail(ErrorKind::InvalidInput, "invalid optimizer settings");
  }
}

TrainConfig TrainConfig::protocol(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.hidden_widths = {256};
  cfg.offset_c = 2.5;
  cfg.row_norm_cap = cfg.offset_c - 0.5;
  cfg.freeze_b1 = true;
  cfg.seed = seed;
  return cfg;
}

Dataset sample_dataset(const TrainConfig& cfg) { return sample_dataset(cfg, sl_vector_field()); }

Dataset sample_dataset(const TrainConfig& cfg, const VectorField& target) {
  cfg.validate();
  if (target.dim != cfg.state_dim) fail(ErrorKind::Dimension, "target field dimension differs from the config");
  std::mt19937_64 rng(cfg.seed ^ kDatasetStream);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(cfg.n_samples);
  Dataset ds{Matrix(2, n), Matrix(2, n)};
  const double r0 = cfg.r_min * cfg.r_min, r1 = cfg.r_max * cfg.r_max;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = std::sqrt(unit(rng) * (r1 - r0) + r0);
    const double th = 2 * std::numbers::pi * unit(rng);
    ds.inputs.col(i) << r * std::cos(th), r * std::sin(th);
    ds.targets.col(i) = target.eval(ds.inputs.col(i));
  }
  return ds;
}

Mlp initialize_mlp(const TrainConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::vector<Eigen::Index> dims{cfg.state_dim};
  dims.insert(dims.end(), cfg.hidden_widths.begin(), cfg.hidden_widths.end());
  dims.push_back(cfg.state_dim);
  std::vector<Layer> layers;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[k]));
    std::uniform_real_distribution<double> u(-bound, bound);
    Layer l{Matrix(dims[k + 1], dims[k]), Vector(dims[k + 1])};
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = u(rng);
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = u(rng);
    layers.push_back(std::move(l));
  }
  if (cfg.freeze_b1) layers.front().bias.setZero();
  if (cfg.protocol_active()) {
    Matrix& w1 = layers.front().weight;
    for (Eigen::Index r = 0; r < w1.rows(); ++r) {
      const double n = w1.row(r).norm();
      if (n > cfg.row_norm_cap) w1.row(r) *= cfg.row_norm_cap / n;
    }
  }
  return Mlp(std::move(layers), cfg.activation, cfg.scale_s, cfg.offset_c);
}

double mse(const Mlp& m, const Dataset& batch) {
  check_batch(m, batch);
  if (batch.size() == 0) return 0.0;
  Workspace ws;
  double total = 0.0;
  const Eigen::Index n = batch.inputs.cols();
  for (Eigen::Index c0 = 0; c0 < n; c0 += kGradientBlock) {
    const Eigen::Index len = std::min(kGradientBlock, n - c0);
    forward_block(m, batch.inputs.middleCols(c0, len), ws);
    total += (ws.output - batch.targets.middleCols(c0, len)).squaredNorm();
  }
  return total / static_cast<double>(n);
}

Gradients parameter_gradients(const Mlp& m, const Dataset& batch, bool freeze_b1, double* loss) {
  check_batch(m, batch);
  const auto& layers = m.layers();
  const Activation act = m.activation();
  Gradients g;
  g.weights.resize(layers.size());
  g.biases.resize(layers.size());
  for (std::size_t k = 0; k < layers.size(); ++k) {
    g.weights[k] = Matrix::Zero(layers[k].weight.rows(), layers[k].weight.cols());
    g.biases[k] = Vector::Zero(layers[k].bias.size());
  }
  Workspace ws;
  double total = 0.0;
  const Eigen::Index n = batch.inputs.cols();
  const std::size_t last = layers.size() - 1;
  // Column blocks keep the hidden activations cache-resident; block order is fixed.
  for (Eigen::Index c0 = 0; c0 < n; c0 += kGradientBlock) {
    const Eigen::Index len = std::min(kGradientBlock, n - c0);
    forward_block(m, batch.inputs.middleCols(c0, len), ws);
    ws.upstream = ws.output - batch.targets.middleCols(c0, len);
    total += ws.upstream.squaredNorm();
    ws.upstream *= 2.0 / static_cast<double>(n);  // dL/d(output)
    g.weights[last].noalias() += ws.upstream * ws.post[last].transpose();
    g.biases[last] += ws.upstream.rowwise().sum();
    ws.grad_z.noalias() = layers[last].weight.transpose() * ws.upstream;
    for (std::size_t k = last; k-- > 0;) {
      // a = s (W z + b + c): dL/d(W z + b) = s * sigma'(a) * dL/dz
      if (act.kind() == ActivationKind::Tanh) {
        ws.d_inner = m.scale() * ws.grad_z.array() * (1.0 - ws.post[k + 1].array().square());
      } else {
        ws.d_inner = m.scale() * ws.grad_z.array() * ws.pre[k].array().unaryExpr([act](double v) { return act.deriv(v); });
      }
      g.weights[k].noalias() += ws.d_inner * ws.post[k].transpose();
      g.biases[k] += ws.d_inner.rowwise().sum();
      if (k > 0) ws.grad_z.noalias() = layers[k].weight.transpose() * ws.d_inner;
    }
  }
  if (loss) *loss = n > 0 ? total / static_cast<double>(n) : 0.0;
  if (freeze_b1) g.biases[0].setZero();
  return g;
}

TrainReport train(const TrainConfig& cfg) { return train(cfg, sl_vector_field()); }

TrainReport train(const TrainConfig& cfg, const VectorField& target) {
  cfg.validate();
  const Dataset data = sample_dataset(cfg, target);
  Mlp model = initialize_mlp(cfg);
  const AdamSettings& opt = cfg.optimizer;

  const std::size_t nl = model.num_layers();
  std::vector<Matrix> mw(nl), vw(nl);
  std::vector<Vector> mb(nl), vb(nl);
  for (std::size_t k = 0; k < nl; ++k) {
    const auto& l = model.layer(k);
    mw[k] = vw[k] = Matrix::Zero(l.weight.rows(), l.weight.cols());
    mb[k] = vb[k] = Vector::Zero(l.bias.size());
  }

  TrainReport report{0.0, {}, 0, 0.0, model};
  report.loss_history.reserve(static_cast<std::size_t>(opt.epochs) + 1);
  double b1_pow = 1.0, b2_pow = 1.0;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    double loss = 0.0;
    const Gradients g = parameter_gradients(model, data, cfg.freeze_b1, &loss);
    if (!std::isfinite(loss)) {
      fail(ErrorKind::Divergence, "training loss became non-finite at epoch " + std::to_string(epoch));
    }
    report.loss_history.push_back(loss);
    b1_pow *= opt.beta1;
    b2_pow *= opt.beta2;
    const double step = opt.learning_rate * std::sqrt(1 - b2_pow) / (1 - b1_pow);
    // Bias corrections folded into the step size (epsilon rescaled to match).
    const double eps = opt.epsilon * std::sqrt(1 - b2_pow);
    auto& layers = model.mutable_layers();
    for (std::size_t k = 0; k < nl; ++k) {
      mw[k] = opt.beta1 * mw[k] + (1 - opt.beta1) * g.weights[k];
      vw[k] = opt.beta2 * vw[k] + (1 - opt.beta2) * g.weights[k].cwiseAbs2();
      layers[k].weight.array() -= step * mw[k].array() / (vw[k].array().sqrt() + eps);
      if (k == 0 && cfg.freeze_b1) continue;
      mb[k] = opt.beta1 * mb[k] + (1 - opt.beta1) * g.biases[k];
      vb[k] = opt.beta2 * vb[k] + (1 - opt.beta2) * g.biases[k].cwiseAbs2();
      layers[k].bias.array() -= step * mb[k].array() / (vb[k].array().sqrt() + eps);
    }
    if (cfg.protocol_active()) {
      Matrix& w1 = layers.front().weight;
      for (Eigen::Index r = 0; r < w1.rows(); ++r) {
        const double norm = w1.row(r).norm();
        if (norm > cfg.row_norm_cap) w1.row(r) *= cfg.row_norm_cap / norm;
      }
      for (Eigen::Index r = 0; r < w1.rows(); ++r) {
        if (w1.row(r).norm() > cfg.row_norm_cap + 1e-12) ++report.constraint_violations_after_projection;
      }
    }
  }
  report.final_mse = mse(model, data);
  if (!std::isfinite(report.final_mse)) {
    fail(ErrorKind::Divergence, "training loss became non-finite at epoch " + std::to_string(opt.epochs));
  }
  report.loss_history.push_back(report.final_mse);
  report.max_row_norm = row_norm_max(model.layer(0).weight);
  report.trained_model = cfg.offset_c > 0 ? model.absorb_offset() : model;
  return report;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  try {
    if (j.contains("hidden_width")) cfg.hidden_widths = {j.at("hidden_width").get<Eigen::Index>()};
    if (j.contains("hidden_widths")) cfg.hidden_widths = j.at("hidden_widths").get<std::vector<Eigen::Index>>();
    if (j.contains("activation")) cfg.activation = parse_activation(j.at("activation").get<std::string>());
    cfg.scale_s = j.value("scale_s", cfg.scale_s);
    cfg.offset_c = j.value("offset_c", cfg.offset_c);
    cfg.row_norm_cap = j.value("row_norm_cap", cfg.row_norm_cap);
    if (j.contains("annulus")) {
      const auto a = j.at("annulus").get<std::vector<double>>();
      if (a.size() != 2) fail(ErrorKind::InvalidInput, "annulus must be [r_min, r_max]");
      cfg.r_min = a[0];
      cfg.r_max = a[1];
    }
    cfg.n_samples = j.value("n_samples", cfg.n_samples);
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      cfg.optimizer.learning_rate = o.value("learning_rate", cfg.optimizer.learning_rate);
      cfg.optimizer.beta1 = o.value("beta1", cfg.optimizer.beta1);
      cfg.optimizer.beta2 = o.value("beta2", cfg.optimizer.beta2);
      cfg.optimizer.epsilon = o.value("epsilon", cfg.optimizer.epsilon);
      cfg.optimizer.epochs = o.value("epochs", cfg.optimizer.epochs);
      if (o.contains("batch") && o.at("batch") != "full") {
        fail(ErrorKind::InvalidInput, "only full-batch training is supported");
      }
    }
    cfg.seed = j.value("seed", cfg.seed);
    cfg.freeze_b1 = j.value("freeze_b1", cfg.freeze_b1);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidInput, std::string("train config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"hidden_widths", cfg.hidden_widths},
          {"activation", std::string(cfg.activation.name())},
          {"scale_s", cfg.scale_s},
          {"offset_c", cfg.offset_c},
          {"row_norm_cap", cfg.row_norm_cap},
          {"annulus", {cfg.r_min, cfg.r_max}},
          {"n_samples", cfg.n_samples},
          {"optimizer",
           {{"learning_rate", cfg.optimizer.learning_rate},
            {"beta1", cfg.optimizer.beta1},
            {"beta2", cfg.optimizer.beta2},
            {"epsilon", cfg.optimizer.epsilon},
            {"epochs", cfg.optimizer.epochs},
            {"batch", "full"}}},
          {"seed", cfg.seed},
          {"freeze_b1", cfg.freeze_b1}};
}

nlohmann::json to_json(const TrainReport& report) {
  return {{"final_mse", report.final_mse},
          {"loss_history", report.loss_history},
          {"constraint_violations_after_projection", report.constraint_violations_after_projection},
          {"max_row_norm", report.max_row_norm},
          {"trained_model", to_json(report.trained_model)}};
}

}  // namespace flab
