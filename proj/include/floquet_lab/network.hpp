#pragma once

// The MLP vector field
//
//   a_k = s * (W_k z_{k-1} + b_k + c),   z_k = sigma(a_k),   k = 1..L-1
//   f(x) = W_L z_{L-1} + b_L,            z_0 = x
//
// with pre-activation scale s and a non-trainable offset c on every hidden
// layer. By the chain rule
//
//   Df(x) = W_L D_{L-1} W_{L-1} ... D_1 W_1,   D_k = diag(s * sigma'(a_k)),
//
// so the scale is carried by the diagonal factors and never by the weights.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "floquet_lab/activations.hpp"
#include "floquet_lab/numerics.hpp"

namespace flab {

template <typename Scalar>
struct BasicLayer {
  MatrixX<Scalar> weight;  // d_l x d_{l-1}
  VectorX<Scalar> bias;    // d_l
};

template <typename Scalar>
struct BasicForwardTrace {
  std::vector<VectorX<Scalar>> pre_activations;   // a_1 .. a_{L-1}
  std::vector<VectorX<Scalar>> post_activations;  // z_0 = x, z_1 .. z_{L-1}
  VectorX<Scalar> output;
};

template <typename Scalar>
struct BasicJacobianFactors {
  std::vector<MatrixX<Scalar>> weight_factors;  // W_1 .. W_L
  std::vector<VectorX<Scalar>> diag_factors;    // s * sigma'(a_k), k = 1 .. L-1
};

/// Product W_L D_{L-1} ... D_1 W_1 of a factor sequence.
template <typename Scalar>
MatrixX<Scalar> assemble(const BasicJacobianFactors<Scalar>& f) {
  MatrixX<Scalar> acc = f.weight_factors.front();
  for (std::size_t k = 0; k < f.diag_factors.size(); ++k) {
    acc = f.weight_factors[k + 1] * (f.diag_factors[k].asDiagonal() * acc);
  }
  return acc;
}

template <typename Scalar>
struct BasicJacobian {
  BasicJacobianFactors<Scalar> factors;
  MatrixX<Scalar> matrix;
};

template <typename Scalar>
class BasicMlp {
 public:
  using Layer = BasicLayer<Scalar>;
  using ForwardTrace = BasicForwardTrace<Scalar>;
  using Jacobian = BasicJacobian<Scalar>;
  using VectorType = VectorX<Scalar>;
  using MatrixType = MatrixX<Scalar>;

  BasicMlp(std::vector<Layer> layers, Activation activation, Scalar scale_s = Scalar(1), Scalar offset_c = Scalar(0))
      : layers_(std::move(layers)), activation_(activation), scale_s_(scale_s), offset_c_(offset_c) {
    validate();
  }

  std::size_t num_layers() const { return layers_.size(); }
  std::size_t num_hidden() const { return layers_.size() - 1; }
  Eigen::Index state_dim() const { return layers_.front().weight.cols(); }

  /// d_0, d_1, ..., d_L.
  std::vector<Eigen::Index> dims() const {
    std::vector<Eigen::Index> d{state_dim()};
    for (const auto& l : layers_) d.push_back(l.weight.rows());
    return d;
  }

  /// Smallest hidden width r; the Jacobian has rank <= min(r, d).
  Eigen::Index bottleneck_width() const {
    if (layers_.size() == 1) return state_dim();
    Eigen::Index r = layers_.front().weight.rows();
    for (std::size_t k = 0; k + 1 < layers_.size(); ++k) r = std::min(r, layers_[k].weight.rows());
    return r;
  }

  const std::vector<Layer>& layers() const { return layers_; }
  const Layer& layer(std::size_t i) const { return layers_[i]; }
  Activation activation() const { return activation_; }
  Scalar scale() const { return scale_s_; }
  Scalar offset() const { return offset_c_; }

  BasicMlp with_scale(Scalar s) const {
    BasicMlp out = *this;
    out.scale_s_ = s;
    out.validate();
    return out;
  }

  BasicMlp with_activation(Activation a) const {
    BasicMlp out = *this;
    out.activation_ = a;
    return out;
  }

  BasicMlp with_offset(Scalar c) const {
    BasicMlp out = *this;
    out.offset_c_ = c;
    out.validate();
    return out;
  }

  template <typename Derived>
  ForwardTrace forward(const Eigen::MatrixBase<Derived>& x) const {
    check_input(x);
    ForwardTrace trace;
    trace.post_activations.reserve(layers_.size());
    trace.pre_activations.reserve(num_hidden());
    trace.post_activations.emplace_back(x);
    for (std::size_t k = 0; k + 1 < layers_.size(); ++k) {
      VectorType a = layers_[k].weight * trace.post_activations.back() + layers_[k].bias;
      a.array() += offset_c_;
      a *= scale_s_;
      VectorType z = a.unaryExpr([this](Scalar v) { return activation_.eval(v); });
      trace.pre_activations.push_back(std::move(a));
      trace.post_activations.push_back(std::move(z));
    }
    trace.output = layers_.back().weight * trace.post_activations.back() + layers_.back().bias;
    return trace;
  }

  template <typename Derived>
  VectorType operator()(const Eigen::MatrixBase<Derived>& x) const {
    return forward(x).output;
  }

  /// Factor sequence together with its assembled d x d product.
  template <typename Derived>
  Jacobian jacobian(const Eigen::MatrixBase<Derived>& x) const {
    const ForwardTrace trace = forward(x);
    Jacobian out;
    out.factors.weight_factors.reserve(layers_.size());
    for (const auto& l : layers_) out.factors.weight_factors.push_back(l.weight);
    for (const auto& a : trace.pre_activations) {
      out.factors.diag_factors.push_back(a.unaryExpr([this](Scalar v) { return scale_s_ * activation_.deriv(v); }));
    }
    out.matrix = assemble(out.factors);
    return out;
  }

  template <typename Derived>
  MatrixType jacobian_matrix(const Eigen::MatrixBase<Derived>& x) const {
    return jacobian(x).matrix;
  }

  /// div f(x) = Tr Df(x).
  template <typename Derived>
  Scalar trace_divergence(const Eigen::MatrixBase<Derived>& x) const {
    return jacobian_matrix(x).trace();
  }

  /// Folds the offset into the hidden biases (b_k <- b_k + c) and zeroes it.
  BasicMlp absorb_offset() const {
    if (offset_c_ < Scalar(0)) fail(ErrorKind::Domain, "offset_c must be >= 0");
    BasicMlp out = *this;
    if (offset_c_ == Scalar(0)) return out;
    for (std::size_t k = 0; k + 1 < out.layers_.size(); ++k) out.layers_[k].bias.array() += offset_c_;
    out.offset_c_ = Scalar(0);
    return out;
  }

  std::vector<Layer>& mutable_layers() { return layers_; }

 private:
  void validate() const {
    if (layers_.empty()) fail(ErrorKind::InvalidInput, "network needs at least one layer");
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const auto& l = layers_[k];
      if (l.bias.size() != l.weight.rows()) {
        fail(ErrorKind::Dimension, "layer " + std::to_string(k + 1) + ": bias length " +
                                       std::to_string(l.bias.size()) + " != rows " + std::to_string(l.weight.rows()));
      }
      if (k > 0 && l.weight.cols() != layers_[k - 1].weight.rows()) {
        fail(ErrorKind::Dimension, "layer " + std::to_string(k + 1) + " input width does not chain");
      }
      if (!l.weight.allFinite() || !l.bias.allFinite()) {
        fail(ErrorKind::InvalidInput, "layer " + std::to_string(k + 1) + " has non-finite parameters");
      }
    }
    if (layers_.back().weight.rows() != layers_.front().weight.cols()) {
      fail(ErrorKind::Dimension, "output dimension must equal state dimension");
    }
    if (!(scale_s_ > Scalar(0)) || !std::isfinite(static_cast<double>(scale_s_))) {
      fail(ErrorKind::InvalidInput, "scale_s must be positive and finite");
    }
    if (!(offset_c_ >= Scalar(0)) || !std::isfinite(static_cast<double>(offset_c_))) {
      fail(ErrorKind::InvalidInput, "offset_c must be finite and >= 0");
    }
  }

  template <typename Derived>
  void check_input(const Eigen::MatrixBase<Derived>& x) const {
    if (x.cols() != 1 || x.rows() != state_dim()) {
      fail(ErrorKind::Dimension, "state has dimension " + std::to_string(x.rows()) + ", network expects " +
                                     std::to_string(state_dim()));
    }
  }

  std::vector<Layer> layers_;
  Activation activation_;
  Scalar scale_s_;
  Scalar offset_c_;
};

using Layer = BasicLayer<double>;
using ForwardTrace = BasicForwardTrace<double>;
using JacobianFactors = BasicJacobianFactors<double>;
using Mlp = BasicMlp<double>;

}  // namespace flab
