#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "floquet_lab/error.hpp"

namespace flab {

enum class ActivationKind { Tanh, Sigmoid, Silu, Relu, Identity };

inline std::string_view to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::Tanh: return "tanh";
    case ActivationKind::Sigmoid: return "sigmoid";
    case ActivationKind::Silu: return "silu";
    case ActivationKind::Relu: return "relu";
    case ActivationKind::Identity: return "identity";
  }
  return "unknown";
}

inline ActivationKind parse_activation(std::string_view name) {
  for (auto k : {ActivationKind::Tanh, ActivationKind::Sigmoid, ActivationKind::Silu, ActivationKind::Relu,
                 ActivationKind::Identity}) {
    if (to_string(k) == name) return k;
  }
  fail(ErrorKind::InvalidInput, "unknown activation '" + std::string(name) + "'");
}

// sup_x SiLU'(x), attained at x ~ 2.39936.
inline constexpr double kSiluDerivSup = 1.0998393201288669;

/// Componentwise nonlinearity sigma with its exact derivative.
class Activation {
 public:
  constexpr Activation(ActivationKind kind = ActivationKind::Tanh) : kind_(kind) {}

  constexpr ActivationKind kind() const { return kind_; }
  std::string_view name() const { return to_string(kind_); }

  /// Lambda_sigma = sup |sigma'|.
  constexpr double lambda_sigma() const {
    switch (kind_) {
      case ActivationKind::Tanh: return 1.0;
      case ActivationKind::Sigmoid: return 0.25;
      case ActivationKind::Silu: return kSiluDerivSup;
      case ActivationKind::Relu: return 1.0;
      case ActivationKind::Identity: return 1.0;
    }
    return 1.0;
  }

  /// True when sigma' > 0 everywhere, which the square-root factorisation needs.
  constexpr bool strictly_increasing() const {
    return kind_ == ActivationKind::Tanh || kind_ == ActivationKind::Sigmoid || kind_ == ActivationKind::Identity;
  }

  template <typename Scalar>
  Scalar eval(Scalar x) const {
    using std::exp;
    using std::tanh;
    switch (kind_) {
      case ActivationKind::Tanh: return tanh(x);
      case ActivationKind::Sigmoid: return logistic(x);
      case ActivationKind::Silu: return x * logistic(x);
      case ActivationKind::Relu: return x > Scalar(0) ? x : Scalar(0);
      case ActivationKind::Identity: return x;
    }
    return x;
  }

  template <typename Scalar>
  Scalar deriv(Scalar x) const {
    using std::cosh;
    switch (kind_) {
      case ActivationKind::Tanh: {
        // sech^2 without forming tanh, so deep saturation keeps relative precision.
        const Scalar c = cosh(x);
        return Scalar(1) / (c * c);
      }
      case ActivationKind::Sigmoid: {
        return logistic(x) * logistic(-x);
      }
      case ActivationKind::Silu: {
        const Scalar p = logistic(x);
        return p * (Scalar(1) + x * logistic(-x));
      }
      case ActivationKind::Relu: return x > Scalar(0) ? Scalar(1) : Scalar(0);
      case ActivationKind::Identity: return Scalar(1);
    }
    return Scalar(1);
  }

  friend constexpr bool operator==(Activation a, Activation b) { return a.kind_ == b.kind_; }

 private:
  template <typename Scalar>
  static Scalar logistic(Scalar x) {
    using std::exp;
    if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-x));
    const Scalar e = exp(x);
    return e / (Scalar(1) + e);
  }

  ActivationKind kind_;
};

/// delta = sech^2(r): the tanh derivative bound when every pre-activation
/// satisfies |a| >= r.
inline double saturation_radius_delta(Activation activation, double r) {
  if (activation.kind() != ActivationKind::Tanh) {
    fail(ErrorKind::Unsupported, "saturation radius is defined for tanh only, got " + std::string(activation.name()));
  }
  if (!(r >= 0) || !std::isfinite(r)) fail(ErrorKind::Domain, "saturation radius must be finite and >= 0");
  return activation.deriv(r);
}

}  // namespace flab
