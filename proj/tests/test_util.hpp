#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "floquet_lab/network.hpp"

namespace flab::test {

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  return random_matrix(rng, n, 1, scale);
}

/// Random net with the given widths (d_0 .. d_L).
inline Mlp random_mlp(std::mt19937_64& rng, const std::vector<Eigen::Index>& dims, Activation act,
                      double scale_s = 1.0, double offset_c = 0.0, double weight_scale = 1.0) {
  std::vector<Layer> layers;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    layers.push_back({random_matrix(rng, dims[k + 1], dims[k], weight_scale), random_vector(rng, dims[k + 1], weight_scale)});
  }
  return Mlp(std::move(layers), act, scale_s, offset_c);
}

/// Random depth in [2, max_layers], widths in [1, max_width], state dim d.
inline Mlp random_architecture(std::mt19937_64& rng, Eigen::Index d, int max_layers, Eigen::Index max_width,
                               Activation act, double scale_s = 1.0) {
  std::uniform_int_distribution<int> depth(2, max_layers);
  std::uniform_int_distribution<Eigen::Index> width(1, max_width);
  std::vector<Eigen::Index> dims{d};
  const int L = depth(rng);
  for (int k = 1; k < L; ++k) dims.push_back(width(rng));
  dims.push_back(d);
  return random_mlp(rng, dims, act, scale_s);
}

/// Central finite-difference Jacobian.
template <typename F>
Matrix fd_jacobian(const F& f, const Vector& x, double step) {
  const Vector f0 = f(x);
  Matrix j(f0.size(), x.size());
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    Vector xp = x, xm = x;
    xp(c) += step;
    xm(c) -= step;
    j.col(c) = (f(xp) - f(xm)) / (2 * step);
  }
  return j;
}

}  // namespace flab::test
