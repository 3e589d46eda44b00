#pragma once

// Small dense linear algebra on top of Eigen. Every routine accepts any Eigen
// expression, so callers can pass products and blocks without materialising.

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "floquet_lab/error.hpp"

namespace flab {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

inline constexpr Eigen::Index kMaxEigenDimension = 16;

/// Eigenvalues ordered by descending modulus (ties broken by descending real,
/// then descending imaginary part, so conjugate pairs come out +i first).
template <typename Scalar>
struct BasicSpectrum {
  std::vector<std::complex<Scalar>> values;

  std::size_t size() const { return values.size(); }
  const std::complex<Scalar>& operator[](std::size_t i) const { return values[i]; }

  std::complex<Scalar> product() const {
    std::complex<Scalar> p{1, 0};
    for (const auto& v : values) p *= v;
    return p;
  }

  std::vector<Scalar> moduli() const {
    std::vector<Scalar> out;
    out.reserve(values.size());
    for (const auto& v : values) out.push_back(std::abs(v));
    return out;
  }
};

using Spectrum = BasicSpectrum<double>;

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& a, const char* what) {
  if (!a.allFinite()) fail(ErrorKind::InvalidInput, std::string(what) + " has non-finite entries");
}

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& a, const char* what) {
  if (a.rows() != a.cols()) {
    fail(ErrorKind::Dimension, std::string(what) + " must be square, got " + std::to_string(a.rows()) + "x" +
                                   std::to_string(a.cols()));
  }
}

/// Largest singular value. Empty matrices have norm zero.
template <typename Derived>
typename Derived::Scalar spectral_norm(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  require_finite(a, "spectral_norm input");
  if (a.size() == 0) return Scalar(0);
  if (a.rows() == 1 || a.cols() == 1) return a.norm();
  const MatrixX<Scalar> m = a;
  // Diagonal fast path: ||D|| = max |d_i|.
  if (m.rows() == m.cols() && (m - MatrixX<Scalar>(m.diagonal().asDiagonal())).isZero(0)) {
    return m.diagonal().cwiseAbs().maxCoeff();
  }
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(m);
  return svd.singularValues()(0);
}

namespace detail {

template <typename Scalar>
void sort_by_modulus(std::vector<std::complex<Scalar>>& values) {
  std::stable_sort(values.begin(), values.end(), [](const auto& x, const auto& y) {
    const Scalar ax = std::abs(x), ay = std::abs(y);
    if (ax != ay) return ax > ay;
    if (x.real() != y.real()) return x.real() > y.real();
    return x.imag() > y.imag();
  });
}

}  // namespace detail

/// Full spectrum with algebraic multiplicity. Closed form for d <= 2, real
/// Schur (Hessenberg + shifted QR) for 3 <= d <= 16.
template <typename Derived>
BasicSpectrum<typename Derived::Scalar> eigenvalues(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  using Complex = std::complex<Scalar>;
  require_square(a, "eigenvalues input");
  require_finite(a, "eigenvalues input");
  const Eigen::Index d = a.rows();
  if (d > kMaxEigenDimension) {
    fail(ErrorKind::Dimension, "eigenvalues supports dimension <= 16, got " + std::to_string(d));
  }

  BasicSpectrum<Scalar> out;
  if (d == 1) {
    out.values.push_back(Complex(a(0, 0), 0));
  } else if (d == 2) {
    const Scalar tr = a(0, 0) + a(1, 1);
    const Scalar half = tr / 2;
    // Discriminant of the characteristic polynomial written to avoid cancellation.
    const Scalar diff = (a(0, 0) - a(1, 1)) / 2;
    const Scalar disc = diff * diff + a(0, 1) * a(1, 0);
    if (disc >= 0) {
      const Scalar root = std::sqrt(disc);
      // Larger-modulus root first, the other from det / larger to keep precision.
      const Scalar big = half >= 0 ? half + root : half - root;
      const Scalar det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
      const Scalar small = big != 0 ? det / big : half - root;
      out.values = {Complex(big, 0), Complex(small, 0)};
    } else {
      const Scalar root = std::sqrt(-disc);
      out.values = {Complex(half, root), Complex(half, -root)};
    }
  } else if (d > 2) {
    Eigen::EigenSolver<MatrixX<Scalar>> solver(MatrixX<Scalar>(a), /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
      fail(ErrorKind::Numerical, "eigenvalue QR iteration did not converge within " +
                                     std::to_string(solver.getMaxIterations() * d) + " iterations");
    }
    const auto& ev = solver.eigenvalues();
    for (Eigen::Index i = 0; i < d; ++i) out.values.push_back(ev(i));
  }
  detail::sort_by_modulus(out.values);
  return out;
}

/// Determinant by LU with partial pivoting.
template <typename Derived>
typename Derived::Scalar determinant(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  require_square(a, "determinant input");
  if (a.rows() == 0) return Scalar(1);
  return Eigen::PartialPivLU<MatrixX<Scalar>>(MatrixX<Scalar>(a)).determinant();
}

template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> matmul(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorKind::Dimension, "matmul inner dimensions differ: " + std::to_string(a.cols()) + " vs " +
                                   std::to_string(b.rows()));
  }
  return a * b;
}

/// diag(sqrt(d_i)); every d_i must be strictly positive.
template <typename Derived>
MatrixX<typename Derived::Scalar> diag_sqrt(const Eigen::MatrixBase<Derived>& diag_values) {
  using Scalar = typename Derived::Scalar;
  for (Eigen::Index i = 0; i < diag_values.size(); ++i) {
    const Scalar v = diag_values(i);
    if (!(v > 0)) {
      fail(ErrorKind::Domain, "diag_sqrt needs strictly positive entries; entry " + std::to_string(i) + " is " +
                                  std::to_string(static_cast<double>(v)));
    }
  }
  return VectorX<Scalar>(diag_values.cwiseSqrt()).asDiagonal();
}

template <typename Derived>
typename Derived::Scalar trace(const Eigen::MatrixBase<Derived>& a) {
  require_square(a, "trace input");
  return a.trace();
}

}  // namespace flab
