#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <random>
#include <type_traits>

namespace quivernet {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using Complex = std::complex<double>;
using Matrix = Mat<double>;
using Vector = Vec<double>;
using CMatrix = Mat<Complex>;

using Rng = std::mt19937_64;

template <class S>
struct is_complex : std::false_type {};
template <class T>
struct is_complex<std::complex<T>> : std::true_type {};

// Hermitian part (M + M*)/2.
template <class S>
Mat<S> hermitian_part(const Mat<S>& m) {
  return (m + m.adjoint()) / 2.0;
}

// Applies f to the eigenvalues of the Hermitian part of m.
template <class S, class F>
Mat<S> hermitian_function(const Mat<S>& m, F&& f) {
  if (m.size() == 0) return m;
  Eigen::SelfAdjointEigenSolver<Mat<S>> es(hermitian_part(m));
  Vector fv = es.eigenvalues().unaryExpr(f);
  return es.eigenvectors() * fv.template cast<S>().asDiagonal() * es.eigenvectors().adjoint();
}

template <class S>
Vector hermitian_eigenvalues(const Mat<S>& m) {
  if (m.size() == 0) return Vector();
  Eigen::SelfAdjointEigenSolver<Mat<S>> es(hermitian_part(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

template <class S>
double min_eigenvalue(const Mat<S>& m) {
  Vector ev = hermitian_eigenvalues(m);
  return ev.size() == 0 ? 0.0 : ev.minCoeff();
}

// Reciprocal 2-norm condition number; 1 for an empty matrix.
template <class S>
double rcond(const Mat<S>& m) {
  if (m.size() == 0) return 1.0;
  Eigen::JacobiSVD<Mat<S>> svd(m);
  const auto& s = svd.singularValues();
  if (s(0) == 0.0) return 0.0;
  return s(s.size() - 1) / s(0);
}

template <class S>
double op_norm(const Mat<S>& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat<S>> svd(m);
  return svd.singularValues()(0);
}

template <class S>
double max_abs(const Mat<S>& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

template <class S>
Mat<S> random_gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Mat<S> m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) {
      if constexpr (is_complex<S>::value) {
        double re = nd(rng), im = nd(rng);
        m(i, j) = S(re, im) * (scale / std::sqrt(2.0));
      } else {
        m(i, j) = nd(rng) * scale;
      }
    }
  return m;
}

// Haar-distributed orthogonal/unitary matrix (QR with phase correction).
template <class S>
Mat<S> random_unitary(Eigen::Index n, Rng& rng) {
  Mat<S> a = random_gaussian<S>(n, n, rng);
  Eigen::HouseholderQR<Mat<S>> qr(a);
  Mat<S> q = qr.householderQ() * Mat<S>::Identity(n, n);
  Mat<S> r = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < n; ++i) {
    double mag = std::abs(r(i, i));
    if (mag > 0) q.col(i) *= r(i, i) / mag;
  }
  return q;
}

}  // namespace quivernet
