#pragma once

#include <random>

#include "quasipot/linalg.hpp"

namespace qptest {

using quasipot::Mat;
using quasipot::Vec;

inline Mat random_mat(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

inline Vec random_vec(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

inline Mat random_sym(std::mt19937_64& rng, int n, double scale = 1.0) {
  const Mat a = random_mat(rng, n, n, scale);
  return 0.5 * (a + a.transpose());
}

inline Mat random_antisym(std::mt19937_64& rng, int n, double scale = 1.0) {
  const Mat a = random_mat(rng, n, n, scale);
  return 0.5 * (a - a.transpose());
}

// Positive definite with eigenvalues bounded away from zero.
inline Mat random_spd(std::mt19937_64& rng, int n, double floor = 0.2) {
  const Mat g = random_mat(rng, n, n);
  return g * g.transpose() / n + floor * Mat::Identity(n, n);
}

// All eigenvalues shifted into the left half plane by a random margin.
inline Mat random_stable(std::mt19937_64& rng, int n) {
  const Mat g = random_mat(rng, n, n);
  double max_re = -std::numeric_limits<double>::infinity();
  const auto sp = quasipot::eig(g);
  for (Eigen::Index i = 0; i < sp.eigenvalues.size(); ++i)
    max_re = std::max(max_re, sp.eigenvalues(i).real());
  std::uniform_real_distribution<double> m(0.3, 1.2);
  return g - (max_re + m(rng)) * Mat::Identity(n, n);
}

// Symmetric, invertible, with mixed-sign eigenvalues of magnitude in [lo, hi].
inline Mat random_sym_indefinite(std::mt19937_64& rng, int n, double lo = 0.4, double hi = 2.0) {
  const Mat g = random_mat(rng, n, n);
  const Eigen::HouseholderQR<Mat> qr(g);
  const Mat q = qr.householderQ();
  std::uniform_real_distribution<double> mag(lo, hi);
  std::bernoulli_distribution flip(0.5);
  Vec d(n);
  bool any_neg = false;
  for (int i = 0; i < n; ++i) {
    const bool neg = flip(rng);
    any_neg = any_neg || neg;
    d(i) = (neg ? -1.0 : 1.0) * mag(rng);
  }
  if (!any_neg) d(0) = -d(0);
  return q * d.asDiagonal() * q.transpose();
}

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline double rel_err(const Mat& got, const Mat& want) {
  return (got - want).norm() / std::max(1.0, want.norm());
}

}  // namespace qptest
