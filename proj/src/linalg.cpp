#include "quasipot/linalg.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

namespace quasipot {

namespace {

Eigen::JacobiSVD<Mat> svd_of(const Eigen::Ref<const Mat>& X, unsigned options = 0) {
  return Eigen::JacobiSVD<Mat>(X, options);
}

double cond_from_svd(const Eigen::JacobiSVD<Mat>& svd) {
  const auto& s = svd.singularValues();
  if (s.size() == 0) return 1.0;
  const double smin = s(s.size() - 1);
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

}  // namespace

Vec solve_linear(const Eigen::Ref<const Mat>& A, const Eigen::Ref<const Vec>& b) {
  if (A.rows() != A.cols()) throw Error("solve_linear: matrix must be square");
  if (b.size() != A.rows()) throw Error("solve_linear: size mismatch");
  if (A.rows() == 0) return Vec(0);
  const auto svd = svd_of(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double c = cond_from_svd(svd);
  if (!(c < kSingularCond)) {
    throw SingularMatrix("solve_linear: condition estimate " + std::to_string(c) +
                         " exceeds 1e12");
  }
  return svd.solve(b);
}

Spectrum eig(const Eigen::Ref<const Mat>& X) {
  if (X.rows() != X.cols()) throw Error("eig: matrix must be square");
  const Eigen::Index n = X.rows();
  Spectrum out;
  if (n == 0) {
    out.eigenvalues = CVec(0);
    out.eigenvectors = CMat(0, 0);
    return out;
  }
  Eigen::EigenSolver<Mat> es(X, /*computeEigenvectors=*/true);
  if (es.info() != Eigen::Success) throw ConvergenceFailure("eig: iteration did not converge");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const CVec vals = es.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (vals(a).real() != vals(b).real()) return vals(a).real() > vals(b).real();
    return vals(a).imag() > vals(b).imag();
  });

  out.eigenvalues = CVec(n);
  out.eigenvectors = CMat(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.eigenvalues(i) = vals(order[static_cast<std::size_t>(i)]);
    CVec v = es.eigenvectors().col(order[static_cast<std::size_t>(i)]);
    out.eigenvectors.col(i) = v / v.norm();
  }
  return out;
}

Mat inverse(const Eigen::Ref<const Mat>& X) {
  if (X.rows() != X.cols()) throw Error("inverse: matrix must be square");
  if (X.rows() == 0) return Mat(0, 0);
  const auto svd = svd_of(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double c = cond_from_svd(svd);
  if (!(c < kSingularCond)) {
    throw SingularMatrix("inverse: condition estimate " + std::to_string(c) + " exceeds 1e12");
  }
  return svd.solve(Mat::Identity(X.rows(), X.cols()));
}

double det(const Eigen::Ref<const Mat>& X) {
  if (X.rows() != X.cols()) throw Error("det: matrix must be square");
  return X.determinant();
}

int rank(const Eigen::Ref<const Mat>& X, double tol) {
  const auto svd = svd_of(X);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return 0;
  if (tol < 0.0) tol = 1e-10 * s(0);
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > tol) ++r;
  return r;
}

double cond(const Eigen::Ref<const Mat>& X) {
  if (X.size() == 0) return 1.0;
  return cond_from_svd(svd_of(X));
}

double spectral_norm(const Eigen::Ref<const Mat>& X) {
  if (X.size() == 0) return 0.0;
  return svd_of(X).singularValues()(0);
}

}  // namespace quasipot
