#pragma once

#include <Eigen/Dense>
#include <complex>

#include "quasipot/errors.hpp"

namespace quasipot {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

/// Right eigenpairs of a real square matrix. Eigenvalues are sorted by
/// descending real part, ties broken by descending imaginary part, so complex
/// conjugate pairs are adjacent with the +i member first. Column i of
/// `eigenvectors` is the unit-norm right eigenvector for `eigenvalues(i)`.
struct Spectrum {
  CVec eigenvalues;
  CMat eigenvectors;
};

/// Condition estimate above which a matrix is treated as singular.
inline constexpr double kSingularCond = 1e12;

/// Solves A x = b for square A. Throws SingularMatrix when the condition
/// estimate exceeds kSingularCond.
Vec solve_linear(const Eigen::Ref<const Mat>& A, const Eigen::Ref<const Vec>& b);

/// Eigen decomposition of a real square matrix, sorted per Spectrum.
/// Throws ConvergenceFailure if the underlying iteration fails.
Spectrum eig(const Eigen::Ref<const Mat>& X);

/// Matrix inverse; throws SingularMatrix on rank deficiency.
Mat inverse(const Eigen::Ref<const Mat>& X);

double det(const Eigen::Ref<const Mat>& X);

/// Rank as the number of singular values above `tol`. A negative `tol`
/// selects the default 1e-10 times the largest singular value.
int rank(const Eigen::Ref<const Mat>& X, double tol = -1.0);

/// Two-norm condition number (largest over smallest singular value);
/// +inf when the smallest singular value is zero.
double cond(const Eigen::Ref<const Mat>& X);

/// Largest singular value.
double spectral_norm(const Eigen::Ref<const Mat>& X);

}  // namespace quasipot
