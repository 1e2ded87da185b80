#pragma once

#include <utility>
#include <vector>

#include "quasipot/linalg.hpp"

namespace quasipot {

/// Index pairs (i,k), i < k, in lexicographic order; the basis element e_ik
/// has +1 at (i,k), -1 at (k,i), zeros elsewhere. The n(n-1)/2 coefficients
/// in this basis parameterize the antisymmetric matrices.
std::vector<std::pair<int, int>> antisym_basis(int n);

Mat antisym_from_coeffs(int n, const Eigen::Ref<const Vec>& alpha);
Vec antisym_to_coeffs(const Eigen::Ref<const Mat>& A);

/// Solves A M^T + M A = D M^T - M D for antisymmetric A, given the drift
/// Jacobian M and the (symmetric PSD) diffusion D. The operator
/// L(A) = A M^T + M A preserves antisymmetry, so the solve expands A over the
/// e_ik basis and inverts the resulting n(n-1)/2 dense system.
/// Throws NonUniqueSolution when the system is singular, which happens
/// exactly when some eigenvalue pair of M satisfies lambda_i + lambda_j = 0
/// (the trace-free case included).
Mat solve_A(const Eigen::Ref<const Mat>& M, const Eigen::Ref<const Mat>& D);

/// Two-dimensional closed form: A = chi * [[0,1],[-1,0]] with
/// chi = (D M^T - M D)_{12} / tr M. Throws TraceZero when tr M is (nearly)
/// zero, which can occur at a hyperbolic point.
double chi_2d(const Eigen::Ref<const Mat>& M, const Eigen::Ref<const Mat>& D);

/// Solves M X + X M^T = Q for symmetric X (Q symmetric), by the same basis
/// projection over the n(n+1)/2 symmetric basis. Throws ResonantSpectrum when
/// some eigenvalue pair (including i = j) satisfies lambda_i + lambda_j = 0.
Mat solve_lyapunov(const Eigen::Ref<const Mat>& M, const Eigen::Ref<const Mat>& Q);

/// Frobenius norm of S M + M^T S + 2 S D S. Diagnostic only.
double riccati_residual(const Eigen::Ref<const Mat>& S, const Eigen::Ref<const Mat>& M,
                        const Eigen::Ref<const Mat>& D);

}  // namespace quasipot
