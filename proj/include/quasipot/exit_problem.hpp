#pragma once

#include <optional>

#include "quasipot/local_analysis.hpp"

namespace quasipot {

/// Starting data for characteristic integration at a separatrix saddle.
struct ExitData {
  Mat Mtilde;             // Jacobian M - 2 A S of the reversed-circulation drift
  bool spectrum_match = false;  // eigenvalue multisets of Mtilde and M agree to 1e-8
  double lambda_plus = 0.0;     // the unique positive (real) eigenvalue
  Vec f;                  // unit right eigenvector of M^T for lambda_plus
  Vec start_dir;          // unit unstable direction of Mtilde: -(D + A) f normalized
};

/// Mtilde = M - 2 A S. Isospectral to M; when S is singular this still
/// preserves trace and determinant.
Mat associated_jacobian(const EquilibriumAnalysis& ea, const Eigen::Ref<const Mat>& D);

/// Computes the unstable starting direction at a saddle whose spectrum has
/// exactly one eigenvalue of positive real part, required to be real. The
/// direction -(D + A) f needs no inverse of S. Sign convention: positive
/// inner product with `away_from` when given, otherwise the first
/// non-negligible component is positive.
/// Throws NotExitSaddle / ComplexUnstableEigenvalue on wrong spectra.
ExitData exit_direction(const EquilibriumAnalysis& ea, const Eigen::Ref<const Mat>& D,
                        const std::optional<Vec>& away_from = std::nullopt);

}  // namespace quasipot
