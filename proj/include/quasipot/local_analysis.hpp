#pragma once

#include <optional>
#include <string>
#include <vector>

#include "quasipot/matrix_equations.hpp"
#include "quasipot/model.hpp"

namespace quasipot {

struct EpDiagnostics {
  double solve_A_residual = 0.0;  // |A M^T + M A - (D M^T - M D)|
  double freidlin = 0.0;          // |(a + D g) . g| sampled near the EP with g = S (x - ep)
  double riccati = 0.0;           // |S M + M^T S + 2 S D S|
  double symmetry = 0.0;          // relative off-symmetry of S before symmetrization
  std::optional<double> lyapunov; // |X - inverse(S)| / |X| with M X + X M^T = -2D, when defined
  double r_at_ep = 0.0;           // rho - div(D grad) of the local quadratic, at the EP
  std::vector<std::string> warnings;
};

/// Local quadratic data at an equilibrium point: the antisymmetric A solving
/// the drift-decomposition equation, the Hessian S = (-D + A)^{-1} M of the
/// quasipotential, and consistency residuals.
struct EquilibriumAnalysis {
  EquilibriumPoint ep;
  Mat D;         // diffusion at the EP
  Mat A;         // antisymmetric
  Mat S;         // symmetric (symmetrized after the residual check)
  Mat grad_map;  // (-D + A)^{-1}, frozen at the EP
  std::optional<double> chi;  // n = 2 only
  std::optional<Mat> Sinv;
  int rank_S = 0;
  int rank_M = 0;
  EpDiagnostics diagnostics;
};

/// Runs the local analysis. Requires the basis-projected system for A to be
/// solvable and (-D + A) invertible; throws NonUniqueSolution / NotInvertible
/// otherwise. A marginal spectrum (some Re lambda ~ 0, e.g. a flat Kramers
/// bottom) is analyzed anyway and flagged in diagnostics.warnings.
EquilibriumAnalysis analyze_ep(const SystemModel& m, const EquilibriumPoint& ep);

/// Local gradient map (-D + A)^{-1} a(x), with A and D frozen at the EP.
/// Equals S (x - ep) up to second order in the offset.
Vec qp_gradient_field(const EquilibriumAnalysis& ea, const SystemModel& m,
                      const Eigen::Ref<const Vec>& x);

/// Residual (a(x) + D(x) g) . g of the stationarity equation for a candidate
/// gradient g at x.
double freidlin_residual(const SystemModel& m, const Eigen::Ref<const Vec>& grad_phi,
                         const Eigen::Ref<const Vec>& x);

/// r = rho(x) - div(D grad phi) evaluated for the (grad, hessian) pair of a
/// candidate phi at x:
///   r = rho - sum_ij [dD^{ij}/dx^i grad_j + D^{ij} hess_ij].
double compute_r(const SystemModel& m, const Eigen::Ref<const Vec>& x,
                 const Eigen::Ref<const Vec>& grad_phi, const Eigen::Ref<const Mat>& hess_phi);

/// Gaussian stationary density exp(-(x-c)^T S (x-c) / (2 eps)) / normalizer
/// at an attractor; covariance is eps * S^{-1}.
struct GaussianApprox {
  Vec center;
  Mat S;
  double epsilon = 0.0;
  double normalizer = 0.0;  // (2 pi eps)^{-n/2} det(S)^{1/2}
  Mat covariance;
};

GaussianApprox gaussian_density(const EquilibriumAnalysis& ea, double epsilon);

/// One of the two rank-deficient quadratic solutions at a Kramers bottom or
/// barrier in the quadratic approximation:
///   phi_pm = [u2 (1 - beta) x^2 + 2 u2 / gamma x v + beta v^2] / 2,
///   2 beta_pm = 1 +- sqrt(1 - 4 u2 / gamma^2).
/// Its Hessian S_pm solves the quadratic (Riccati-type) equation but carries
/// the nonzero source r = gamma (1 - beta), so the order-eps correction is
/// singular at the EP.
struct KramersDegenerate {
  double beta = 0.0;
  Mat S_pm;
  double r_value = 0.0;
};

/// sign = +1 or -1. Throws ComplexBeta when 1 - 4 u2 / gamma^2 < 0
/// (underdamped bottom).
KramersDegenerate kramers_phi_pm(double u2, double gamma, int sign);

/// Pointwise comparison of the candidate quadratics phi_eq, phi_+, phi_-,
/// phi_0 = 0 around a Kramers EP, demonstrating that the pointwise minimum
/// does not select phi_eq.
struct ProbeRow {
  double x = 0.0, v = 0.0;
  double phi_eq = 0.0, phi_plus = 0.0, phi_minus = 0.0, phi_zero = 0.0;
  std::string min_label;       // "eq", "plus", "minus" or "zero"
  int side_plus = 0, side_minus = 0;  // sign of v - beta_pm * gamma * x
};

std::vector<ProbeRow> minimum_principle_probe(double u2, double gamma,
                                              const std::vector<std::pair<double, double>>& points);

}  // namespace quasipot
