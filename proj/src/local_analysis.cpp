#include "quasipot/local_analysis.hpp"

#include <cmath>
#include <numbers>

namespace quasipot {

EquilibriumAnalysis analyze_ep(const SystemModel& m, const EquilibriumPoint& ep) {
  EquilibriumAnalysis ea;
  ea.ep = ep;
  ea.D = diffusion_at(m, ep.x);
  const Mat& M = ep.M;
  const int n = m.n;

  if (ep.kind == EpKind::Marginal)
    ea.diagnostics.warnings.push_back("marginal spectrum: some Re(lambda) is within 1e-9 of 0");

  ea.A = solve_A(M, ea.D);
  ea.diagnostics.solve_A_residual =
      (ea.A * M.transpose() + M * ea.A - (ea.D * M.transpose() - M * ea.D)).norm();

  const Mat B = -ea.D + ea.A;
  try {
    ea.grad_map = inverse(B);
  } catch (const SingularMatrix&) {
    throw NotInvertible(
        "analyze_ep: (-D + A) is singular; a singular diffusion matrix can cause this");
  }

  const Mat S_raw = ea.grad_map * M;
  ea.diagnostics.symmetry =
      (S_raw - S_raw.transpose()).norm() / std::max(1.0, S_raw.norm());
  if (ea.diagnostics.symmetry > 1e-9)
    ea.diagnostics.warnings.push_back("S deviates from symmetry beyond 1e-9 before symmetrization");
  ea.S = 0.5 * (S_raw + S_raw.transpose());

  if (n == 2) {
    ea.chi = ea.A(0, 1);
    // Closed form cross-check when tr M is away from zero.
    try {
      const double chi_closed = chi_2d(M, ea.D);
      if (std::abs(chi_closed - *ea.chi) > 1e-12 * std::max(1.0, std::abs(chi_closed)))
        ea.diagnostics.warnings.push_back("closed-form chi disagrees with the basis solve");
    } catch (const TraceZero&) {
    }
  }

  ea.rank_S = rank(ea.S);
  ea.rank_M = rank(M);
  if (ea.rank_S != ea.rank_M)
    ea.diagnostics.warnings.push_back("rank(S) != rank(M)");

  ea.diagnostics.riccati = riccati_residual(ea.S, M, ea.D);
  ea.diagnostics.r_at_ep = compute_r(m, ep.x, Vec::Zero(n), ea.S);

  // Stationarity residual of the local quadratic against the full drift,
  // sampled on a small ring; O(offset^3) for smooth models.
  const double h = 1e-4 * (1.0 + ep.x.norm());
  double freidlin_max = 0.0;
  for (int i = 0; i < n; ++i) {
    for (double sgn : {-1.0, 1.0}) {
      Vec x = ep.x;
      x(i) += sgn * h;
      const Vec g = ea.S * (x - ep.x);
      freidlin_max = std::max(freidlin_max, std::abs(freidlin_residual(m, g, x)));
    }
  }
  ea.diagnostics.freidlin = freidlin_max;

  if (ea.rank_S == n) {
    ea.Sinv = inverse(ea.S);
    try {
      const Mat X = solve_lyapunov(M, -2.0 * ea.D);
      ea.diagnostics.lyapunov = (X - *ea.Sinv).norm() / std::max(1.0, X.norm());
    } catch (const ResonantSpectrum&) {
      // Resonant spectrum: the covariance-form equation has no unique solution.
    }
  }
  return ea;
}

Vec qp_gradient_field(const EquilibriumAnalysis& ea, const SystemModel& m,
                      const Eigen::Ref<const Vec>& x) {
  return ea.grad_map * drift_at(m, x);
}

double freidlin_residual(const SystemModel& m, const Eigen::Ref<const Vec>& grad_phi,
                         const Eigen::Ref<const Vec>& x) {
  const Vec a = drift_at(m, x);
  const Mat D = diffusion_at(m, x);
  return (a + D * grad_phi).dot(grad_phi);
}

double compute_r(const SystemModel& m, const Eigen::Ref<const Vec>& x,
                 const Eigen::Ref<const Vec>& grad_phi, const Eigen::Ref<const Mat>& hess_phi) {
  const double rho = drift_contraction(m, x);
  const Mat D = diffusion_at(m, x);
  double div_term = D.cwiseProduct(hess_phi).sum();
  if (!m.constant_diffusion) {
    const std::vector<Mat> dD = diffusion_grad_at(m, x);
    for (int i = 0; i < m.n; ++i)
      div_term += dD[static_cast<std::size_t>(i)].row(i).dot(grad_phi);
  }
  return rho - div_term;
}

GaussianApprox gaussian_density(const EquilibriumAnalysis& ea, double epsilon) {
  if (ea.ep.kind != EpKind::Attractor)
    throw NotAttractor("gaussian_density: equilibrium is not an attractor");
  if (!(epsilon > 0.0)) throw Error("gaussian_density: epsilon must be positive");
  Eigen::SelfAdjointEigenSolver<Mat> es(ea.S);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw NotPositiveDefinite("gaussian_density: S is not positive definite");

  GaussianApprox g;
  g.center = ea.ep.x;
  g.S = ea.S;
  g.epsilon = epsilon;
  const int n = static_cast<int>(ea.S.rows());
  g.normalizer =
      std::pow(2.0 * std::numbers::pi * epsilon, -0.5 * n) * std::sqrt(es.eigenvalues().prod());
  g.covariance = epsilon * inverse(ea.S);
  return g;
}

KramersDegenerate kramers_phi_pm(double u2, double gamma, int sign) {
  if (!(gamma > 0.0)) throw Error("kramers_phi_pm: gamma must be positive");
  if (sign != 1 && sign != -1) throw Error("kramers_phi_pm: sign must be +1 or -1");
  const double disc = 1.0 - 4.0 * u2 / (gamma * gamma);
  if (disc < 0.0)
    throw ComplexBeta("kramers_phi_pm: discriminant below zero (underdamped bottom)");
  KramersDegenerate out;
  out.beta = 0.5 * (1.0 + sign * std::sqrt(disc));
  out.S_pm = Mat(2, 2);
  out.S_pm << u2 * (1.0 - out.beta), u2 / gamma, u2 / gamma, out.beta;
  out.r_value = gamma * (1.0 - out.beta);
  return out;
}

namespace {

double quad_form(double u2, double gamma, double beta, double x, double v) {
  return 0.5 * (u2 * (1.0 - beta) * x * x + 2.0 * u2 / gamma * x * v + beta * v * v);
}

int sign_of(double value, double tol) {
  if (value > tol) return 1;
  if (value < -tol) return -1;
  return 0;
}

}  // namespace

std::vector<ProbeRow> minimum_principle_probe(
    double u2, double gamma, const std::vector<std::pair<double, double>>& points) {
  const KramersDegenerate plus = kramers_phi_pm(u2, gamma, +1);
  const KramersDegenerate minus = kramers_phi_pm(u2, gamma, -1);

  std::vector<ProbeRow> rows;
  rows.reserve(points.size());
  for (const auto& [x, v] : points) {
    ProbeRow row;
    row.x = x;
    row.v = v;
    row.phi_eq = 0.5 * (u2 * x * x + v * v);
    row.phi_plus = quad_form(u2, gamma, plus.beta, x, v);
    row.phi_minus = quad_form(u2, gamma, minus.beta, x, v);
    row.phi_zero = 0.0;

    const double values[4] = {row.phi_eq, row.phi_plus, row.phi_minus, row.phi_zero};
    static const char* kLabels[4] = {"eq", "plus", "minus", "zero"};
    double lowest = values[0];
    for (double val : values) lowest = std::min(lowest, val);
    // Ties within a tiny tolerance resolve toward the earlier label, so a
    // candidate touching zero on its null line wins over phi_zero there.
    const double tie = 1e-12 * std::max({1.0, std::abs(row.phi_eq), std::abs(lowest)});
    for (int idx = 0; idx < 4; ++idx) {
      if (values[idx] <= lowest + tie) {
        row.min_label = kLabels[idx];
        break;
      }
    }

    const double side_tol = 1e-14 * std::max(1.0, std::abs(v));
    row.side_plus = sign_of(v - plus.beta * gamma * x, side_tol);
    row.side_minus = sign_of(v - minus.beta * gamma * x, side_tol);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace quasipot
