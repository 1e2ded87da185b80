#include "quasipot/exit_problem.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

namespace quasipot {

namespace {

// Multiset comparison after sorting by (re, im).
bool spectra_match(const CVec& a, const CVec& b, double tol) {
  if (a.size() != b.size()) return false;
  std::vector<std::complex<double>> va(a.data(), a.data() + a.size());
  std::vector<std::complex<double>> vb(b.data(), b.data() + b.size());
  auto less = [](const std::complex<double>& p, const std::complex<double>& q) {
    if (p.real() != q.real()) return p.real() < q.real();
    return p.imag() < q.imag();
  };
  std::sort(va.begin(), va.end(), less);
  std::sort(vb.begin(), vb.end(), less);
  for (std::size_t i = 0; i < va.size(); ++i)
    if (std::abs(va[i] - vb[i]) > tol) return false;
  return true;
}

// Rotates a complex eigenvector of a real eigenvalue onto the real axis.
Vec real_eigenvector(const CVec& v, double tol) {
  Eigen::Index pivot = 0;
  v.cwiseAbs().maxCoeff(&pivot);
  const std::complex<double> phase = v(pivot) / std::abs(v(pivot));
  const CVec rotated = v / phase;
  if (rotated.imag().lpNorm<Eigen::Infinity>() > tol)
    throw ComplexUnstableEigenvalue("eigenvector has a genuine imaginary part");
  Vec r = rotated.real();
  return r / r.norm();
}

}  // namespace

Mat associated_jacobian(const EquilibriumAnalysis& ea, const Eigen::Ref<const Mat>& D) {
  (void)D;  // part of the call contract; the EP-frozen A and S suffice
  return ea.ep.M - 2.0 * ea.A * ea.S;
}

ExitData exit_direction(const EquilibriumAnalysis& ea, const Eigen::Ref<const Mat>& D,
                        const std::optional<Vec>& away_from) {
  const Mat& M = ea.ep.M;
  const double scale = std::max(1.0, M.norm());
  const double tol = 1e-9 * scale;

  // Exactly one eigenvalue with positive real part, and it must be real;
  // the others must be strictly contracting.
  int positive_index = -1;
  for (Eigen::Index i = 0; i < ea.ep.spectrum.eigenvalues.size(); ++i) {
    const auto lam = ea.ep.spectrum.eigenvalues(i);
    if (lam.real() > tol) {
      if (positive_index >= 0)
        throw NotExitSaddle("exit_direction: more than one expanding eigenvalue");
      positive_index = static_cast<int>(i);
    } else if (lam.real() > -tol) {
      throw NotExitSaddle("exit_direction: marginal eigenvalue in the saddle spectrum");
    }
  }
  if (positive_index < 0)
    throw NotExitSaddle("exit_direction: no expanding eigenvalue (kind " +
                        std::string(to_string(ea.ep.kind)) + ")");
  const auto lam_plus = ea.ep.spectrum.eigenvalues(positive_index);
  if (std::abs(lam_plus.imag()) > tol)
    throw ComplexUnstableEigenvalue("exit_direction: the expanding eigenvalue is not real");

  ExitData out;
  out.lambda_plus = lam_plus.real();
  out.Mtilde = associated_jacobian(ea, D);

  // f: eigenvector of M^T for lambda_plus.
  const Spectrum spT = eig(M.transpose());
  Eigen::Index best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < spT.eigenvalues.size(); ++i) {
    const double dist = std::abs(spT.eigenvalues(i) - lam_plus);
    if (dist < best_dist) {
      best_dist = dist;
      best = i;
    }
  }
  out.f = real_eigenvector(spT.eigenvectors.col(best), 1e-8);

  Vec dir = -(D + ea.A) * out.f;
  const double dir_norm = dir.norm();
  if (dir_norm <= 1e-12 * scale * out.f.norm())
    throw NotExitSaddle("exit_direction: -(D + A) f vanishes");
  dir /= dir_norm;

  // Orientation.
  double orient = 0.0;
  if (away_from && away_from->size() == dir.size()) orient = dir.dot(*away_from);
  if (orient == 0.0) {
    for (Eigen::Index i = 0; i < dir.size(); ++i) {
      if (std::abs(dir(i)) > 1e-12) {
        orient = dir(i);
        break;
      }
    }
  }
  if (orient < 0.0) dir = -dir;
  out.start_dir = dir;

  // The computed direction must be the expanding eigendirection of Mtilde.
  const double residual = (out.Mtilde * dir - out.lambda_plus * dir).norm();
  if (residual > 1e-8 * std::max(1.0, out.Mtilde.norm()))
    throw Error("exit_direction: start direction fails the eigenvector check, residual " +
                std::to_string(residual));

  out.spectrum_match =
      spectra_match(eig(out.Mtilde).eigenvalues, ea.ep.spectrum.eigenvalues, 1e-8 * scale);
  return out;
}

}  // namespace quasipot
