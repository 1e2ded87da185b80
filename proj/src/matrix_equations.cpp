#include "quasipot/matrix_equations.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace quasipot {

namespace {

void require_square_same(const Eigen::Ref<const Mat>& M, const Eigen::Ref<const Mat>& D,
                         const char* who) {
  if (M.rows() != M.cols() || D.rows() != D.cols() || M.rows() != D.rows())
    throw Error(std::string(who) + ": M and D must be square of equal size");
}

// Smallest |lambda_i + lambda_j| over the given index pairs, relative to |M|.
double resonance_gap(const Eigen::Ref<const Mat>& M, bool include_diagonal) {
  const Spectrum sp = eig(M);
  const Eigen::Index n = sp.eigenvalues.size();
  double gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = include_diagonal ? i : i + 1; j < n; ++j)
      gap = std::min(gap, std::abs(sp.eigenvalues(i) + sp.eigenvalues(j)));
  return gap;
}

}  // namespace

std::vector<std::pair<int, int>> antisym_basis(int n) {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int k = i + 1; k < n; ++k) pairs.emplace_back(i, k);
  return pairs;
}

Mat antisym_from_coeffs(int n, const Eigen::Ref<const Vec>& alpha) {
  const auto pairs = antisym_basis(n);
  if (alpha.size() != static_cast<Eigen::Index>(pairs.size()))
    throw Error("antisym_from_coeffs: coefficient count mismatch");
  Mat A = Mat::Zero(n, n);
  for (std::size_t q = 0; q < pairs.size(); ++q) {
    A(pairs[q].first, pairs[q].second) = alpha(static_cast<Eigen::Index>(q));
    A(pairs[q].second, pairs[q].first) = -alpha(static_cast<Eigen::Index>(q));
  }
  return A;
}

Vec antisym_to_coeffs(const Eigen::Ref<const Mat>& A) {
  const int n = static_cast<int>(A.rows());
  const auto pairs = antisym_basis(n);
  Vec alpha(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t q = 0; q < pairs.size(); ++q)
    alpha(static_cast<Eigen::Index>(q)) = A(pairs[q].first, pairs[q].second);
  return alpha;
}

Mat solve_A(const Eigen::Ref<const Mat>& M, const Eigen::Ref<const Mat>& D) {
  require_square_same(M, D, "solve_A");
  const int n = static_cast<int>(M.rows());
  const auto pairs = antisym_basis(n);
  const int m = static_cast<int>(pairs.size());
  if (m == 0) return Mat::Zero(n, n);  // n = 1: the only antisymmetric matrix is 0

  const Mat rhs_mat = D * M.transpose() - M * D;
  Vec rhs(m);
  for (int q = 0; q < m; ++q) rhs(q) = rhs_mat(pairs[q].first, pairs[q].second);

  // Column q of K holds the basis coefficients of L(e_q).
  Mat K(m, m);
  for (int q = 0; q < m; ++q) {
    Vec unit = Vec::Zero(m);
    unit(q) = 1.0;
    const Mat basis = antisym_from_coeffs(n, unit);
    const Mat image = basis * M.transpose() + M * basis;
    for (int r = 0; r < m; ++r) K(r, q) = image(pairs[r].first, pairs[r].second);
  }

  Vec alpha;
  try {
    alpha = solve_linear(K, rhs);
  } catch (const SingularMatrix&) {
    const int null_dim = m - rank(K);
    throw NonUniqueSolution(
        "solve_A: the projected system is singular (some eigenvalue pair of M sums to zero)",
        null_dim);
  }
  const Mat A = antisym_from_coeffs(n, alpha);

  const double scale = M.norm() * D.norm() + M.norm() * A.norm();
  const double residual = (A * M.transpose() + M * A - rhs_mat).norm();
  if (residual > 1e-10 * std::max(1.0, scale)) {
    const int null_dim = m - rank(K);
    if (null_dim > 0)
      throw NonUniqueSolution("solve_A: near-singular system, residual " +
                                  std::to_string(residual),
                              null_dim);
    throw Error("solve_A: residual " + std::to_string(residual) + " out of tolerance");
  }
  return A;
}

double chi_2d(const Eigen::Ref<const Mat>& M, const Eigen::Ref<const Mat>& D) {
  require_square_same(M, D, "chi_2d");
  if (M.rows() != 2) throw Error("chi_2d: defined for n = 2 only");
  const double tr = M.trace();
  if (std::abs(tr) <= 1e-12 * std::max(1.0, M.norm()))
    throw TraceZero("chi_2d: trace of M vanishes");
  return (D * M.transpose() - M * D)(0, 1) / tr;
}

Mat solve_lyapunov(const Eigen::Ref<const Mat>& M, const Eigen::Ref<const Mat>& Q) {
  require_square_same(M, Q, "solve_lyapunov");
  const int n = static_cast<int>(M.rows());
  if ((Q - Q.transpose()).norm() > 1e-10 * std::max(1.0, Q.norm()))
    throw Error("solve_lyapunov: Q must be symmetric");

  if (resonance_gap(M, /*include_diagonal=*/true) <= 1e-9 * std::max(1.0, M.norm()))
    throw ResonantSpectrum("solve_lyapunov: eigenvalue pair of M sums to zero");

  // Symmetric basis: diagonal units E_ii, then E_ik + E_ki for i < k.
  struct SymIndex {
    int i, k;
  };
  std::vector<SymIndex> basis;
  for (int i = 0; i < n; ++i) basis.push_back({i, i});
  for (int i = 0; i < n; ++i)
    for (int k = i + 1; k < n; ++k) basis.push_back({i, k});
  const int m = static_cast<int>(basis.size());

  Mat K(m, m);
  for (int q = 0; q < m; ++q) {
    Mat e = Mat::Zero(n, n);
    e(basis[q].i, basis[q].k) = 1.0;
    e(basis[q].k, basis[q].i) = 1.0;
    const Mat image = M * e + e * M.transpose();
    for (int r = 0; r < m; ++r) K(r, q) = image(basis[r].i, basis[r].k);
  }
  Vec rhs(m);
  for (int r = 0; r < m; ++r) rhs(r) = Q(basis[r].i, basis[r].k);

  Vec coeffs;
  try {
    coeffs = solve_linear(K, rhs);
  } catch (const SingularMatrix&) {
    throw ResonantSpectrum("solve_lyapunov: projected system is singular");
  }
  Mat X = Mat::Zero(n, n);
  for (int q = 0; q < m; ++q) {
    X(basis[q].i, basis[q].k) = coeffs(q);
    X(basis[q].k, basis[q].i) = coeffs(q);
  }

  const double scale = std::max(1.0, M.norm() * X.norm() + Q.norm());
  if ((M * X + X * M.transpose() - Q).norm() > 1e-10 * scale)
    throw Error("solve_lyapunov: residual out of tolerance");
  return X;
}

double riccati_residual(const Eigen::Ref<const Mat>& S, const Eigen::Ref<const Mat>& M,
                        const Eigen::Ref<const Mat>& D) {
  if (S.rows() != M.rows() || S.cols() != M.cols() || D.rows() != M.rows() ||
      D.cols() != M.cols())
    throw Error("riccati_residual: shape mismatch");
  return (S * M + M.transpose() * S + 2.0 * S * D * S).norm();
}

}  // namespace quasipot
