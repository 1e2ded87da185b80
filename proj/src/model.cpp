#include "quasipot/model.hpp"

#include <algorithm>
#include <cmath>

namespace quasipot {

namespace {

void validate_shapes(const SystemModel& m) {
  if (m.n <= 0) throw Error("model dimension must be positive");
  if (static_cast<int>(m.drift.size()) != m.n) throw Error("drift must have n components");
  if (static_cast<int>(m.diffusion.size()) != m.n) throw Error("diffusion must be n x n");
  for (const auto& row : m.diffusion)
    if (static_cast<int>(row.size()) != m.n) throw Error("diffusion must be n x n");
}

void finalize(SystemModel& m) {
  validate_shapes(m);
  m.constant_diffusion = true;
  for (const auto& row : m.diffusion)
    for (const auto& e : row)
      if (!e.is_constant()) m.constant_diffusion = false;
  if (m.constant_diffusion) {
    const Vec origin = Vec::Zero(m.n);
    m.D0 = Mat(m.n, m.n);
    for (int i = 0; i < m.n; ++i)
      for (int j = 0; j < m.n; ++j) m.D0(i, j) = evaluate_value(m.diffusion[i][j], origin);
  }
  // Diffusion must be symmetric and nonnegative wherever it is used; probe a
  // few points now so malformed models fail at construction.
  std::vector<Vec> probes = {Vec::Zero(m.n), Vec::Constant(m.n, 0.5), Vec::Constant(m.n, -1.0)};
  for (const auto& x : probes) {
    Mat D;
    try {
      D = diffusion_at(m, x);
    } catch (const DomainError&) {
      continue;  // probe outside the model's domain
    }
    const double scale = D.norm();
    if ((D - D.transpose()).norm() > 1e-12 * std::max(1.0, scale))
      throw Error("diffusion matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (D + D.transpose()));
    if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, scale))
      throw Error("diffusion matrix is not positive semidefinite");
  }
}

}  // namespace

SystemModel make_custom(int n, const std::vector<std::string>& drift,
                        const std::vector<std::vector<std::string>>& diffusion,
                        const std::map<std::string, double>& params, const std::string& name) {
  SystemModel m;
  m.n = n;
  m.name = name;
  for (const auto& src : drift) m.drift.push_back(parse(src, n, params));
  for (const auto& row : diffusion) {
    std::vector<Expr> r;
    for (const auto& src : row) r.push_back(parse(src, n, params));
    m.diffusion.push_back(std::move(r));
  }
  finalize(m);
  return m;
}

SystemModel make_kramers(const std::string& potential, double gamma,
                         const std::map<std::string, double>& params) {
  if (!(gamma > 0.0)) throw Error("kramers: gamma must be positive");
  const Expr U = parse(potential, 2, params);
  if (U.depends_on(1)) throw Error("kramers: potential must depend on x1 only");
  SystemModel m;
  m.n = 2;
  m.name = "kramers";
  const Expr x2 = Expr::variable(1);
  const Expr g = Expr::literal(gamma);
  m.drift.push_back(x2);
  m.drift.push_back(-g * x2 - differentiate(U, 0));
  const Expr zero = Expr::literal(0.0);
  m.diffusion = {{zero, zero}, {zero, g}};
  finalize(m);
  return m;
}

SystemModel make_kramers_quadratic(double u2, double gamma) {
  return make_kramers("u2*x1^2/2", gamma, {{"u2", u2}});
}

SystemModel make_gradient(int n, const std::string& potential,
                          const std::map<std::string, double>& params) {
  const Expr U = parse(potential, n, params);
  SystemModel m;
  m.n = n;
  m.name = "gradient";
  for (int i = 0; i < n; ++i) m.drift.push_back(-differentiate(U, i));
  for (int i = 0; i < n; ++i) {
    std::vector<Expr> row;
    for (int j = 0; j < n; ++j) row.push_back(Expr::literal(i == j ? 1.0 : 0.0));
    m.diffusion.push_back(std::move(row));
  }
  finalize(m);
  return m;
}

SystemModel make_linear(const Eigen::Ref<const Mat>& M, const Eigen::Ref<const Mat>& D) {
  const int n = static_cast<int>(M.rows());
  if (M.cols() != n || D.rows() != n || D.cols() != n)
    throw Error("linear model: M and D must be square of equal size");
  SystemModel m;
  m.n = n;
  m.name = "linear";
  for (int i = 0; i < n; ++i) {
    Expr ai = Expr::literal(0.0);
    for (int j = 0; j < n; ++j) ai = ai + Expr::literal(M(i, j)) * Expr::variable(j);
    m.drift.push_back(ai);
  }
  for (int i = 0; i < n; ++i) {
    std::vector<Expr> row;
    for (int j = 0; j < n; ++j) row.push_back(Expr::literal(D(i, j)));
    m.diffusion.push_back(std::move(row));
  }
  finalize(m);
  return m;
}

Vec drift_at(const SystemModel& m, const Eigen::Ref<const Vec>& x) {
  Vec a(m.n);
  for (int i = 0; i < m.n; ++i) a(i) = evaluate_value(m.drift[i], x);
  return a;
}

Mat jacobian_at(const SystemModel& m, const Eigen::Ref<const Vec>& x) {
  Mat J(m.n, m.n);
  for (int i = 0; i < m.n; ++i) J.row(i) = evaluate(m.drift[i], x).gradient.transpose();
  return J;
}

Mat contracted_drift_hessian(const SystemModel& m, const Eigen::Ref<const Vec>& x,
                             const Eigen::Ref<const Vec>& p) {
  Mat H = Mat::Zero(m.n, m.n);
  for (int i = 0; i < m.n; ++i) {
    if (p(i) == 0.0) continue;
    H += p(i) * evaluate(m.drift[i], x).hessian;
  }
  return H;
}

Mat diffusion_at(const SystemModel& m, const Eigen::Ref<const Vec>& x) {
  if (m.constant_diffusion) return m.D0;
  Mat D(m.n, m.n);
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j) D(i, j) = evaluate_value(m.diffusion[i][j], x);
  return D;
}

std::vector<Mat> diffusion_grad_at(const SystemModel& m, const Eigen::Ref<const Vec>& x) {
  std::vector<Mat> dD(static_cast<std::size_t>(m.n), Mat::Zero(m.n, m.n));
  if (m.constant_diffusion) return dD;
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j) {
      const Vec g = evaluate(m.diffusion[i][j], x).gradient;
      for (int k = 0; k < m.n; ++k) dD[static_cast<std::size_t>(k)](i, j) = g(k);
    }
  return dD;
}

Mat contracted_diffusion_hessian(const SystemModel& m, const Eigen::Ref<const Vec>& x,
                                 const Eigen::Ref<const Vec>& p) {
  Mat H = Mat::Zero(m.n, m.n);
  if (m.constant_diffusion) return H;
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j) {
      const double w = p(i) * p(j);
      if (w == 0.0) continue;
      H += w * evaluate(m.diffusion[i][j], x).hessian;
    }
  return H;
}

double drift_contraction(const SystemModel& m, const Eigen::Ref<const Vec>& x) {
  double rho = 0.0;
  for (int i = 0; i < m.n; ++i) rho -= evaluate(m.drift[i], x).gradient(i);
  return rho;
}

const char* to_string(EpKind kind) {
  switch (kind) {
    case EpKind::Attractor: return "Attractor";
    case EpKind::Saddle: return "Saddle";
    case EpKind::Repeller: return "Repeller";
    case EpKind::Marginal: return "Marginal";
  }
  return "?";
}

EpKind classify(const Spectrum& spectrum) {
  bool any_pos = false, any_neg = false, any_marginal = false;
  for (Eigen::Index i = 0; i < spectrum.eigenvalues.size(); ++i) {
    const double re = spectrum.eigenvalues(i).real();
    if (std::abs(re) <= kKindTol) {
      any_marginal = true;
    } else if (re > 0.0) {
      any_pos = true;
    } else {
      any_neg = true;
    }
  }
  if (any_marginal) return EpKind::Marginal;
  if (any_pos && any_neg) return EpKind::Saddle;
  if (any_pos) return EpKind::Repeller;
  return EpKind::Attractor;
}

EquilibriumPoint equilibrium_at(const SystemModel& m, const Eigen::Ref<const Vec>& x,
                                double tol) {
  EquilibriumPoint ep;
  ep.x = x;
  ep.M = jacobian_at(m, x);
  const double scale = 1.0 + ep.M.norm() * x.norm();
  const double residual = drift_at(m, x).norm();
  if (residual > tol * scale) {
    throw Error("equilibrium_at: |a(x)| = " + std::to_string(residual) +
                " is not an equilibrium at tolerance " + std::to_string(tol));
  }
  ep.spectrum = eig(ep.M);
  ep.kind = classify(ep.spectrum);
  return ep;
}

namespace {

// One damped Newton run; returns true on convergence.
bool newton_refine(const SystemModel& m, Vec& x, double tol, std::string* reason) {
  constexpr int kMaxIter = 60;
  Vec a = drift_at(m, x);
  for (int iter = 0; iter < kMaxIter; ++iter) {
    const Mat J = jacobian_at(m, x);
    if (a.norm() <= tol * (1.0 + J.norm() * x.norm())) return true;
    Vec step;
    try {
      step = solve_linear(J, -a);
    } catch (const SingularMatrix&) {
      // Least-squares (pseudo-inverse) step through the singular Jacobian.
      step = J.completeOrthogonalDecomposition().solve(-a);
    }
    if (!step.allFinite() || step.norm() == 0.0) {
      *reason = "stalled (zero or non-finite Newton step)";
      return false;
    }
    // Backtrack until the residual decreases.
    double lambda = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt) {
      const Vec trial = x + lambda * step;
      Vec a_trial;
      try {
        a_trial = drift_at(m, trial);
      } catch (const DomainError&) {
        lambda *= 0.5;
        continue;
      }
      if (a_trial.norm() < a.norm() || lambda * step.norm() < 1e-16 * (1.0 + x.norm())) {
        x = trial;
        a = a_trial;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) {
      *reason = "no residual decrease along the Newton direction";
      return false;
    }
  }
  *reason = "iteration cap reached";
  return false;
}

}  // namespace

EquilibriaResult find_equilibria(const SystemModel& m, const std::vector<Vec>& seeds,
                                 double tol) {
  if (seeds.empty()) throw Error("find_equilibria: seeds must be nonempty");
  EquilibriaResult out;
  for (const Vec& seed : seeds) {
    if (seed.size() != m.n) throw Error("find_equilibria: seed dimension mismatch");
    Vec x = seed;
    std::string reason;
    bool ok;
    try {
      ok = newton_refine(m, x, tol, &reason);
    } catch (const DomainError& e) {
      ok = false;
      reason = e.what();
    }
    if (!ok) {
      out.failures.push_back({seed, reason});
      continue;
    }
    const bool duplicate =
        std::any_of(out.points.begin(), out.points.end(), [&](const EquilibriumPoint& p) {
          return (p.x - x).norm() <= 1e-8 * (1.0 + x.norm());
        });
    if (duplicate) continue;
    EquilibriumPoint ep;
    ep.x = x;
    ep.M = jacobian_at(m, x);
    ep.spectrum = eig(ep.M);
    ep.kind = classify(ep.spectrum);
    out.points.push_back(std::move(ep));
  }
  std::sort(out.points.begin(), out.points.end(),
            [](const EquilibriumPoint& a, const EquilibriumPoint& b) {
              return std::lexicographical_compare(a.x.data(), a.x.data() + a.x.size(),
                                                  b.x.data(), b.x.data() + b.x.size());
            });
  return out;
}

}  // namespace quasipot
