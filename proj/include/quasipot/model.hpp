#pragma once

#include <map>
#include <string>
#include <vector>

#include "quasipot/expr.hpp"
#include "quasipot/linalg.hpp"

namespace quasipot {

/// A stochastic system dx = a(x) dt + noise with covariance rate 2*eps*D(x).
/// Drift components and diffusion entries are expressions, so exact first and
/// second derivatives are available everywhere. Built-in constructors below
/// assemble the expressions symbolically.
struct SystemModel {
  int n = 0;
  std::vector<Expr> drift;                   // a^i, length n
  std::vector<std::vector<Expr>> diffusion;  // D^{ij}, n x n, symmetric
  std::string name;
  bool constant_diffusion = false;
  Mat D0;  // cached diffusion when constant
};

SystemModel make_custom(int n, const std::vector<std::string>& drift,
                        const std::vector<std::vector<std::string>>& diffusion,
                        const std::map<std::string, double>& params = {},
                        const std::string& name = "custom");

/// Underdamped particle in a potential U(x1) with friction gamma:
/// a = (x2, -gamma*x2 - U'(x1)), D = diag(0, gamma). The potential must
/// depend on x1 only.
SystemModel make_kramers(const std::string& potential, double gamma,
                         const std::map<std::string, double>& params = {});

/// Kramers model with the quadratic potential u2*x1^2/2.
SystemModel make_kramers_quadratic(double u2, double gamma);

/// Gradient descent in a potential: a = -grad U, D = I.
SystemModel make_gradient(int n, const std::string& potential,
                          const std::map<std::string, double>& params = {});

/// Linear drift a = M x with constant diffusion D.
SystemModel make_linear(const Eigen::Ref<const Mat>& M, const Eigen::Ref<const Mat>& D);

Vec drift_at(const SystemModel& m, const Eigen::Ref<const Vec>& x);

/// Jacobian of the drift: row i is the gradient of a^i.
Mat jacobian_at(const SystemModel& m, const Eigen::Ref<const Vec>& x);

/// Sum_k p_k Hess(a^k) at x.
Mat contracted_drift_hessian(const SystemModel& m, const Eigen::Ref<const Vec>& x,
                             const Eigen::Ref<const Vec>& p);

Mat diffusion_at(const SystemModel& m, const Eigen::Ref<const Vec>& x);

/// Component i is the matrix dD/dx^i at x.
std::vector<Mat> diffusion_grad_at(const SystemModel& m, const Eigen::Ref<const Vec>& x);

/// Sum_{jk} p_j p_k Hess(D^{jk}) at x; zero for constant diffusion.
Mat contracted_diffusion_hessian(const SystemModel& m, const Eigen::Ref<const Vec>& x,
                                 const Eigen::Ref<const Vec>& p);

/// Contraction of the drift, -div a.
double drift_contraction(const SystemModel& m, const Eigen::Ref<const Vec>& x);

enum class EpKind { Attractor, Saddle, Repeller, Marginal };

const char* to_string(EpKind kind);

struct EquilibriumPoint {
  Vec x;
  Mat M;  // drift Jacobian at x
  Spectrum spectrum;
  EpKind kind = EpKind::Marginal;
};

struct SeedFailure {
  Vec seed;
  std::string reason;
};

struct EquilibriaResult {
  std::vector<EquilibriumPoint> points;    // deduplicated, sorted by coordinates
  std::vector<SeedFailure> failures;
};

/// Damped Newton refinement of a(x) = 0 from every seed. Non-converging seeds
/// are reported in `failures`, not thrown. Each converged point satisfies
/// |a(x)| <= tol * (1 + |M| |x|).
EquilibriaResult find_equilibria(const SystemModel& m, const std::vector<Vec>& seeds,
                                 double tol = 1e-12);

/// Builds the equilibrium record at a known root; verifies |a(x)| <= tol.
EquilibriumPoint equilibrium_at(const SystemModel& m, const Eigen::Ref<const Vec>& x,
                                double tol = 1e-8);

/// Classification threshold on Re(lambda).
inline constexpr double kKindTol = 1e-9;

EpKind classify(const Spectrum& spectrum);

}  // namespace quasipot
