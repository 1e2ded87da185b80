#pragma once

#include <utility>
#include <vector>

#include "quasipot/exit_problem.hpp"
#include "quasipot/local_analysis.hpp"

namespace quasipot {

/// One point of a characteristic of H = p . (a(x) + D(x) p), carrying the
/// accumulated quasipotential Phi, the variational blocks (Q, P) that
/// transport the second derivatives (S = P Q^{-1} where Q is invertible), and
/// the order-eps correction phi1.
struct CharState {
  double t = 0.0;
  Vec x, p;
  double Phi = 0.0;
  Mat Q, P;
  double phi1 = 0.0;
};

enum class Termination { TimeLimit, LeftDomain, QSingular, Stalled };

const char* to_string(Termination t);

struct Characteristic {
  std::vector<CharState> samples;
  Termination termination = Termination::TimeLimit;
  double max_abs_H = 0.0;
};

struct IntegrateOptions {
  double dt = 1e-3;
  double t_max = 10.0;
  Vec box_lo, box_hi;        // empty: unbounded
  double q_cond_cap = 1e6;
  int record_stride = 1;     // record every k-th step (start and end always kept)
  double h_tol = 1e-5;       // StepRejected when |H| exceeds h_tol * scale
};

double hamiltonian(const SystemModel& m, const Eigen::Ref<const Vec>& x,
                   const Eigen::Ref<const Vec>& p);

/// Right-hand sides dx = a + 2 D p and dp_i = -p_k da^k/dx^i - p_j p_k dD^{jk}/dx^i.
std::pair<Vec, Vec> ham_rhs(const SystemModel& m, const Eigen::Ref<const Vec>& x,
                            const Eigen::Ref<const Vec>& p);

/// k starting states on the ellipse {d : d^T S d = radius^2} around an EP
/// with positive definite S (2k states from antipodal sphere points for
/// n >= 3). Each state carries p = S d, Phi = d^T S d / 2, Q = I, P = S.
std::vector<CharState> init_ring(const EquilibriumAnalysis& ea, double radius, int k);

/// Two states offset by +-delta along the unstable direction at a saddle.
std::pair<CharState, CharState> launch_exit(const EquilibriumAnalysis& ea, const ExitData& exit,
                                            double delta);

/// Classical fixed-step RK4 on the augmented system (x, p, Phi, Q, P, phi1).
/// Stops on t_max, on leaving the box, on cond(Q) exceeding q_cond_cap, or on
/// |dx/dt| below 1e-12 (Stalled). Throws StepRejected if |H| drifts beyond
/// h_tol * max(1, |p|^2 |D|).
Characteristic integrate(const SystemModel& m, const CharState& start,
                         const IntegrateOptions& opts);

/// 1e-3 over the fastest contraction/expansion rate of the EP spectrum.
double default_dt(const EquilibriumAnalysis& ea);

}  // namespace quasipot
