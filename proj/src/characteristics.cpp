#include "quasipot/characteristics.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace quasipot {

const char* to_string(Termination t) {
  switch (t) {
    case Termination::TimeLimit: return "TimeLimit";
    case Termination::LeftDomain: return "LeftDomain";
    case Termination::QSingular: return "QSingular";
    case Termination::Stalled: return "Stalled";
  }
  return "?";
}

double hamiltonian(const SystemModel& m, const Eigen::Ref<const Vec>& x,
                   const Eigen::Ref<const Vec>& p) {
  const Vec a = drift_at(m, x);
  const Mat D = diffusion_at(m, x);
  return p.dot(a + D * p);
}

std::pair<Vec, Vec> ham_rhs(const SystemModel& m, const Eigen::Ref<const Vec>& x,
                            const Eigen::Ref<const Vec>& p) {
  const Vec a = drift_at(m, x);
  const Mat J = jacobian_at(m, x);
  const Mat D = diffusion_at(m, x);
  Vec dx = a + 2.0 * D * p;
  Vec dp = -J.transpose() * p;
  if (!m.constant_diffusion) {
    const std::vector<Mat> dD = diffusion_grad_at(m, x);
    for (int i = 0; i < m.n; ++i) dp(i) -= p.dot(dD[static_cast<std::size_t>(i)] * p);
  }
  return {std::move(dx), std::move(dp)};
}

namespace {

struct Derivs {
  Vec dx, dp;
  double dPhi = 0.0;
  Mat dQ, dP;
  double dphi1 = 0.0;
};

// Full right-hand side of the augmented system at one state.
Derivs augmented_rhs(const SystemModel& m, const CharState& s) {
  const int n = m.n;
  Vec a(n);
  Mat J(n, n);
  Mat Hxx = Mat::Zero(n, n);  // sum_k p_k Hess a^k, diffusion part added below
  for (int i = 0; i < n; ++i) {
    const EvalResult r = evaluate(m.drift[i], s.x);
    a(i) = r.value;
    J.row(i) = r.gradient.transpose();
    if (s.p(i) != 0.0) Hxx += s.p(i) * r.hessian;
  }

  Mat D;
  std::vector<Mat> dD;
  if (m.constant_diffusion) {
    D = m.D0;
  } else {
    D.resize(n, n);
    dD.assign(static_cast<std::size_t>(n), Mat::Zero(n, n));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const EvalResult r = evaluate(m.diffusion[i][j], s.x);
        D(i, j) = r.value;
        for (int k = 0; k < n; ++k) dD[static_cast<std::size_t>(k)](i, j) = r.gradient(k);
        const double w = s.p(i) * s.p(j);
        if (w != 0.0) Hxx += w * r.hessian;
      }
  }

  Derivs d;
  d.dx = a + 2.0 * D * s.p;
  d.dp = -J.transpose() * s.p;
  d.dPhi = s.p.dot(d.dx);

  // H_px(i,j) = dH^2/dp_i dx_j.
  Mat Hpx = J;
  if (!m.constant_diffusion) {
    for (int j = 0; j < n; ++j) {
      Hpx.col(j) += 2.0 * (dD[static_cast<std::size_t>(j)] * s.p);
      d.dp(j) -= s.p.dot(dD[static_cast<std::size_t>(j)] * s.p);
    }
  }
  d.dQ = Hpx * s.Q + 2.0 * D * s.P;
  d.dP = -Hxx * s.Q - Hpx.transpose() * s.P;

  // phi1 transport: along dx/dt the correction obeys dphi1/dt = -r with
  // grad phi = p and Hess phi = P Q^{-1}.
  const Mat S = s.Q.transpose().partialPivLu().solve(s.P.transpose()).transpose();
  double div_term = D.cwiseProduct(S).sum();
  if (!m.constant_diffusion)
    for (int i = 0; i < n; ++i) div_term += dD[static_cast<std::size_t>(i)].row(i).dot(s.p);
  const double rho = -J.trace();
  d.dphi1 = -(rho - div_term);
  return d;
}

CharState advance(const CharState& s, const Derivs& d, double h) {
  CharState out;
  out.t = s.t + h;
  out.x = s.x + h * d.dx;
  out.p = s.p + h * d.dp;
  out.Phi = s.Phi + h * d.dPhi;
  out.Q = s.Q + h * d.dQ;
  out.P = s.P + h * d.dP;
  out.phi1 = s.phi1 + h * d.dphi1;
  return out;
}

void accumulate(Derivs& acc, const Derivs& d, double w) {
  acc.dx += w * d.dx;
  acc.dp += w * d.dp;
  acc.dPhi += w * d.dPhi;
  acc.dQ += w * d.dQ;
  acc.dP += w * d.dP;
  acc.dphi1 += w * d.dphi1;
}

bool inside_box(const Vec& x, const Vec& lo, const Vec& hi) {
  if (lo.size() == 0) return true;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x(i) < lo(i) || x(i) > hi(i)) return false;
  return true;
}

Mat sqrt_inverse_spd(const Mat& S) {
  Eigen::SelfAdjointEigenSolver<Mat> es(S);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw NotPositiveDefinite("init_ring: S is not positive definite");
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

CharState ring_state(const EquilibriumAnalysis& ea, const Vec& offset) {
  CharState s;
  s.t = 0.0;
  s.x = ea.ep.x + offset;
  s.p = ea.S * offset;
  s.Phi = 0.5 * offset.dot(ea.S * offset);
  s.Q = Mat::Identity(offset.size(), offset.size());
  s.P = ea.S;
  s.phi1 = 0.0;
  return s;
}

}  // namespace

std::vector<CharState> init_ring(const EquilibriumAnalysis& ea, double radius, int k) {
  if (k <= 0) throw Error("init_ring: k must be positive");
  const int n = static_cast<int>(ea.ep.x.size());
  std::vector<Vec> dirs;
  if (n == 1) {
    dirs.push_back(Vec::Constant(1, 1.0));
    dirs.push_back(Vec::Constant(1, -1.0));
  } else if (n == 2) {
    for (int j = 0; j < k; ++j) {
      const double th = 2.0 * std::numbers::pi * j / k;
      Vec u(2);
      u << std::cos(th), std::sin(th);
      dirs.push_back(u);
    }
  } else if (n == 3) {
    // Spherical Fibonacci lattice plus antipodes: 2k directions.
    const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int j = 0; j < k; ++j) {
      const double z = 1.0 - 2.0 * (j + 0.5) / k;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden_angle * j;
      Vec u(3);
      u << r * std::cos(phi), r * std::sin(phi), z;
      dirs.push_back(u);
      dirs.push_back(-u);
    }
  } else {
    // Deterministic pseudo-random directions plus antipodes.
    std::mt19937_64 rng(0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int j = 0; j < k; ++j) {
      Vec u(n);
      for (int i = 0; i < n; ++i) u(i) = normal(rng);
      u /= u.norm();
      dirs.push_back(u);
      dirs.push_back(-u);
    }
  }

  const Mat shape = sqrt_inverse_spd(ea.S);  // maps the unit sphere to the Phi ellipse
  std::vector<CharState> states;
  states.reserve(dirs.size());
  for (const Vec& u : dirs) states.push_back(ring_state(ea, radius * (shape * u)));
  return states;
}

std::pair<CharState, CharState> launch_exit(const EquilibriumAnalysis& ea, const ExitData& exit,
                                            double delta) {
  const Vec offset = delta * exit.start_dir;
  return {ring_state(ea, offset), ring_state(ea, -offset)};
}

Characteristic integrate(const SystemModel& m, const CharState& start,
                         const IntegrateOptions& opts) {
  if (!(opts.dt > 0.0)) throw Error("integrate: dt must be positive");
  if (opts.box_lo.size() != opts.box_hi.size())
    throw Error("integrate: inconsistent domain box");

  Characteristic out;
  CharState s = start;
  out.samples.push_back(s);

  const long max_steps = static_cast<long>(std::ceil(opts.t_max / opts.dt - 1e-12));
  long since_record = 0;
  out.termination = Termination::TimeLimit;

  for (long step = 0; step < max_steps; ++step) {
    if (cond(s.Q) > opts.q_cond_cap) {
      out.termination = Termination::QSingular;
      break;
    }
    const Derivs k1 = augmented_rhs(m, s);
    if (k1.dx.norm() <= 1e-12) {
      out.termination = Termination::Stalled;
      break;
    }
    const double h = opts.dt;
    const Derivs k2 = augmented_rhs(m, advance(s, k1, 0.5 * h));
    const Derivs k3 = augmented_rhs(m, advance(s, k2, 0.5 * h));
    const Derivs k4 = augmented_rhs(m, advance(s, k3, h));
    Derivs total = k1;
    accumulate(total, k2, 2.0);
    accumulate(total, k3, 2.0);
    accumulate(total, k4, 1.0);
    CharState next = advance(s, total, h / 6.0);
    next.t = s.t + h;
    s = std::move(next);

    const double H = hamiltonian(m, s.x, s.p);
    const double h_scale =
        std::max(1.0, s.p.squaredNorm() * diffusion_at(m, s.x).norm());
    out.max_abs_H = std::max(out.max_abs_H, std::abs(H));
    if (std::abs(H) > opts.h_tol * h_scale)
      throw StepRejected("integrate: |H| = " + std::to_string(H) +
                         " drifted beyond tolerance; reduce dt");

    ++since_record;
    if (since_record >= opts.record_stride) {
      out.samples.push_back(s);
      since_record = 0;
    }
    if (!inside_box(s.x, opts.box_lo, opts.box_hi)) {
      out.termination = Termination::LeftDomain;
      break;
    }
  }

  if (since_record != 0 || out.samples.size() == 1) {
    if (out.samples.back().t != s.t) out.samples.push_back(s);
  }
  return out;
}

double default_dt(const EquilibriumAnalysis& ea) {
  double rate = 0.0;
  for (Eigen::Index i = 0; i < ea.ep.spectrum.eigenvalues.size(); ++i)
    rate = std::max(rate, std::abs(ea.ep.spectrum.eigenvalues(i).real()));
  if (rate <= 0.0) return 1e-3;
  return 1e-3 / rate;
}

}  // namespace quasipot
