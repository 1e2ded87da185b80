#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "quasipot/characteristics.hpp"
#include "test_util.hpp"

using namespace quasipot;

namespace {

Vec point(std::initializer_list<double> values) {
  Vec x(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) x(i++) = v;
  return x;
}

EquilibriumAnalysis analyze_at(const SystemModel& m, const Vec& x) {
  return analyze_ep(m, equilibrium_at(m, x));
}

Vec box_around(const Vec& lo_hi, int) { return lo_hi; }

}  // namespace

TEST_CASE("ham_rhs") {
  const SystemModel m = make_kramers("x1^4/4 - x1^2/2", 1.5);
  const Vec x = point({0.7, -0.4});

  SUBCASE("zero momentum degenerates to the drift") {
    const auto [dx, dp] = ham_rhs(m, x, Vec::Zero(2));
    CHECK((dx - drift_at(m, x)).norm() == 0.0);
    CHECK(dp.norm() == 0.0);
  }
  SUBCASE("equilibrium-form momentum reverses the dissipation") {
    const double gamma = 1.5;
    const double Uprime = x(0) * x(0) * x(0) - x(0);
    Vec p(2);
    p << Uprime, x(1);
    const auto [dx, dp] = ham_rhs(m, x, p);
    CHECK(dx(0) == doctest::Approx(x(1)));
    CHECK(dx(1) == doctest::Approx(gamma * x(1) - Uprime));
  }
  SUBCASE("constant diffusion: dp = -J^T p") {
    std::mt19937_64 rng(3);
    const Vec p = qptest::random_vec(rng, 2);
    const auto [dx, dp] = ham_rhs(m, x, p);
    CHECK((dp + jacobian_at(m, x).transpose() * p).norm() <= 1e-14);
  }
  SUBCASE("state-dependent diffusion contributes its gradient term") {
    const SystemModel vd = make_custom(1, {"-x1"}, {{"1 + x1^2"}});
    Vec x1(1), p1(1);
    x1 << 2.0;
    p1 << 0.5;
    const auto [dx, dp] = ham_rhs(vd, x1, p1);
    CHECK(dx(0) == doctest::Approx(-2.0 + 2.0 * 5.0 * 0.5));
    CHECK(dp(0) == doctest::Approx(0.5 - 0.25 * 4.0));  // -p a_x - p^2 dD/dx
  }
}

TEST_CASE("hamiltonian vanishes on the ring to high order") {
  const SystemModel m = make_kramers_quadratic(2.0, 3.0);
  const EquilibriumAnalysis ea = analyze_at(m, Vec::Zero(2));
  for (const CharState& s : init_ring(ea, 1e-4, 8))
    CHECK(std::abs(hamiltonian(m, s.x, s.p)) <= 1e-14);
}

TEST_CASE("init_ring geometry") {
  const SystemModel m = make_kramers_quadratic(2.0, 3.0);
  const EquilibriumAnalysis ea = analyze_at(m, Vec::Zero(2));

  SUBCASE("radius zero collapses to the equilibrium") {
    for (const CharState& s : init_ring(ea, 0.0, 4)) {
      CHECK(s.x.norm() == 0.0);
      CHECK(s.p.norm() == 0.0);
      CHECK(s.Phi == 0.0);
    }
  }
  SUBCASE("axis points of the S-ellipse") {
    const double rho = 0.3;
    const auto ring = init_ring(ea, rho, 4);
    REQUIRE(ring.size() == 4);
    CHECK(ring[0].x(0) == doctest::Approx(rho / std::sqrt(2.0)));
    CHECK(std::abs(ring[0].x(1)) <= 1e-15);
    CHECK(ring[1].x(1) == doctest::Approx(rho));
    CHECK(std::abs(ring[1].x(0)) <= 1e-15);
    for (const CharState& s : ring) {
      CHECK(s.Phi == doctest::Approx(0.5 * rho * rho));
      CHECK((s.p - ea.S * s.x).norm() <= 1e-15);
      CHECK((s.Q - Mat::Identity(2, 2)).norm() == 0.0);
      CHECK((s.P - ea.S).norm() == 0.0);
      CHECK(s.phi1 == 0.0);
    }
  }
  SUBCASE("three dimensions produce antipodal pairs on the energy shell") {
    Mat M3 = Mat::Zero(3, 3);
    M3.diagonal() << -1.0, -2.0, -3.0;
    const SystemModel m3 = make_linear(M3, Mat::Identity(3, 3));
    const EquilibriumAnalysis ea3 = analyze_at(m3, Vec::Zero(3));
    const double rho = 0.2;
    const auto ring = init_ring(ea3, rho, 5);
    CHECK(ring.size() == 10);
    for (const CharState& s : ring)
      CHECK(s.x.dot(ea3.S * s.x) == doctest::Approx(rho * rho).epsilon(1e-12));
  }
  SUBCASE("rejects indefinite Hessians") {
    const SystemModel saddle = make_kramers_quadratic(-2.0, 1.0);
    const EquilibriumAnalysis sa = analyze_at(saddle, Vec::Zero(2));
    CHECK_THROWS_AS(init_ring(sa, 0.1, 4), NotPositiveDefinite);
  }
}

TEST_CASE("launch_exit") {
  const SystemModel m = make_kramers_quadratic(-2.0, 1.0);
  const EquilibriumAnalysis ea = analyze_at(m, Vec::Zero(2));
  const ExitData exit = exit_direction(ea, ea.D);

  SUBCASE("zero offset sits at the saddle") {
    const auto [a, b] = launch_exit(ea, exit, 0.0);
    CHECK(a.x.norm() == 0.0);
    CHECK(a.p.norm() == 0.0);
    CHECK(b.x.norm() == 0.0);
  }
  SUBCASE("offsets along the unstable direction") {
    const double delta = 1e-3;
    const auto [a, b] = launch_exit(ea, exit, delta);
    Vec dir(2);
    dir << 1.0, -1.0;
    dir /= dir.norm();
    CHECK((a.x - delta * dir).norm() <= 1e-12);
    CHECK((b.x + delta * dir).norm() <= 1e-12);
    CHECK((a.p - ea.S * a.x).norm() <= 1e-15);
  }
}

TEST_CASE("gradient double well: Phi, S and phi1 follow the potential") {
  const SystemModel m = make_gradient(2, "x1^4/4 - x1^2/2 + x2^2/2");
  const auto found = find_equilibria(m, {point({1.0, 0.0})});
  const EquilibriumAnalysis ea = analyze_ep(m, found.points.at(0));

  IntegrateOptions opts;
  opts.dt = 5e-4;
  opts.t_max = 16.0;
  opts.record_stride = 100;
  opts.box_lo = point({-2.5, -2.5});
  opts.box_hi = point({2.5, 2.5});

  const double u_min = -0.25;
  for (const CharState& start : init_ring(ea, 5e-7, 8)) {
    const Characteristic traj = integrate(m, start, opts);
    CHECK(traj.max_abs_H <= 1e-6);
    double prev_phi = -1e300;
    for (const CharState& s : traj.samples) {
      if (cond(s.Q) >= 1e6) break;
      const double u = std::pow(s.x(0), 4) / 4.0 - s.x(0) * s.x(0) / 2.0 +
                       s.x(1) * s.x(1) / 2.0;
      CHECK(std::abs(s.Phi - (u - u_min)) <= 1e-6);
      CHECK(std::abs(s.phi1) <= 1e-6);
      CHECK(s.Phi >= prev_phi - 1e-12);  // nondecreasing from an attractor
      prev_phi = s.Phi;
      if (cond(s.Q) < 1e5) {
        const Mat S = s.Q.transpose().partialPivLu().solve(s.P.transpose()).transpose();
        CHECK((S - S.transpose()).norm() <= 1e-6 * std::max(1.0, S.norm()));
        Mat hess_u = Mat::Zero(2, 2);
        hess_u(0, 0) = 3.0 * s.x(0) * s.x(0) - 1.0;
        hess_u(1, 1) = 1.0;
        CHECK((S - hess_u).norm() <= 1e-5 * std::max(1.0, hess_u.norm()));
      }
    }
  }
}

TEST_CASE("Kramers double well: Phi reproduces the known quasipotential globally") {
  const SystemModel m = make_kramers("x1^4/4 - x1^2/2", 1.0);
  const auto found = find_equilibria(m, {point({-1.0, 0.0})});
  const EquilibriumAnalysis ea = analyze_ep(m, found.points.at(0));

  IntegrateOptions opts;
  opts.dt = 2e-3;
  opts.t_max = 14.0;
  opts.record_stride = 50;
  opts.box_lo = point({-3.0, -3.0});
  opts.box_hi = point({3.0, 3.0});

  const double phi_min = -0.25;  // U(-1)
  for (const CharState& start : init_ring(ea, 1e-3, 8)) {
    const Characteristic traj = integrate(m, start, opts);
    CHECK(traj.max_abs_H <= 1e-6);
    for (const CharState& s : traj.samples) {
      if (cond(s.Q) >= 1e6) break;
      const double phi_eq = std::pow(s.x(0), 4) / 4.0 - s.x(0) * s.x(0) / 2.0 +
                            s.x(1) * s.x(1) / 2.0;
      CHECK(std::abs(s.Phi - (phi_eq - phi_min)) <= 1e-5);
    }
  }
}

TEST_CASE("zero momentum off the equilibrium follows the plain drift") {
  const SystemModel m = make_kramers("x1^4/4 - x1^2/2", 1.0);
  CharState s;
  s.x = point({0.5, 0.3});
  s.p = Vec::Zero(2);
  s.Q = Mat::Identity(2, 2);
  s.P = Mat::Zero(2, 2);

  IntegrateOptions opts;
  opts.dt = 1e-3;
  opts.t_max = 2.0;
  opts.record_stride = 1;
  const Characteristic traj = integrate(m, s, opts);
  for (const CharState& sample : traj.samples) {
    CHECK(sample.p.norm() == 0.0);
    CHECK(sample.Phi == 0.0);
  }
  // Independent RK4 of dx/dt = a(x) must land on the same endpoint.
  Vec x = s.x;
  const double h = opts.dt;
  const long steps = static_cast<long>(std::llround(opts.t_max / h));
  for (long k = 0; k < steps; ++k) {
    const Vec k1 = drift_at(m, x);
    const Vec k2 = drift_at(m, x + 0.5 * h * k1);
    const Vec k3 = drift_at(m, x + 0.5 * h * k2);
    const Vec k4 = drift_at(m, x + h * k3);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  CHECK((traj.samples.back().x - x).norm() <= 1e-12);
}

TEST_CASE("dPhi/dt equals p . dx/dt along characteristics") {
  const SystemModel m = make_kramers_quadratic(2.0, 3.0);
  const EquilibriumAnalysis ea = analyze_at(m, Vec::Zero(2));
  IntegrateOptions opts;
  opts.dt = 1e-3;
  opts.t_max = 1.5;
  opts.record_stride = 1;
  const Characteristic traj = integrate(m, init_ring(ea, 1e-2, 4).at(0), opts);
  REQUIRE(traj.samples.size() > 10);
  for (std::size_t k = 1; k + 1 < traj.samples.size(); k += 97) {
    const auto& prev = traj.samples[k - 1];
    const auto& cur = traj.samples[k];
    const auto& next = traj.samples[k + 1];
    const double fd = (next.Phi - prev.Phi) / (next.t - prev.t);
    const auto [dx, dp] = ham_rhs(m, cur.x, cur.p);
    CHECK(std::abs(fd - cur.p.dot(dx)) <= 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("termination reasons") {
  const SystemModel m = make_kramers_quadratic(2.0, 3.0);
  const EquilibriumAnalysis ea = analyze_at(m, Vec::Zero(2));

  SUBCASE("stalled at the equilibrium") {
    IntegrateOptions opts;
    opts.dt = 1e-3;
    opts.t_max = 1.0;
    const Characteristic traj = integrate(m, init_ring(ea, 0.0, 1).at(0), opts);
    CHECK(traj.termination == Termination::Stalled);
    CHECK(traj.samples.size() == 1);
  }
  SUBCASE("time limit zero keeps only the initial row") {
    IntegrateOptions opts;
    opts.dt = 1e-3;
    opts.t_max = 0.0;
    const Characteristic traj = integrate(m, init_ring(ea, 0.1, 4).at(0), opts);
    CHECK(traj.termination == Termination::TimeLimit);
    CHECK(traj.samples.size() == 1);
  }
  SUBCASE("leaving the box") {
    IntegrateOptions opts;
    opts.dt = 1e-3;
    opts.t_max = 50.0;
    opts.box_lo = box_around(point({-0.5, -0.5}), 2);
    opts.box_hi = point({0.5, 0.5});
    const Characteristic traj = integrate(m, init_ring(ea, 0.05, 4).at(0), opts);
    CHECK(traj.termination == Termination::LeftDomain);
  }
  SUBCASE("ill-conditioned variational block stops the run") {
    // The inward Kramers saddle characteristic contracts in one direction and
    // expands in the other, so cond(Q) grows without bound.
    const SystemModel saddle = make_kramers_quadratic(-2.0, 1.0);
    const EquilibriumAnalysis sa = analyze_at(saddle, Vec::Zero(2));
    const ExitData exit = exit_direction(sa, sa.D);
    IntegrateOptions opts;
    opts.dt = 2e-3;
    opts.t_max = 100.0;
    opts.q_cond_cap = 1e4;
    opts.box_lo = point({-50.0, -50.0});
    opts.box_hi = point({50.0, 50.0});
    const auto [fwd, bwd] = launch_exit(sa, exit, 1e-6);
    const Characteristic traj = integrate(saddle, fwd, opts);
    CHECK((traj.termination == Termination::QSingular ||
           traj.termination == Termination::LeftDomain));
  }
  SUBCASE("tight energy tolerance rejects the step") {
    // The quartic well is nonlinear, so RK4 carries a small but nonzero
    // energy drift that a 1e-15 tolerance must reject.
    const SystemModel dw = make_kramers("x1^4/4 - x1^2/2", 1.0);
    const auto found = find_equilibria(dw, {point({-1.0, 0.0})});
    const EquilibriumAnalysis da = analyze_ep(dw, found.points.at(0));
    IntegrateOptions opts;
    opts.dt = 2e-3;
    opts.t_max = 14.0;
    opts.h_tol = 1e-15;
    CHECK_THROWS_AS(integrate(dw, init_ring(da, 1e-3, 4).at(0), opts), StepRejected);
  }
}

TEST_CASE("default_dt scales with the fastest rate") {
  const SystemModel m = make_kramers_quadratic(2.0, 3.0);  // rates 1 and 2
  const EquilibriumAnalysis ea = analyze_at(m, Vec::Zero(2));
  CHECK(default_dt(ea) == doctest::Approx(5e-4));
}
