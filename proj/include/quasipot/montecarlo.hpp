#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "quasipot/model.hpp"

namespace quasipot {

/// Euler-Maruyama configuration. The per-step noise is
/// sqrt(2 * epsilon * dt) * L(x) * z with L L^T = D(x) and z standard normal
/// from a counter-based generator keyed by (seed, path, step), so runs are
/// deterministic and paths are independent of execution order.
struct SimConfig {
  double epsilon = 0.1;
  double dt = 1e-2;
  long n_steps = 100000;
  long burn_in = 0;
  int n_paths = 1;
  std::uint64_t seed = 0;
  double guard_radius = 1e6;  // Diverged beyond this
  int threads = 1;            // worker threads; results do not depend on it
};

struct McEstimate {
  Vec mean;
  Mat covariance;
  Mat std_err;        // batch-means standard error, elementwise
  long n_effective = 0;  // retained samples
  long n_batches = 0;
};

struct ExitTimeStats {
  double met = 0.0;
  double std_err = 0.0;
  std::vector<double> times;  // per exited path, in path order
  long censored = 0;          // paths that never exited within the budget
  long diverged = 0;          // paths that left the guard radius instead
};

/// Philox 4x32-10 block cipher; the standard counter-based generator for
/// reproducible parallel Monte Carlo.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Fills `out` with standard normals for the (seed, path, step) key.
void normal_draws(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                  Eigen::Ref<Vec> out);

/// Symmetric PSD square root (L L^T = D), tolerant of semidefinite D.
Mat psd_sqrt(const Eigen::Ref<const Mat>& D);

/// One Euler-Maruyama path from x0; `observe(step, x)` is called after every
/// step when provided. For a model with state-dependent diffusion the step
/// drift includes the epsilon * dD^{ij}/dx^j correction so that the sampled
/// stationary density matches the target Fokker-Planck form.
/// Throws Diverged when |x| exceeds the guard radius.
Vec simulate_path(const SystemModel& m, const Eigen::Ref<const Vec>& x0, const SimConfig& cfg,
                  std::uint64_t path_id,
                  const std::function<void(long, const Vec&)>& observe = nullptr);

/// Time-averaged covariance about the sample mean over all paths after
/// burn-in, with batch-means standard errors. Requires an attractor.
McEstimate stationary_covariance(const SystemModel& m, const EquilibriumPoint& ep,
                                 const SimConfig& cfg);

/// Mean first time the path satisfies `exit_region`, over n_paths paths
/// started at x0. Paths exhausting n_steps are counted as censored.
ExitTimeStats mean_exit_time(const SystemModel& m, const Eigen::Ref<const Vec>& x0,
                             const std::function<bool(const Vec&)>& exit_region,
                             const SimConfig& cfg);

}  // namespace quasipot
