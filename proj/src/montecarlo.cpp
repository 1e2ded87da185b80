#include "quasipot/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <thread>

namespace quasipot {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void philox_round(std::array<std::uint32_t, 4>& c, const std::array<std::uint32_t, 2>& k) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c[2];
  const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

inline double uniform_from_u64(std::uint64_t bits, bool open_at_zero) {
  // 53-bit mantissa; +1 keeps the value in (0, 1] so log() is safe.
  const std::uint64_t mant = bits >> 11;
  return (static_cast<double>(mant) + (open_at_zero ? 1.0 : 0.0)) * 0x1p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    philox_round(counter, key);
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return counter;
}

void normal_draws(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                  Eigen::Ref<Vec> out) {
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed),
                                            static_cast<std::uint32_t>(seed >> 32)};
  const Eigen::Index n = out.size();
  for (Eigen::Index i = 0; i < n; i += 2) {
    const std::array<std::uint32_t, 4> counter = {
        static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
        static_cast<std::uint32_t>(path),
        static_cast<std::uint32_t>(path >> 32) ^ (static_cast<std::uint32_t>(i / 2) << 8)};
    const auto r = philox4x32_10(counter, key);
    const std::uint64_t u64a = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
    const std::uint64_t u64b = (static_cast<std::uint64_t>(r[2]) << 32) | r[3];
    const double u1 = uniform_from_u64(u64a, /*open_at_zero=*/true);
    const double u2 = uniform_from_u64(u64b, /*open_at_zero=*/false);
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    out(i) = rad * std::cos(ang);
    if (i + 1 < n) out(i + 1) = rad * std::sin(ang);
  }
}

Mat psd_sqrt(const Eigen::Ref<const Mat>& D) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (D + D.transpose()));
  const double scale = std::max(1.0, D.norm());
  if (es.eigenvalues().minCoeff() < -1e-10 * scale)
    throw Error("psd_sqrt: matrix is not positive semidefinite");
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

namespace {

// Euler-Maruyama core shared by all entry points. Observer signature:
// void(long step, const Vec& x) called after each step, step in [1, n_steps];
// it may return false to stop early (exit-time runs).
template <class Observer>
void run_path(const SystemModel& m, Vec x, const SimConfig& cfg, std::uint64_t path_id,
              Observer&& observe) {
  const int n = m.n;
  const double root = std::sqrt(2.0 * cfg.epsilon * cfg.dt);
  Mat L;
  if (m.constant_diffusion) L = psd_sqrt(m.D0);
  Vec a(n), z(n), noise(n);
  for (long step = 1; step <= cfg.n_steps; ++step) {
    for (int i = 0; i < n; ++i) a(i) = evaluate_value(m.drift[i], x);
    if (!m.constant_diffusion) {
      // Drift correction matching the stationary Fokker-Planck form.
      const std::vector<Mat> dD = diffusion_grad_at(m, x);
      for (int i = 0; i < n; ++i) {
        double c = 0.0;
        for (int j = 0; j < n; ++j) c += dD[static_cast<std::size_t>(j)](i, j);
        a(i) += cfg.epsilon * c;
      }
      L = psd_sqrt(diffusion_at(m, x));
    }
    normal_draws(cfg.seed, path_id, static_cast<std::uint64_t>(step), z);
    noise.noalias() = L * z;
    x += cfg.dt * a + root * noise;
    if (!x.allFinite() || x.norm() > cfg.guard_radius)
      throw Diverged("simulate: path " + std::to_string(path_id) + " left the guard radius at step " +
                     std::to_string(step));
    if (!observe(step, x)) return;
  }
}

void check_stability_guard(const SystemModel& m, const Eigen::Ref<const Vec>& x0,
                           const SimConfig& cfg) {
  const Spectrum sp = eig(jacobian_at(m, x0));
  double rate = 0.0;
  for (Eigen::Index i = 0; i < sp.eigenvalues.size(); ++i)
    rate = std::max(rate, std::abs(sp.eigenvalues(i).real()));
  if (cfg.dt * rate > 0.1)
    throw Error("SimConfig: dt * max|Re lambda| = " + std::to_string(cfg.dt * rate) +
                " violates the 0.1 stability guard");
}

}  // namespace

Vec simulate_path(const SystemModel& m, const Eigen::Ref<const Vec>& x0, const SimConfig& cfg,
                  std::uint64_t path_id, const std::function<void(long, const Vec&)>& observe) {
  Vec x = x0;
  Vec last = x0;
  run_path(m, x, cfg, path_id, [&](long step, const Vec& xs) {
    last = xs;
    if (observe) observe(step, xs);
    return true;
  });
  return last;
}

McEstimate stationary_covariance(const SystemModel& m, const EquilibriumPoint& ep,
                                 const SimConfig& cfg) {
  if (ep.kind != EpKind::Attractor)
    throw NotAttractor("stationary_covariance: equilibrium is not an attractor");
  if (cfg.burn_in >= cfg.n_steps) throw Error("SimConfig: burn_in must be below n_steps");
  if (cfg.n_paths < 2) throw Error("stationary_covariance: need at least 2 paths");
  check_stability_guard(m, ep.x, cfg);

  const int n = m.n;
  const long retained = cfg.n_steps - cfg.burn_in;
  const long per_path_batches = std::clamp<long>(retained / 2000, 1, 32);
  const long batch_len = (retained + per_path_batches - 1) / per_path_batches;

  struct Batch {
    Vec sum;
    Mat sum2;
    long count = 0;
  };
  std::vector<std::vector<Batch>> per_path(static_cast<std::size_t>(cfg.n_paths));

  auto worker = [&](int first, int last_excl) {
    for (int pid = first; pid < last_excl; ++pid) {
      std::vector<Batch>& batches = per_path[static_cast<std::size_t>(pid)];
      batches.assign(static_cast<std::size_t>(per_path_batches),
                     {Vec::Zero(n), Mat::Zero(n, n), 0});
      run_path(m, ep.x, cfg, static_cast<std::uint64_t>(pid), [&](long step, const Vec& x) {
        if (step > cfg.burn_in) {
          const long idx = std::min((step - cfg.burn_in - 1) / batch_len, per_path_batches - 1);
          Batch& b = batches[static_cast<std::size_t>(idx)];
          b.sum += x;
          b.sum2 += x * x.transpose();
          b.count += 1;
        }
        return true;
      });
    }
  };

  const int workers = std::clamp(cfg.threads, 1, cfg.n_paths);
  if (workers <= 1) {
    worker(0, cfg.n_paths);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (cfg.n_paths + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int first = w * chunk;
      const int last_excl = std::min(cfg.n_paths, first + chunk);
      if (first < last_excl) pool.emplace_back(worker, first, last_excl);
    }
    for (auto& t : pool) t.join();
  }

  // Merge in path order: results are independent of the thread count.
  Vec sum = Vec::Zero(n);
  Mat sum2 = Mat::Zero(n, n);
  long count = 0;
  for (const auto& batches : per_path)
    for (const Batch& b : batches) {
      sum += b.sum;
      sum2 += b.sum2;
      count += b.count;
    }

  McEstimate est;
  est.mean = sum / static_cast<double>(count);
  est.covariance = sum2 / static_cast<double>(count) - est.mean * est.mean.transpose();
  est.n_effective = count;

  Mat mean_of_batch = Mat::Zero(n, n);
  Mat var_of_batch = Mat::Zero(n, n);
  long used_batches = 0;
  for (const auto& batches : per_path)
    for (const Batch& b : batches) {
      if (b.count == 0) continue;
      const Mat cb =
          b.sum2 / static_cast<double>(b.count) - est.mean * est.mean.transpose();
      mean_of_batch += cb;
      var_of_batch += cb.cwiseProduct(cb);
      ++used_batches;
    }
  est.n_batches = used_batches;
  if (used_batches >= 2) {
    mean_of_batch /= static_cast<double>(used_batches);
    var_of_batch /= static_cast<double>(used_batches);
    const Mat var = (var_of_batch - mean_of_batch.cwiseProduct(mean_of_batch)) *
                    (static_cast<double>(used_batches) / (used_batches - 1.0));
    est.std_err = (var.cwiseMax(0.0) / static_cast<double>(used_batches)).cwiseSqrt();
  } else {
    est.std_err = Mat::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
  }
  return est;
}

ExitTimeStats mean_exit_time(const SystemModel& m, const Eigen::Ref<const Vec>& x0,
                             const std::function<bool(const Vec&)>& exit_region,
                             const SimConfig& cfg) {
  check_stability_guard(m, x0, cfg);
  ExitTimeStats out;
  if (exit_region(x0)) {
    // Already in the exit region: all exit times are zero.
    out.times.assign(static_cast<std::size_t>(cfg.n_paths), 0.0);
    out.met = 0.0;
    out.std_err = 0.0;
    return out;
  }

  // -1: censored, -2: diverged, otherwise the exit time.
  std::vector<double> per_path(static_cast<std::size_t>(cfg.n_paths), -1.0);
  auto worker = [&](int first, int last_excl) {
    for (int pid = first; pid < last_excl; ++pid) {
      try {
        run_path(m, x0, cfg, static_cast<std::uint64_t>(pid), [&](long step, const Vec& x) {
          if (exit_region(x)) {
            per_path[static_cast<std::size_t>(pid)] = static_cast<double>(step) * cfg.dt;
            return false;
          }
          return true;
        });
      } catch (const Diverged&) {
        per_path[static_cast<std::size_t>(pid)] = -2.0;
      }
    }
  };
  const int workers = std::clamp(cfg.threads, 1, cfg.n_paths);
  if (workers <= 1) {
    worker(0, cfg.n_paths);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (cfg.n_paths + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int first = w * chunk;
      const int last_excl = std::min(cfg.n_paths, first + chunk);
      if (first < last_excl) pool.emplace_back(worker, first, last_excl);
    }
    for (auto& t : pool) t.join();
  }

  double sum = 0.0;
  for (double t : per_path) {
    if (t == -2.0) {
      ++out.diverged;
    } else if (t < 0.0) {
      ++out.censored;
    } else {
      out.times.push_back(t);
      sum += t;
    }
  }
  if (out.times.empty()) {
    out.met = std::numeric_limits<double>::quiet_NaN();
    out.std_err = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.met = sum / static_cast<double>(out.times.size());
  double ss = 0.0;
  for (double t : out.times) ss += (t - out.met) * (t - out.met);
  const std::size_t k = out.times.size();
  out.std_err = k >= 2 ? std::sqrt(ss / (static_cast<double>(k) * (k - 1.0))) : 0.0;
  return out;
}

}  // namespace quasipot
