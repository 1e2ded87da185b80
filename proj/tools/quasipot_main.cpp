#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "quasipot/montecarlo.hpp"
#include "quasipot/report.hpp"

namespace qp = quasipot;
using nlohmann::json;

namespace {

// Exit codes: 2 parse error, 3 model invalid, 4 bad equilibrium selection,
// 5 all paths diverged.
constexpr int kExitParse = 2;
constexpr int kExitModel = 3;
constexpr int kExitSelection = 4;
constexpr int kExitDiverged = 5;

int fail(int code, const std::string& kind, const std::string& message) {
  json err;
  err["error"] = message;
  err["kind"] = kind;
  std::cerr << err.dump() << "\n";
  return code;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw qp::ParseError("cannot read file '" + path + "'", 0);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw qp::ParseError(std::string("JSON: ") + e.what(), static_cast<std::size_t>(e.byte));
  }
}

void emit(const json& doc, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << doc.dump(2) << "\n";
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw qp::Error("cannot write '" + out_path + "'");
  out << doc.dump(2) << "\n";
}

struct ModelInput {
  qp::SystemModel model;
  json echo;
};

ModelInput load_model(const std::string& path) {
  ModelInput mi;
  mi.echo = read_json_file(path);
  mi.model = qp::model_from_json(mi.echo);
  return mi;
}

std::vector<qp::Vec> default_or_given_seeds(const std::string& spec, int n) {
  if (!spec.empty()) return qp::parse_seed_grid(spec, n);
  // Default grid; coarser in high dimension to keep the Newton fan small.
  return qp::parse_seed_grid(n <= 3 ? "-2:2:5" : "-1:1:3", n);
}

qp::Vec parse_point(const std::string& spec, int n) {
  std::vector<double> values;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) values.push_back(std::stod(item));
  if (static_cast<int>(values.size()) != n)
    throw qp::Error("point '" + spec + "' has " + std::to_string(values.size()) +
                    " coordinates for dimension " + std::to_string(n));
  qp::Vec x(n);
  for (int i = 0; i < n; ++i) x(i) = values[static_cast<std::size_t>(i)];
  return x;
}

// ---------------------------------------------------------------------------

int run_analyze(const std::string& model_path, const std::string& seeds, double tol,
                const std::string& out_path) {
  const ModelInput mi = load_model(model_path);
  const auto seed_points = default_or_given_seeds(seeds, mi.model.n);
  const json report = qp::report_analyze(mi.model, mi.echo, seed_points, tol);
  emit(report, out_path);
  return 0;
}

int run_flow(const std::string& model_path, const std::string& seeds, int ep_index,
             const std::string& mode, int k, double radius, double delta, double dt,
             double tmax, int stride, const std::string& box_spec, const std::string& out_dir) {
  const ModelInput mi = load_model(model_path);
  const auto found = qp::find_equilibria(mi.model, default_or_given_seeds(seeds, mi.model.n));
  if (ep_index < 0 || ep_index >= static_cast<int>(found.points.size()))
    return fail(kExitSelection, "selection",
                "equilibrium index " + std::to_string(ep_index) + " out of range (found " +
                    std::to_string(found.points.size()) + ")");
  const qp::EquilibriumPoint& ep = found.points[static_cast<std::size_t>(ep_index)];

  qp::EquilibriumAnalysis ea;
  try {
    ea = qp::analyze_ep(mi.model, ep);
  } catch (const qp::Error& e) {
    return fail(kExitSelection, "analysis", e.what());
  }

  std::vector<qp::CharState> starts;
  if (mode == "ring") {
    try {
      starts = qp::init_ring(ea, radius, k);
    } catch (const qp::Error& e) {
      return fail(kExitSelection, "ring", e.what());
    }
  } else if (mode == "exit") {
    if (ep.kind != qp::EpKind::Saddle)
      return fail(kExitSelection, "selection", "mode=exit requires a saddle equilibrium");
    try {
      const qp::ExitData exit = qp::exit_direction(ea, ea.D);
      auto pair = qp::launch_exit(ea, exit, delta);
      starts = {pair.first, pair.second};
    } catch (const qp::Error& e) {
      return fail(kExitSelection, "exit", e.what());
    }
  } else {
    return fail(kExitSelection, "selection", "mode must be ring or exit");
  }

  qp::IntegrateOptions opts;
  opts.dt = dt > 0.0 ? dt : qp::default_dt(ea);
  opts.t_max = tmax;
  opts.record_stride = stride;
  const int n = mi.model.n;
  if (box_spec.empty()) {
    opts.box_lo = qp::Vec(n);
    opts.box_hi = qp::Vec(n);
    for (int i = 0; i < n; ++i) {
      const double half = 10.0 * std::max(1.0, std::abs(ep.x(i)));
      opts.box_lo(i) = ep.x(i) - half;
      opts.box_hi(i) = ep.x(i) + half;
    }
  } else {
    const auto axes = qp::parse_seed_grid(box_spec, n);  // "lo:hi:2"-style reuse
    // Interpret each axis of the grid spec as its extremes.
    opts.box_lo = qp::Vec(n);
    opts.box_hi = qp::Vec(n);
    qp::Vec lo = axes.front(), hi = axes.back();
    for (int i = 0; i < n; ++i) {
      opts.box_lo(i) = std::min(lo(i), hi(i));
      opts.box_hi(i) = std::max(lo(i), hi(i));
    }
  }

  std::filesystem::create_directories(out_dir);
  json manifest;
  manifest["model"] = mi.echo;
  manifest["mode"] = mode;
  manifest["ep_index"] = ep_index;
  manifest["ep_x"] = qp::vec_to_json(ep.x);
  manifest["dt"] = opts.dt;
  manifest["t_max"] = opts.t_max;
  json files = json::array();

  for (std::size_t c = 0; c < starts.size(); ++c) {
    const qp::Characteristic traj = qp::integrate(mi.model, starts[c], opts);
    char name[32];
    std::snprintf(name, sizeof(name), "char_%03zu.csv", c);
    const std::filesystem::path file = std::filesystem::path(out_dir) / name;
    std::ofstream os(file);
    if (!os) throw qp::Error("cannot write '" + file.string() + "'");
    qp::write_characteristic_csv(os, traj, n);
    files.push_back({{"file", name},
                     {"termination", qp::to_string(traj.termination)},
                     {"samples", traj.samples.size()},
                     {"t_end", traj.samples.back().t},
                     {"max_abs_H", traj.max_abs_H}});
  }
  manifest["characteristics"] = std::move(files);
  std::ofstream mf(std::filesystem::path(out_dir) / "manifest.json");
  mf << manifest.dump(2) << "\n";
  return 0;
}

int run_simulate(const std::string& model_path, const std::string& seeds, double eps, double dt,
                 long steps, long burn_in, int paths, std::uint64_t seed, int threads,
                 bool covariance, const std::string& exit_region, const std::string& x0_spec,
                 int ep_index, const std::string& out_path) {
  const ModelInput mi = load_model(model_path);
  const int n = mi.model.n;

  qp::SimConfig cfg;
  cfg.epsilon = eps;
  cfg.dt = dt;
  cfg.n_steps = steps;
  cfg.burn_in = burn_in;
  cfg.n_paths = paths;
  cfg.seed = seed;
  cfg.threads = threads;

  json config_echo = {{"epsilon", eps},   {"dt", dt},     {"n_steps", steps},
                      {"burn_in", burn_in}, {"n_paths", paths}, {"seed", seed}};

  if (covariance) {
    const auto found = qp::find_equilibria(mi.model, default_or_given_seeds(seeds, n));
    const qp::EquilibriumPoint* attractor = nullptr;
    if (ep_index >= 0) {
      if (ep_index >= static_cast<int>(found.points.size()))
        return fail(kExitSelection, "selection", "equilibrium index out of range");
      attractor = &found.points[static_cast<std::size_t>(ep_index)];
    } else {
      for (const auto& p : found.points)
        if (p.kind == qp::EpKind::Attractor) {
          attractor = &p;
          break;
        }
    }
    if (attractor == nullptr || attractor->kind != qp::EpKind::Attractor)
      return fail(kExitSelection, "selection", "no attractor equilibrium found for covariance mode");

    json out;
    out["report_version"] = qp::kReportVersion;
    out["tool"] = {{"name", qp::kToolName}, {"version", qp::kToolVersion}};
    out["model"] = mi.echo;
    out["config"] = config_echo;
    out["equilibrium"] = qp::vec_to_json(attractor->x);

    json predicted = nullptr;
    std::optional<qp::Mat> pred;
    try {
      const qp::EquilibriumAnalysis ea = qp::analyze_ep(mi.model, *attractor);
      if (ea.Sinv) {
        pred = eps * (*ea.Sinv);
        predicted = qp::mat_to_json(*pred);
      }
    } catch (const qp::Error&) {
      // No local prediction available; the estimate still stands on its own.
    }

    qp::McEstimate est;
    try {
      est = qp::stationary_covariance(mi.model, *attractor, cfg);
    } catch (const qp::Diverged& e) {
      return fail(kExitDiverged, "diverged", e.what());
    }
    out["estimate"] = {{"mean", qp::vec_to_json(est.mean)},
                       {"covariance", qp::mat_to_json(est.covariance)},
                       {"std_err", qp::mat_to_json(est.std_err)},
                       {"n_effective", est.n_effective},
                       {"n_batches", est.n_batches}};
    out["predicted_covariance"] = predicted;
    if (pred) {
      qp::Mat z = (est.covariance - *pred).cwiseQuotient(est.std_err);
      out["z_scores"] = qp::mat_to_json(z);
    } else {
      out["z_scores"] = nullptr;
    }
    emit(out, out_path);
    return 0;
  }

  if (exit_region.empty())
    return fail(kExitSelection, "selection", "choose --covariance or --exit-time REGION");

  const auto region = qp::parse_region(exit_region, n);
  qp::Vec x0;
  if (!x0_spec.empty()) {
    x0 = parse_point(x0_spec, n);
  } else {
    const auto found = qp::find_equilibria(mi.model, default_or_given_seeds(seeds, n));
    const qp::EquilibriumPoint* attractor = nullptr;
    for (const auto& p : found.points)
      if (p.kind == qp::EpKind::Attractor) {
        attractor = &p;
        break;
      }
    if (attractor == nullptr)
      return fail(kExitSelection, "selection", "no attractor found; give --x0 explicitly");
    x0 = attractor->x;
  }

  qp::ExitTimeStats stats;
  try {
    stats = qp::mean_exit_time(mi.model, x0, region, cfg);
  } catch (const qp::Diverged& e) {
    return fail(kExitDiverged, "diverged", e.what());
  }
  if (stats.diverged == cfg.n_paths)
    return fail(kExitDiverged, "diverged", "every path left the guard radius");
  if (stats.times.empty())
    std::cerr << json{{"warning", "no path exited within the step budget"}}.dump() << "\n";

  // Per-path exit times as CSV next to the summary.
  const std::string csv_path = out_path.empty() ? "exit_times.csv" : out_path + ".times.csv";
  {
    std::ofstream os(csv_path);
    os << "path,exit_time\n";
    for (std::size_t i = 0; i < stats.times.size(); ++i)
      os << i << ',' << qp::format_shortest(stats.times[i]) << "\n";
  }

  json out;
  out["report_version"] = qp::kReportVersion;
  out["tool"] = {{"name", qp::kToolName}, {"version", qp::kToolVersion}};
  out["model"] = mi.echo;
  out["config"] = config_echo;
  out["region"] = exit_region;
  out["x0"] = qp::vec_to_json(x0);
  out["met"] = stats.met;
  out["std_err"] = stats.std_err;
  out["n_exited"] = stats.times.size();
  out["censored"] = stats.censored;
  out["diverged"] = stats.diverged;
  out["times_csv"] = csv_path;
  emit(out, out_path);
  return 0;
}

json demo_json(double gamma, double u2) {
  const qp::SystemModel model = qp::make_kramers_quadratic(u2, gamma);
  const qp::EquilibriumPoint ep = qp::equilibrium_at(model, qp::Vec::Zero(2));
  const qp::EquilibriumAnalysis ea = qp::analyze_ep(model, ep);

  json out;
  out["gamma"] = gamma;
  out["u2"] = u2;
  out["M"] = qp::mat_to_json(ep.M);
  out["kind"] = qp::to_string(ep.kind);
  out["A"] = qp::mat_to_json(ea.A);
  out["chi"] = ea.chi ? json(*ea.chi) : json(nullptr);
  out["S_eq"] = qp::mat_to_json(ea.S);
  out["rank_M"] = ea.rank_M;
  out["rank_S"] = ea.rank_S;
  out["singular_M"] = ea.rank_M < 2;
  out["neg_D_plus_A_inverse"] = qp::mat_to_json(ea.grad_map);
  out["r_eq"] = ea.diagnostics.r_at_ep;
  out["riccati_residual_eq"] = ea.diagnostics.riccati;

  const qp::Mat D = ea.D;
  const qp::Mat zero = qp::Mat::Zero(2, 2);
  out["riccati_residual_zero"] = qp::riccati_residual(zero, ep.M, D);
  out["r_zero"] = qp::compute_r(model, ep.x, qp::Vec::Zero(2), zero);

  try {
    for (int sign : {+1, -1}) {
      const qp::KramersDegenerate deg = qp::kramers_phi_pm(u2, gamma, sign);
      json entry;
      entry["beta"] = deg.beta;
      entry["S"] = qp::mat_to_json(deg.S_pm);
      entry["rank"] = qp::rank(deg.S_pm);
      entry["r"] = deg.r_value;
      entry["riccati_residual"] = qp::riccati_residual(deg.S_pm, ep.M, D);
      out[sign > 0 ? "phi_plus" : "phi_minus"] = std::move(entry);
    }
    std::vector<std::pair<double, double>> grid;
    for (int i = -2; i <= 2; ++i)
      for (int j = -2; j <= 2; ++j) grid.emplace_back(0.5 * i, 0.5 * j);
    json probe = json::array();
    for (const qp::ProbeRow& row : qp::minimum_principle_probe(u2, gamma, grid)) {
      probe.push_back({{"x", row.x},
                       {"v", row.v},
                       {"phi_eq", row.phi_eq},
                       {"phi_plus", row.phi_plus},
                       {"phi_minus", row.phi_minus},
                       {"phi_zero", row.phi_zero},
                       {"min", row.min_label},
                       {"side_plus", row.side_plus},
                       {"side_minus", row.side_minus}});
    }
    out["minimum_principle_probe"] = std::move(probe);
  } catch (const qp::ComplexBeta&) {
    out["phi_plus"] = "complex";
    out["phi_minus"] = "complex";
  }

  if (u2 < 0.0) {
    const qp::ExitData exit = qp::exit_direction(ea, D);
    out["exit"] = qp::exit_to_json(exit);
  }
  return out;
}

void print_demo_text(const json& d, std::ostream& os) {
  auto put_mat = [&](const char* label, const json& m) {
    os << label << " = [[" << m[0][0].dump() << ", " << m[0][1].dump() << "], ["
       << m[1][0].dump() << ", " << m[1][1].dump() << "]]\n";
  };
  os << "Kramers quadratic model: gamma = " << d["gamma"].dump() << ", U'' = " << d["u2"].dump()
     << "  (" << d["kind"].get<std::string>() << ")\n";
  put_mat("M", d["M"]);
  put_mat("A", d["A"]);
  os << "chi = " << d["chi"].dump() << "\n";
  put_mat("S_eq", d["S_eq"]);
  os << "rank M = " << d["rank_M"].dump() << ", rank S = " << d["rank_S"].dump();
  if (d["singular_M"].get<bool>()) os << "  [singular M and S]";
  os << "\n";
  put_mat("(-D+A)^-1", d["neg_D_plus_A_inverse"]);
  os << "r(S_eq) = " << d["r_eq"].dump()
     << ", riccati residual(S_eq) = " << d["riccati_residual_eq"].dump() << "\n";
  os << "r(0) = " << d["r_zero"].dump()
     << ", riccati residual(0) = " << d["riccati_residual_zero"].dump() << "\n";
  if (d["phi_plus"].is_string()) {
    os << "beta_+/- : complex (underdamped bottom)\n";
  } else {
    for (const char* key : {"phi_plus", "phi_minus"}) {
      const json& e = d[key];
      os << key << ": beta = " << e["beta"].dump() << ", rank " << e["rank"].dump()
         << ", r = " << e["r"].dump() << ", riccati residual = " << e["riccati_residual"].dump()
         << "\n";
    }
    os << "minimum-principle probe (x, v, phi_eq, phi_+, phi_-, phi_0, min):\n";
    for (const json& row : d["minimum_principle_probe"]) {
      os << "  " << row["x"].dump() << "\t" << row["v"].dump() << "\t" << row["phi_eq"].dump()
         << "\t" << row["phi_plus"].dump() << "\t" << row["phi_minus"].dump() << "\t"
         << row["phi_zero"].dump() << "\t" << row["min"].get<std::string>() << "\n";
    }
  }
  if (d.contains("exit")) {
    os << "exit: lambda_+ = " << d["exit"]["lambda_plus"].dump() << ", start_dir = ["
       << d["exit"]["start_dir"][0].dump() << ", " << d["exit"]["start_dir"][1].dump() << "]\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quasipotential analysis for weak-noise stochastic systems"};
  app.require_subcommand(1);

  std::string out_path;
  bool quiet = false;
  int threads = static_cast<int>(std::min(8u, std::max(1u, std::thread::hardware_concurrency())));
  app.add_option("--out", out_path, "Output file (analyze/simulate) or directory (flow)");
  app.add_flag("--quiet", quiet, "Suppress informational notes");
  app.add_option("--threads", threads, "Worker threads for Monte Carlo paths");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Locate equilibria and report local analyses");
  std::string model_path, seeds;
  double tol = 1e-12;
  analyze->add_option("model", model_path, "Model JSON file")->required();
  analyze->add_option("--seeds", seeds, "Newton seed grid, per-axis lo:hi:count");
  analyze->add_option("--tol", tol, "Equilibrium residual tolerance");

  // flow
  auto* flow = app.add_subcommand("flow", "Integrate characteristics from an equilibrium");
  std::string flow_model, flow_seeds, flow_mode = "ring", flow_box;
  int ep_index = 0, ring_k = 8, stride = 1;
  double radius = 0.01, delta = 1e-3, flow_dt = -1.0, tmax = 10.0;
  flow->add_option("model", flow_model, "Model JSON file")->required();
  flow->add_option("--seeds", flow_seeds, "Newton seed grid");
  flow->add_option("--ep", ep_index, "Equilibrium index in the sorted list");
  flow->add_option("--mode", flow_mode, "ring | exit");
  flow->add_option("--k", ring_k, "Ring point count");
  flow->add_option("--radius", radius, "Ring radius in the S metric");
  flow->add_option("--delta", delta, "Exit-mode offset along the unstable direction");
  flow->add_option("--dt", flow_dt, "Step size (default: 1e-3 over the fastest rate)");
  flow->add_option("--tmax", tmax, "Integration horizon");
  flow->add_option("--stride", stride, "Record every k-th step");
  flow->add_option("--box", flow_box, "Domain box, per-axis lo:hi:2 spec");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Euler-Maruyama simulation oracle");
  std::string sim_model, sim_seeds, sim_region, sim_x0;
  double sim_eps = 0.1, sim_dt = 0.01;
  long sim_steps = 200000, sim_burn = 20000;
  int sim_paths = 16, sim_ep = -1;
  std::uint64_t sim_seed = 0;
  bool covariance = false;
  sim->add_option("model", sim_model, "Model JSON file")->required();
  sim->add_option("--seeds", sim_seeds, "Newton seed grid for locating equilibria");
  sim->add_option("--eps", sim_eps, "Noise strength")->required();
  sim->add_option("--dt", sim_dt, "Euler step");
  sim->add_option("--steps", sim_steps, "Steps per path");
  sim->add_option("--burn-in", sim_burn, "Discarded steps per path (covariance mode)");
  sim->add_option("--paths", sim_paths, "Path count");
  sim->add_option("--seed", sim_seed, "RNG seed");
  sim->add_option("--ep", sim_ep, "Equilibrium index (default: first attractor)");
  sim->add_flag("--covariance", covariance, "Stationary covariance vs eps*S^-1");
  sim->add_option("--exit-time", sim_region, "Exit region predicate, e.g. \"x1>0\"");
  sim->add_option("--x0", sim_x0, "Start point for exit-time mode, comma separated");

  // kramers-demo
  auto* demo = app.add_subcommand("kramers-demo", "Quadratic Kramers walkthrough");
  double gamma = 3.0, u2 = 2.0;
  bool demo_json_out = false;
  demo->add_option("--gamma", gamma, "Friction")->required();
  demo->add_option("--u2", u2, "Curvature U'' at the equilibrium")->required();
  demo->add_flag("--json", demo_json_out, "Emit JSON instead of text");

  CLI11_PARSE(app, argc, argv);
  (void)quiet;

  try {
    if (app.got_subcommand(analyze)) return run_analyze(model_path, seeds, tol, out_path);
    if (app.got_subcommand(flow)) {
      if (out_path.empty()) out_path = "flow_out";
      return run_flow(flow_model, flow_seeds, ep_index, flow_mode, ring_k, radius, delta,
                      flow_dt, tmax, stride, flow_box, out_path);
    }
    if (app.got_subcommand(sim)) {
      return run_simulate(sim_model, sim_seeds, sim_eps, sim_dt, sim_steps, sim_burn, sim_paths,
                          sim_seed, threads, covariance, sim_region, sim_x0, sim_ep, out_path);
    }
    if (app.got_subcommand(demo)) {
      if (!(gamma > 0.0)) return fail(kExitModel, "model", "gamma must be positive");
      const json d = demo_json(gamma, u2);
      if (demo_json_out) {
        emit(d, out_path);
      } else if (out_path.empty()) {
        print_demo_text(d, std::cout);
      } else {
        std::ofstream os(out_path);
        print_demo_text(d, os);
      }
      return 0;
    }
  } catch (const qp::ParseError& e) {
    return fail(kExitParse, "parse", e.what());
  } catch (const qp::Error& e) {
    return fail(kExitModel, "model", e.what());
  } catch (const std::exception& e) {
    return fail(kExitModel, "internal", e.what());
  }
  return 0;
}
