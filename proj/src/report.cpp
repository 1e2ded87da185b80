#include "quasipot/report.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

namespace quasipot {

namespace {

std::map<std::string, double> params_from_json(const nlohmann::json& j) {
  std::map<std::string, double> params;
  if (j.contains("params")) {
    for (const auto& [key, value] : j.at("params").items()) params[key] = value.get<double>();
  }
  return params;
}

Mat mat_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw Error("expected a nested array of numbers");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j.at(0).size());
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(j.at(i).size()) != cols) throw Error("ragged matrix rows");
    for (int c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  }
  return m;
}

}  // namespace

SystemModel model_from_json(const nlohmann::json& j) {
  const auto params = params_from_json(j);
  if (j.contains("builtin")) {
    const std::string which = j.at("builtin").get<std::string>();
    if (which == "kramers") {
      return make_kramers(j.at("potential").get<std::string>(), j.at("gamma").get<double>(),
                          params);
    }
    if (which == "gradient") {
      return make_gradient(j.at("n").get<int>(), j.at("potential").get<std::string>(), params);
    }
    if (which == "linear") {
      return make_linear(mat_from_json(j.at("matrix")), mat_from_json(j.at("diffusion")));
    }
    throw Error("unknown builtin model '" + which + "'");
  }

  const int n = j.at("n").get<int>();
  std::vector<std::string> drift;
  for (const auto& d : j.at("drift")) drift.push_back(d.get<std::string>());
  std::vector<std::vector<std::string>> diffusion;
  for (const auto& row : j.at("diffusion")) {
    std::vector<std::string> r;
    for (const auto& e : row) r.push_back(e.get<std::string>());
    diffusion.push_back(std::move(r));
  }
  return make_custom(n, drift, diffusion, params);
}

std::vector<Vec> parse_seed_grid(const std::string& spec, int n) {
  std::vector<std::vector<double>> axes;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const std::size_t end = std::min(spec.find(',', start), spec.size());
    const std::string axis = spec.substr(start, end - start);
    const std::size_t c1 = axis.find(':');
    const std::size_t c2 = axis.find(':', c1 == std::string::npos ? axis.size() : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw Error("seed grid axis '" + axis + "' is not lo:hi:count");
    const double lo = std::stod(axis.substr(0, c1));
    const double hi = std::stod(axis.substr(c1 + 1, c2 - c1 - 1));
    const int count = std::stoi(axis.substr(c2 + 1));
    if (count < 1) throw Error("seed grid count must be at least 1");
    std::vector<double> values;
    for (int i = 0; i < count; ++i)
      values.push_back(count == 1 ? lo : lo + (hi - lo) * i / (count - 1));
    axes.push_back(std::move(values));
    start = end + 1;
    if (end == spec.size()) break;
  }
  if (static_cast<int>(axes.size()) == 1 && n > 1) axes.assign(static_cast<std::size_t>(n), axes[0]);
  if (static_cast<int>(axes.size()) != n)
    throw Error("seed grid has " + std::to_string(axes.size()) + " axes for dimension " +
                std::to_string(n));

  std::vector<Vec> seeds;
  std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
  for (;;) {
    Vec s(n);
    for (int i = 0; i < n; ++i) s(i) = axes[static_cast<std::size_t>(i)][idx[static_cast<std::size_t>(i)]];
    seeds.push_back(s);
    int axis = n - 1;
    while (axis >= 0) {
      if (++idx[static_cast<std::size_t>(axis)] < axes[static_cast<std::size_t>(axis)].size()) break;
      idx[static_cast<std::size_t>(axis)] = 0;
      --axis;
    }
    if (axis < 0) break;
  }
  return seeds;
}

std::function<bool(const Vec&)> parse_region(const std::string& spec, int n,
                                             const std::map<std::string, double>& params) {
  struct Op {
    const char* token;
    int kind;  // 0: <=, 1: >=, 2: <, 3: >
  };
  static constexpr Op kOps[] = {{"<=", 0}, {">=", 1}, {"<", 2}, {">", 3}};
  for (const Op& op : kOps) {
    const std::size_t pos = spec.find(op.token);
    if (pos == std::string::npos) continue;
    const Expr lhs = parse(spec.substr(0, pos), n, params);
    const Expr rhs = parse(spec.substr(pos + std::string(op.token).size()), n, params);
    const int kind = op.kind;
    return [lhs, rhs, kind](const Vec& x) {
      const double a = evaluate_value(lhs, x);
      const double b = evaluate_value(rhs, x);
      switch (kind) {
        case 0: return a <= b;
        case 1: return a >= b;
        case 2: return a < b;
        default: return a > b;
      }
    };
  }
  throw Error("region '" + spec + "' must contain one of < > <= >=");
}

nlohmann::json mat_to_json(const Eigen::Ref<const Mat>& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json vec_to_json(const Eigen::Ref<const Vec>& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

nlohmann::json spectrum_to_json(const Spectrum& s) {
  nlohmann::json values = nlohmann::json::array();
  for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i) {
    values.push_back({{"re", s.eigenvalues(i).real()}, {"im", s.eigenvalues(i).imag()}});
  }
  return values;
}

nlohmann::json analysis_to_json(const EquilibriumAnalysis& ea) {
  nlohmann::json out;
  out["A"] = mat_to_json(ea.A);
  out["S"] = mat_to_json(ea.S);
  out["chi"] = ea.chi ? nlohmann::json(*ea.chi) : nlohmann::json(nullptr);
  out["Sinv"] = ea.Sinv ? mat_to_json(*ea.Sinv) : nlohmann::json(nullptr);
  out["rank_S"] = ea.rank_S;
  out["rank_M"] = ea.rank_M;
  out["residual_freidlin"] = ea.diagnostics.freidlin;
  out["residual_riccati"] = ea.diagnostics.riccati;
  out["residual_symmetry"] = ea.diagnostics.symmetry;
  out["residual_lyapunov"] = ea.diagnostics.lyapunov ? nlohmann::json(*ea.diagnostics.lyapunov)
                                                     : nlohmann::json(nullptr);
  out["residual_solve_A"] = ea.diagnostics.solve_A_residual;
  out["r_at_ep"] = ea.diagnostics.r_at_ep;
  out["warnings"] = ea.diagnostics.warnings;
  return out;
}

nlohmann::json exit_to_json(const ExitData& e) {
  nlohmann::json out;
  out["Mtilde"] = mat_to_json(e.Mtilde);
  out["lambda_plus"] = e.lambda_plus;
  out["f"] = vec_to_json(e.f);
  out["start_dir"] = vec_to_json(e.start_dir);
  out["spectrum_match"] = e.spectrum_match;
  return out;
}

nlohmann::json report_analyze(const SystemModel& m, const nlohmann::json& model_echo,
                              const std::vector<Vec>& seeds, double tol) {
  nlohmann::json report;
  report["report_version"] = kReportVersion;
  report["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  report["model"] = model_echo;

  const EquilibriaResult found = find_equilibria(m, seeds, tol);

  nlohmann::json eps = nlohmann::json::array();
  for (const EquilibriumPoint& ep : found.points) {
    nlohmann::json entry;
    entry["x"] = vec_to_json(ep.x);
    entry["kind"] = to_string(ep.kind);
    entry["M"] = mat_to_json(ep.M);
    entry["eigenvalues"] = spectrum_to_json(ep.spectrum);
    try {
      const EquilibriumAnalysis ea = analyze_ep(m, ep);
      entry["analysis"] = analysis_to_json(ea);
      if (ep.kind == EpKind::Saddle) {
        try {
          entry["exit"] = exit_to_json(exit_direction(ea, ea.D));
        } catch (const Error& e) {
          entry["exit"] = nullptr;
          entry["exit_error"] = e.what();
        }
      } else {
        entry["exit"] = nullptr;
      }
    } catch (const Error& e) {
      entry["analysis"] = nullptr;
      entry["analysis_error"] = e.what();
      entry["exit"] = nullptr;
    }
    eps.push_back(std::move(entry));
  }
  report["equilibria"] = std::move(eps);

  nlohmann::json failures = nlohmann::json::array();
  for (const SeedFailure& f : found.failures) {
    failures.push_back({{"seed", vec_to_json(f.seed)}, {"reason", f.reason}});
  }
  report["seed_failures"] = std::move(failures);
  return report;
}

std::string format_shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_characteristic_csv(std::ostream& os, const Characteristic& c, int n) {
  os << "t";
  for (int i = 1; i <= n; ++i) os << ",x_" << i;
  for (int i = 1; i <= n; ++i) os << ",p_" << i;
  os << ",Phi,phi1";
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= n; ++j) os << ",S_" << i << j;
  os << ",cond_Q\n";
  for (const CharState& s : c.samples) {
    os << format_shortest(s.t);
    for (int i = 0; i < n; ++i) os << ',' << format_shortest(s.x(i));
    for (int i = 0; i < n; ++i) os << ',' << format_shortest(s.p(i));
    os << ',' << format_shortest(s.Phi) << ',' << format_shortest(s.phi1);
    const Mat S = s.Q.transpose().partialPivLu().solve(s.P.transpose()).transpose();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) os << ',' << format_shortest(S(i, j));
    os << ',' << format_shortest(cond(s.Q)) << '\n';
  }
}

}  // namespace quasipot
