#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "quasipot/characteristics.hpp"
#include "quasipot/exit_problem.hpp"
#include "quasipot/model.hpp"

namespace quasipot {

inline constexpr int kReportVersion = 1;
inline constexpr const char* kToolName = "quasipot";
inline constexpr const char* kToolVersion = "0.1.0";

/// Builds a model from its JSON description. Two top-level shapes:
///   { "n": 2, "params": {...}, "drift": ["...", ...], "diffusion": [["..."], ...] }
///   { "builtin": "kramers" | "gradient" | "linear", ... }
SystemModel model_from_json(const nlohmann::json& j);

/// Per-axis "lo:hi:count" specs, comma separated; a single spec is applied to
/// every axis. count = 1 yields the single value lo. The grid is the
/// cartesian product over axes.
std::vector<Vec> parse_seed_grid(const std::string& spec, int n);

/// Parses "expr OP expr" with OP one of < > <= >= into a state predicate.
std::function<bool(const Vec&)> parse_region(const std::string& spec, int n,
                                             const std::map<std::string, double>& params = {});

nlohmann::json mat_to_json(const Eigen::Ref<const Mat>& m);  // row-major nested arrays
nlohmann::json vec_to_json(const Eigen::Ref<const Vec>& v);
nlohmann::json spectrum_to_json(const Spectrum& s);
nlohmann::json analysis_to_json(const EquilibriumAnalysis& ea);
nlohmann::json exit_to_json(const ExitData& e);

/// Full analysis report: locates equilibria from the seeds, analyzes each
/// one (marginal spectra included, flagged in warnings), attaches exit data
/// at saddles. Per-point failures are recorded in-band.
nlohmann::json report_analyze(const SystemModel& m, const nlohmann::json& model_echo,
                              const std::vector<Vec>& seeds, double tol);

/// Shortest round-trip decimal form of a double.
std::string format_shortest(double v);

/// CSV with header t, x_1..x_n, p_1..p_n, Phi, phi1, S_11..S_nn (row-major),
/// cond_Q; comma separated, LF line endings.
void write_characteristic_csv(std::ostream& os, const Characteristic& c, int n);

}  // namespace quasipot
