#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlfb/fbsolver.hpp"
#include "nlfb/semiwave.hpp"

namespace nlfb {

struct RatesOptions {
    /// Any of "linear", "power", "tlogt", "drift".
    std::vector<std::string> models{"linear", "drift"};
    double window_fraction = 0.5;
    double max_variation = 0.2;
};

struct SemiwaveOptions {
    bool minimal_speed = false;
    bool stationary = false;
};

struct FixtureOptions {
    /// SuperSemiwave, SubPlateau, SubSemiwave, SubPowerFront or SubTLogTFront.
    std::string kind = "SubPowerFront";
    /// Overrides of the kind's documented parameters.
    nlohmann::json params = nlohmann::json::object();
    double t0 = 0.0;
    double t1 = 10.0;
    int nt = 21;
    int nx = 201;
    /// Fit the shift T against a run of the scenario's problem.
    bool against_run = false;
    bool margins_csv = false;
};

struct PsiOptions {
    double kappa1 = 5.0;
    double kappa2 = 10.0;
    double eps = 0.5;
    double dx = 0.05;
};

struct VerifyOptions {
    /// Any of "fixture", "psi", "mass_flux", "comparison", "refinement".
    std::vector<std::string> checks{"mass_flux"};
    double mass_flux_tol = 1e-3;
    /// u0 of the lower run is this multiple of the scenario's u0.
    double comparison_scale = 0.5;
    double comparison_tol = 1e-9;
    int refinement_levels = 3;
    FixtureOptions fixture;
    PsiOptions psi;
};

struct SweepOptions {
    /// Dotted path into the scenario, e.g. "problem.mu" or "problem.kernel.gamma".
    std::string parameter = "problem.mu";
    std::vector<double> values;
    /// simulate, semiwave, rates or verify.
    std::string command = "semiwave";
};

struct OutputOptions {
    std::string dir = "out";
    bool snapshots = true;
};

struct ScenarioConfig {
    ProblemSpec problem;
    SolverConfig solver;
    SemiWaveConfig semiwave;
    StationaryConfig stationary;
    RatesOptions rates;
    SemiwaveOptions semiwave_targets;
    VerifyOptions verify;
    SweepOptions sweep;
    OutputOptions output;

    /// Fully resolved form; parsing it again gives the same scenario.
    nlohmann::json to_json() const;
    /// Unknown keys at any level raise ValidationError listing them.
    static ScenarioConfig from_json(const nlohmann::json& j);
};

/// Sets a dotted path in a JSON object, creating intermediate objects. The
/// value is parsed as JSON when possible and kept as a string otherwise.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Applies "key=value" overrides last, parses, and checks consistency
/// (explicit-step budget, analysis windows). Throws ValidationError.
ScenarioConfig resolve_config(nlohmann::json raw, const std::vector<std::string>& overrides);
ScenarioConfig resolve_config_file(const std::filesystem::path& path, const std::vector<std::string>& overrides);

/// Runs one command into dir (created if needed). Exit status: 0 success,
/// 1 validation or configuration error, 2 runtime failure (partial artifacts
/// and error.json are left behind). Messages go to err.
int execute(const std::string& command, const ScenarioConfig& cfg, const std::filesystem::path& dir, int jobs, std::ostream& out,
            std::ostream& err);

/// Aggregates the pass/fail table of dir (and its sweep points) into
/// report.json and prints it. Refuses directories without resolved_config.json.
int report(const std::filesystem::path& dir, std::ostream& out, std::ostream& err);

} // namespace nlfb
