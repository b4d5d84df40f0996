#pragma once

#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlfb/errors.hpp"
#include "nlfb/kernel.hpp"
#include "nlfb/reaction.hpp"

namespace nlfb {

struct SemiWaveConfig {
    double dx = 0.05;
    /// Truncation length; 0 picks 40 interaction lengths.
    double L = 0.0;
    double residual_tol = 1e-11;
    double speed_tol = 1e-8;
    /// Accept L once doubling it moves c0 by less than this.
    double truncation_tol = 1e-4;
    bool check_truncation = true;
    int max_doublings = 4;
    int max_newton = 400;
    /// Replace c0 by the Richardson extrapolation from dx and dx/2
    /// (upwinding is first order in dx).
    bool richardson = false;

    nlohmann::json to_json() const;
    static SemiWaveConfig from_json(const nlohmann::json& j);
};

struct SemiWaveSolution {
    double c0 = 0.0;
    double mu = 0.0;
    double d = 0.0;
    double u_star = 0.0;
    double L = 0.0;
    double dx = 0.0;
    std::vector<double> x;
    std::vector<double> phi;
    double residual = 0.0;
    double speed_defect = 0.0;
    /// |c0(2L) - c0(L)| from the last truncation check; 0 if skipped.
    double truncation_change = 0.0;
    /// c0 on the solved grid before extrapolation.
    double c0_grid = 0.0;
    int iterations = 0;

    /// Linear interpolation; u* left of -L and 0 right of 0.
    double phi_at(double xq) const;
    nlohmann::json to_json() const;
    void write_profile_csv(std::ostream& os) const;
};

struct WaveSolution {
    double c_star = 0.0;
    double lambda_star = 0.0;
    /// (lambda, speed) samples of the dispersion curve.
    std::vector<std::pair<double, double>> curve;

    nlohmann::json to_json() const;
};

struct StationaryConfig {
    double dx = 0.05;
    /// 0 picks 40 effective lengths (interaction length or diffusive scale).
    double L = 0.0;
    double tol = 1e-10;
    int max_iter = 10000;

    nlohmann::json to_json() const;
    static StationaryConfig from_json(const nlohmann::json& j);
};

struct StationaryProfile {
    double d = 0.0;
    double u_star = 0.0;
    std::vector<double> x;
    std::vector<double> U;
    /// u* - U, stored separately: far from 0 it is below double resolution of U.
    std::vector<double> deficit;
    std::optional<double> x0;
    double residual = 0.0;
    int iterations = 0;

    nlohmann::json to_json() const;
    void write_profile_csv(std::ostream& os) const;
};

struct MuSample {
    double mu;
    double c;
    std::optional<double> l;
};

struct MuCurve {
    std::vector<MuSample> samples;

    nlohmann::json to_json() const;
};

SemiWaveSolution solve_semiwave(const Kernel& k, const Reaction& r, double d, double mu, const SemiWaveConfig& cfg = {});

/// c* = min over lambda of (d (J^(lambda) - 1) + f'(0)) / lambda.
WaveSolution minimal_speed(const Kernel& k, const Reaction& r, double d);

/// Bounded positive solution of d int_{-inf}^0 J(x - y) U(y) dy - d U + f(U) = 0 on x <= 0.
StationaryProfile stationary_profile(const Kernel& k, const Reaction& r, double d, const StationaryConfig& cfg = {});

/// Abscissa where a nonincreasing sampled profile crosses level.
std::optional<double> half_level_point(const std::vector<double>& x, const std::vector<double>& profile, double level);

MuCurve mu_curve(const Kernel& k, const Reaction& r, double d, std::vector<double> mus, const SemiWaveConfig& cfg = {},
                 int jobs = 1);

} // namespace nlfb
