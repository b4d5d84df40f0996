#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlfb/fbsolver.hpp"

namespace nlfb {

struct RateFit {
    enum class Model { Linear, Power, TLogT };
    Model model = Model::Linear;

    /// Linear: h = c t + intercept.
    double c = 0.0;
    double intercept = 0.0;
    /// Power: h = amplitude t^exponent.
    double amplitude = 0.0;
    double exponent = 0.0;
    /// TLogT: h = coefficient t ln t.
    double coefficient = 0.0;

    double t_a = 0.0;
    double t_b = 0.0;
    std::size_t samples = 0;
    double residual_rms = 0.0;
    /// Leading coefficient refitted on the trailing half of the window.
    double half_window_value = 0.0;
    /// |half-window value - full value| / |full value|.
    double drift = 0.0;
    bool low_confidence = false;
    /// TLogT only: coefficient on the window [t_a/2, t_b/2] and value / previous.
    std::optional<double> previous_window_value;
    std::optional<double> stability_ratio;

    /// c, exponent or coefficient by model.
    double leading() const;
    nlohmann::json to_json() const;
};

RateFit estimate_linear_speed(const TrajectoryLog& log, double window_fraction = 0.5);
RateFit fit_power_exponent(const TrajectoryLog& log, double window_fraction = 0.5);
RateFit fit_tlogt_coefficient(const TrajectoryLog& log, double window_fraction = 0.5);

struct DriftReport {
    double c0 = 0.0;
    double sup_r = 0.0;
    double inf_r = 0.0;
    /// r = ln_intercept + ln_slope ln t over the trailing window.
    double ln_slope = 0.0;
    double ln_intercept = 0.0;
    double ln_fit_rms = 0.0;
    /// sup |r| / ln t on [t_a, t_b] and on [t_a/2, t_b/2].
    double bound = 0.0;
    double previous_bound = 0.0;
    /// |bound - previous_bound| / max of the two.
    double variation = 0.0;
    double t_a = 0.0;
    double t_b = 0.0;
    bool pass = false;

    nlohmann::json to_json() const;
};

/// r(t) = h(t) - c0 t against ln t. Passes when the bound sup |r|/ln t is
/// finite on both windows and varies by less than max_variation.
DriftReport log_drift_check(const TrajectoryLog& log, double c0, double window_fraction = 0.5, double max_variation = 0.2);

/// Outermost abscissae where the field crosses level, by linear interpolation.
std::optional<std::pair<double, double>> level_set_positions(const Field& u, double level, double u_star);

struct LevelSetTrack {
    double level = 0.0;
    std::vector<double> t;
    std::vector<double> x_minus;
    std::vector<double> x_plus;

    /// Least-squares slope of x_plus over the trailing window fraction.
    double speed(double window_fraction = 0.5) const;
    nlohmann::json to_json() const;
};

/// Level-set positions over every snapshot of a run (snapshots where u stays
/// below the level are skipped).
LevelSetTrack level_set_track(const TrajectoryLog& log, double level, double u_star);

/// sup |u - reference| over u's nodes in [a, b] and at a, b themselves.
double sup_distance_on_window(const Field& u, const std::function<double(double)>& reference, double a, double b);
double sup_distance_on_window(const Field& u, const Field& reference, double a, double b);

/// Piecewise-linear value of a field; throws DomainError outside its span.
double field_value(const Field& u, double x);

enum class MuLimit { ToZero, ToInfinity };

struct MuLimitOptions {
    double t_a = 1.0;
    double t_b = 2.0;
    /// Spatial window; when x_b <= x_a it defaults to [0, h0] (ToZero) or [0, 5] (ToInfinity).
    double x_a = 0.0;
    double x_b = 0.0;
    int jobs = 1;
};

struct MuLimitRow {
    double mu;
    /// sup over the window of |u_mu - v| (ToZero) or |u_mu - V| (ToInfinity).
    double sup_difference;
    double h_end;
};

struct MuLimitReport {
    MuLimit mode = MuLimit::ToZero;
    double h0 = 0.0;
    std::vector<MuLimitRow> rows;
    /// Empty for a single-entry list.
    std::optional<bool> difference_decreasing;
    /// ToZero: h_end - h0 decreasing; ToInfinity: h_end increasing.
    std::optional<bool> front_monotone;

    bool pass() const;
    nlohmann::json to_json() const;
};

/// mus must run in the limit's direction (decreasing for ToZero, increasing
/// for ToInfinity). The template's kernel, reaction, d, h0 and u0 are reused.
MuLimitReport mu_limit_experiment(const ProblemSpec& templ, const std::vector<double>& mus, MuLimit mode, SolverConfig cfg,
                                  const MuLimitOptions& opt = {});

} // namespace nlfb
