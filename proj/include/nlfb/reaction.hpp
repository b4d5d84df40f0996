#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace nlfb {

struct PerturbedReaction;

struct ReactionAudit {
    bool pass = true;
    std::vector<std::string> failures;

    nlohmann::json to_json() const;
};

/// Growth term f(u). Logistic u(a - b u) or a named entry of the built-in
/// registry ("cubic", "bistable", "quadratic", "zero"); custom forms carry
/// their derivative explicitly.
class Reaction {
public:
    using Fn = std::function<double(double)>;

    static Reaction logistic(double a, double b);
    /// Registry lookup; params may hold e.g. {"theta": 0.3} for "bistable".
    static Reaction custom(const std::string& name, const nlohmann::json& params = nlohmann::json::object());
    /// Arbitrary f with user-supplied derivative. deficit(w) = f(u* - w), if
    /// given, should avoid cancellation near u*.
    static Reaction from_functions(std::string name, Fn f, Fn f_prime, Fn deficit = {});

    static Reaction from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    double f(double u) const { return f_(u) - delta_ * u; }
    double f_prime(double u) const { return fp_(u) - delta_; }
    double operator()(double u) const { return f(u); }

    /// f(u* - w) evaluated without cancellation where a closed form exists.
    double f_from_deficit(double w) const;

    /// Positive zero; throws RootNotFoundError when f has no sign change.
    double u_star() const;
    bool has_positive_root() const;

    /// sup |f'| on [0, u_max] sampled on a fine grid.
    double max_abs_f_prime(double u_max) const;

    double delta() const { return delta_; }
    const std::string& name() const { return name_; }
    bool is_logistic() const { return logistic_.has_value(); }

private:
    friend PerturbedReaction perturb(const Reaction& r, double delta);
    Reaction() = default;

    std::string name_;
    nlohmann::json params_;
    Fn f_;
    Fn fp_;
    Fn deficit_;
    std::optional<std::pair<double, double>> logistic_;
    double delta_ = 0.0;
    mutable std::optional<double> u_star_;
};

/// f~(u) = f(u) - delta u.
struct PerturbedReaction {
    Reaction reaction;
    double delta;
    double u_star_delta;
};

/// Every clause of the monostable condition on a 1e4-point grid of (0, 2u*].
ReactionAudit validate_F(const Reaction& r);

/// Bracketing bisection on (0, u_max].
double positive_root(const Reaction& r, double u_max = 1e6);

/// min f(u) / min{u, u* - u} over the audit grid, before any margin.
double rho_grid_minimum(const Reaction& r);
/// rho_grid_minimum lowered by a 1% safety margin.
double rho_constant(const Reaction& r);

PerturbedReaction perturb(const Reaction& r, double delta);

} // namespace nlfb
