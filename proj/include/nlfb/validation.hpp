#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlfb/fbsolver.hpp"
#include "nlfb/semiwave.hpp"

namespace nlfb {

/// Upper solution (1 + eps) phi(x - h), eps = (t + theta)^-beta,
/// h = c0 t + l + c0/(1 - beta) [(t + theta)^(1-beta) - theta^(1-beta)].
struct SuperSemiwave {
    double theta = 100.0;
    double beta = 2.0;
    double l = 40.0;
};

/// Lower plateau: p = u* - rho1/h on [0, h/2], 2 p (1 - x/h) on [h/2, h], h = 2 eta1 (t + theta).
struct SubPlateau {
    double theta = 4000.0;
    double eta1 = 0.0;
    double rho1 = 10.0;
};

/// Lower solution (1 - eps) phi(x - h), eps = l1/(t + theta),
/// h = c0 t + c0 theta - l2 ln((t + theta)/theta). The PDE is required on
/// (eta0 h, h); the strip [0, eta0 h] is compared against a run instead.
struct SubSemiwave {
    double theta = 100.0;
    double l1 = 1.0;
    double l2 = 1.0;
    /// 0 selects eta1/c0 with eta1 half of the plateau bound.
    double eta0 = 0.0;
};

/// l_eps min{1, 2 (h - x)/h}, h = (l1 t + theta)^(1/(gamma-1)), l_eps = u* - sqrt(eps).
struct SubPowerFront {
    double theta = 30.0;
    double l1 = 0.01;
    double eps = 0.01;
};

/// l_eps min{1, (h - x)/(t + theta)^alpha}, h = l1 (t + theta) ln(t + theta).
struct SubTLogTFront {
    double theta = 300.0;
    double l1 = 0.02;
    double alpha = 0.5;
    double eps = 0.01;
};

using FixtureKind = std::variant<SuperSemiwave, SubPlateau, SubSemiwave, SubPowerFront, SubTLogTFront>;

/// Upper bound on eta1 for the plateau construction:
/// min{c0/2, rho/8, rho r/12, (d r/36) int_{2r/3}^r J}. Needs a compact kernel.
double plateau_eta1_bound(const Kernel& k, const Reaction& r, double d, double c0);

class FixtureCandidate {
public:
    /// Checks parameter ranges and that the semi-wave (when the kind needs one)
    /// matches kernel, reaction, d and mu; throws ContractError otherwise.
    FixtureCandidate(FixtureKind kind, Kernel k, Reaction r, double d, double mu,
                     std::optional<SemiWaveSolution> semiwave = std::nullopt);

    const FixtureKind& kind() const { return kind_; }
    std::string kind_name() const;
    bool is_upper() const;
    const Kernel& kernel() const { return kernel_; }
    const Reaction& reaction() const { return reaction_; }
    double d() const { return d_; }
    double mu() const { return mu_; }
    const std::optional<SemiWaveSolution>& semiwave() const { return semiwave_; }

    double front(double t) const;
    double front_rate(double t) const;
    double value(double t, double x) const;
    /// Closed-form time derivative. On a semi-wave fixture phi' is the forward
    /// difference on the profile grid, the derivative the profile solves with.
    double time_derivative(double t, double x) const;
    /// Points where the x-profile has a corner (excluded from the PDE check).
    std::vector<double> ridges(double t) const;
    /// Interval where the PDE inequality is required.
    double pde_lower(double t) const;
    bool pde_includes_front() const;
    /// Break points of value(t, .) on [0, front(t)].
    std::vector<double> nodes(double t) const;

    nlohmann::json to_json() const;

private:
    double semiwave_scale(double t) const;

    FixtureKind kind_;
    Kernel kernel_;
    Reaction reaction_;
    double d_;
    double mu_;
    std::optional<SemiWaveSolution> semiwave_;
    double u_star_;
    double gamma_ = 0.0;
    double eta0_ = 0.0;
};

struct FixtureLattice {
    double t0 = 0.0;
    double t1 = 10.0;
    int nt = 21;
    /// Spatial samples per time on [0, h(t)].
    int nx = 201;
    int jobs = 1;
    /// Optional run used for the ordering constraints (initial data, and the
    /// strip [0, eta0 h] for SubSemiwave); the shift T is fitted from its snapshots.
    const TrajectoryLog* run = nullptr;
    double ordering_tol = 1e-9;
    /// Keep every sampled margin for the CSV dump.
    bool keep_samples = false;
};

struct MarginSample {
    std::string constraint;
    double t;
    double x;
    double margin;
};

struct ResidualReport {
    std::string kind;
    /// Minimum margins; positive means the inequality holds with room.
    double pde_margin = 0.0;
    std::optional<double> front_margin;
    double boundary_margin = 0.0;
    std::optional<double> ordering_margin;
    std::optional<double> strip_margin;
    /// Fitted shift T and the margin of the comparison along the run from T on.
    std::optional<double> fitted_shift;
    std::optional<double> trajectory_margin;
    MarginSample worst{"none", 0.0, 0.0, 0.0};
    double quadrature_error = 0.0;
    double tolerance = 0.0;
    std::size_t points = 0;
    std::size_t dropped = 0;
    std::vector<std::string> notes;
    std::vector<MarginSample> samples;
    bool pass = false;

    nlohmann::json to_json() const;
    /// Columns t,x,constraint,margin (needs FixtureLattice::keep_samples).
    void write_margin_csv(std::ostream& os) const;
};

ResidualReport verify_fixture(const FixtureCandidate& c, const FixtureLattice& lattice);

struct PsiReport {
    double eps = 0.0;
    double kappa1 = 0.0;
    double kappa2 = 0.0;
    double dx = 0.0;
    /// Smallest s found (doubling then bisection along kappa scaled so that
    /// min{kappa1, kappa2 - kappa1} = s) for which the inequality holds on [s, kappa2].
    double kappa_eps = 0.0;
    bool found = false;
    /// The given pair checked on [min{kappa_eps, kappa1, kappa2 - kappa1}, kappa2];
    /// NaN when that interval is empty.
    double worst_margin = 0.0;
    double worst_x = 0.0;
    bool holds = false;

    nlohmann::json to_json() const;
};

/// int_0^kappa2 P(x - y) psi(y) dy >= (1 - eps) psi(x) with
/// psi = min{1, (kappa2 - |x|)/kappa1}, sampled every dx.
PsiReport psi_inequality_check(const Kernel& p, double kappa1, double kappa2, double eps, double dx);

/// max over checkpoints of |Q(t) - Q(0) - int_0^t int f(u)| with Q = mass + (d/mu) h.
double mass_flux_residual(const TrajectoryLog& log, const ProblemSpec& spec);

struct ComparisonReport {
    /// max of u_a - u_b over snapshot nodes and of h_a - h_b over log rows.
    double max_u_gap = 0.0;
    double max_h_gap = 0.0;
    double worst_t = 0.0;
    std::size_t checkpoints = 0;
    double tol = 0.0;
    bool pass = false;

    nlohmann::json to_json() const;
};

/// Runs both specs (equal except u0, with u0_a <= u0_b) and checks the order persists.
ComparisonReport comparison_order_check(const ProblemSpec& a, const ProblemSpec& b, SolverConfig cfg, double tol = 1e-9);

struct RefinementReport {
    std::vector<double> dx;
    std::vector<double> dt;
    std::vector<double> h_end;
    std::vector<double> differences;
    std::vector<double> orders;
    double order = 0.0;
    bool inconclusive = false;

    nlohmann::json to_json() const;
};

/// Observed order of h(t_end) under simultaneous halving of dx and dt.
RefinementReport refinement_order(const ProblemSpec& spec, const SolverConfig& cfg, int levels, int jobs = 1);

} // namespace nlfb
