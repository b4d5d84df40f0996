#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlfb/convolution.hpp"
#include "nlfb/errors.hpp"
#include "nlfb/kernel.hpp"
#include "nlfb/reaction.hpp"

namespace nlfb {

enum class Variant { HalfLineFB, TwoSidedFB, CauchyFullLine, CauchyHalfLine, FixedDomain };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

/// u0(x) = amplitude * min{1, (h0 - |x|) / ramp} on |x| < h0 ("plateau"), or
/// linear interpolation of user samples on [0, h0] ("sampled").
struct InitialData {
    std::string shape = "plateau";
    /// Defaults to u* when unset.
    std::optional<double> amplitude;
    double ramp = 1.0;
    std::vector<double> xs;
    std::vector<double> us;

    nlohmann::json to_json() const;
    static InitialData from_json(const nlohmann::json& j);
};

struct ProblemSpec {
    Variant variant = Variant::HalfLineFB;
    Kernel kernel = Kernel::uniform(1.0);
    Reaction reaction = Reaction::logistic(1.0, 1.0);
    double d = 1.0;
    double mu = 1.0;
    double h0 = 10.0;
    InitialData u0;

    /// u0 at x (mirror-symmetric for the two-sided and full-line variants).
    double initial_value(double x) const;
    /// u* when f has one, otherwise sup u0.
    double value_scale() const;

    nlohmann::json to_json() const;
    static ProblemSpec from_json(const nlohmann::json& j);
};

enum class Scheme { Euler, RK2 };

struct ClassifyThresholds {
    double growth_lengths = 5.0;
    double spreading_level = 0.5;
    double vanishing_level = 0.01;
};

struct SolverConfig {
    double dx = 0.05;
    double dt = 0.01;
    double t_end = 10.0;
    /// Time between trajectory samples; 0 logs every step.
    double log_every = 0.1;
    /// Time between field snapshots; 0 keeps only the first and last.
    double snapshot_every = 0.0;
    Scheme scheme = Scheme::Euler;
    /// Extra capacity reserved when the window grows, as a fraction of its size.
    double headroom = 0.5;
    std::size_t max_nodes = 20'000'000;
    /// Cauchy variants: the window is widened while u exceeds floor * u* near its edge.
    double cauchy_floor = 1e-14;
    ClassifyThresholds classify;

    nlohmann::json to_json() const;
    static SolverConfig from_json(const nlohmann::json& j);
};

/// dt <= 0.5 / (2d + max|f'| on [0, 2u*]).
double stability_budget(const ProblemSpec& spec);

/// Throws ConfigError when the explicit-step budget or the grid is inconsistent.
void check_config(const ProblemSpec& spec, const SolverConfig& cfg);

struct State {
    double t = 0.0;
    double h = 0.0;
    double g = -std::numeric_limits<double>::infinity();
    double dx = 0.0;
    /// Grid index of u[0]; node i sits at (first + i) dx.
    long first = 0;
    std::vector<double> u;

    double x(std::size_t i) const { return static_cast<double>(first + static_cast<long>(i)) * dx; }
    /// Node values plus the vanishing front point(s), ready for interpolation.
    Field field(Variant v) const;
};

struct Snapshot {
    double t;
    Field field;
};

struct TrajectoryLog {
    double dx = 0.0;
    std::vector<double> t;
    std::vector<double> h;
    std::vector<double> g;
    std::vector<double> mass;
    std::vector<double> sup_u;
    std::vector<double> flux;
    /// int f(u) dx; kept in memory for the mass-flux identity, not written to CSV.
    std::vector<double> reaction;
    std::vector<Snapshot> snapshots;

    std::size_t size() const { return t.size(); }
    void write_csv(std::ostream& os) const;
    static TrajectoryLog read_csv(std::istream& is);
};

void write_snapshot_csv(std::ostream& os, const Field& f);

/// Aborted run: carries everything logged before the failure.
class PartialRunError : public ResourceError {
public:
    PartialRunError(const std::string& msg, TrajectoryLog log)
        : ResourceError(msg)
        , partial(std::move(log))
    {
    }
    TrajectoryLog partial;
};

class Solver {
public:
    Solver(ProblemSpec spec, SolverConfig cfg);

    State initial_state() const;
    /// One time step of length dt (the configured one by default).
    void step(State& s, double dt);
    void step(State& s) { step(s, cfg_.dt); }
    TrajectoryLog run();

    /// Right-hand sides at s: du on the nodes, h' and g'.
    void rates(const State& s, std::vector<double>& du, double& dh, double& dg);
    double flux(const State& s) const;
    double mass(const State& s) const;
    double reaction_integral(const State& s) const;

    const ProblemSpec& spec() const { return spec_; }
    const SolverConfig& config() const { return cfg_; }

private:
    End left_end(const State& s) const;
    End right_end(const State& s) const;
    bool moving() const;
    void admit_nodes(State& s) const;
    void widen_window(State& s) const;
    double kill_rate(long idx);

    ProblemSpec spec_;
    SolverConfig cfg_;
    HatConvolution conv_;
    std::vector<double> halfline_;
    std::vector<double> work_;
};

/// One explicit step as a free function (builds a solver; use Solver for loops).
State step(const ProblemSpec& spec, const SolverConfig& cfg, const State& s);
TrajectoryLog run(const ProblemSpec& spec, const SolverConfig& cfg);

enum class Outcome { Spreading, Vanishing, Undecided };
std::string to_string(Outcome o);

Outcome classify(const TrajectoryLog& log, const ProblemSpec& spec, const ClassifyThresholds& th = {});

} // namespace nlfb
