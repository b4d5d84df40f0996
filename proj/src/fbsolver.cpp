#include "nlfb/fbsolver.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "json_util.hpp"

namespace nlfb {

using detail::reject_unknown;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_fb(Variant v)
{
    return v == Variant::HalfLineFB || v == Variant::TwoSidedFB;
}

bool is_cauchy(Variant v)
{
    return v == Variant::CauchyFullLine || v == Variant::CauchyHalfLine;
}

bool symmetric(Variant v)
{
    return v == Variant::TwoSidedFB || v == Variant::CauchyFullLine;
}

bool halfline_killing(Variant v)
{
    return v == Variant::HalfLineFB || v == Variant::CauchyHalfLine || v == Variant::FixedDomain;
}

} // namespace

std::string to_string(Variant v)
{
    switch (v) {
    case Variant::HalfLineFB: return "HalfLineFB";
    case Variant::TwoSidedFB: return "TwoSidedFB";
    case Variant::CauchyFullLine: return "CauchyFullLine";
    case Variant::CauchyHalfLine: return "CauchyHalfLine";
    case Variant::FixedDomain: return "FixedDomain";
    }
    return "?";
}

Variant variant_from_string(const std::string& s)
{
    for (Variant v : {Variant::HalfLineFB, Variant::TwoSidedFB, Variant::CauchyFullLine, Variant::CauchyHalfLine, Variant::FixedDomain})
        if (to_string(v) == s)
            return v;
    throw ValidationError("unknown problem variant \"" + s + "\"");
}

std::string to_string(Outcome o)
{
    switch (o) {
    case Outcome::Spreading: return "Spreading";
    case Outcome::Vanishing: return "Vanishing";
    case Outcome::Undecided: return "Undecided";
    }
    return "?";
}

nlohmann::json InitialData::to_json() const
{
    nlohmann::json j{{"shape", shape}, {"ramp", ramp}};
    j["amplitude"] = amplitude ? nlohmann::json(*amplitude) : nlohmann::json(nullptr);
    if (shape == "sampled") {
        j["x"] = xs;
        j["u"] = us;
    }
    return j;
}

InitialData InitialData::from_json(const nlohmann::json& j)
{
    reject_unknown(j, {"shape", "amplitude", "ramp", "x", "u"}, "u0");
    InitialData d;
    d.shape = j.value("shape", std::string("plateau"));
    if (j.contains("amplitude") && !j.at("amplitude").is_null())
        d.amplitude = j.at("amplitude").get<double>();
    d.ramp = j.value("ramp", 1.0);
    if (d.shape == "sampled") {
        d.xs = j.at("x").get<std::vector<double>>();
        d.us = j.at("u").get<std::vector<double>>();
        if (d.xs.size() != d.us.size() || d.xs.size() < 2)
            throw ValidationError("u0: sampled data needs matching x and u arrays of length >= 2");
        for (std::size_t i = 1; i < d.xs.size(); ++i)
            if (!(d.xs[i] > d.xs[i - 1]))
                throw ValidationError("u0: sample abscissae must increase");
        for (double v : d.us)
            if (!(v >= 0))
                throw ValidationError("u0: samples must be nonnegative");
    } else if (d.shape != "plateau") {
        throw ValidationError("u0: unknown shape \"" + d.shape + "\"");
    }
    if (!(d.ramp > 0))
        throw ValidationError("u0: ramp width must be positive");
    return d;
}

double ProblemSpec::initial_value(double x) const
{
    double r = symmetric(variant) ? std::abs(x) : x;
    if (r < 0 || r > h0)
        return 0.0;
    if (u0.shape == "sampled") {
        const auto& xs = u0.xs;
        if (r <= xs.front())
            return u0.us.front();
        if (r >= xs.back())
            return u0.us.back();
        auto it = std::upper_bound(xs.begin(), xs.end(), r);
        const std::size_t i = static_cast<std::size_t>(it - xs.begin());
        const double s = (r - xs[i - 1]) / (xs[i] - xs[i - 1]);
        return u0.us[i - 1] + s * (u0.us[i] - u0.us[i - 1]);
    }
    const double m = u0.amplitude ? *u0.amplitude : reaction.u_star();
    return m * std::min(1.0, (h0 - r) / u0.ramp);
}

double ProblemSpec::value_scale() const
{
    if (reaction.has_positive_root())
        return reaction.u_star();
    double m = u0.amplitude.value_or(1.0);
    for (double v : u0.us)
        m = std::max(m, v);
    return m;
}

nlohmann::json ProblemSpec::to_json() const
{
    return {{"variant", to_string(variant)}, {"kernel", kernel.to_json()}, {"reaction", reaction.to_json()},
            {"d", d},
            {"mu", mu},
            {"h0", h0},
            {"u0", u0.to_json()}};
}

ProblemSpec ProblemSpec::from_json(const nlohmann::json& j)
{
    reject_unknown(j, {"variant", "kernel", "reaction", "d", "mu", "h0", "u0"}, "problem");
    ProblemSpec p;
    if (j.contains("variant"))
        p.variant = variant_from_string(j.at("variant").get<std::string>());
    if (j.contains("kernel"))
        p.kernel = Kernel::from_json(j.at("kernel"));
    if (j.contains("reaction"))
        p.reaction = Reaction::from_json(j.at("reaction"));
    p.d = j.value("d", p.d);
    p.mu = j.value("mu", p.mu);
    p.h0 = j.value("h0", p.h0);
    if (j.contains("u0"))
        p.u0 = InitialData::from_json(j.at("u0"));
    if (!(p.d > 0))
        throw ValidationError("problem: d must be positive");
    if (!(p.mu > 0))
        throw ValidationError("problem: mu must be positive");
    if (!(p.h0 > 0))
        throw ValidationError("problem: h0 must be positive");
    return p;
}

nlohmann::json SolverConfig::to_json() const
{
    return {{"dx", dx},
            {"dt", dt},
            {"t_end", t_end},
            {"log_every", log_every},
            {"snapshot_every", snapshot_every},
            {"scheme", scheme == Scheme::RK2 ? "rk2" : "euler"},
            {"headroom", headroom},
            {"max_nodes", max_nodes},
            {"cauchy_floor", cauchy_floor},
            {"classify",
             {{"growth_lengths", classify.growth_lengths},
              {"spreading_level", classify.spreading_level},
              {"vanishing_level", classify.vanishing_level}}}};
}

SolverConfig SolverConfig::from_json(const nlohmann::json& j)
{
    reject_unknown(j, {"dx", "dt", "t_end", "log_every", "snapshot_every", "scheme", "headroom", "max_nodes", "cauchy_floor", "classify"},
                   "solver");
    SolverConfig c;
    c.dx = j.value("dx", c.dx);
    c.dt = j.value("dt", c.dt);
    c.t_end = j.value("t_end", c.t_end);
    c.log_every = j.value("log_every", c.log_every);
    c.snapshot_every = j.value("snapshot_every", c.snapshot_every);
    const std::string scheme = j.value("scheme", std::string("euler"));
    if (scheme == "euler")
        c.scheme = Scheme::Euler;
    else if (scheme == "rk2")
        c.scheme = Scheme::RK2;
    else
        throw ValidationError("solver: scheme must be \"euler\" or \"rk2\"");
    c.headroom = j.value("headroom", c.headroom);
    c.max_nodes = j.value("max_nodes", c.max_nodes);
    c.cauchy_floor = j.value("cauchy_floor", c.cauchy_floor);
    if (j.contains("classify")) {
        const auto& k = j.at("classify");
        reject_unknown(k, {"growth_lengths", "spreading_level", "vanishing_level"}, "solver.classify");
        c.classify.growth_lengths = k.value("growth_lengths", c.classify.growth_lengths);
        c.classify.spreading_level = k.value("spreading_level", c.classify.spreading_level);
        c.classify.vanishing_level = k.value("vanishing_level", c.classify.vanishing_level);
    }
    return c;
}

double stability_budget(const ProblemSpec& spec)
{
    const double scale = spec.value_scale();
    return 0.5 / (2.0 * spec.d + spec.reaction.max_abs_f_prime(2.0 * scale));
}

void check_config(const ProblemSpec& spec, const SolverConfig& cfg)
{
    if (!(cfg.dx > 0))
        throw ConfigError("solver: dx must be positive");
    if (!(cfg.dt > 0))
        throw ConfigError("solver: dt must be positive");
    if (!(cfg.t_end >= 0))
        throw ConfigError("solver: t_end must be nonnegative");
    const double budget = stability_budget(spec);
    if (cfg.dt > budget * (1 + 1e-12)) {
        std::ostringstream os;
        os << "solver: dt = " << cfg.dt << " exceeds the explicit stability budget " << budget;
        throw ConfigError(os.str());
    }
    if (spec.variant == Variant::FixedDomain) {
        const double n = std::round(spec.h0 / cfg.dx);
        if (std::abs(n * cfg.dx - spec.h0) > 1e-9 * std::max(1.0, spec.h0))
            throw ConfigError("solver: FixedDomain needs h0 to be a multiple of dx");
    }
}

Field State::field(Variant v) const
{
    Field f;
    f.x.reserve(u.size() + 2);
    f.u.reserve(u.size() + 2);
    if (v == Variant::TwoSidedFB) {
        f.x.push_back(g);
        f.u.push_back(0.0);
    }
    for (std::size_t i = 0; i < u.size(); ++i) {
        f.x.push_back(x(i));
        f.u.push_back(u[i]);
    }
    if (is_fb(v)) {
        f.x.push_back(h);
        f.u.push_back(0.0);
    }
    return f;
}

void TrajectoryLog::write_csv(std::ostream& os) const
{
    os << "t,h,g,mass,sup_u,flux\n";
    os << std::setprecision(17);
    for (std::size_t i = 0; i < t.size(); ++i)
        os << t[i] << ',' << h[i] << ',' << g[i] << ',' << mass[i] << ',' << sup_u[i] << ',' << flux[i] << '\n';
}

TrajectoryLog TrajectoryLog::read_csv(std::istream& is)
{
    TrajectoryLog log;
    std::string line;
    if (!std::getline(is, line) || line.rfind("t,h,g,mass,sup_u,flux", 0) != 0)
        throw ContractError("trajectory csv: missing header t,h,g,mass,sup_u,flux");
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(ss, cell, ','))
            v.push_back(std::stod(cell));
        if (v.size() < 6)
            throw ContractError("trajectory csv: short row");
        log.t.push_back(v[0]);
        log.h.push_back(v[1]);
        log.g.push_back(v[2]);
        log.mass.push_back(v[3]);
        log.sup_u.push_back(v[4]);
        log.flux.push_back(v[5]);
    }
    return log;
}

void write_snapshot_csv(std::ostream& os, const Field& f)
{
    os << "x,u\n" << std::setprecision(17);
    for (std::size_t i = 0; i < f.x.size(); ++i)
        os << f.x[i] << ',' << f.u[i] << '\n';
}

Solver::Solver(ProblemSpec spec, SolverConfig cfg)
    : spec_(std::move(spec))
    , cfg_(cfg)
    , conv_(spec_.kernel, cfg.dx)
{
    check_config(spec_, cfg_);
}

bool Solver::moving() const
{
    return is_fb(spec_.variant);
}

double Solver::kill_rate(long idx)
{
    if (!halfline_killing(spec_.variant))
        return 1.0;
    const auto k = static_cast<std::size_t>(idx);
    while (halfline_.size() <= k)
        halfline_.push_back(spec_.kernel.halfline_mass(static_cast<double>(halfline_.size()) * cfg_.dx));
    return halfline_[k];
}

End Solver::left_end(const State& s) const
{
    if (spec_.variant == Variant::TwoSidedFB)
        return End::ramp(s.x(0) - s.g);
    return End::cut();
}

End Solver::right_end(const State& s) const
{
    if (moving())
        return End::ramp(s.h - s.x(s.u.size() - 1));
    return End::cut();
}

State Solver::initial_state() const
{
    State s;
    s.dx = cfg_.dx;
    const double dx = cfg_.dx;
    const double h0 = spec_.h0;
    const auto pad = static_cast<long>(std::max<std::size_t>(10, conv_.band() ? conv_.band() : static_cast<std::size_t>(std::ceil(5.0 * spec_.kernel.interaction_length() / dx))));
    long lo = 0;
    long hi = 0;
    switch (spec_.variant) {
    case Variant::HalfLineFB:
        lo = 0;
        hi = static_cast<long>(std::ceil(h0 / dx)) - 1;
        while (static_cast<double>(hi) * dx >= h0)
            --hi;
        while (static_cast<double>(hi + 1) * dx < h0)
            ++hi;
        s.h = h0;
        break;
    case Variant::TwoSidedFB:
        hi = static_cast<long>(std::ceil(h0 / dx)) - 1;
        while (static_cast<double>(hi) * dx >= h0)
            --hi;
        while (static_cast<double>(hi + 1) * dx < h0)
            ++hi;
        lo = -hi;
        s.h = h0;
        s.g = -h0;
        break;
    case Variant::CauchyFullLine:
        hi = static_cast<long>(std::ceil(h0 / dx)) + pad;
        lo = -hi;
        s.h = h0;
        break;
    case Variant::CauchyHalfLine:
        lo = 0;
        hi = static_cast<long>(std::ceil(h0 / dx)) + pad;
        s.h = h0;
        break;
    case Variant::FixedDomain:
        lo = 0;
        hi = static_cast<long>(std::llround(h0 / dx));
        s.h = h0;
        break;
    }
    s.first = lo;
    s.u.resize(static_cast<std::size_t>(hi - lo + 1));
    for (std::size_t i = 0; i < s.u.size(); ++i)
        s.u[i] = spec_.initial_value(s.x(i));
    if (spec_.variant == Variant::FixedDomain)
        s.u.back() = spec_.initial_value(h0);
    return s;
}

void Solver::rates(const State& s, std::vector<double>& du, double& dh, double& dg)
{
    const std::size_t n = s.u.size();
    du.resize(n);
    dh = 0.0;
    dg = 0.0;
    if (n == 0)
        return;
    const End L = left_end(s);
    const End R = right_end(s);
    work_.resize(n);
    conv_.apply(s.u.data(), n, L, R, work_.data());
    const double d = spec_.d;
    for (std::size_t i = 0; i < n; ++i)
        du[i] = d * (work_[i] - kill_rate(s.first + static_cast<long>(i)) * s.u[i]) + spec_.reaction.f(s.u[i]);
    if (moving())
        dh = spec_.mu * conv_.flux_right(s.u.data(), n, L, R);
    if (spec_.variant == Variant::TwoSidedFB)
        dg = -spec_.mu * conv_.flux_left(s.u.data(), n, L, R);
}

double Solver::flux(const State& s) const
{
    if (!moving() || s.u.empty())
        return 0.0;
    return conv_.flux_right(s.u.data(), s.u.size(), left_end(s), right_end(s));
}

namespace {

template <class F>
double integrate_field(const Field& f, F fn)
{
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < f.x.size(); ++i)
        sum += 0.5 * (fn(f.u[i]) + fn(f.u[i + 1])) * (f.x[i + 1] - f.x[i]);
    return sum;
}

} // namespace

double Solver::mass(const State& s) const
{
    return integrate_field(s.field(spec_.variant), [](double v) { return v; });
}

double Solver::reaction_integral(const State& s) const
{
    return integrate_field(s.field(spec_.variant), [this](double v) { return spec_.reaction.f(v); });
}

void Solver::admit_nodes(State& s) const
{
    if (!moving())
        return;
    while (static_cast<double>(s.first + static_cast<long>(s.u.size())) * s.dx < s.h)
        s.u.push_back(0.0);
    while (s.u.size() > 1 && s.x(s.u.size() - 1) >= s.h)
        s.u.pop_back();
    if (spec_.variant == Variant::TwoSidedFB) {
        long add = 0;
        while (static_cast<double>(s.first - add - 1) * s.dx > s.g)
            ++add;
        if (add > 0) {
            s.u.insert(s.u.begin(), static_cast<std::size_t>(add), 0.0);
            s.first -= add;
        }
        while (s.u.size() > 1 && s.x(0) <= s.g) {
            s.u.erase(s.u.begin());
            ++s.first;
        }
    }
    if (s.u.size() > cfg_.max_nodes)
        throw ResourceError("solver: window exceeds the node cap of " + std::to_string(cfg_.max_nodes));
}

void Solver::widen_window(State& s) const
{
    if (!is_cauchy(spec_.variant))
        return;
    const double floor = cfg_.cauchy_floor * spec_.value_scale();
    const std::size_t pad = std::max<std::size_t>(10, conv_.band() ? conv_.band() : static_cast<std::size_t>(std::ceil(5.0 * spec_.kernel.interaction_length() / s.dx)));
    const std::size_t n = s.u.size();
    const auto grow = std::max<std::size_t>(pad, static_cast<std::size_t>(cfg_.headroom * static_cast<double>(n)));
    bool right = false;
    for (std::size_t i = n > pad ? n - pad : 0; i < n; ++i)
        right = right || s.u[i] > floor;
    bool left = false;
    if (spec_.variant == Variant::CauchyFullLine)
        for (std::size_t i = 0; i < std::min(pad, n); ++i)
            left = left || s.u[i] > floor;
    if (right)
        s.u.resize(n + grow, 0.0);
    if (left) {
        s.u.insert(s.u.begin(), grow, 0.0);
        s.first -= static_cast<long>(grow);
    }
    if (s.u.size() > cfg_.max_nodes)
        throw ResourceError("solver: window exceeds the node cap of " + std::to_string(cfg_.max_nodes));
    // The reported front of a Cauchy run is the edge of its numerical support.
    double edge = s.x(0);
    for (std::size_t i = s.u.size(); i-- > 0;)
        if (s.u[i] > floor) {
            edge = s.x(i);
            break;
        }
    s.h = edge;
}

void Solver::step(State& s, double dt)
{
    std::vector<double> k1;
    double dh1 = 0.0;
    double dg1 = 0.0;
    rates(s, k1, dh1, dg1);
    State s1 = s;
    for (std::size_t i = 0; i < s1.u.size(); ++i)
        s1.u[i] = std::max(0.0, s.u[i] + dt * k1[i]);
    s1.h = s.h + dt * dh1;
    s1.g = s.g + dt * dg1;
    s1.t = s.t + dt;
    if (cfg_.scheme == Scheme::Euler) {
        admit_nodes(s1);
        widen_window(s1);
        s = std::move(s1);
        return;
    }
    // Heun: average of the current state and an Euler step taken from the predictor.
    admit_nodes(s1);
    std::vector<double> k2;
    double dh2 = 0.0;
    double dg2 = 0.0;
    rates(s1, k2, dh2, dg2);
    State out = s1;
    for (std::size_t i = 0; i < out.u.size(); ++i) {
        const long idx = s1.first + static_cast<long>(i);
        const long j = idx - s.first;
        const double base = (j >= 0 && j < static_cast<long>(s.u.size())) ? s.u[static_cast<std::size_t>(j)] : 0.0;
        out.u[i] = std::max(0.0, 0.5 * (base + s1.u[i] + dt * k2[i]));
    }
    out.h = s.h + 0.5 * dt * (dh1 + dh2);
    out.g = s.g + 0.5 * dt * (dg1 + dg2);
    out.t = s.t + dt;
    admit_nodes(out);
    widen_window(out);
    s = std::move(out);
}

TrajectoryLog Solver::run()
{
    TrajectoryLog log;
    log.dx = cfg_.dx;
    State s = initial_state();
    widen_window(s);
    auto record = [&](const State& st) {
        log.t.push_back(st.t);
        log.h.push_back(st.h);
        log.g.push_back(spec_.variant == Variant::TwoSidedFB ? st.g : -kInf);
        log.mass.push_back(mass(st));
        double m = 0.0;
        for (double v : st.u)
            m = std::max(m, v);
        log.sup_u.push_back(m);
        log.flux.push_back(flux(st));
        log.reaction.push_back(reaction_integral(st));
    };
    auto snap = [&](const State& st) { log.snapshots.push_back({st.t, st.field(spec_.variant)}); };
    record(s);
    snap(s);
    if (cfg_.t_end <= 0)
        return log;
    const double dt = cfg_.dt;
    const auto steps = static_cast<long>(std::ceil(cfg_.t_end / dt - 1e-9));
    const long log_stride = cfg_.log_every > 0 ? std::max(1L, std::lround(cfg_.log_every / dt)) : 1;
    const long snap_stride = cfg_.snapshot_every > 0 ? std::max(1L, std::lround(cfg_.snapshot_every / dt)) : 0;
    try {
        for (long k = 1; k <= steps; ++k) {
            const bool last = k == steps;
            const double step_dt = last ? cfg_.t_end - static_cast<double>(k - 1) * dt : dt;
            step(s, step_dt);
            s.t = last ? cfg_.t_end : static_cast<double>(k) * dt;
            if (last || k % log_stride == 0)
                record(s);
            if (last || (snap_stride && k % snap_stride == 0))
                snap(s);
        }
    } catch (const ResourceError& e) {
        throw PartialRunError(e.what(), std::move(log));
    }
    return log;
}

State step(const ProblemSpec& spec, const SolverConfig& cfg, const State& s)
{
    Solver solver(spec, cfg);
    State out = s;
    solver.step(out);
    return out;
}

TrajectoryLog run(const ProblemSpec& spec, const SolverConfig& cfg)
{
    return Solver(spec, cfg).run();
}

Outcome classify(const TrajectoryLog& log, const ProblemSpec& spec, const ClassifyThresholds& th)
{
    if (log.size() < 2 || log.snapshots.empty())
        return Outcome::Undecided;
    const double t_end = log.t.back();
    if (!(t_end > 0))
        return Outcome::Undecided;
    std::size_t mid = 0;
    while (mid + 1 < log.size() && log.t[mid] < 0.5 * t_end)
        ++mid;
    const double growth = log.h.back() - log.h[mid];
    const Field& f = log.snapshots.back().field;
    double sup = 0.0;
    for (std::size_t i = 0; i < f.x.size(); ++i)
        if (std::abs(f.x[i]) <= spec.h0)
            sup = std::max(sup, f.u[i]);
    const double us = spec.value_scale();
    if (growth >= th.growth_lengths * spec.kernel.interaction_length() && sup > th.spreading_level * us)
        return Outcome::Spreading;
    if (growth < log.dx && sup < th.vanishing_level * us)
        return Outcome::Vanishing;
    return Outcome::Undecided;
}

} // namespace nlfb
