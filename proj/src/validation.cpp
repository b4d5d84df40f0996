#include "nlfb/validation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "nlfb/asymptotics.hpp"
#include "nlfb/convolution.hpp"

namespace nlfb {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

std::string fmt(double v)
{
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double algebraic_gamma(const Kernel& k)
{
    if (const auto* a = std::get_if<AlgebraicTail>(&k.family()))
        return a->gamma;
    return 0.0;
}

/// Linear interpolation; zero outside the field (the run's u vanishes beyond its front).
double value_or_zero(const Field& f, double x)
{
    if (f.x.empty() || x < f.x.front() || x > f.x.back())
        return 0.0;
    return field_value(f, x);
}

/// Segments of f that can reach x through a kernel of radius reach.
Field local_window(const Field& f, double x, double reach)
{
    if (!std::isfinite(reach))
        return f;
    const double lo = x - reach;
    const double hi = x + reach;
    auto first = std::upper_bound(f.x.begin(), f.x.end(), lo);
    auto last = std::lower_bound(f.x.begin(), f.x.end(), hi);
    std::size_t a = static_cast<std::size_t>(first - f.x.begin());
    std::size_t b = static_cast<std::size_t>(last - f.x.begin());
    a = a > 0 ? a - 1 : 0;
    b = std::min(b, f.x.size() - 1);
    Field w;
    w.x.assign(f.x.begin() + static_cast<long>(a), f.x.begin() + static_cast<long>(b) + 1);
    w.u.assign(f.u.begin() + static_cast<long>(a), f.u.begin() + static_cast<long>(b) + 1);
    return w;
}

Field split_segments(const Field& f)
{
    Field r;
    for (std::size_t i = 0; i < f.x.size(); ++i) {
        if (i > 0) {
            r.x.push_back(0.5 * (f.x[i - 1] + f.x[i]));
            r.u.push_back(0.5 * (f.u[i - 1] + f.u[i]));
        }
        r.x.push_back(f.x[i]);
        r.u.push_back(f.u[i]);
    }
    return r;
}

bool near(double a, double b, double scale)
{
    return std::abs(a - b) <= 1e-12 * std::max(1.0, scale);
}

} // namespace

double plateau_eta1_bound(const Kernel& k, const Reaction& r, double d, double c0)
{
    const double rad = k.support_radius();
    if (!std::isfinite(rad))
        throw ContractError("plateau fixture: the kernel must be compactly supported");
    const double rho = rho_constant(r);
    const double inner = k.tail_mass(2.0 * rad / 3.0) - k.tail_mass(rad);
    return std::min({c0 / 2.0, rho / 8.0, rho * rad / 12.0, d * rad / 36.0 * inner});
}

FixtureCandidate::FixtureCandidate(FixtureKind kind, Kernel k, Reaction r, double d, double mu,
                                   std::optional<SemiWaveSolution> semiwave)
    : kind_(std::move(kind))
    , kernel_(std::move(k))
    , reaction_(std::move(r))
    , d_(d)
    , mu_(mu)
    , semiwave_(std::move(semiwave))
{
    if (!(d_ > 0) || !(mu_ > 0))
        throw ContractError("fixture: d and mu must be positive");
    u_star_ = reaction_.u_star();
    gamma_ = algebraic_gamma(kernel_);
    const bool needs_wave = std::holds_alternative<SuperSemiwave>(kind_) || std::holds_alternative<SubSemiwave>(kind_) ||
                            std::holds_alternative<SubPlateau>(kind_);
    if (needs_wave) {
        if (!semiwave_)
            throw ContractError("fixture " + kind_name() + ": a semi-wave solution is required");
        const auto& s = *semiwave_;
        if (!near(s.d, d_, d_) || !near(s.mu, mu_, mu_) || !near(s.u_star, u_star_, u_star_))
            throw ContractError("fixture " + kind_name() + ": the semi-wave was solved for other d, mu or u*");
    }
    auto bad = [&](const std::string& what) { throw ContractError("fixture " + kind_name() + ": " + what); };
    std::visit(overloaded{
                   [&](const SuperSemiwave& p) {
                       if (!(p.beta > 1))
                           bad("beta must exceed 1");
                       if (!(p.theta >= 1))
                           bad("theta must be at least 1");
                       if (!(p.l > 0))
                           bad("l must be positive");
                   },
                   [&](const SubPlateau& p) {
                       const double bound = plateau_eta1_bound(kernel_, reaction_, d_, semiwave_->c0_grid);
                       if (!(p.eta1 > 0 && p.eta1 < bound))
                           bad("eta1 must lie in (0, " + fmt(bound) + ")");
                       if (!(p.theta >= 1))
                           bad("theta must be at least 1");
                       if (!(p.rho1 > 0 && p.rho1 < p.eta1 * p.theta * u_star_))
                           bad("rho1 must lie in (0, eta1 theta u*)");
                   },
                   [&](const SubSemiwave& p) {
                       if (!(p.theta >= 1))
                           bad("theta must be at least 1");
                       if (!(p.l1 > 0) || !(p.l2 > 0))
                           bad("l1 and l2 must be positive");
                       if (p.eta0 < 0 || p.eta0 >= 1)
                           bad("eta0 must lie in [0, 1)");
                       eta0_ = p.eta0 > 0 ? p.eta0
                                          : 0.5 * plateau_eta1_bound(kernel_, reaction_, d_, semiwave_->c0_grid) /
                                                semiwave_->c0_grid;
                       if (!(p.l1 / p.theta < 1))
                           bad("l1/theta must be below 1");
                   },
                   [&](const SubPowerFront& p) {
                       if (!(gamma_ > 1 && gamma_ < 2))
                           bad("needs an algebraic kernel with gamma in (1, 2)");
                       if (!(p.theta >= 1) || !(p.l1 > 0))
                           bad("theta >= 1 and l1 > 0 required");
                       if (!(p.eps > 0) || !(std::sqrt(p.eps) < u_star_))
                           bad("eps must lie in (0, u*^2)");
                   },
                   [&](const SubTLogTFront& p) {
                       if (gamma_ != 2.0)
                           bad("needs an algebraic kernel with gamma = 2");
                       if (!(p.theta > 1) || !(p.l1 > 0))
                           bad("theta > 1 and l1 > 0 required");
                       if (!(p.alpha > 0 && p.alpha < 1))
                           bad("alpha must lie in (0, 1)");
                       if (!(p.eps > 0) || !(std::sqrt(p.eps) < u_star_))
                           bad("eps must lie in (0, u*^2)");
                   },
               },
               kind_);
}

std::string FixtureCandidate::kind_name() const
{
    static const char* names[] = {"SuperSemiwave", "SubPlateau", "SubSemiwave", "SubPowerFront", "SubTLogTFront"};
    return names[kind_.index()];
}

bool FixtureCandidate::is_upper() const
{
    return std::holds_alternative<SuperSemiwave>(kind_);
}

double FixtureCandidate::semiwave_scale(double t) const
{
    if (const auto* p = std::get_if<SuperSemiwave>(&kind_))
        return 1.0 + std::pow(t + p->theta, -p->beta);
    const auto& p = std::get<SubSemiwave>(kind_);
    return 1.0 - p.l1 / (t + p.theta);
}

double FixtureCandidate::front(double t) const
{
    return std::visit(overloaded{
                          [&](const SuperSemiwave& p) {
                              const double c0 = semiwave_->c0_grid;
                              return c0 * t + p.l +
                                     c0 / (1.0 - p.beta) * (std::pow(t + p.theta, 1.0 - p.beta) - std::pow(p.theta, 1.0 - p.beta));
                          },
                          [&](const SubPlateau& p) { return 2.0 * p.eta1 * (t + p.theta); },
                          [&](const SubSemiwave& p) {
                              const double c0 = semiwave_->c0_grid;
                              return c0 * t + c0 * p.theta - p.l2 * std::log((t + p.theta) / p.theta);
                          },
                          [&](const SubPowerFront& p) { return std::pow(p.l1 * t + p.theta, 1.0 / (gamma_ - 1.0)); },
                          [&](const SubTLogTFront& p) { return p.l1 * (t + p.theta) * std::log(t + p.theta); },
                      },
                      kind_);
}

double FixtureCandidate::front_rate(double t) const
{
    return std::visit(overloaded{
                          [&](const SuperSemiwave& p) {
                              return semiwave_->c0_grid * (1.0 + std::pow(t + p.theta, -p.beta));
                          },
                          [&](const SubPlateau& p) { return 2.0 * p.eta1; },
                          [&](const SubSemiwave& p) { return semiwave_->c0_grid - p.l2 / (t + p.theta); },
                          [&](const SubPowerFront& p) {
                              return p.l1 / (gamma_ - 1.0) * std::pow(p.l1 * t + p.theta, (2.0 - gamma_) / (gamma_ - 1.0));
                          },
                          [&](const SubTLogTFront& p) { return p.l1 * (std::log(t + p.theta) + 1.0); },
                      },
                      kind_);
}

double FixtureCandidate::value(double t, double x) const
{
    const double h = front(t);
    if (x >= h)
        return 0.0;
    return std::visit(overloaded{
                          [&](const SubPlateau& p) {
                              const double pt = u_star_ - p.rho1 / h;
                              return x <= 0.5 * h ? pt : 2.0 * pt * (1.0 - x / h);
                          },
                          [&](const SubPowerFront& p) {
                              return (u_star_ - std::sqrt(p.eps)) * std::min(1.0, 2.0 * (h - x) / h);
                          },
                          [&](const SubTLogTFront& p) {
                              return (u_star_ - std::sqrt(p.eps)) * std::min(1.0, (h - x) / std::pow(t + p.theta, p.alpha));
                          },
                          [&](const auto&) { return semiwave_scale(t) * semiwave_->phi_at(x - h); },
                      },
                      kind_);
}

double FixtureCandidate::time_derivative(double t, double x) const
{
    const double h = front(t);
    const double hp = front_rate(t);
    if (x > h)
        return 0.0;
    return std::visit(overloaded{
                          [&](const SuperSemiwave& p) {
                              const double xi = x - h;
                              const double dx = semiwave_->dx;
                              const double dphi = (semiwave_->phi_at(xi + dx) - semiwave_->phi_at(xi)) / dx;
                              const double de = -p.beta * std::pow(t + p.theta, -p.beta - 1.0);
                              return de * semiwave_->phi_at(xi) - semiwave_scale(t) * hp * dphi;
                          },
                          [&](const SubSemiwave& p) {
                              const double xi = x - h;
                              const double dx = semiwave_->dx;
                              const double dphi = (semiwave_->phi_at(xi + dx) - semiwave_->phi_at(xi)) / dx;
                              const double de = -p.l1 / ((t + p.theta) * (t + p.theta));
                              return -de * semiwave_->phi_at(xi) - semiwave_scale(t) * hp * dphi;
                          },
                          [&](const SubPlateau& p) {
                              // p' = rho1 h'/h^2, q_t = x h'/h^2
                              const double pt = u_star_ - p.rho1 / h;
                              const double dp = p.rho1 * hp / (h * h);
                              if (x < 0.5 * h)
                                  return dp;
                              return 2.0 * dp * (1.0 - x / h) + 2.0 * pt * x * hp / (h * h);
                          },
                          [&](const SubPowerFront& p) {
                              if (x < 0.5 * h)
                                  return 0.0;
                              return 2.0 * (u_star_ - std::sqrt(p.eps)) * x * hp / (h * h);
                          },
                          [&](const SubTLogTFront& p) {
                              const double w = std::pow(t + p.theta, p.alpha);
                              if (x < h - w)
                                  return 0.0;
                              return (u_star_ - std::sqrt(p.eps)) * (hp / w - p.alpha * (h - x) / (w * (t + p.theta)));
                          },
                      },
                      kind_);
}

std::vector<double> FixtureCandidate::ridges(double t) const
{
    const double h = front(t);
    if (std::holds_alternative<SubPlateau>(kind_) || std::holds_alternative<SubPowerFront>(kind_))
        return {0.5 * h};
    if (const auto* p = std::get_if<SubTLogTFront>(&kind_))
        return {h - std::pow(t + p->theta, p->alpha)};
    return {};
}

double FixtureCandidate::pde_lower(double t) const
{
    if (std::holds_alternative<SubSemiwave>(kind_))
        return eta0_ * front(t);
    return 0.0;
}

bool FixtureCandidate::pde_includes_front() const
{
    return std::holds_alternative<SubPlateau>(kind_);
}

std::vector<double> FixtureCandidate::nodes(double t) const
{
    const double h = front(t);
    std::vector<double> xs;
    if (semiwave_ && (std::holds_alternative<SuperSemiwave>(kind_) || std::holds_alternative<SubSemiwave>(kind_))) {
        // profile grid carried along with the front
        const double dx = semiwave_->dx;
        const auto k = static_cast<long>(std::floor(h / dx));
        xs.push_back(0.0);
        for (long i = k; i >= 0; --i) {
            const double x = h - static_cast<double>(i) * dx;
            if (x > xs.back() + 1e-9 * dx)
                xs.push_back(x);
        }
        if (xs.back() != h)
            xs.back() = h;
        return xs;
    }
    xs.push_back(0.0);
    for (double r : ridges(t))
        if (r > 0 && r < h)
            xs.push_back(r);
    xs.push_back(h);
    return xs;
}

nlohmann::json FixtureCandidate::to_json() const
{
    nlohmann::json params = std::visit(overloaded{
                                           [](const SuperSemiwave& p) -> nlohmann::json {
                                               return {{"theta", p.theta}, {"beta", p.beta}, {"l", p.l}};
                                           },
                                           [](const SubPlateau& p) -> nlohmann::json {
                                               return {{"theta", p.theta}, {"eta1", p.eta1}, {"rho1", p.rho1}};
                                           },
                                           [&](const SubSemiwave& p) -> nlohmann::json {
                                               return {{"theta", p.theta}, {"l1", p.l1}, {"l2", p.l2}, {"eta0", eta0_}};
                                           },
                                           [](const SubPowerFront& p) -> nlohmann::json {
                                               return {{"theta", p.theta}, {"l1", p.l1}, {"eps", p.eps}};
                                           },
                                           [](const SubTLogTFront& p) -> nlohmann::json {
                                               return {{"theta", p.theta}, {"l1", p.l1}, {"alpha", p.alpha}, {"eps", p.eps}};
                                           },
                                       },
                                       kind_);
    nlohmann::json j = {{"kind", kind_name()},
                        {"params", params},
                        {"kernel", kernel_.to_json()},
                        {"reaction", reaction_.to_json()},
                        {"d", d_},
                        {"mu", mu_}};
    if (semiwave_)
        j["c0"] = semiwave_->c0_grid;
    return j;
}

namespace {

struct Slice {
    double pde = std::numeric_limits<double>::infinity();
    double front = std::numeric_limits<double>::infinity();
    double boundary = std::numeric_limits<double>::infinity();
    double err = 0.0;
    std::size_t points = 0;
    std::size_t dropped = 0;
    std::vector<MarginSample> samples;
};

Field fixture_field(const FixtureCandidate& c, double t)
{
    Field f;
    f.x = c.nodes(t);
    f.u.reserve(f.x.size());
    for (double x : f.x)
        f.u.push_back(c.value(t, x));
    return f;
}

std::vector<double> lattice_points(const FixtureCandidate& c, double t, int nx)
{
    const double h = c.front(t);
    const double lo = c.pde_lower(t);
    std::vector<double> xs;
    if (c.semiwave() && (std::holds_alternative<SuperSemiwave>(c.kind()) || std::holds_alternative<SubSemiwave>(c.kind()))) {
        // profile nodes only, so the discrete semi-wave equation holds exactly there;
        // every node within two interaction lengths of the front, a stride elsewhere
        const auto nodes = c.nodes(t);
        const double near_front = h - 2.0 * c.kernel().interaction_length();
        const std::size_t far = static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [&](double x) { return x < near_front; }));
        const std::size_t stride = std::max<std::size_t>(1, far / static_cast<std::size_t>(std::max(1, nx)));
        for (std::size_t i = 1; i + 1 < nodes.size(); ++i) {
            if (nodes[i] <= lo)
                continue;
            if (nodes[i] >= near_front || (nodes.size() - 1 - i) % stride == 0)
                xs.push_back(nodes[i]);
        }
        return xs;
    }
    const int n = std::max(nx, 2);
    for (int i = 0; i < n; ++i)
        xs.push_back(lo + (h - lo) * i / (n - 1));
    if (!c.pde_includes_front())
        xs.pop_back();
    if (lo > 0 && !xs.empty())
        xs.erase(xs.begin());
    return xs;
}

void evaluate_time(const FixtureCandidate& c, double t, int nx, bool keep, Slice& s)
{
    const Kernel& k = c.kernel();
    const double reach = k.support_radius();
    const double d = c.d();
    const double h = c.front(t);
    const Field f = fixture_field(c, t);
    const Field fine = split_segments(f);
    const bool upper = c.is_upper();
    double slack = 0.0;
    if (c.semiwave() && !std::holds_alternative<SubPlateau>(c.kind()))
        slack = c.semiwave()->residual * (1.0 + std::abs(c.value(t, 0.0) / c.semiwave()->u_star - 1.0) + 1.0);

    const auto ridges = c.ridges(t);
    for (double x : lattice_points(c, t, nx)) {
        bool on_ridge = false;
        for (double r : ridges)
            on_ridge = on_ridge || near(x, r, h);
        if (on_ridge) {
            ++s.dropped;
            continue;
        }
        const double ut = c.time_derivative(t, x);
        const double u = c.value(t, x);
        const double fu = c.reaction().f(u);
        const double op = nonlocal_operator(k, local_window(f, x, reach), d, x, Killing::HalfLine);
        const double op_fine = nonlocal_operator(k, local_window(fine, x, reach), d, x, Killing::HalfLine);
        const double rhs = op + fu;
        const double margin = upper ? ut - rhs : rhs - ut;
        const double round = 16.0 * kEps * (std::abs(ut) + std::abs(op) + d * std::abs(u) + std::abs(fu));
        s.err = std::max(s.err, std::abs(op - op_fine) + round + slack);
        s.pde = std::min(s.pde, margin);
        ++s.points;
        if (keep)
            s.samples.push_back({"pde", t, x, margin});
    }

    const double u_front = c.value(t, h);
    const double bm = upper ? u_front : 0.0 - u_front;
    s.boundary = std::min(s.boundary, bm);
    if (keep)
        s.samples.push_back({"boundary", t, h, bm});

    if (!std::holds_alternative<SubPlateau>(c.kind())) {
        const double flux = c.mu() * boundary_flux(k, f, h);
        const double flux_fine = c.mu() * boundary_flux(k, fine, h);
        const double hp = c.front_rate(t);
        const double fm = upper ? hp - flux : flux - hp;
        double ferr = std::abs(flux - flux_fine) + 16.0 * kEps * (hp + flux);
        if (c.semiwave())
            ferr += c.semiwave()->speed_defect * (1.0 + std::abs(c.value(t, 0.0) / c.semiwave()->u_star - 1.0) + 1.0);
        s.err = std::max(s.err, ferr);
        s.front = std::min(s.front, fm);
        if (keep)
            s.samples.push_back({"front", t, h, fm});
    }
}

/// Ordering of the fixture at time t against the run's field at time ts:
/// positive when the fixture sits on the correct side.
double ordering_against(const FixtureCandidate& c, double t, const Field& u, double h_run, double x_hi, bool with_front)
{
    const bool upper = c.is_upper();
    double m = std::numeric_limits<double>::infinity();
    if (with_front) {
        const double hf = c.front(t);
        m = upper ? hf - h_run : h_run - hf;
    }
    std::vector<double> xs;
    for (double x : u.x)
        if (x >= 0 && x <= x_hi)
            xs.push_back(x);
    for (double x : c.nodes(t))
        if (x <= x_hi)
            xs.push_back(x);
    for (double x : xs) {
        const double v = c.value(t, x);
        const double w = value_or_zero(u, x);
        m = std::min(m, upper ? v - w : w - v);
    }
    return m;
}

double log_front_at(const TrajectoryLog& log, double t)
{
    auto it = std::lower_bound(log.t.begin(), log.t.end(), t - 1e-9);
    if (it == log.t.end())
        return log.h.back();
    return log.h[static_cast<std::size_t>(it - log.t.begin())];
}

void run_ordering(const FixtureCandidate& c, const FixtureLattice& lat, ResidualReport& rep)
{
    const auto& log = *lat.run;
    const auto& snaps = log.snapshots;
    const bool upper = c.is_upper();
    const bool strip = std::holds_alternative<SubSemiwave>(c.kind());
    auto initial = [&](const Snapshot& s) {
        const double h_run = log_front_at(log, s.t);
        const double hi = upper ? h_run : c.front(0.0);
        return ordering_against(c, 0.0, s.field, h_run, hi, true);
    };
    auto along = [&](std::size_t from, double T, bool strip_only) {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t i = from; i < snaps.size(); ++i) {
            const double t = snaps[i].t - T;
            const double h_run = log_front_at(log, snaps[i].t);
            if (strip_only) {
                m = std::min(m, ordering_against(c, t, snaps[i].field, h_run, c.pde_lower(t), false));
            } else {
                const double hi = upper ? h_run : c.front(t);
                m = std::min(m, ordering_against(c, t, snaps[i].field, h_run, hi, true));
            }
        }
        return m;
    };
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < snaps.size(); ++i) {
        double m = initial(snaps[i]);
        if (strip)
            m = std::min(m, along(i, snaps[i].t, true));
        best = std::max(best, m);
        if (m >= -lat.ordering_tol) {
            rep.fitted_shift = snaps[i].t;
            rep.ordering_margin = initial(snaps[i]);
            if (strip)
                rep.strip_margin = along(i, snaps[i].t, true);
            rep.trajectory_margin = along(i, snaps[i].t, false);
            return;
        }
    }
    rep.ordering_margin = snaps.empty() ? -std::numeric_limits<double>::infinity() : best;
    rep.notes.push_back("no shift T within the run orders the fixture against the solution");
}

} // namespace

ResidualReport verify_fixture(const FixtureCandidate& c, const FixtureLattice& lat)
{
    if (lat.nt < 1 || lat.nx < 2 || !(lat.t1 >= lat.t0) || lat.t0 < 0)
        throw ContractError("verify_fixture: lattice needs nt >= 1, nx >= 2 and 0 <= t0 <= t1");
    std::vector<double> ts;
    for (int i = 0; i < lat.nt; ++i)
        ts.push_back(lat.nt == 1 ? lat.t0 : lat.t0 + (lat.t1 - lat.t0) * i / (lat.nt - 1));

    std::vector<Slice> slices(ts.size());
    const int jobs = std::max(1, std::min<int>(lat.jobs, static_cast<int>(ts.size())));
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    for (int w = 0; w < jobs; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = static_cast<std::size_t>(w); i < ts.size(); i += static_cast<std::size_t>(jobs))
                    evaluate_time(c, ts[i], lat.nx, true, slices[i]);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    for (auto& th : pool)
        th.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);

    ResidualReport rep;
    rep.kind = c.kind_name();
    rep.pde_margin = std::numeric_limits<double>::infinity();
    rep.boundary_margin = std::numeric_limits<double>::infinity();
    double front = std::numeric_limits<double>::infinity();
    bool has_front = false;
    std::vector<MarginSample> all;
    for (auto& s : slices) {
        rep.pde_margin = std::min(rep.pde_margin, s.pde);
        rep.boundary_margin = std::min(rep.boundary_margin, s.boundary);
        if (std::isfinite(s.front)) {
            has_front = true;
            front = std::min(front, s.front);
        }
        rep.quadrature_error = std::max(rep.quadrature_error, s.err);
        rep.points += s.points;
        rep.dropped += s.dropped;
        all.insert(all.end(), s.samples.begin(), s.samples.end());
    }
    if (has_front)
        rep.front_margin = front;
    rep.tolerance = 10.0 * rep.quadrature_error;
    if (rep.dropped > 0)
        rep.notes.push_back(std::to_string(rep.dropped) + " lattice points on a corner ridge were skipped");

    // worst sample: the most negative margin, first in lattice order on ties
    rep.worst = {"none", 0.0, 0.0, std::numeric_limits<double>::infinity()};
    for (const auto& m : all)
        if (m.margin < rep.worst.margin)
            rep.worst = m;
    if (lat.keep_samples)
        rep.samples = std::move(all);

    if (lat.run)
        run_ordering(c, lat, rep);

    const double tol = rep.tolerance;
    rep.pass = rep.pde_margin >= -tol && rep.boundary_margin >= -tol && (!rep.front_margin || *rep.front_margin >= -tol);
    if (rep.ordering_margin)
        rep.pass = rep.pass && *rep.ordering_margin >= -lat.ordering_tol;
    if (rep.strip_margin)
        rep.pass = rep.pass && *rep.strip_margin >= -lat.ordering_tol;
    return rep;
}

nlohmann::json ResidualReport::to_json() const
{
    auto opt = [](const std::optional<double>& v) -> nlohmann::json {
        if (!v || !std::isfinite(*v))
            return nullptr;
        return *v;
    };
    return {{"kind", kind},
            {"pass", pass},
            {"pde_margin", pde_margin},
            {"front_margin", opt(front_margin)},
            {"boundary_margin", boundary_margin},
            {"ordering_margin", opt(ordering_margin)},
            {"strip_margin", opt(strip_margin)},
            {"fitted_shift", opt(fitted_shift)},
            {"trajectory_margin", opt(trajectory_margin)},
            {"worst", {{"constraint", worst.constraint}, {"t", worst.t}, {"x", worst.x}, {"margin", worst.margin}}},
            {"quadrature_error", quadrature_error},
            {"tolerance", tolerance},
            {"points", points},
            {"dropped", dropped},
            {"notes", notes}};
}

void ResidualReport::write_margin_csv(std::ostream& os) const
{
    os << "t,x,constraint,margin\n" << std::setprecision(17);
    for (const auto& s : samples)
        os << s.t << ',' << s.x << ',' << s.constraint << ',' << s.margin << '\n';
}

namespace {

double psi_value(double x, double k1, double k2)
{
    return std::max(0.0, std::min(1.0, (k2 - std::abs(x)) / k1));
}

/// Worst margin of the psi inequality on the grid s, s + dx, ..., k2.
std::pair<double, double> psi_worst(const Kernel& p, double k1, double k2, double eps, double from, double dx)
{
    Field f;
    f.x = {0.0, k2 - k1, k2};
    f.u = {1.0, 1.0, 0.0};
    const double reach = p.support_radius();
    double worst = std::numeric_limits<double>::infinity();
    double wx = from;
    const auto n = static_cast<long>(std::floor((k2 - from) / dx + 1e-9));
    for (long i = 0; i <= n + 1; ++i) {
        const double x = i <= n ? from + static_cast<double>(i) * dx : k2;
        if (x > k2)
            break;
        const double psi = psi_value(x, k1, k2);
        const double lhs = nonlocal_operator(p, local_window(f, x, reach), 1.0, x, Killing::Full) + psi;
        const double m = lhs - (1.0 - eps) * psi;
        if (m < worst) {
            worst = m;
            wx = x;
        }
    }
    return {worst, wx};
}

} // namespace

PsiReport psi_inequality_check(const Kernel& p, double kappa1, double kappa2, double eps, double dx)
{
    if (!(kappa2 > kappa1 && kappa1 > 0))
        throw ContractError("psi check: need kappa2 > kappa1 > 0");
    if (!(eps > 0 && eps < 1) || !(dx > 0))
        throw ContractError("psi check: need eps in (0, 1) and dx > 0");
    PsiReport rep;
    rep.eps = eps;
    rep.kappa1 = kappa1;
    rep.kappa2 = kappa2;
    rep.dx = dx;
    const double m = std::min(kappa1, kappa2 - kappa1);
    const double round = 64.0 * kEps;
    auto holds = [&](double s) {
        const double scale = s / m;
        return psi_worst(p, kappa1 * scale, kappa2 * scale, eps, s, dx).first >= -round;
    };
    double hi = dx;
    int doublings = 0;
    while (!holds(hi) && doublings < 40) {
        hi *= 2.0;
        ++doublings;
    }
    if (doublings < 40) {
        rep.found = true;
        double lo = hi / 2.0;
        if (doublings > 0) {
            for (int it = 0; it < 30 && hi - lo > 0.5 * dx; ++it) {
                const double mid = 0.5 * (lo + hi);
                (holds(mid) ? hi : lo) = mid;
            }
        }
        rep.kappa_eps = hi;
    } else {
        rep.kappa_eps = std::numeric_limits<double>::infinity();
    }
    rep.worst_margin = std::numeric_limits<double>::quiet_NaN();
    if (rep.found) {
        // below kappa_eps the pair is outside the hypothesis; start at m so that shows
        const double from = std::min(rep.kappa_eps, m);
        if (from <= kappa2) {
            auto [w, x] = psi_worst(p, kappa1, kappa2, eps, from, dx);
            rep.worst_margin = w;
            rep.worst_x = x;
            rep.holds = w >= -round;
        }
    }
    return rep;
}

nlohmann::json PsiReport::to_json() const
{
    return {{"eps", eps},
            {"kappa1", kappa1},
            {"kappa2", kappa2},
            {"dx", dx},
            {"kappa_eps", found ? nlohmann::json(kappa_eps) : nlohmann::json(nullptr)},
            {"found", found},
            {"worst_margin", std::isfinite(worst_margin) ? nlohmann::json(worst_margin) : nlohmann::json(nullptr)},
            {"worst_x", worst_x},
            {"holds", holds}};
}

double mass_flux_residual(const TrajectoryLog& log, const ProblemSpec& spec)
{
    if (spec.variant != Variant::HalfLineFB)
        throw ContractError("mass-flux residual: only defined for HalfLineFB runs");
    const std::size_t n = log.size();
    if (n == 0 || log.h.size() != n || log.mass.size() != n || log.reaction.size() != n)
        throw ContractError("mass-flux residual: log lacks the h, mass or reaction-integral column");
    const double ratio = spec.d / spec.mu;
    const double q0 = log.mass[0] + ratio * log.h[0];
    double integral = 0.0;
    double worst = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
        integral += 0.5 * (log.t[k] - log.t[k - 1]) * (log.reaction[k] + log.reaction[k - 1]);
        worst = std::max(worst, std::abs(log.mass[k] + ratio * log.h[k] - q0 - integral));
    }
    return worst;
}

nlohmann::json ComparisonReport::to_json() const
{
    return {{"max_u_gap", max_u_gap}, {"max_h_gap", max_h_gap}, {"worst_t", worst_t},
            {"checkpoints", checkpoints}, {"tol", tol}, {"pass", pass}};
}

ComparisonReport comparison_order_check(const ProblemSpec& a, const ProblemSpec& b, SolverConfig cfg, double tol)
{
    auto ja = a.to_json();
    auto jb = b.to_json();
    ja.erase("u0");
    jb.erase("u0");
    if (ja != jb)
        throw ContractError("comparison check: the specs must agree except for the initial data");
    std::vector<double> xs;
    const double step = cfg.dx / 4.0;
    for (double x = 0.0; x <= a.h0; x += step)
        xs.push_back(x);
    xs.push_back(a.h0);
    for (const auto* s : {&a.u0, &b.u0})
        for (double x : s->xs)
            xs.push_back(x);
    for (double x : xs)
        if (a.initial_value(x) > b.initial_value(x))
            throw ContractError("comparison check: u0_a exceeds u0_b at x = " + fmt(x));

    if (cfg.snapshot_every <= 0)
        cfg.snapshot_every = std::max(cfg.dt, cfg.t_end / 20.0);
    TrajectoryLog la;
    TrajectoryLog lb;
    std::exception_ptr ea;
    std::thread th([&] {
        try {
            la = run(a, cfg);
        } catch (...) {
            ea = std::current_exception();
        }
    });
    lb = run(b, cfg);
    th.join();
    if (ea)
        std::rethrow_exception(ea);

    ComparisonReport rep;
    rep.tol = tol;
    rep.max_u_gap = -std::numeric_limits<double>::infinity();
    rep.max_h_gap = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < std::min(la.size(), lb.size()); ++k) {
        double gap = la.h[k] - lb.h[k];
        if (std::isfinite(la.g[k]) && std::isfinite(lb.g[k]))
            gap = std::max(gap, lb.g[k] - la.g[k]);
        if (gap > rep.max_h_gap) {
            rep.max_h_gap = gap;
            rep.worst_t = la.t[k];
        }
    }
    for (std::size_t k = 0; k < std::min(la.snapshots.size(), lb.snapshots.size()); ++k) {
        const auto& fa = la.snapshots[k].field;
        const auto& fb = lb.snapshots[k].field;
        ++rep.checkpoints;
        for (std::size_t i = 0; i < fa.x.size(); ++i) {
            const double gap = fa.u[i] - value_or_zero(fb, fa.x[i]);
            if (gap > rep.max_u_gap) {
                rep.max_u_gap = gap;
                rep.worst_t = la.snapshots[k].t;
            }
        }
    }
    rep.pass = rep.max_u_gap <= tol && rep.max_h_gap <= tol;
    return rep;
}

nlohmann::json RefinementReport::to_json() const
{
    return {{"dx", dx}, {"dt", dt}, {"h_end", h_end}, {"differences", differences},
            {"orders", orders}, {"order", order}, {"inconclusive", inconclusive}};
}

RefinementReport refinement_order(const ProblemSpec& spec, const SolverConfig& cfg, int levels, int jobs)
{
    if (levels < 3)
        throw ContractError("refinement order: needs at least 3 levels");
    if (spec.variant != Variant::HalfLineFB && spec.variant != Variant::TwoSidedFB)
        throw ContractError("refinement order: needs a free-boundary variant");
    RefinementReport rep;
    std::vector<SolverConfig> cfgs;
    for (int l = 0; l < levels; ++l) {
        SolverConfig c = cfg;
        const double s = std::ldexp(1.0, -l);
        c.dx = cfg.dx * s;
        c.dt = cfg.dt * s;
        c.snapshot_every = 0.0;
        c.log_every = cfg.t_end;
        cfgs.push_back(c);
        rep.dx.push_back(c.dx);
        rep.dt.push_back(c.dt);
    }
    for (const auto& c : cfgs)
        check_config(spec, c);
    rep.h_end.assign(cfgs.size(), 0.0);
    std::vector<std::exception_ptr> errs(cfgs.size());
    const int w = std::max(1, std::min(jobs, levels));
    std::vector<std::thread> pool;
    for (int t = 0; t < w; ++t)
        pool.emplace_back([&, t] {
            for (std::size_t i = static_cast<std::size_t>(t); i < cfgs.size(); i += static_cast<std::size_t>(w)) {
                try {
                    rep.h_end[i] = run(spec, cfgs[i]).h.back();
                } catch (...) {
                    errs[i] = std::current_exception();
                }
            }
        });
    for (auto& th : pool)
        th.join();
    for (auto& e : errs)
        if (e)
            std::rethrow_exception(e);
    for (std::size_t i = 0; i + 1 < rep.h_end.size(); ++i)
        rep.differences.push_back(std::abs(rep.h_end[i] - rep.h_end[i + 1]));
    for (std::size_t i = 0; i + 1 < rep.differences.size(); ++i) {
        const double a = rep.differences[i];
        const double b = rep.differences[i + 1];
        if (!(b < a) || !(b > 0)) {
            rep.inconclusive = true;
            rep.orders.push_back(std::numeric_limits<double>::quiet_NaN());
        } else {
            rep.orders.push_back(std::log2(a / b));
        }
    }
    rep.order = rep.orders.back();
    return rep;
}

} // namespace nlfb
