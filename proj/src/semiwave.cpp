#include "nlfb/semiwave.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "json_util.hpp"
#include "linalg.hpp"
#include "nlfb/convolution.hpp"

namespace nlfb {

using detail::reject_unknown;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v)
{
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

// Weight of node j's hat at node i; ends may carry only one half.
double hat_weight(HatConvolution& conv, std::size_t i, std::size_t j, bool left_half, bool right_half)
{
    const std::size_t m = i > j ? i - j : j - i;
    double w = 0.0;
    if (right_half)
        w += i >= j ? conv.e_plus(m) : conv.e_minus(m);
    if (left_half)
        w += j >= i ? conv.e_plus(m) : conv.e_minus(m);
    return w;
}

// Jacobian band: nodes whose hat weight carries tail mass above 1e-12. Newton
// with the clipped Jacobian still converges, at a rate of that size.
std::size_t coupling_width(const Kernel& k, const HatConvolution& conv, std::size_t n)
{
    std::size_t lo = 0, hi = 1;
    while (hi < n && k.tail_mass(hi * conv.dx()) > 1e-12)
        hi *= 2;
    hi = std::min(hi, n);
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        (k.tail_mass(mid * conv.dx()) > 1e-12 ? lo : hi) = mid;
    }
    return std::min({n, hi + 1, conv.band() ? conv.band() + 1 : n});
}

// Grid x_i = -L + i dx, i = 0..N on [-L, 0].
struct Grid {
    double L;
    double dx;
    std::size_t N;

    Grid(double len, double h)
    {
        N = static_cast<std::size_t>(std::ceil(len / h - 1e-9));
        dx = h;
        L = N * dx;
    }
    double x(std::size_t i) const { return -L + i * dx; }
};

double default_length(const Kernel& k)
{
    return 40.0 * k.interaction_length();
}

// Pseudo-transient Newton for the semi-wave profile at fixed c.
class ProfileSolver {
public:
    ProfileSolver(const Kernel& k, const Reaction& r, double d, const Grid& g)
        : k_(k), r_(r), d_(d), g_(g), us_(r.u_star()), conv_(k, g.dx)
    {
        tail_.resize(g_.N + 1);
        for (std::size_t i = 0; i <= g_.N; ++i)
            tail_[i] = k_.tail_mass(i * g_.dx);
        buf_.resize(g_.N + 1);
        const std::size_t n = g_.N - 1;
        width_ = coupling_width(k_, conv_, n);
    }

    const Grid& grid() const { return g_; }

    double residual(const std::vector<double>& phi, double c, std::vector<double>& R)
    {
        conv_.apply(phi.data(), g_.N + 1, End::cut(), End::cut(), buf_.data());
        R.assign(g_.N + 1, 0.0);
        double sup = 0.0;
        for (std::size_t i = 1; i < g_.N; ++i) {
            R[i] = d_ * (buf_[i] + us_ * tail_[i]) - d_ * phi[i] + c * (phi[i + 1] - phi[i]) / g_.dx + r_.f(phi[i]);
            sup = std::max(sup, std::abs(R[i]));
        }
        return sup;
    }

    // Drives phi to a steady state; returns (sup residual, iterations).
    std::pair<double, int> solve(std::vector<double>& phi, double c, double tol, int max_iter)
    {
        const std::size_t n = g_.N - 1;
        std::vector<double> R, rhs(n);
        double res = residual(phi, c, R);
        double tau = 1.0 / (d_ + std::abs(r_.f_prime(0.0)) + c / g_.dx);
        int it = 0;
        detail::LinearSystem sys(n, width_, width_ + 1);
        while (res > tol) {
            if (++it > max_iter)
                throw ConvergenceError("semi-wave profile: pseudo-transient Newton stalled at c = " + fmt(c) +
                                       ", residual " + fmt(res) + " after " + std::to_string(max_iter) + " iterations");
            sys.clear();
            for (std::size_t a = 0; a < n; ++a) {
                const std::size_t i = a + 1;
                const std::size_t lo = a > width_ ? a - width_ : 0;
                const std::size_t hi = std::min(n - 1, a + width_ + 1);
                for (std::size_t b = lo; b <= hi; ++b) {
                    double v = -d_ * hat_weight(conv_, i, b + 1, true, true);
                    if (b == a)
                        v += 1.0 / tau + d_ + c / g_.dx - r_.f_prime(phi[i]);
                    else if (b == a + 1)
                        v -= c / g_.dx;
                    sys.add(a, b, v);
                }
                rhs[a] = R[i];
            }
            if (!sys.solve(rhs))
                throw ConvergenceError("semi-wave profile: singular Newton matrix at c = " + fmt(c));
            for (std::size_t a = 0; a < n; ++a)
                phi[a + 1] = std::clamp(phi[a + 1] + rhs[a], 0.0, us_);
            const double prev = res;
            res = residual(phi, c, R);
            // switched evolution relaxation
            tau = std::min(tau * std::clamp(prev / std::max(res, 1e-300), 0.5, 10.0), 1e14);
        }
        return {res, it};
    }

    // int_{-inf}^0 T(-x) phi(x) dx with phi = u* left of -L.
    double flux(const std::vector<double>& phi) const
    {
        Field f;
        f.x.resize(g_.N + 1);
        for (std::size_t i = 0; i <= g_.N; ++i)
            f.x[i] = g_.x(i);
        f.u = phi;
        return boundary_flux(k_, f, 0.0) + us_ * k_.tail_integral(g_.L, kInf);
    }

private:
    const Kernel& k_;
    const Reaction& r_;
    double d_;
    Grid g_;
    double us_;
    HatConvolution conv_;
    std::vector<double> tail_;
    std::vector<double> buf_;
    std::size_t width_;
};

std::vector<double> resample(const std::vector<double>& xs, const std::vector<double>& ys, const Grid& g, double us)
{
    std::vector<double> out(g.N + 1);
    for (std::size_t i = 0; i <= g.N; ++i) {
        const double x = g.x(i);
        if (xs.empty() || x <= xs.front()) {
            out[i] = xs.empty() ? us * std::min(1.0, -x) : us;
            continue;
        }
        auto it = std::upper_bound(xs.begin(), xs.end(), x);
        if (it == xs.end()) {
            out[i] = ys.back();
            continue;
        }
        const std::size_t j = static_cast<std::size_t>(it - xs.begin());
        const double t = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
        out[i] = ys[j - 1] + t * (ys[j] - ys[j - 1]);
    }
    out.front() = us;
    out.back() = 0.0;
    return out;
}

struct FixedGridResult {
    double c;
    std::vector<double> phi;
    double residual;
    double defect;
    int iterations;
};

FixedGridResult solve_on_grid(const Kernel& k, const Reaction& r, double d, double mu, const Grid& g,
                              const SemiWaveConfig& cfg, std::vector<double> phi, double c_cap)
{
    ProfileSolver ps(k, r, d, g);
    const double us = r.u_star();
    int iters = 0;
    double last_res = 0.0;
    auto gap = [&](double c) {
        auto [res, it] = ps.solve(phi, c, cfg.residual_tol, cfg.max_newton);
        iters += it;
        last_res = res;
        return c - mu * ps.flux(phi);
    };

    const auto m1 = k.first_moment();
    double hi = mu * us * m1.value;
    double lo = 0.0, glo = 0.0, ghi = 0.0;
    if (std::isfinite(c_cap) && hi >= c_cap) {
        // c_mu < c*; walk up toward c* and stop at the first sign change, so the
        // inner solve never sees the degenerate profiles near c*.
        bool found = false;
        for (int k2 = 1; k2 <= 40 && !found; ++k2) {
            const double c = c_cap * (1.0 - std::ldexp(1.0, -k2));
            const double gc = gap(c);
            if (gc >= 0.0) {
                hi = c;
                ghi = gc;
                found = true;
            } else {
                lo = c;
                glo = gc;
            }
        }
        if (!found)
            throw RootNotFoundError("semi-wave speed: gap stays negative up to c* = " + fmt(c_cap));
        if (ghi == 0.0)
            return {hi, phi, last_res, 0.0, iters};
    } else {
        ghi = gap(hi);
        if (ghi < 0.0)
            throw RootNotFoundError("semi-wave speed: no sign change below c = " + fmt(hi));
        if (ghi == 0.0)
            return {hi, phi, last_res, 0.0, iters};
    }
    if (lo == 0.0) {
        lo = hi * 1e-3;
        glo = gap(lo);
        for (int tries = 0; glo > 0.0; ++tries) {
            if (tries > 10)
                throw RootNotFoundError("semi-wave speed: gap stays positive down to c = " + fmt(lo));
            hi = lo;
            ghi = glo;
            lo *= 1e-2;
            glo = gap(lo);
        }
    }

    std::uintmax_t max_iter = 200;
    auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-13 * std::max(std::abs(a), std::abs(b)); };
    auto br = boost::math::tools::toms748_solve(gap, lo, hi, glo, ghi, tol, max_iter);
    const double c = 0.5 * (br.first + br.second);
    const double defect = std::abs(gap(c));
    return {c, phi, last_res, defect, iters};
}

} // namespace

nlohmann::json SemiWaveConfig::to_json() const
{
    return {{"dx", dx},
            {"L", L},
            {"residual_tol", residual_tol},
            {"speed_tol", speed_tol},
            {"truncation_tol", truncation_tol},
            {"check_truncation", check_truncation},
            {"max_doublings", max_doublings},
            {"max_newton", max_newton},
            {"richardson", richardson}};
}

SemiWaveConfig SemiWaveConfig::from_json(const nlohmann::json& j)
{
    reject_unknown(j, {"dx", "L", "residual_tol", "speed_tol", "truncation_tol", "check_truncation", "max_doublings", "max_newton", "richardson"},
                   "semiwave config");
    SemiWaveConfig c;
    c.dx = j.value("dx", c.dx);
    c.L = j.value("L", c.L);
    c.residual_tol = j.value("residual_tol", c.residual_tol);
    c.speed_tol = j.value("speed_tol", c.speed_tol);
    c.truncation_tol = j.value("truncation_tol", c.truncation_tol);
    c.check_truncation = j.value("check_truncation", c.check_truncation);
    c.max_doublings = j.value("max_doublings", c.max_doublings);
    c.max_newton = j.value("max_newton", c.max_newton);
    c.richardson = j.value("richardson", c.richardson);
    if (!(c.dx > 0) || c.L < 0 || !(c.residual_tol > 0) || !(c.speed_tol > 0) || !(c.truncation_tol > 0) || c.max_newton < 1 ||
        c.max_doublings < 0)
        throw ConfigError("semiwave config: dx, tolerances and iteration caps must be positive");
    return c;
}

double SemiWaveSolution::phi_at(double xq) const
{
    if (xq <= x.front())
        return u_star;
    if (xq >= 0.0)
        return 0.0;
    auto it = std::upper_bound(x.begin(), x.end(), xq);
    const std::size_t j = static_cast<std::size_t>(it - x.begin());
    const double t = (xq - x[j - 1]) / (x[j] - x[j - 1]);
    return phi[j - 1] + t * (phi[j] - phi[j - 1]);
}

nlohmann::json SemiWaveSolution::to_json() const
{
    return {{"c0", c0},
            {"c0_grid", c0_grid},
            {"mu", mu},
            {"d", d},
            {"u_star", u_star},
            {"L", L},
            {"dx", dx},
            {"residual", residual},
            {"speed_defect", speed_defect},
            {"truncation_change", truncation_change},
            {"iterations", iterations}};
}

void SemiWaveSolution::write_profile_csv(std::ostream& os) const
{
    os << "x,phi\n" << std::setprecision(17);
    for (std::size_t i = 0; i < x.size(); ++i)
        os << x[i] << ',' << phi[i] << '\n';
}

SemiWaveSolution solve_semiwave(const Kernel& k, const Reaction& r, double d, double mu, const SemiWaveConfig& cfg)
{
    if (!(d > 0) || !(mu > 0))
        throw ContractError("solve_semiwave: d and mu must be positive");
    const auto rep = k.condition_report();
    if (!rep.satisfies_J1)
        throw NoSemiWaveError("no semi-wave: kernel fails (J1), int_0^inf x J(x) dx diverges (accelerated spreading)");
    const double us = r.u_star();
    // c_mu never exceeds c*; when c* exists it caps the bracket.
    double cap = kInf;
    if (rep.satisfies_J2)
        cap = minimal_speed(k, r, d).c_star;

    double len = cfg.L > 0 ? cfg.L : default_length(k);
    std::vector<double> xs, ys;
    auto run = [&](double L, double dx) {
        Grid g(L, dx);
        auto res = solve_on_grid(k, r, d, mu, g, cfg, resample(xs, ys, g, us), cap);
        xs.resize(g.N + 1);
        for (std::size_t i = 0; i <= g.N; ++i)
            xs[i] = g.x(i);
        ys = res.phi;
        return std::make_pair(g, res);
    };

    auto [grid, best] = run(len, cfg.dx);
    double change = 0.0;
    if (cfg.check_truncation) {
        bool settled = false;
        for (int k2 = 0; k2 <= cfg.max_doublings; ++k2) {
            len *= 2.0;
            auto [g2, next] = run(len, cfg.dx);
            change = std::abs(next.c - best.c);
            grid = g2;
            best = std::move(next);
            if (change < cfg.truncation_tol) {
                settled = true;
                break;
            }
        }
        if (!settled)
            throw ConvergenceError("semi-wave: c0 still moves by " + fmt(change) + " after doubling L to " + fmt(len));
    }

    SemiWaveSolution out;
    out.mu = mu;
    out.d = d;
    out.u_star = us;
    out.truncation_change = change;
    double c_coarse = best.c;
    if (cfg.richardson) {
        auto [g2, fine] = run(grid.L, 0.5 * cfg.dx);
        grid = g2;
        best = std::move(fine);
    }
    out.L = grid.L;
    out.dx = grid.dx;
    out.x = xs;
    out.phi = best.phi;
    // Rounding near the pinned u* can leave one-ulp rises; larger ones are real.
    for (std::size_t i = 1; i < out.phi.size(); ++i) {
        if (out.phi[i] > out.phi[i - 1] + 1e-10 * us)
            throw ConvergenceError("semi-wave: profile increases at x = " + fmt(out.x[i]) + " by " +
                                   fmt(out.phi[i] - out.phi[i - 1]));
        out.phi[i] = std::min(out.phi[i], out.phi[i - 1]);
    }
    out.c0_grid = best.c;
    out.c0 = cfg.richardson ? 2.0 * best.c - c_coarse : best.c;
    out.residual = best.residual;
    out.speed_defect = best.defect;
    out.iterations = best.iterations;
    if (out.speed_defect > cfg.speed_tol)
        throw ConvergenceError("semi-wave: speed defect " + fmt(out.speed_defect) + " above tolerance");
    return out;
}

nlohmann::json WaveSolution::to_json() const
{
    return {{"c_star", c_star}, {"lambda_star", lambda_star}};
}

WaveSolution minimal_speed(const Kernel& k, const Reaction& r, double d)
{
    if (!(d > 0))
        throw ContractError("minimal_speed: d must be positive");
    if (!k.condition_report().satisfies_J2)
        throw NoTravelingWaveError("no traveling wave: kernel fails (J2), no exponential moment is finite");
    const double fp0 = r.f_prime(0.0);
    if (!(fp0 > 0))
        throw ContractError("minimal_speed: f'(0) must be positive");
    auto speed = [&](double lam) {
        const auto m = k.exp_moment(lam);
        return m.divergent ? kInf : (d * (m.value - 1.0) + fp0) / lam;
    };

    const double top = std::min(k.mgf_abscissa(), 1e3);
    const double lo = 1e-4;
    const int n = 400;
    WaveSolution w;
    std::size_t best = 0;
    for (int i = 0; i < n; ++i) {
        // open at the abscissa
        const double lam = std::exp(std::log(lo) + (std::log(top) - std::log(lo)) * (i + 0.5) / n);
        const double s = speed(lam);
        w.curve.emplace_back(lam, s);
        if (s < w.curve[best].second)
            best = w.curve.size() - 1;
    }
    if (best == 0 || best + 1 == w.curve.size())
        throw ConvergenceError("minimal_speed: dispersion minimum not bracketed on the lambda grid");
    auto g = [&](double s) { return speed(std::exp(s)); };
    auto res = boost::math::tools::brent_find_minima(g, std::log(w.curve[best - 1].first), std::log(w.curve[best + 1].first),
                                                     std::numeric_limits<double>::digits / 2);
    w.lambda_star = std::exp(res.first);
    w.c_star = res.second;
    return w;
}

nlohmann::json StationaryConfig::to_json() const
{
    return {{"dx", dx}, {"L", L}, {"tol", tol}, {"max_iter", max_iter}};
}

StationaryConfig StationaryConfig::from_json(const nlohmann::json& j)
{
    reject_unknown(j, {"dx", "L", "tol", "max_iter"}, "stationary config");
    StationaryConfig c;
    c.dx = j.value("dx", c.dx);
    c.L = j.value("L", c.L);
    c.tol = j.value("tol", c.tol);
    c.max_iter = j.value("max_iter", c.max_iter);
    if (!(c.dx > 0) || c.L < 0 || !(c.tol > 0) || c.max_iter < 1)
        throw ConfigError("stationary config: dx, tol and max_iter must be positive");
    return c;
}

nlohmann::json StationaryProfile::to_json() const
{
    nlohmann::json j{{"d", d},
                     {"u_star", u_star},
                     {"U0", U.back()},
                     {"L", -x.front()},
                     {"dx", x.size() > 1 ? x[1] - x[0] : 0.0},
                     {"residual", residual},
                     {"iterations", iterations}};
    j["x0"] = x0 ? nlohmann::json(*x0) : nlohmann::json(nullptr);
    return j;
}

void StationaryProfile::write_profile_csv(std::ostream& os) const
{
    os << "x,phi\n" << std::setprecision(17);
    for (std::size_t i = 0; i < x.size(); ++i)
        os << x[i] << ',' << U[i] << '\n';
}

StationaryProfile stationary_profile(const Kernel& k, const Reaction& r, double d, const StationaryConfig& cfg)
{
    if (!(d > 0))
        throw ContractError("stationary_profile: d must be positive");
    const double us = r.u_star();
    double len = cfg.L;
    if (len <= 0) {
        double ell = k.interaction_length();
        const double m2 = 4.0 * k.tail_moment(0.0, kInf);
        const double fp0 = r.f_prime(0.0);
        if (std::isfinite(m2) && fp0 > 0)
            ell = std::max(ell, std::sqrt(0.5 * d * m2 / fp0));
        len = 40.0 * ell;
    }
    const Grid g(len, cfg.dx);
    const std::size_t n = g.N + 1;
    HatConvolution conv(k, g.dx);
    const std::size_t width = coupling_width(k, conv, n);

    // Deficit w = u* - U solves d w - d (J * w) + f(u* - w) = d u* T(-x),
    // with w = 0 left of -L.
    std::vector<double> src(n), w(n, 0.0), cw(n), G(n), rhs(n);
    for (std::size_t i = 0; i < n; ++i)
        src[i] = d * us * k.tail_mass(-g.x(i));
    auto residual = [&](const std::vector<double>& v) {
        conv.apply(v.data(), n, End::cut(), End::cut(), cw.data());
        double sup = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            G[i] = d * v[i] - d * cw[i] + r.f_from_deficit(v[i]) - src[i];
            sup = std::max(sup, std::abs(G[i]));
        }
        return sup;
    };
    auto assemble = [&](detail::LinearSystem& sys, auto diag) {
        sys.clear();
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t lo = i > width ? i - width : 0;
            const std::size_t hi = std::min(n - 1, i + width);
            for (std::size_t j = lo; j <= hi; ++j)
                sys.add(i, j, -d * hat_weight(conv, i, j, j > 0, j + 1 < n));
            sys.add(i, i, d + diag(i));
        }
    };

    detail::LinearSystem sys(n, width, width);
    const double scale = d * us + std::abs(r.f_prime(us)) * us;
    double res = residual(w);
    double tau = 1.0 / (d + r.max_abs_f_prime(us));
    int it = 0;
    // Pseudo-transient Newton from U = u*.
    while (res > cfg.tol * scale) {
        if (++it > cfg.max_iter)
            throw ConvergenceError("stationary profile: no steady state within " + std::to_string(cfg.max_iter) +
                                   " iterations, residual " + fmt(res));
        assemble(sys, [&](std::size_t i) { return 1.0 / tau - r.f_prime(us - w[i]); });
        for (std::size_t i = 0; i < n; ++i)
            rhs[i] = -G[i];
        if (!sys.solve(rhs))
            throw ConvergenceError("stationary profile: singular Newton matrix");
        for (std::size_t i = 0; i < n; ++i)
            w[i] = std::clamp(w[i] + rhs[i], 0.0, us);
        const double prev = res;
        res = residual(w);
        tau = std::min(tau * std::clamp(prev / std::max(res, 1e-300), 0.5, 10.0), 1e14);
    }
    // Picard polish: (d + f(u* - w)/w) w_new - d J*w_new = source is an
    // M-matrix system with a nonnegative right side, so tiny deficits come out
    // with full relative accuracy.
    for (int p = 0; p < 4; ++p) {
        assemble(sys, [&](std::size_t i) {
            return w[i] > 0 ? r.f_from_deficit(w[i]) / w[i] : -r.f_prime(us);
        });
        rhs = src;
        if (!sys.solve(rhs))
            throw ConvergenceError("stationary profile: singular polish matrix");
        w = rhs;
        ++it;
    }
    res = residual(w);
    if (res > 10.0 * cfg.tol * scale)
        throw ConvergenceError("stationary profile: polish raised the residual to " + fmt(res));

    StationaryProfile out;
    out.d = d;
    out.u_star = us;
    out.residual = res;
    out.iterations = it;
    out.x.resize(n);
    out.U.resize(n);
    out.deficit = w;
    for (std::size_t i = 0; i < n; ++i) {
        out.x[i] = g.x(i);
        out.U[i] = us - w[i];
    }
    for (std::size_t i = 0; i + 1 < n; ++i)
        if (!(w[i] < w[i + 1]))
            throw ConvergenceError("stationary profile: not strictly decreasing near x = " + fmt(out.x[i]));
    if (out.U.back() < 0.5 * us) {
        // the deficit carries the monotone information without rounding
        std::vector<double> neg(n);
        for (std::size_t i = 0; i < n; ++i)
            neg[i] = -w[i];
        out.x0 = half_level_point(out.x, neg, -0.5 * us);
    }
    return out;
}

std::optional<double> half_level_point(const std::vector<double>& x, const std::vector<double>& p, double level)
{
    if (x.size() != p.size() || x.empty())
        throw ContractError("half_level_point: abscissae and values differ in length or are empty");
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
        if (p[i + 1] > p[i])
            throw ContractError("half_level_point: profile increases at x = " + fmt(x[i]));
        if (!(x[i + 1] > x[i]))
            throw ContractError("half_level_point: abscissae not increasing");
    }
    if (level > p.front() || level < p.back())
        return std::nullopt;
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
        if (p[i] == level)
            return x[i];
        if (p[i + 1] < level)
            return x[i] + (p[i] - level) / (p[i] - p[i + 1]) * (x[i + 1] - x[i]);
    }
    return x.back();
}

nlohmann::json MuCurve::to_json() const
{
    auto arr = nlohmann::json::array();
    for (const auto& s : samples)
        arr.push_back({{"mu", s.mu}, {"c", s.c}, {"l", s.l ? nlohmann::json(*s.l) : nlohmann::json(nullptr)}});
    return {{"samples", arr}};
}

MuCurve mu_curve(const Kernel& k, const Reaction& r, double d, std::vector<double> mus, const SemiWaveConfig& cfg, int jobs)
{
    std::sort(mus.begin(), mus.end());
    MuCurve out;
    out.samples.resize(mus.size());
    const double us = r.u_star();
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex m;
    auto worker = [&] {
        for (std::size_t i; (i = next++) < mus.size();) {
            try {
                auto s = solve_semiwave(k, r, d, mus[i], cfg);
                auto l = half_level_point(s.x, s.phi, 0.5 * us);
                out.samples[i] = {mus[i], s.c0, l ? std::optional<double>(-*l) : std::nullopt};
            } catch (...) {
                std::lock_guard lk(m);
                if (!err)
                    err = std::current_exception();
            }
        }
    };
    const int nt = std::max(1, std::min<int>(jobs, static_cast<int>(mus.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < nt; ++t)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();
    if (err)
        std::rethrow_exception(err);
    return out;
}

} // namespace nlfb
