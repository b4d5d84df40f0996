#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "nlfb/fbsolver.hpp"
#include "nlfb/semiwave.hpp"
#include "oracle.hpp"

using namespace nlfb;

namespace {

// Golden-section minimum of a unimodal function on [a, b].
std::pair<double, double> golden_min(const std::function<double(double)>& f, double a, double b)
{
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    while (b - a > 1e-12) {
        if (f(c) < f(d)) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    const double x = 0.5 * (a + b);
    return {x, f(x)};
}

double piecewise(const std::vector<double>& x, const std::vector<double>& u, double y, double left, double right)
{
    if (y <= x.front())
        return left;
    if (y >= x.back())
        return right;
    auto it = std::upper_bound(x.begin(), x.end(), y);
    const std::size_t j = static_cast<std::size_t>(it - x.begin());
    const double t = (y - x[j - 1]) / (x[j] - x[j - 1]);
    return u[j - 1] + t * (u[j] - u[j - 1]);
}

std::vector<double> nodes_in(const std::vector<double>& x, double a, double b)
{
    std::vector<double> out;
    for (double v : x)
        if (v > a && v < b)
            out.push_back(v);
    return out;
}

const SemiWaveSolution& base_wave()
{
    static const SemiWaveSolution s = solve_semiwave(Kernel::uniform(1.0), Reaction::logistic(1, 1), 1.0, 1.0);
    return s;
}

} // namespace

TEST_CASE("minimal speed of the uniform kernel")
{
    auto w = minimal_speed(Kernel::uniform(1.0), Reaction::logistic(1, 1), 1.0);
    auto [lam, c] = golden_min([](double l) { return std::sinh(l) / (l * l); }, 0.5, 5.0);
    CHECK(w.c_star == doctest::Approx(c).epsilon(1e-9));
    CHECK(w.lambda_star == doctest::Approx(lam).epsilon(1e-5));
    CHECK(w.c_star == doctest::Approx(0.9053).epsilon(1e-3));
    for (const auto& [l, s] : w.curve)
        CHECK(s >= w.c_star - 1e-12);
}

TEST_CASE("minimal speed of the exponential kernel")
{
    const double l0 = 2.0, d = 0.7, a = 1.3;
    auto w = minimal_speed(Kernel::exponential(l0), Reaction::logistic(a, 1), d);
    auto [lam, c] = golden_min([&](double l) { return (d * (l0 * l0 / (l0 * l0 - l * l) - 1.0) + a) / l; }, 1e-3, l0 - 1e-9);
    CHECK(w.c_star == doctest::Approx(c).epsilon(1e-9));
    CHECK(w.lambda_star == doctest::Approx(lam).epsilon(1e-5));
}

TEST_CASE("minimal speed grows with f'(0) and needs (J2)")
{
    auto k = Kernel::cosine(2.0);
    CHECK(minimal_speed(k, Reaction::logistic(4, 1), 1.0).c_star > minimal_speed(k, Reaction::logistic(1, 1), 1.0).c_star);
    CHECK_THROWS_AS(minimal_speed(Kernel::algebraic(3.5), Reaction::logistic(1, 1), 1.0), NoTravelingWaveError);
}

TEST_CASE("no semi-wave without a finite first moment")
{
    CHECK_THROWS_AS(solve_semiwave(Kernel::algebraic(1.5), Reaction::logistic(1, 1), 1.0, 1.0), NoSemiWaveError);
    CHECK_THROWS_AS(solve_semiwave(Kernel::algebraic(2.0), Reaction::logistic(1, 1), 1.0, 1.0), NoSemiWaveError);
}

TEST_CASE("semi-wave invariants")
{
    const auto& s = base_wave();
    SemiWaveConfig cfg;
    REQUIRE(s.x.size() == s.phi.size());
    CHECK(s.phi.back() == 0.0);
    CHECK(s.phi.front() == doctest::Approx(1.0));
    CHECK(s.x.back() == doctest::Approx(0.0).epsilon(1e-12));
    for (std::size_t i = 0; i + 1 < s.phi.size(); ++i)
        REQUIRE(s.phi[i + 1] <= s.phi[i]);
    for (double v : s.phi)
        REQUIRE((v >= 0.0 && v <= 1.0));
    CHECK(s.residual <= cfg.residual_tol);
    CHECK(s.speed_defect <= cfg.speed_tol);
    CHECK(s.truncation_change < cfg.truncation_tol);
    CHECK(s.c0 > 0.0);
    CHECK(s.c0 < minimal_speed(Kernel::uniform(1.0), Reaction::logistic(1, 1), 1.0).c_star);
}

TEST_CASE("semi-wave equation and speed relation by independent quadrature")
{
    const auto& s = base_wave();
    auto k = Kernel::uniform(1.0);
    auto phi = [&](double y) { return piecewise(s.x, s.phi, y, 1.0, 0.0); };
    // Discrete equation with exact integrals of the piecewise-linear profile.
    for (double x : {-30.0, -5.0, -2.0, -1.0, -0.5, -0.1}) {
        const std::size_t i = static_cast<std::size_t>(std::lround((x + s.L) / s.dx));
        const double xi = s.x[i];
        const double conv = quad_split([&](double y) { return k(xi - y) * phi(y); }, xi - 1.0, std::min(xi + 1.0, 0.0),
                                       nodes_in(s.x, xi - 1.0, xi + 1.0), 20);
        const double upw = (s.phi[i + 1] - s.phi[i]) / s.dx;
        const double R = conv - s.phi[i] + s.c0 * upw + s.phi[i] * (1.0 - s.phi[i]);
        CHECK(std::abs(R) < 1e-8);
    }
    const double flux =
        quad_split([&](double y) { return k.tail_mass(-y) * phi(y); }, -1.0, 0.0, nodes_in(s.x, -1.0, 0.0), 200);
    CHECK(std::abs(s.c0 - flux) < 1e-7);
}

TEST_CASE("semi-wave speed matches the long-time front speed")
{
    const auto& s = base_wave();
    ProblemSpec p;
    p.variant = Variant::HalfLineFB;
    p.kernel = Kernel::uniform(1.0);
    p.reaction = Reaction::logistic(1, 1);
    p.d = 1.0;
    p.mu = 1.0;
    p.h0 = 10.0;
    SolverConfig c;
    c.dx = 0.05;
    c.dt = 0.02;
    c.t_end = 100.0;
    c.log_every = 1.0;
    c.scheme = Scheme::RK2;
    auto log = run(p, c);
    const std::size_t n = log.size();
    const double speed = (log.h[n - 1] - log.h[n / 2]) / (log.t[n - 1] - log.t[n / 2]);
    CHECK(std::abs(speed - s.c0) / s.c0 < 0.05);
}

TEST_CASE("speed shrinks with mu and is first order in dx")
{
    auto k = Kernel::uniform(1.0);
    auto r = Reaction::logistic(1, 1);
    const double c2 = solve_semiwave(k, r, 1.0, 0.01).c0;
    const double c1 = solve_semiwave(k, r, 1.0, 0.1).c0;
    const double c0 = base_wave().c0;
    CHECK(c2 < c1);
    CHECK(c1 < c0);
    CHECK(c2 < 0.1 * c0);

    SemiWaveConfig cfg;
    cfg.check_truncation = false;
    cfg.L = 40.0;
    cfg.dx = 0.1;
    const double a = solve_semiwave(k, r, 1.0, 1.0, cfg).c0;
    cfg.dx = 0.05;
    const double b = solve_semiwave(k, r, 1.0, 1.0, cfg).c0;
    cfg.dx = 0.025;
    const double c = solve_semiwave(k, r, 1.0, 1.0, cfg).c0;
    const double ratio = (b - a) / (c - b);
    CHECK(ratio > 1.6);
    CHECK(ratio < 2.6);
    cfg.dx = 0.05;
    cfg.richardson = true;
    auto e = solve_semiwave(k, r, 1.0, 1.0, cfg);
    CHECK(e.c0_grid == doctest::Approx(c).epsilon(1e-12));
    CHECK(e.c0 == doctest::Approx(2 * c - b).epsilon(1e-12));
}

TEST_CASE("inner iteration cap reports a convergence error")
{
    SemiWaveConfig cfg;
    cfg.max_newton = 2;
    CHECK_THROWS_AS(solve_semiwave(Kernel::uniform(1.0), Reaction::logistic(1, 1), 1.0, 1.0, cfg), ConvergenceError);
}

TEST_CASE("half-level point")
{
    std::vector<double> x{-2.0, -1.0, 0.0}, p{1.0, 0.5, 0.0};
    CHECK(*half_level_point(x, p, 0.5) == doctest::Approx(-1.0));
    CHECK(*half_level_point(x, p, 0.75) == doctest::Approx(-1.5));
    CHECK_FALSE(half_level_point(x, p, 2.0).has_value());
    CHECK_FALSE(half_level_point(x, p, -0.1).has_value());
    CHECK(*half_level_point(x, p, 1.0) == doctest::Approx(-2.0));
    CHECK(*half_level_point(x, p, 0.0) == doctest::Approx(0.0));
    std::vector<double> bad{1.0, 0.2, 0.4};
    CHECK_THROWS_AS(half_level_point(x, bad, 0.5), ContractError);
    std::vector<double> flat{1.0, 0.5, 0.5, 0.0}, xf{-3.0, -2.0, -1.0, 0.0};
    CHECK(*half_level_point(xf, flat, 0.5) == doctest::Approx(-2.0));
}

TEST_CASE("stationary profile at small and large d")
{
    auto k = Kernel::uniform(1.0);
    auto r = Reaction::logistic(1, 1);
    auto small = stationary_profile(k, r, 1e-3);
    CHECK(small.U.back() > 0.5);
    CHECK_FALSE(small.x0.has_value());
    auto large = stationary_profile(k, r, 1e3);
    CHECK(large.U.back() < 0.5);
    REQUIRE(large.x0.has_value());
    CHECK(*large.x0 < 0.0);
    CHECK(piecewise(large.x, large.U, *large.x0, 1.0, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
    for (const auto* p : {&small, &large}) {
        for (std::size_t i = 0; i + 1 < p->deficit.size(); ++i)
            REQUIRE(p->deficit[i] < p->deficit[i + 1]);
        CHECK(p->deficit.front() > 0.0);
        CHECK(p->U.back() > 0.0);
    }
}

TEST_CASE("stationary profile solves its equation by independent quadrature")
{
    auto k = Kernel::cosine(1.5);
    auto r = Reaction::logistic(2, 1);
    const double d = 0.8;
    auto p = stationary_profile(k, r, d);
    const double us = 2.0;
    const double L = -p.x.front();
    auto U = [&](double y) { return piecewise(p.x, p.U, y, us, 0.0); };
    for (double x : {-20.0, -3.0, -1.0, -0.3, 0.0}) {
        const std::size_t i = static_cast<std::size_t>(std::lround((x + L) / (p.x[1] - p.x[0])));
        const double xi = p.x[i];
        // U = u* beyond -L; that part is the closed-form tail u* (1 - T(...)).
        const double inside =
            quad_split([&](double y) { return k(xi - y) * U(y); }, std::max(xi - 1.5, -L), std::min(xi + 1.5, 0.0),
                       nodes_in(p.x, xi - 1.5, xi + 1.5), 20);
        const double outside = us * k.tail_mass(xi + L);
        const double R = d * (inside + outside) - d * p.U[i] + p.U[i] * (2.0 - p.U[i]);
        CHECK(std::abs(R) < 1e-9);
    }
}

TEST_CASE("stationary profile is ordered in d")
{
    auto k = Kernel::uniform(1.0);
    auto r = Reaction::logistic(1, 1);
    StationaryConfig cfg;
    cfg.L = 60.0;
    auto a = stationary_profile(k, r, 0.1, cfg);
    auto b = stationary_profile(k, r, 1.0, cfg);
    auto c = stationary_profile(k, r, 10.0, cfg);
    REQUIRE(a.x.size() == b.x.size());
    REQUIRE(b.x.size() == c.x.size());
    for (std::size_t i = 0; i < a.x.size(); ++i) {
        REQUIRE(a.deficit[i] <= b.deficit[i]);
        REQUIRE(b.deficit[i] <= c.deficit[i]);
    }
}

TEST_CASE("mu curve")
{
    auto k = Kernel::uniform(1.0);
    auto r = Reaction::logistic(1, 1);
    const double cs = minimal_speed(k, r, 1.0).c_star;
    auto one = mu_curve(k, r, 1.0, {10.0, 1.0, 0.1}, {}, 1);
    auto par = mu_curve(k, r, 1.0, {0.1, 10.0, 1.0}, {}, 3);
    REQUIRE(one.samples.size() == 3);
    CHECK(one.samples[0].mu == 0.1);
    CHECK(one.samples[2].mu == 10.0);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(one.samples[i].c == par.samples[i].c);
        CHECK(one.samples[i].c < cs);
        REQUIRE(one.samples[i].l.has_value());
    }
    CHECK(one.samples[0].c < one.samples[1].c);
    CHECK(one.samples[1].c < one.samples[2].c);
    CHECK(*one.samples[0].l < *one.samples[1].l);
    CHECK(*one.samples[1].l < *one.samples[2].l);
    CHECK(one.to_json()["samples"].size() == 3);
}

TEST_CASE("serialization")
{
    const auto& s = base_wave();
    auto j = s.to_json();
    CHECK(j["c0"].get<double>() == s.c0);
    std::ostringstream os;
    s.write_profile_csv(os);
    CHECK(os.str().rfind("x,phi\n", 0) == 0);
    auto cfg = SemiWaveConfig::from_json({{"dx", 0.1}, {"richardson", true}});
    CHECK(cfg.dx == 0.1);
    CHECK(cfg.richardson);
    CHECK(SemiWaveConfig::from_json(cfg.to_json()).to_json() == cfg.to_json());
    CHECK_THROWS_AS(SemiWaveConfig::from_json({{"dxx", 0.1}}), ValidationError);
    CHECK_THROWS_AS(SemiWaveConfig::from_json({{"dx", -1}}), ConfigError);
    CHECK_THROWS_AS(StationaryConfig::from_json({{"tol", 0}}), ConfigError);
    auto w = minimal_speed(Kernel::uniform(1.0), Reaction::logistic(1, 1), 1.0).to_json();
    CHECK(w.contains("lambda_star"));
}
