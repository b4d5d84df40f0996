#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "nlfb/validation.hpp"

using namespace nlfb;

namespace {

const SemiWaveSolution& uniform_wave()
{
    static const SemiWaveSolution sw = solve_semiwave(Kernel::uniform(1.0), Reaction::logistic(1, 1), 1.0, 1.0);
    return sw;
}

FixtureLattice lattice(double t1, int nt = 11, int nx = 101)
{
    FixtureLattice lat;
    lat.t0 = 0.0;
    lat.t1 = t1;
    lat.nt = nt;
    lat.nx = nx;
    lat.jobs = 4;
    return lat;
}

ProblemSpec halfline(double h0)
{
    ProblemSpec p;
    p.variant = Variant::HalfLineFB;
    p.h0 = h0;
    return p;
}

/// Brute-force midpoint rule for int_0^k2 P(x - y) psi(y) dy with the uniform kernel of radius 1.
double psi_integral_uniform(double x, double k1, double k2)
{
    const int n = 200000;
    const double a = std::max(0.0, x - 1.0);
    const double b = std::min(k2, x + 1.0);
    const double h = (b - a) / n;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        const double y = a + (i + 0.5) * h;
        s += 0.5 * std::max(0.0, std::min(1.0, (k2 - y) / k1));
    }
    return s * h;
}

} // namespace

TEST_CASE("plateau eta1 bound for the uniform kernel")
{
    const auto& sw = uniform_wave();
    const Reaction r = Reaction::logistic(1, 1);
    const double rho = rho_constant(r);
    // J = 1/2 on [-1, 1]: the integral over [2/3, 1] is 1/6
    const double expect = std::min({sw.c0_grid / 2, rho / 8, rho / 12, 1.0 / 36 / 6});
    CHECK(plateau_eta1_bound(Kernel::uniform(1.0), r, 1.0, sw.c0_grid) == doctest::Approx(expect).epsilon(1e-12));
    CHECK_THROWS_AS(plateau_eta1_bound(Kernel::algebraic(1.5), r, 1.0, sw.c0_grid), ContractError);
}

TEST_CASE("fixture constructor preconditions")
{
    const auto& sw = uniform_wave();
    const auto k = Kernel::uniform(1.0);
    const auto r = Reaction::logistic(1, 1);
    CHECK_THROWS_AS(FixtureCandidate(SuperSemiwave{}, k, r, 1, 1), ContractError);
    CHECK_THROWS_AS(FixtureCandidate(SuperSemiwave{}, k, r, 2, 1, sw), ContractError);
    CHECK_THROWS_AS(FixtureCandidate(SuperSemiwave{100, 0.5, 40}, k, r, 1, 1, sw), ContractError);
    CHECK_THROWS_AS(FixtureCandidate(SubPlateau{4000, 0.01, 10}, k, r, 1, 1, sw), ContractError);
    CHECK_THROWS_AS(FixtureCandidate(SubPlateau{4000, 0.004, 100}, k, r, 1, 1, sw), ContractError);
    CHECK_NOTHROW(FixtureCandidate(SubPlateau{4000, 0.004, 10}, k, r, 1, 1, sw));
    CHECK_THROWS_AS(FixtureCandidate(SubPowerFront{}, k, r, 1, 1), ContractError);
    CHECK_THROWS_AS(FixtureCandidate(SubPowerFront{}, Kernel::algebraic(2.0), r, 1, 1), ContractError);
    CHECK_THROWS_AS(FixtureCandidate(SubTLogTFront{}, Kernel::algebraic(1.5), r, 1, 1), ContractError);
    CHECK_THROWS_AS(FixtureCandidate(SubTLogTFront{1.0, 0.02, 0.5, 0.01}, Kernel::algebraic(2.0), r, 1, 1), ContractError);
}

TEST_CASE("closed-form fronts and time derivatives agree with difference quotients")
{
    const auto& sw = uniform_wave();
    const auto r = Reaction::logistic(1, 1);
    std::vector<FixtureCandidate> cs = {
        FixtureCandidate(SuperSemiwave{}, Kernel::uniform(1.0), r, 1, 1, sw),
        FixtureCandidate(SubSemiwave{}, Kernel::uniform(1.0), r, 1, 1, sw),
        FixtureCandidate(SubPlateau{4000, 0.004, 10}, Kernel::uniform(1.0), r, 1, 1, sw),
        FixtureCandidate(SubPowerFront{}, Kernel::algebraic(1.5), r, 1, 1),
        FixtureCandidate(SubTLogTFront{}, Kernel::algebraic(2.0), r, 1, 1),
    };
    const double dt = 1e-6;
    for (const auto& c : cs) {
        CAPTURE(c.kind_name());
        for (double t : {0.0, 3.0, 40.0}) {
            const double fd = (c.front(t + dt) - c.front(t)) / dt;
            CHECK(c.front_rate(t) == doctest::Approx(fd).epsilon(1e-5));
            const double h = c.front(t);
            std::vector<double> xs;
            if (c.semiwave() && !std::holds_alternative<SubPlateau>(c.kind())) {
                // profile nodes carried with the front; a backward quotient stays on the right segment
                for (int k : {1, 7, 20, 60})
                    xs.push_back(h - k * sw.dx);
            } else {
                for (double s : {0.1, 0.3, 0.7, 0.95})
                    xs.push_back(s * h);
            }
            for (double x : xs) {
                CAPTURE(t);
                CAPTURE(x);
                const double back = (c.value(t, x) - c.value(t - dt, x)) / dt;
                CHECK(c.time_derivative(t, x) == doctest::Approx(back).epsilon(1e-4).scale(1e-3));
            }
        }
    }
}

TEST_CASE("upper semi-wave fixture passes at theta 100, fails early at theta 1")
{
    const auto& sw = uniform_wave();
    const auto r = Reaction::logistic(1, 1);
    auto good = verify_fixture(FixtureCandidate(SuperSemiwave{}, Kernel::uniform(1.0), r, 1, 1, sw), lattice(50));
    CHECK(good.pass);
    CHECK(good.pde_margin > 0);
    REQUIRE(good.front_margin.has_value());
    CHECK(*good.front_margin >= -good.tolerance);
    CHECK(good.boundary_margin >= 0);

    auto bad = verify_fixture(FixtureCandidate(SuperSemiwave{1.0, 2.0, 40.0}, Kernel::uniform(1.0), r, 1, 1, sw), lattice(50));
    CHECK_FALSE(bad.pass);
    CHECK(bad.worst.margin < -bad.tolerance);
    CHECK(bad.worst.t < 10.0);
}

TEST_CASE("power-front fixture passes; a hundredfold l1 breaks the front condition")
{
    const auto r = Reaction::logistic(1, 1);
    const auto k = Kernel::algebraic(1.5);
    auto good = verify_fixture(FixtureCandidate(SubPowerFront{}, k, r, 1, 1), lattice(200));
    CHECK(good.pass);
    CHECK(good.dropped > 0);
    CHECK(good.pde_margin > 0);

    SubPowerFront big;
    big.l1 *= 100;
    auto bad = verify_fixture(FixtureCandidate(big, k, r, 1, 1), lattice(200));
    CHECK_FALSE(bad.pass);
    REQUIRE(bad.front_margin.has_value());
    CHECK(*bad.front_margin < -bad.tolerance);
}

TEST_CASE("t ln t fixture passes for gamma 2")
{
    auto rep = verify_fixture(FixtureCandidate(SubTLogTFront{}, Kernel::algebraic(2.0), Reaction::logistic(1, 1), 1, 1), lattice(200));
    CHECK(rep.pass);
    CHECK(rep.pde_margin > 0);
    CHECK(*rep.front_margin > 0);
}

TEST_CASE("plateau and lower semi-wave fixtures against a run")
{
    const auto& sw = uniform_wave();
    const auto k = Kernel::uniform(1.0);
    const auto r = Reaction::logistic(1, 1);
    SolverConfig c;
    c.dx = 0.05;
    c.dt = 0.02;
    c.t_end = 300;
    c.log_every = 0.5;
    c.snapshot_every = 5;
    c.scheme = Scheme::RK2;
    const auto log = run(halfline(10), c);

    auto lat = lattice(50);
    lat.run = &log;
    auto plateau = verify_fixture(FixtureCandidate(SubPlateau{4000, 0.004, 10}, k, r, 1, 1, sw), lat);
    CHECK(plateau.pass);
    REQUIRE(plateau.fitted_shift.has_value());
    CHECK(*plateau.ordering_margin >= 0);
    CHECK(*plateau.trajectory_margin >= 0);
    CHECK_FALSE(plateau.front_margin.has_value());

    auto lower = verify_fixture(FixtureCandidate(SubSemiwave{}, k, r, 1, 1, sw), lat);
    CHECK(lower.pass);
    REQUIRE(lower.strip_margin.has_value());
    CHECK(*lower.strip_margin >= 0);
    CHECK(*lower.trajectory_margin >= 0);

    // a run too short to ever dominate the plateau
    SolverConfig s = c;
    s.t_end = 20;
    const auto brief = run(halfline(10), s);
    lat.run = &brief;
    auto none = verify_fixture(FixtureCandidate(SubPlateau{4000, 0.004, 10}, k, r, 1, 1, sw), lat);
    CHECK_FALSE(none.pass);
    CHECK_FALSE(none.fitted_shift.has_value());
    CHECK_FALSE(none.notes.empty());
}

TEST_CASE("a passing power-front fixture stays below the solver's run")
{
    const auto k = Kernel::algebraic(1.5);
    const auto r = Reaction::logistic(1, 1);
    SubPowerFront p;
    FixtureCandidate fc(p, k, r, 1, 1);
    ProblemSpec spec;
    spec.kernel = k;
    spec.h0 = fc.front(0.0) + 1.0;
    spec.u0.ramp = 2.0;
    SolverConfig c;
    c.dx = 0.5;
    c.dt = 0.05;
    c.t_end = 40;
    c.log_every = 0.5;
    c.snapshot_every = 2;
    const auto log = run(spec, c);

    auto lat = lattice(40, 21, 101);
    lat.run = &log;
    auto rep = verify_fixture(fc, lat);
    REQUIRE(rep.pass);
    REQUIRE(rep.fitted_shift.has_value());
    CHECK(*rep.fitted_shift == 0.0);
    // independent pass over the snapshots
    for (const auto& s : log.snapshots) {
        const double t = s.t;
        const double h = log.h[static_cast<std::size_t>(std::llround(t / c.log_every))];
        CHECK(h >= fc.front(t) - 1e-9);
        for (std::size_t i = 0; i < s.field.x.size(); ++i)
            CHECK(s.field.u[i] >= fc.value(t, s.field.x[i]) - 1e-9);
    }
    CHECK(*rep.trajectory_margin >= -1e-9);
}

TEST_CASE("margin report serialization")
{
    auto lat = lattice(10, 3, 11);
    lat.keep_samples = true;
    auto rep = verify_fixture(FixtureCandidate(SubTLogTFront{}, Kernel::algebraic(2.0), Reaction::logistic(1, 1), 1, 1), lat);
    std::ostringstream os;
    rep.write_margin_csv(os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "t,x,constraint,margin");
    std::size_t rows = 0;
    while (std::getline(is, line))
        ++rows;
    CHECK(rows == rep.samples.size());
    auto j = rep.to_json();
    CHECK(j["kind"] == "SubTLogTFront");
    CHECK(j["ordering_margin"].is_null());
    CHECK(j["worst"].contains("x"));
    CHECK_THROWS_AS(verify_fixture(FixtureCandidate(SubTLogTFront{}, Kernel::algebraic(2.0), Reaction::logistic(1, 1), 1, 1), lattice(10, 0)),
                    ContractError);
}

TEST_CASE("psi inequality")
{
    const auto k = Kernel::uniform(1.0);
    auto big = psi_inequality_check(k, 5.0, 10.0, 0.5, 0.05);
    REQUIRE(big.found);
    CHECK(big.kappa_eps < 1.0);
    CHECK(big.holds);

    // brute-force oracle for the given pair's worst margin
    double worst = 1e300;
    const double from = std::min(big.kappa_eps, 5.0);
    for (int i = 0;; ++i) {
        const double x = from + i * 0.05;
        if (x > 10.0 + 1e-12)
            break;
        const double psi = std::max(0.0, std::min(1.0, (10.0 - x) / 5.0));
        worst = std::min(worst, psi_integral_uniform(x, 5.0, 10.0) - 0.5 * psi);
    }
    worst = std::min(worst, psi_integral_uniform(10.0, 5.0, 10.0));
    CHECK(big.worst_margin == doctest::Approx(worst).epsilon(1e-6));

    // at x = kappa2 both sides vanish
    CHECK(psi_integral_uniform(10.0, 5.0, 10.0) >= 0.0);

    // below kappa_eps the inequality breaks
    auto base = psi_inequality_check(k, 1.0, 2.0, 0.2, 0.01);
    REQUIRE(base.found);
    const double s = 0.5 * base.kappa_eps;
    auto small = psi_inequality_check(k, s, 2.0 * s, 0.2, 0.01);
    CHECK_FALSE(small.holds);
    CHECK(small.worst_margin < 0);

    for (const auto& p : {Kernel::uniform(1.0), Kernel::algebraic(1.5)}) {
        double prev = 0.0;
        for (double e : {0.5, 0.2, 0.1}) {
            auto rep = psi_inequality_check(p, 1.0, 3.0, e, 0.05);
            REQUIRE(rep.found);
            CHECK(std::isfinite(rep.kappa_eps));
            CHECK(rep.kappa_eps >= prev);
            prev = rep.kappa_eps;
        }
    }
    CHECK_THROWS_AS(psi_inequality_check(k, 2.0, 1.0, 0.1, 0.05), ContractError);
}

TEST_CASE("mass-flux identity")
{
    ProblemSpec zero = halfline(2);
    zero.u0.amplitude = 0.0;
    SolverConfig c;
    c.dx = 0.05;
    c.dt = 0.002;
    c.t_end = 2.0;
    c.log_every = 0.1;
    CHECK(mass_flux_residual(run(zero, c), zero) == 0.0);

    ProblemSpec inert = halfline(2);
    inert.reaction = Reaction::custom("zero");
    inert.u0.amplitude = 1.0;
    const double coarse = mass_flux_residual(run(inert, c), inert);
    SolverConfig f = c;
    f.dx /= 2;
    f.dt /= 2;
    const double fine = mass_flux_residual(run(inert, f), inert);
    CHECK(coarse <= 1e-3);
    CHECK(fine < 0.6 * coarse);
    CHECK(std::log2(coarse / fine) >= 0.7);

    ProblemSpec logistic = halfline(2);
    CHECK(mass_flux_residual(run(logistic, c), logistic) <= 1e-3);

    ProblemSpec cauchy = halfline(2);
    cauchy.variant = Variant::CauchyHalfLine;
    CHECK_THROWS_AS(mass_flux_residual(run(cauchy, c), cauchy), ContractError);

    // a log read back from CSV carries no reaction integral
    std::stringstream ss;
    run(logistic, c).write_csv(ss);
    CHECK_THROWS_AS(mass_flux_residual(TrajectoryLog::read_csv(ss), logistic), ContractError);
}

TEST_CASE("comparison ordering")
{
    ProblemSpec b = halfline(4);
    ProblemSpec a = b;
    a.u0.amplitude = 0.5;
    SolverConfig c;
    c.dx = 0.05;
    c.dt = 0.01;
    c.t_end = 5.0;
    c.log_every = 0.1;
    auto rep = comparison_order_check(a, b, c);
    CHECK(rep.pass);
    CHECK(rep.checkpoints >= 10);
    CHECK(rep.max_h_gap <= 0.0);

    auto same = comparison_order_check(b, b, c);
    CHECK(same.pass);
    CHECK(same.max_h_gap == 0.0);
    CHECK(same.max_u_gap == 0.0);

    ProblemSpec crossing = b;
    crossing.u0.shape = "sampled";
    crossing.u0.xs = {0.0, 2.0, 4.0};
    crossing.u0.us = {0.2, 1.2, 0.0};
    CHECK_THROWS_AS(comparison_order_check(crossing, b, c), ContractError);
    ProblemSpec other = a;
    other.mu = 2.0;
    CHECK_THROWS_AS(comparison_order_check(other, b, c), ContractError);
}

TEST_CASE("refinement order")
{
    ProblemSpec p = halfline(2);
    p.mu = 10.0;
    SolverConfig c;
    c.dx = 0.025;
    c.dt = 0.1;
    c.t_end = 2.0;
    c.scheme = Scheme::Euler;
    auto euler = refinement_order(p, c, 4, 4);
    CHECK_FALSE(euler.inconclusive);
    CHECK(euler.order >= 0.7);
    CHECK(euler.order <= 1.3);
    CHECK(euler.dx.back() == doctest::Approx(c.dx / 8));

    SolverConfig r = c;
    r.dx = 0.00625;
    r.scheme = Scheme::RK2;
    auto rk2 = refinement_order(p, r, 4, 4);
    CHECK_FALSE(rk2.inconclusive);
    CHECK(rk2.order > 1.0);

    CHECK_THROWS_AS(refinement_order(p, c, 2), ContractError);
    ProblemSpec cauchy = p;
    cauchy.variant = Variant::CauchyFullLine;
    CHECK_THROWS_AS(refinement_order(cauchy, c, 3), ContractError);
}
