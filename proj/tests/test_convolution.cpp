#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "nlfb/convolution.hpp"
#include "nlfb/errors.hpp"
#include "oracle.hpp"

using nlfb::End;
using nlfb::Field;
using nlfb::HatConvolution;
using nlfb::Kernel;

namespace {

std::vector<Kernel> kernels()
{
    return {Kernel::uniform(1.0), Kernel::cosine(2.0), Kernel::algebraic(1.5), Kernel::algebraic(2.0), Kernel::exponential(2.0)};
}

// smooth positive test profile
double profile(double x)
{
    return 0.6 + 0.3 * std::sin(1.3 * x) + 0.1 * std::cos(0.4 * x);
}

// piecewise-linear interpolant of nodal values, evaluated pointwise
double interp(const Field& f, double y)
{
    if (y <= f.x.front() || y >= f.x.back())
        return (y == f.x.front()) ? f.u.front() : (y == f.x.back() ? f.u.back() : 0.0);
    auto it = std::upper_bound(f.x.begin(), f.x.end(), y);
    const std::size_t i = static_cast<std::size_t>(it - f.x.begin());
    const double t = (y - f.x[i - 1]) / (f.x[i] - f.x[i - 1]);
    return f.u[i - 1] + t * (f.u[i] - f.u[i - 1]);
}

} // namespace

TEST_CASE("nonlocal operator examples")
{
    const auto k = Kernel::uniform(1.0);
    Field zero{{0.0, 1.0, 2.0, 3.0, 4.0, 5.0}, std::vector<double>(6, 0.0)};
    for (double x : {0.0, 2.5, 5.0})
        CHECK(nlfb::nonlocal_operator(k, zero, 1.0, x, nlfb::Killing::HalfLine) == 0.0);

    Field flat;
    for (int i = 0; i <= 80; ++i) {
        flat.x.push_back(0.1 * i);
        flat.u.push_back(1.0);
    }
    CHECK(nlfb::nonlocal_operator(k, flat, 2.0, 4.0, nlfb::Killing::HalfLine) == doctest::Approx(0.0).scale(1.0).epsilon(1e-13));
    CHECK(nlfb::nonlocal_operator(k, flat, 2.0, 8.0, nlfb::Killing::HalfLine) == doctest::Approx(-1.0).epsilon(1e-13));
    CHECK_THROWS_AS(nlfb::nonlocal_operator(k, flat, 1.0, 9.0, nlfb::Killing::HalfLine), nlfb::DomainError);

    // against direct quadrature of the interpolant
    for (const auto& kk : kernels()) {
        Field f;
        for (int i = 0; i <= 30; ++i) {
            f.x.push_back(0.25 * i);
            f.u.push_back(profile(0.25 * i));
        }
        f.u.back() = 0.0;
        for (double x : {0.0, 1.1, 3.0, 7.5}) {
            std::vector<double> br{x - kk.support_radius(), x + kk.support_radius(), x};
            for (double xi : f.x)
                br.push_back(xi);
            const double ref = quad_split([&](double y) { return kk(x - y) * interp(f, y); }, 0.0, 7.5, br, 400);
            const double got = nlfb::nonlocal_operator(kk, f, 1.0, x, nlfb::Killing::Full) + interp(f, x);
            CHECK(got == doctest::Approx(ref).epsilon(1e-9));
        }
    }
}

TEST_CASE("boundary flux")
{
    const auto k = Kernel::uniform(1.0);
    Field flat{{0.0, 2.0, 4.0}, {1.0, 1.0, 1.0}};
    CHECK(nlfb::boundary_flux(k, flat, 4.0) == doctest::Approx(0.25).epsilon(1e-14));
    Field zero{{0.0, 2.0, 4.0}, {0.0, 0.0, 0.0}};
    CHECK(nlfb::boundary_flux(k, zero, 4.0) == 0.0);
    Field half{{0.0, 2.0, 4.0}, {0.5, 0.5, 0.4}};
    CHECK(nlfb::boundary_flux(k, half, 4.0) <= nlfb::boundary_flux(k, flat, 4.0));

    for (const auto& kk : kernels()) {
        Field f;
        for (int i = 0; i <= 40; ++i) {
            f.x.push_back(0.2 * i);
            f.u.push_back(profile(0.2 * i));
        }
        const double h = 8.0;
        f.u.back() = 0.0;
        const double ref = quad_split([&](double x) { return kk.tail_mass(h - x) * interp(f, x); }, 0.0, h, f.x, 400);
        CHECK(nlfb::boundary_flux(kk, f, h) == doctest::Approx(ref).epsilon(1e-10));
        const double refl = quad_split([&](double x) { return kk.tail_mass(x) * interp(f, x); }, 0.0, h, f.x, 400);
        CHECK(nlfb::boundary_flux_left(kk, f, 0.0) == doctest::Approx(refl).epsilon(1e-10));
    }
}

TEST_CASE("hat convolution matches the segment reference")
{
    const double dx = 0.1;
    for (const auto& kk : kernels()) {
        for (int method : {1, 2}) {
            for (std::size_t n : {std::size_t(1), std::size_t(2), std::size_t(7), std::size_t(60), std::size_t(301)}) {
                HatConvolution hc(kk, dx);
                hc.set_method(method);
                const double ell_r = 0.037;
                const double ell_l = 0.061;
                std::vector<double> u(n);
                for (std::size_t i = 0; i < n; ++i)
                    u[i] = profile(static_cast<double>(i) * dx);
                // two-sided field: ramps on both ends
                Field f;
                f.x.push_back(-ell_l);
                f.u.push_back(0.0);
                for (std::size_t i = 0; i < n; ++i) {
                    f.x.push_back(static_cast<double>(i) * dx);
                    f.u.push_back(u[i]);
                }
                f.x.push_back(static_cast<double>(n - 1) * dx + ell_r);
                f.u.push_back(0.0);
                std::vector<double> out(n);
                hc.apply(u.data(), n, End::ramp(ell_l), End::ramp(ell_r), out.data());
                for (std::size_t i = 0; i < n; i += std::max<std::size_t>(1, n / 13)) {
                    const double x = static_cast<double>(i) * dx;
                    const double ref = nlfb::nonlocal_operator(kk, f, 1.0, x, nlfb::Killing::Full) + u[i];
                    CHECK(out[i] == doctest::Approx(ref).epsilon(1e-11).scale(1e-14));
                }
                const double h = static_cast<double>(n - 1) * dx + ell_r;
                CHECK(hc.flux_right(u.data(), n, End::ramp(ell_l), End::ramp(ell_r)) == doctest::Approx(nlfb::boundary_flux(kk, f, h)).epsilon(1e-12));
                CHECK(hc.flux_left(u.data(), n, End::ramp(ell_l), End::ramp(ell_r)) == doctest::Approx(nlfb::boundary_flux_left(kk, f, -ell_l)).epsilon(1e-12));

                // half-line field: cut at node 0
                Field g(f);
                g.x.erase(g.x.begin());
                g.u.erase(g.u.begin());
                hc.apply(u.data(), n, End::cut(), End::ramp(ell_r), out.data());
                for (std::size_t i = 0; i < n; i += std::max<std::size_t>(1, n / 13)) {
                    const double x = static_cast<double>(i) * dx;
                    const double ref = nlfb::nonlocal_operator(kk, g, 1.0, x, nlfb::Killing::Full) + u[i];
                    CHECK(out[i] == doctest::Approx(ref).epsilon(1e-11).scale(1e-14));
                }
                // fixed domain: cut on both ends
                g.x.pop_back();
                g.u.pop_back();
                if (n >= 2) {
                    hc.apply(u.data(), n, End::cut(), End::cut(), out.data());
                    for (std::size_t i = 0; i < n; i += std::max<std::size_t>(1, n / 13)) {
                        const double x = static_cast<double>(i) * dx;
                        const double ref = nlfb::nonlocal_operator(kk, g, 1.0, x, nlfb::Killing::Full) + u[i];
                        CHECK(out[i] == doctest::Approx(ref).epsilon(1e-11).scale(1e-14));
                    }
                }
            }
        }
    }
}

TEST_CASE("constant field on a long grid reproduces unit mass")
{
    HatConvolution hc(Kernel::cosine(1.5), 0.05);
    std::vector<double> u(2001, 2.0), out(2001);
    hc.apply(u.data(), u.size(), End::cut(), End::cut(), out.data());
    CHECK(out[1000] == doctest::Approx(2.0).epsilon(1e-13));
    CHECK(out[0] == doctest::Approx(1.0).epsilon(1e-13));
}
