#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <vector>

#include "nlfb/kernel.hpp"

namespace nlfb {

/// Piecewise-linear field through the points (x[i], u[i]), x strictly increasing.
struct Field {
    std::vector<double> x;
    std::vector<double> u;
};

/// How the active node range ends on one side.
/// Cut: the end node carries only its inner half-hat (domain stops at the node).
/// Ramp: the field falls linearly to zero over a partial cell of length len.
struct End {
    enum Kind { Cut, Ramp } kind = Cut;
    double len = 0.0;

    static End cut() { return {Cut, 0.0}; }
    static End ramp(double l) { return {Ramp, l}; }
};

/// Which removal rate multiplies u in the nonlocal operator.
enum class Killing {
    HalfLine, ///< d j(x) u with j(x) = 1 - T(x), x >= 0
    Full      ///< d u
};

/// d int J(x - y) u(y) dy - d k(x) u(x) over the field's support, evaluated
/// segment by segment with exact piecewise-linear weights. Reference
/// implementation; the solver uses HatConvolution.
double nonlocal_operator(const Kernel& k, const Field& u, double d, double x, Killing kill);

/// int T(h - x) u(x) dx over the part of the field left of h (no mu factor).
double boundary_flux(const Kernel& k, const Field& u, double h);

/// int T(x - g) u(x) dx over the part of the field right of g.
double boundary_flux_left(const Kernel& k, const Field& u, double g);

/// Convolution of a piecewise-linear field on a uniform grid with the kernel,
/// using Toeplitz hat weights E_k = D(k dx, dx). Direct banded sums for
/// kernels with (effectively) bounded reach, FFT otherwise.
class HatConvolution {
public:
    HatConvolution(Kernel k, double dx);
    ~HatConvolution();
    HatConvolution(const HatConvolution&) = delete;
    HatConvolution& operator=(const HatConvolution&) = delete;

    const Kernel& kernel() const { return kernel_; }
    double dx() const { return dx_; }

    /// out[i] = int J(x_i - y) u(y) dy for the field with node values u[0..n),
    /// x_i = x_0 + i dx, closed by the given ends.
    void apply(const double* u, std::size_t n, End left, End right, double* out);

    /// int T(h - x) u(x) dx with h = x_{n-1} + right.len (right must be a Ramp).
    double flux_right(const double* u, std::size_t n, End left, End right) const;
    /// int T(x - g) u(x) dx with g = x_0 - left.len (left must be a Ramp).
    double flux_left(const double* u, std::size_t n, End left, End right) const;

    /// D(k dx, dx): weight of the half-hat whose apex is k cells to the left.
    double e_plus(std::size_t k);
    /// D(-k dx, dx).
    double e_minus(std::size_t k);

    /// Nodes beyond which the full-hat weight is negligible; 0 if unbounded.
    std::size_t band() const { return band_; }

    /// Force the FFT path (testing) or the direct path.
    void set_method(int m) { forced_ = m; }

private:
    void extend_table(std::size_t k);
    void apply_direct(const double* u, std::size_t n, double* out);
    void apply_fft(const double* u, std::size_t n, double* out);

    struct FftPlan;
    Kernel kernel_;
    double dx_;
    std::size_t band_ = 0;
    int forced_ = 0;
    std::vector<double> ep_;
    std::vector<double> em_;
    std::vector<double> w_;
    std::map<std::size_t, std::unique_ptr<FftPlan>> plans_;
};

} // namespace nlfb
