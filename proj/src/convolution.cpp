#include "nlfb/convolution.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include <fftw3.h>

#include "nlfb/errors.hpp"

namespace nlfb {

namespace {

// FFTW's planner is not reentrant.
std::mutex& planner_mutex()
{
    static std::mutex m;
    return m;
}

double segment_flux(const Kernel& k, double s1, double s2, double uq, double up)
{
    // u linear in s on [s1, s2] with u(s1) = uq, u(s2) = up
    const double ti = k.tail_integral(s1, s2);
    const double tm = k.tail_moment(s1, s2);
    return uq * ti + (up - uq) / (s2 - s1) * tm;
}

} // namespace

double nonlocal_operator(const Kernel& k, const Field& u, double d, double x, Killing kill)
{
    const auto& xs = u.x;
    if (xs.empty() || x < xs.front() || x > xs.back())
        throw DomainError("nonlocal_operator: x outside the field window");
    double conv = 0.0;
    double ux = 0.0;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        const double p = xs[i];
        const double q = xs[i + 1];
        const double len = q - p;
        conv += u.u[i] * k.ramp_weight(x - p, len) + u.u[i + 1] * k.ramp_weight(q - x, len);
        if (x >= p && x <= q)
            ux = u.u[i] + (u.u[i + 1] - u.u[i]) * (x - p) / len;
    }
    if (xs.size() == 1)
        ux = u.u[0];
    const double kill_rate = kill == Killing::HalfLine ? k.halfline_mass(std::max(x, 0.0)) : 1.0;
    return d * conv - d * kill_rate * ux;
}

double boundary_flux(const Kernel& k, const Field& u, double h)
{
    double sum = 0.0;
    const double reach = k.support_radius();
    for (std::size_t i = u.x.size(); i-- > 1;) {
        double p = u.x[i - 1];
        double q = u.x[i];
        if (p >= h)
            continue;
        double up = u.u[i - 1];
        double uq = u.u[i];
        if (q > h) {
            uq = up + (uq - up) * (h - p) / (q - p);
            q = h;
        }
        const double s1 = h - q;
        if (s1 >= reach)
            break;
        sum += segment_flux(k, s1, h - p, uq, up);
    }
    return std::max(sum, 0.0);
}

double boundary_flux_left(const Kernel& k, const Field& u, double g)
{
    Field r;
    r.x.resize(u.x.size());
    r.u.assign(u.u.rbegin(), u.u.rend());
    for (std::size_t i = 0; i < u.x.size(); ++i)
        r.x[i] = -u.x[u.x.size() - 1 - i];
    return boundary_flux(k, r, -g);
}

struct HatConvolution::FftPlan {
    std::size_t N = 0;
    double* in = nullptr;
    fftw_complex* spec = nullptr;
    fftw_complex* kernel_spec = nullptr;
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;

    ~FftPlan()
    {
        std::lock_guard lock(planner_mutex());
        if (forward)
            fftw_destroy_plan(forward);
        if (backward)
            fftw_destroy_plan(backward);
        fftw_free(in);
        fftw_free(spec);
        fftw_free(kernel_spec);
    }
};

HatConvolution::HatConvolution(Kernel k, double dx)
    : kernel_(std::move(k))
    , dx_(dx)
{
    if (!(dx > 0))
        throw ConfigError("convolution: dx must be positive");
    double reach = kernel_.support_radius();
    if (!std::isfinite(reach) && kernel_.mgf_abscissa() > 0) {
        // exponential tails: weights below exp(-40) of the peak are dropped
        reach = 40.0 / kernel_.mgf_abscissa();
    }
    if (std::isfinite(reach))
        band_ = static_cast<std::size_t>(std::ceil(reach / dx_)) + 2;
}

HatConvolution::~HatConvolution() = default;

void HatConvolution::extend_table(std::size_t k)
{
    if (band_)
        k = std::min(k, band_);
    while (ep_.size() <= k) {
        const double z = static_cast<double>(ep_.size()) * dx_;
        ep_.push_back(kernel_.ramp_weight(z, dx_));
        em_.push_back(kernel_.ramp_weight(-z, dx_));
        w_.push_back(ep_.back() + em_.back());
    }
}

double HatConvolution::e_plus(std::size_t k)
{
    if (band_ && k > band_)
        return 0.0;
    extend_table(k);
    return ep_[k];
}

double HatConvolution::e_minus(std::size_t k)
{
    if (band_ && k > band_)
        return 0.0;
    extend_table(k);
    return em_[k];
}

void HatConvolution::apply_direct(const double* u, std::size_t n, double* out)
{
    const std::size_t reach = band_ ? std::min(band_, n) : n;
    extend_table(reach);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i > reach ? i - reach : 0;
        const std::size_t hi = std::min(n - 1, i + reach);
        double s = 0.0;
        for (std::size_t j = lo; j <= hi; ++j)
            s += w_[i > j ? i - j : j - i] * u[j];
        out[i] = s;
    }
}

void HatConvolution::apply_fft(const double* u, std::size_t n, double* out)
{
    std::size_t N = 64;
    while (N < 2 * n)
        N *= 2;
    auto& slot = plans_[N];
    if (!slot) {
        auto p = std::make_unique<FftPlan>();
        p->N = N;
        p->in = fftw_alloc_real(N);
        p->spec = fftw_alloc_complex(N / 2 + 1);
        p->kernel_spec = fftw_alloc_complex(N / 2 + 1);
        {
            std::lock_guard lock(planner_mutex());
            p->forward = fftw_plan_dft_r2c_1d(static_cast<int>(N), p->in, p->spec, FFTW_ESTIMATE);
            p->backward = fftw_plan_dft_c2r_1d(static_cast<int>(N), p->spec, p->in, FFTW_ESTIMATE);
        }
        // circulant embedding of the symmetric Toeplitz weights, |k| < N/2
        const std::size_t half = N / 2;
        extend_table(half);
        std::fill(p->in, p->in + N, 0.0);
        for (std::size_t k = 0; k < half; ++k) {
            const double w = (band_ && k > band_) ? 0.0 : w_[k];
            p->in[k] = w;
            if (k > 0)
                p->in[N - k] = w;
        }
        fftw_execute(p->forward);
        for (std::size_t k = 0; k <= half; ++k) {
            p->kernel_spec[k][0] = p->spec[k][0];
            p->kernel_spec[k][1] = p->spec[k][1];
        }
        slot = std::move(p);
    }
    FftPlan& p = *slot;
    std::copy(u, u + n, p.in);
    std::fill(p.in + n, p.in + N, 0.0);
    fftw_execute(p.forward);
    for (std::size_t k = 0; k <= N / 2; ++k) {
        const double a = p.spec[k][0];
        const double b = p.spec[k][1];
        const double c = p.kernel_spec[k][0];
        const double e = p.kernel_spec[k][1];
        p.spec[k][0] = a * c - b * e;
        p.spec[k][1] = a * e + b * c;
    }
    fftw_execute(p.backward);
    const double scale = 1.0 / static_cast<double>(N);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = p.in[i] * scale;
}

void HatConvolution::apply(const double* u, std::size_t n, End left, End right, double* out)
{
    if (n == 0)
        return;
    bool use_fft;
    if (forced_)
        use_fft = forced_ == 2;
    else if (band_ == 0)
        use_fft = n > 192;
    else {
        const double direct = static_cast<double>(n) * static_cast<double>(std::min(2 * band_ + 1, 2 * n));
        const double fft = 60.0 * 2.0 * n * std::log2(2.0 * n + 2.0);
        use_fft = direct > fft;
    }
    if (use_fft)
        apply_fft(u, n, out);
    else
        apply_direct(u, n, out);

    const std::size_t last = n - 1;
    const std::size_t reach = band_ ? std::min(band_, last) : last;
    // Left end: node 0's outer half-hat.
    if (u[0] != 0.0) {
        for (std::size_t i = 0; i <= reach; ++i) {
            const double full = e_minus(i);
            const double keep = left.kind == End::Ramp ? kernel_.ramp_weight(-static_cast<double>(i) * dx_, left.len) : 0.0;
            out[i] += u[0] * (keep - full);
        }
    }
    // Right end: node n-1's outer half-hat.
    if (u[last] != 0.0) {
        for (std::size_t k = 0; k <= reach; ++k) {
            const std::size_t i = last - k;
            const double full = e_minus(k);
            const double keep = right.kind == End::Ramp ? kernel_.ramp_weight(-static_cast<double>(k) * dx_, right.len) : 0.0;
            out[i] += u[last] * (keep - full);
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        out[i] = std::max(out[i], 0.0);
}

double HatConvolution::flux_right(const double* u, std::size_t n, End left, End right) const
{
    if (right.kind != End::Ramp)
        throw ContractError("convolution: right flux needs a moving (ramp) end");
    if (n == 0)
        return 0.0;
    const double reach = kernel_.support_radius();
    const double ell = right.len;
    double sum = kernel_.tail_moment(0.0, ell) * u[n - 1] / ell;
    for (std::size_t j = n - 1; j-- > 0;) {
        const double s1 = ell + static_cast<double>(n - 2 - j) * dx_;
        if (s1 >= reach)
            return std::max(sum, 0.0);
        sum += segment_flux(kernel_, s1, s1 + dx_, u[j + 1], u[j]);
    }
    if (left.kind == End::Ramp && left.len > 0) {
        const double s1 = ell + static_cast<double>(n - 1) * dx_;
        if (s1 < reach)
            sum += segment_flux(kernel_, s1, s1 + left.len, u[0], 0.0);
    }
    return std::max(sum, 0.0);
}

double HatConvolution::flux_left(const double* u, std::size_t n, End left, End right) const
{
    std::vector<double> r(u, u + n);
    std::reverse(r.begin(), r.end());
    return flux_right(r.data(), n, right, left);
}

} // namespace nlfb
