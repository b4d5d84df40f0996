#include "nlfb/asymptotics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace nlfb {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v)
{
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

nlohmann::json num(double v)
{
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

struct Line {
    double slope;
    double intercept;
    double rms;
};

Line least_squares(const std::vector<double>& x, const std::vector<double>& y)
{
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    const double slope = sxx > 0 ? sxy / sxx : 0.0;
    const double icpt = my - slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y[i] - (icpt + slope * x[i]);
        ss += e * e;
    }
    return {slope, icpt, std::sqrt(ss / n)};
}

// Indices of samples with t in [a, b].
std::vector<std::size_t> select(const std::vector<double>& t, double a, double b)
{
    std::vector<std::size_t> idx;
    const double eps = 1e-12 * std::max(1.0, std::abs(b));
    for (std::size_t i = 0; i < t.size(); ++i)
        if (t[i] >= a - eps && t[i] <= b + eps)
            idx.push_back(i);
    return idx;
}

std::pair<double, double> trailing_window(const TrajectoryLog& log, double wf)
{
    if (!(wf > 0 && wf <= 1))
        throw ContractError("window fraction must lie in (0, 1]");
    if (log.size() == 0)
        throw InsufficientDataError("empty trajectory log");
    const double tb = log.t.back();
    return {tb - wf * (tb - log.t.front()), tb};
}

void require_samples(std::size_t n, double a, double b)
{
    if (n < 8)
        throw InsufficientDataError("only " + std::to_string(n) + " samples in the fit window [" + fmt(a) + ", " + fmt(b) +
                                    "], need 8");
}

// Fit y(x) on the selected samples via the supplied transform.
template <class Tx, class Ty>
Line fit_on(const TrajectoryLog& log, const std::vector<std::size_t>& idx, Tx tx, Ty ty)
{
    std::vector<double> x, y;
    for (auto i : idx) {
        x.push_back(tx(log.t[i]));
        y.push_back(ty(log.h[i]));
    }
    return least_squares(x, y);
}

void set_drift(RateFit& f, double half)
{
    f.half_window_value = half;
    const double full = f.leading();
    f.drift = full != 0.0 ? std::abs(half - full) / std::abs(full) : (half == 0.0 ? 0.0 : kNaN);
    f.low_confidence = !(f.drift <= 0.05);
}

double tlogt_coefficient(const TrajectoryLog& log, const std::vector<std::size_t>& idx, double* rms)
{
    double sgh = 0.0, sgg = 0.0;
    for (auto i : idx) {
        const double g = log.t[i] * std::log(log.t[i]);
        sgh += g * log.h[i];
        sgg += g * g;
    }
    const double b = sgh / sgg;
    if (rms) {
        double ss = 0.0;
        for (auto i : idx) {
            const double e = log.h[i] - b * log.t[i] * std::log(log.t[i]);
            ss += e * e;
        }
        *rms = std::sqrt(ss / idx.size());
    }
    return b;
}

} // namespace

double RateFit::leading() const
{
    switch (model) {
    case Model::Linear: return c;
    case Model::Power: return exponent;
    case Model::TLogT: return coefficient;
    }
    return 0.0;
}

nlohmann::json RateFit::to_json() const
{
    nlohmann::json j;
    switch (model) {
    case Model::Linear:
        j = {{"model", "Linear"}, {"c", c}, {"intercept", intercept}};
        break;
    case Model::Power:
        j = {{"model", "Power"}, {"amplitude", amplitude}, {"exponent", exponent}};
        break;
    case Model::TLogT:
        j = {{"model", "TLogT"}, {"coefficient", coefficient}};
        j["previous_window_value"] = previous_window_value ? num(*previous_window_value) : nlohmann::json(nullptr);
        j["stability_ratio"] = stability_ratio ? num(*stability_ratio) : nlohmann::json(nullptr);
        break;
    }
    j["window"] = {t_a, t_b};
    j["samples"] = samples;
    j["residual_rms"] = num(residual_rms);
    j["half_window_value"] = num(half_window_value);
    j["drift"] = num(drift);
    j["low_confidence"] = low_confidence;
    return j;
}

RateFit estimate_linear_speed(const TrajectoryLog& log, double wf)
{
    auto [a, b] = trailing_window(log, wf);
    const auto idx = select(log.t, a, b);
    require_samples(idx.size(), a, b);
    auto id = [](double v) { return v; };
    const Line full = fit_on(log, idx, id, id);
    RateFit f;
    f.model = RateFit::Model::Linear;
    f.c = full.slope;
    f.intercept = full.intercept;
    f.residual_rms = full.rms;
    f.t_a = a;
    f.t_b = b;
    f.samples = idx.size();
    set_drift(f, fit_on(log, select(log.t, 0.5 * (a + b), b), id, id).slope);
    return f;
}

RateFit fit_power_exponent(const TrajectoryLog& log, double wf)
{
    auto [a, b] = trailing_window(log, wf);
    const auto idx = select(log.t, a, b);
    require_samples(idx.size(), a, b);
    for (auto i : idx)
        if (!(log.t[i] > 0 && log.h[i] > 0))
            throw DomainError("power fit needs t > 0 and h > 0 on the window");
    auto lg = [](double v) { return std::log(v); };
    const Line full = fit_on(log, idx, lg, lg);
    RateFit f;
    f.model = RateFit::Model::Power;
    f.exponent = full.slope;
    f.amplitude = std::exp(full.intercept);
    f.residual_rms = full.rms;
    f.t_a = a;
    f.t_b = b;
    f.samples = idx.size();
    set_drift(f, fit_on(log, select(log.t, 0.5 * (a + b), b), lg, lg).slope);
    return f;
}

RateFit fit_tlogt_coefficient(const TrajectoryLog& log, double wf)
{
    auto [a, b] = trailing_window(log, wf);
    if (!(a > std::exp(1.0)))
        throw DomainError("t ln t fit window must lie in t > e, starts at " + fmt(a));
    const auto idx = select(log.t, a, b);
    require_samples(idx.size(), a, b);
    RateFit f;
    f.model = RateFit::Model::TLogT;
    f.coefficient = tlogt_coefficient(log, idx, &f.residual_rms);
    f.t_a = a;
    f.t_b = b;
    f.samples = idx.size();
    set_drift(f, tlogt_coefficient(log, select(log.t, 0.5 * (a + b), b), nullptr));
    if (0.5 * a > std::exp(1.0)) {
        const auto prev = select(log.t, 0.5 * a, 0.5 * b);
        if (prev.size() >= 2) {
            f.previous_window_value = tlogt_coefficient(log, prev, nullptr);
            f.stability_ratio = f.coefficient / *f.previous_window_value;
        }
    }
    return f;
}

nlohmann::json DriftReport::to_json() const
{
    return {{"c0", c0},
            {"sup_r", num(sup_r)},
            {"inf_r", num(inf_r)},
            {"ln_slope", num(ln_slope)},
            {"ln_intercept", num(ln_intercept)},
            {"ln_fit_rms", num(ln_fit_rms)},
            {"bound", num(bound)},
            {"previous_bound", num(previous_bound)},
            {"variation", num(variation)},
            {"window", {t_a, t_b}},
            {"pass", pass}};
}

DriftReport log_drift_check(const TrajectoryLog& log, double c0, double wf, double max_variation)
{
    DriftReport rep;
    rep.c0 = c0;
    rep.sup_r = -std::numeric_limits<double>::infinity();
    rep.inf_r = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < log.size(); ++i) {
        const double r = log.h[i] - c0 * log.t[i];
        rep.sup_r = std::max(rep.sup_r, r);
        rep.inf_r = std::min(rep.inf_r, r);
    }
    auto [a, b] = trailing_window(log, wf);
    rep.t_a = a;
    rep.t_b = b;
    auto bound_on = [&](double lo, double hi) {
        if (!(lo > 1.0))
            return kNaN;
        const auto idx = select(log.t, lo, hi);
        if (idx.empty())
            return kNaN;
        double k = 0.0;
        for (auto i : idx)
            k = std::max(k, std::abs(log.h[i] - c0 * log.t[i]) / std::log(log.t[i]));
        return k;
    };
    rep.bound = bound_on(a, b);
    rep.previous_bound = bound_on(0.5 * a, 0.5 * b);
    const double top = std::max(rep.bound, rep.previous_bound);
    rep.variation = top > 0 ? std::abs(rep.bound - rep.previous_bound) / top : (top == 0 ? 0.0 : kNaN);

    const auto idx = select(log.t, std::max(a, 1.0 + 1e-12), b);
    if (idx.size() >= 2) {
        std::vector<double> x, y;
        for (auto i : idx) {
            x.push_back(std::log(log.t[i]));
            y.push_back(log.h[i] - c0 * log.t[i]);
        }
        const Line l = least_squares(x, y);
        rep.ln_slope = l.slope;
        rep.ln_intercept = l.intercept;
        rep.ln_fit_rms = l.rms;
    } else {
        rep.ln_slope = rep.ln_intercept = rep.ln_fit_rms = kNaN;
    }
    rep.pass = std::isfinite(rep.sup_r) && std::isfinite(rep.bound) && std::isfinite(rep.previous_bound) &&
               std::isfinite(rep.ln_slope) && rep.variation < max_variation;
    return rep;
}

std::optional<std::pair<double, double>> level_set_positions(const Field& u, double level, double u_star)
{
    if (!(level > 0 && level < u_star))
        throw ContractError("level " + fmt(level) + " outside (0, u*)");
    const auto& x = u.x;
    const auto& v = u.u;
    const std::size_t n = v.size();
    std::size_t first = n, last = n;
    for (std::size_t i = 0; i < n; ++i)
        if (v[i] >= level) {
            if (first == n)
                first = i;
            last = i;
        }
    if (first == n)
        return std::nullopt;
    auto cross = [&](std::size_t in, std::size_t out) {
        return x[in] + (v[in] - level) / (v[in] - v[out]) * (x[out] - x[in]);
    };
    const double lo = first > 0 ? cross(first, first - 1) : x[first];
    const double hi = last + 1 < n ? cross(last, last + 1) : x[last];
    return std::make_pair(lo, hi);
}

double LevelSetTrack::speed(double wf) const
{
    if (t.size() < 2)
        throw InsufficientDataError("level-set track has fewer than two samples");
    const double tb = t.back();
    const double ta = tb - wf * (tb - t.front());
    const auto idx = select(t, ta, tb);
    if (idx.size() < 2)
        throw InsufficientDataError("level-set track window holds fewer than two samples");
    std::vector<double> xs, ys;
    for (auto i : idx) {
        xs.push_back(t[i]);
        ys.push_back(x_plus[i]);
    }
    return least_squares(xs, ys).slope;
}

nlohmann::json LevelSetTrack::to_json() const
{
    return {{"level", level}, {"t", t}, {"x_minus", x_minus}, {"x_plus", x_plus}};
}

LevelSetTrack level_set_track(const TrajectoryLog& log, double level, double u_star)
{
    LevelSetTrack tr;
    tr.level = level;
    for (const auto& s : log.snapshots) {
        auto p = level_set_positions(s.field, level, u_star);
        if (!p)
            continue;
        tr.t.push_back(s.t);
        tr.x_minus.push_back(p->first);
        tr.x_plus.push_back(p->second);
    }
    return tr;
}

double field_value(const Field& u, double x)
{
    const auto& xs = u.x;
    if (xs.empty() || x < xs.front() - 1e-12 || x > xs.back() + 1e-12)
        throw DomainError("point " + fmt(x) + " outside the field");
    if (x <= xs.front())
        return u.u.front();
    if (x >= xs.back())
        return u.u.back();
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t j = static_cast<std::size_t>(it - xs.begin());
    const double t = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    return u.u[j - 1] + t * (u.u[j] - u.u[j - 1]);
}

double sup_distance_on_window(const Field& u, const std::function<double(double)>& ref, double a, double b)
{
    if (u.x.empty() || !(a <= b) || a < u.x.front() - 1e-12 || b > u.x.back() + 1e-12)
        throw ContractError("window [" + fmt(a) + ", " + fmt(b) + "] not inside the field");
    double sup = std::max(std::abs(field_value(u, a) - ref(a)), std::abs(field_value(u, b) - ref(b)));
    for (std::size_t i = 0; i < u.x.size(); ++i)
        if (u.x[i] > a && u.x[i] < b)
            sup = std::max(sup, std::abs(u.u[i] - ref(u.x[i])));
    return sup;
}

double sup_distance_on_window(const Field& u, const Field& reference, double a, double b)
{
    if (reference.x.empty() || a < reference.x.front() - 1e-12 || b > reference.x.back() + 1e-12)
        throw ContractError("window [" + fmt(a) + ", " + fmt(b) + "] not inside the reference");
    double sup = sup_distance_on_window(u, [&](double x) { return field_value(reference, x); }, a, b);
    for (std::size_t i = 0; i < reference.x.size(); ++i)
        if (reference.x[i] > a && reference.x[i] < b)
            sup = std::max(sup, std::abs(field_value(u, reference.x[i]) - reference.u[i]));
    return sup;
}

bool MuLimitReport::pass() const
{
    return difference_decreasing.value_or(true) && (mode == MuLimit::ToInfinity || front_monotone.value_or(true));
}

nlohmann::json MuLimitReport::to_json() const
{
    auto rows_j = nlohmann::json::array();
    for (const auto& r : rows)
        rows_j.push_back({{"mu", r.mu}, {"sup_difference", num(r.sup_difference)}, {"h_end", r.h_end}});
    auto opt = [](const std::optional<bool>& b) { return b ? nlohmann::json(*b) : nlohmann::json(nullptr); };
    return {{"mode", mode == MuLimit::ToZero ? "ToZero" : "ToInfinity"},
            {"h0", h0},
            {"rows", rows_j},
            {"difference_decreasing", opt(difference_decreasing)},
            {"front_monotone", opt(front_monotone)},
            {"pass", pass()}};
}

MuLimitReport mu_limit_experiment(const ProblemSpec& templ, const std::vector<double>& mus, MuLimit mode, SolverConfig cfg,
                                  const MuLimitOptions& opt)
{
    if (mus.empty())
        throw ContractError("mu list is empty");
    for (std::size_t i = 0; i + 1 < mus.size(); ++i) {
        const bool ok = mode == MuLimit::ToZero ? mus[i + 1] < mus[i] : mus[i + 1] > mus[i];
        if (!ok)
            throw ContractError(mode == MuLimit::ToZero ? "ToZero needs a strictly decreasing mu list"
                                                        : "ToInfinity needs a strictly increasing mu list");
    }
    for (double m : mus)
        if (!(m > 0))
            throw ContractError("mu must be positive");
    if (!(opt.t_a >= 0 && opt.t_b >= opt.t_a))
        throw ContractError("time window must satisfy 0 <= t_a <= t_b");

    double xa = opt.x_a, xb = opt.x_b;
    if (!(xb > xa)) {
        xa = 0.0;
        xb = mode == MuLimit::ToZero ? templ.h0 : 5.0;
    }
    cfg.t_end = std::max(cfg.t_end, opt.t_b);
    if (cfg.snapshot_every <= 0)
        cfg.snapshot_every = std::max(cfg.dt, 0.125 * (opt.t_b - opt.t_a));

    ProblemSpec ref = templ;
    ref.variant = mode == MuLimit::ToZero ? Variant::FixedDomain : Variant::CauchyHalfLine;
    const TrajectoryLog ref_log = run(ref, cfg);

    auto in_window = [&](double t) { return t >= opt.t_a - 1e-9 && t <= opt.t_b + 1e-9; };
    // u_mu vanishes right of its front, so extend it by zero there.
    auto value = [](const Field& f, double x) { return x > f.x.back() ? 0.0 : field_value(f, x); };

    MuLimitReport rep;
    rep.mode = mode;
    rep.h0 = templ.h0;
    rep.rows.resize(mus.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex m;
    auto worker = [&] {
        for (std::size_t k; (k = next++) < mus.size();) {
            try {
                ProblemSpec p = templ;
                p.variant = Variant::HalfLineFB;
                p.mu = mus[k];
                const TrajectoryLog lg = run(p, cfg);
                double sup = 0.0;
                bool any = false;
                for (const auto& s : lg.snapshots) {
                    if (!in_window(s.t))
                        continue;
                    auto it = std::find_if(ref_log.snapshots.begin(), ref_log.snapshots.end(),
                                           [&](const Snapshot& r) { return std::abs(r.t - s.t) < 1e-9 * std::max(1.0, s.t); });
                    if (it == ref_log.snapshots.end())
                        continue;
                    any = true;
                    const Field& v = it->field;
                    std::vector<double> pts{xa, xb};
                    for (double x : s.field.x)
                        if (x > xa && x < xb)
                            pts.push_back(x);
                    for (double x : v.x)
                        if (x > xa && x < xb)
                            pts.push_back(x);
                    for (double x : pts)
                        sup = std::max(sup, std::abs(value(s.field, x) - field_value(v, x)));
                }
                if (!any)
                    throw InsufficientDataError("no common snapshots in the time window");
                rep.rows[k] = {mus[k], sup, lg.h.back()};
            } catch (...) {
                std::lock_guard lk(m);
                if (!err)
                    err = std::current_exception();
            }
        }
    };
    const int nt = std::max(1, std::min<int>(opt.jobs, static_cast<int>(mus.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < nt; ++t)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();
    if (err)
        std::rethrow_exception(err);

    if (rep.rows.size() > 1) {
        bool dec = true, front = true;
        for (std::size_t k = 0; k + 1 < rep.rows.size(); ++k) {
            dec = dec && rep.rows[k + 1].sup_difference < rep.rows[k].sup_difference;
            if (mode == MuLimit::ToZero)
                front = front && rep.rows[k + 1].h_end - rep.h0 < rep.rows[k].h_end - rep.h0;
            else
                front = front && rep.rows[k + 1].h_end > rep.rows[k].h_end;
        }
        rep.difference_decreasing = dec;
        rep.front_monotone = front;
    }
    return rep;
}

} // namespace nlfb
