#include "nlfb/reaction.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/tools/roots.hpp>

#include "nlfb/errors.hpp"

namespace nlfb {

namespace {

constexpr int kAuditPoints = 10000;

std::string fmt(double v)
{
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

} // namespace

nlohmann::json ReactionAudit::to_json() const
{
    return {{"pass", pass}, {"failures", failures}};
}

Reaction Reaction::logistic(double a, double b)
{
    if (!(a > 0) || !(b > 0))
        throw ValidationError("reaction: logistic needs a > 0 and b > 0");
    Reaction r;
    r.name_ = "logistic";
    r.params_ = {{"a", a}, {"b", b}};
    r.f_ = [a, b](double u) { return u * (a - b * u); };
    r.fp_ = [a, b](double u) { return a - 2.0 * b * u; };
    r.logistic_ = std::make_pair(a, b);
    r.u_star_ = a / b;
    return r;
}

Reaction Reaction::custom(const std::string& name, const nlohmann::json& params)
{
    auto param = [&](const char* key, double fallback) {
        return params.contains(key) ? params.at(key).get<double>() : fallback;
    };
    Reaction r;
    r.name_ = name;
    r.params_ = params.is_null() ? nlohmann::json::object() : params;
    if (name == "cubic") {
        // u(1 - u^2)
        r.f_ = [](double u) { return u * (1.0 - u * u); };
        r.fp_ = [](double u) { return 1.0 - 3.0 * u * u; };
        r.deficit_ = [](double w) { return (1.0 - w) * w * (2.0 - w); };
    } else if (name == "bistable") {
        const double th = param("theta", 0.3);
        r.params_["theta"] = th;
        r.f_ = [th](double u) { return u * (1.0 - u) * (u - th); };
        r.fp_ = [th](double u) { return -3.0 * u * u + 2.0 * (1.0 + th) * u - th; };
    } else if (name == "quadratic") {
        r.f_ = [](double u) { return u * u - u; };
        r.fp_ = [](double u) { return 2.0 * u - 1.0; };
    } else if (name == "zero") {
        r.f_ = [](double) { return 0.0; };
        r.fp_ = [](double) { return 0.0; };
    } else if (name == "logistic") {
        return logistic(param("a", 1.0), param("b", 1.0));
    } else {
        throw ValidationError("reaction: unknown custom form \"" + name + "\"");
    }
    return r;
}

Reaction Reaction::from_functions(std::string name, Fn f, Fn f_prime, Fn deficit)
{
    if (!f || !f_prime)
        throw ValidationError("reaction: custom forms must supply f and f'");
    Reaction r;
    r.name_ = std::move(name);
    r.params_ = nlohmann::json::object();
    r.f_ = std::move(f);
    r.fp_ = std::move(f_prime);
    r.deficit_ = std::move(deficit);
    return r;
}

Reaction Reaction::from_json(const nlohmann::json& j)
{
    if (!j.is_object() || !j.contains("kind"))
        throw ValidationError("reaction: specification must be an object with a \"kind\" key");
    const std::string kind = j.at("kind").get<std::string>();
    Reaction r = [&]() {
        if (kind == "logistic")
            return logistic(j.value("a", 1.0), j.value("b", 1.0));
        if (kind == "custom") {
            if (!j.contains("name"))
                throw ValidationError("reaction: custom kind needs a \"name\"");
            nlohmann::json params = j;
            params.erase("kind");
            params.erase("name");
            params.erase("delta");
            return custom(j.at("name").get<std::string>(), params);
        }
        throw ValidationError("reaction: unknown kind \"" + kind + "\"");
    }();
    if (j.contains("delta") && !j.at("delta").is_null() && j.at("delta").get<double>() != 0.0)
        return perturb(r, j.at("delta").get<double>()).reaction;
    return r;
}

nlohmann::json Reaction::to_json() const
{
    nlohmann::json j;
    if (logistic_) {
        j = {{"kind", "logistic"}, {"a", logistic_->first}, {"b", logistic_->second}};
    } else {
        j = params_;
        j["kind"] = "custom";
        j["name"] = name_;
    }
    if (delta_ != 0.0)
        j["delta"] = delta_;
    return j;
}

double Reaction::f_from_deficit(double w) const
{
    const double us = u_star();
    if (logistic_) {
        // u (a - delta - b u) with u* = (a - delta)/b: f(u* - w) = (u* - w) b w
        return (us - w) * logistic_->second * w;
    }
    if (deficit_ && delta_ == 0.0)
        return deficit_(w);
    return f(us - w);
}

bool Reaction::has_positive_root() const
{
    try {
        u_star();
        return true;
    } catch (const RootNotFoundError&) {
        return false;
    }
}

double Reaction::u_star() const
{
    if (!u_star_)
        u_star_ = positive_root(*this);
    return *u_star_;
}

double Reaction::max_abs_f_prime(double u_max) const
{
    double m = 0.0;
    const int n = 2000;
    for (int i = 0; i <= n; ++i)
        m = std::max(m, std::abs(f_prime(u_max * i / n)));
    return m;
}

double positive_root(const Reaction& r, double u_max)
{
    // First sign change from positive to nonpositive on a geometric scan.
    double lo = 0.0;
    double hi = 0.0;
    double prev = 1e-8;
    if (!(r.f(prev) > 0))
        throw RootNotFoundError("reaction: f is not positive just above 0, no monostable root");
    for (double u = prev * 1.05; u <= u_max * 1.0000001; u *= 1.05) {
        if (r.f(u) <= 0) {
            lo = prev;
            hi = u;
            break;
        }
        prev = u;
    }
    if (hi == 0.0)
        throw RootNotFoundError("reaction: no sign change of f on (0, " + fmt(u_max) + "]");
    if (r.f(hi) == 0.0) {
        // The scan may land exactly on the root; make sure it is the first zero.
        lo = prev;
    }
    auto tol = [](double a, double b) { return std::abs(b - a) <= 4 * std::numeric_limits<double>::epsilon() * std::abs(b); };
    std::uintmax_t iters = 200;
    auto [a, b] = boost::math::tools::bisect([&r](double u) { return r.f(u); }, lo, hi, tol, iters);
    // Pick the endpoint with the smaller residual.
    return std::abs(r.f(a)) < std::abs(r.f(b)) ? a : b;
}

ReactionAudit validate_F(const Reaction& r)
{
    ReactionAudit rep;
    auto fail = [&rep](std::string msg) {
        rep.pass = false;
        rep.failures.push_back(std::move(msg));
    };
    if (std::abs(r.f(0.0)) > 1e-14)
        fail("f(0) = " + fmt(r.f(0.0)) + " is not 0");
    const double fp0 = r.f_prime(0.0);
    if (!(fp0 > 0))
        fail("f'(0) = " + fmt(fp0) + " is not positive");
    double us = 0.0;
    try {
        us = r.u_star();
    } catch (const RootNotFoundError& e) {
        fail(std::string("no positive root: ") + e.what());
        return rep;
    }
    if (std::abs(r.f(us)) > 1e-12 * std::max(1.0, us))
        fail("f(u*) = " + fmt(r.f(us)) + " is not 0");
    if (!(r.f_prime(us) < 0))
        fail("f'(u*) = " + fmt(r.f_prime(us)) + " is not negative");

    double prev = std::numeric_limits<double>::infinity();
    bool decreasing = true;
    double fd_err = 0.0;
    for (int i = 1; i <= kAuditPoints; ++i) {
        const double u = 2.0 * us * i / kAuditPoints;
        const double q = r.f(u) / u;
        if (!(q < prev) && decreasing) {
            decreasing = false;
            fail("f(u)/u not strictly decreasing near u = " + fmt(u));
        }
        prev = q;
        const double h = 1e-5 * std::max(1.0, u);
        const double fd = (r.f(u + h) - r.f(u - h)) / (2 * h);
        fd_err = std::max(fd_err, std::abs(fd - r.f_prime(u)) / std::max(1.0, std::abs(r.f_prime(u))));
    }
    if (fd_err > 1e-6)
        fail("supplied f' disagrees with finite differences by " + fmt(fd_err));

    if (rep.pass) {
        const double rho = rho_grid_minimum(r);
        if (!(rho > 0))
            fail("no positive rho with f(u) >= rho min{u, u*-u}");
    }
    return rep;
}

double rho_grid_minimum(const Reaction& r)
{
    const double us = r.u_star();
    double m = std::numeric_limits<double>::infinity();
    for (int i = 1; i < kAuditPoints; ++i) {
        const double u = us * i / kAuditPoints;
        m = std::min(m, r.f(u) / std::min(u, us - u));
    }
    return m;
}

double rho_constant(const Reaction& r)
{
    const double m = rho_grid_minimum(r);
    if (!(m > 0))
        throw ValidationError("reaction: grid minimum of f/min{u,u*-u} is " + fmt(m) + ", not positive");
    return 0.99 * m;
}

PerturbedReaction perturb(const Reaction& r, double delta)
{
    if (!(delta > 0))
        throw ContractError("reaction: perturbation delta must be positive");
    const double fp0 = r.f_prime(0.0);
    if (!(delta < fp0))
        throw ValidationError("reaction: invalid perturbation, delta = " + fmt(delta) + " must stay below f'(0) = " + fmt(fp0));
    Reaction p = r;
    p.delta_ = r.delta_ + delta;
    p.u_star_.reset();
    if (r.logistic_) {
        // u(a - b u) - delta u is again logistic
        p.u_star_ = (r.logistic_->first - p.delta_) / r.logistic_->second;
    }
    return PerturbedReaction{p, delta, p.u_star()};
}

} // namespace nlfb
