#include "nlfb/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "nlfb/errors.hpp"

namespace nlfb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// expm1(q L) / q, continuous at q = 0.
double expm1_over(double q, double L)
{
    if (std::abs(q) < 1e-14)
        return L;
    return std::expm1(q * L) / q;
}

// expm1_over(q, L) - expm1_over(q - 1, L) without cancellation for small L.
double expm1_over_gap(double q, double L)
{
    if (std::abs(L) < 0.05) {
        double sum = 0.0;
        double Lk = L;
        double fact = 1.0;
        for (int k = 2; k <= 14; ++k) {
            Lk *= L;
            fact *= k;
            sum += Lk * (std::pow(q, k - 1) - std::pow(q - 1.0, k - 1)) / fact;
        }
        return sum;
    }
    return expm1_over(q, L) - expm1_over(q - 1.0, L);
}

// 1 - e^{-x}(1 + x)
double one_minus_exp_poly(double x)
{
    if (x < 1e-2) {
        double sum = 0.0;
        double xk = x;
        double fact = 1.0;
        double sign = -1.0;
        for (int k = 2; k <= 10; ++k) {
            xk *= x;
            fact *= k;
            sign = -sign;
            sum += sign * (k - 1) * xk / fact;
        }
        return sum;
    }
    return -std::expm1(-x) - x * std::exp(-x);
}

double xi_plateau(double x)
{
    const double ax = std::abs(x);
    if (ax <= 1.0)
        return 1.0;
    if (ax >= 2.0)
        return 0.0;
    return 2.0 - ax;
}

double gk_integrate(const std::function<double(double)>& f, double a, double b)
{
    if (!(b > a))
        return 0.0;
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-13, &err);
}

void require(bool ok, const std::string& msg)
{
    if (!ok)
        throw ValidationError("kernel: " + msg);
}

} // namespace

nlohmann::json KernelReport::to_json() const
{
    nlohmann::json j;
    j["satisfies_J"] = satisfies_J;
    j["satisfies_J1"] = satisfies_J1;
    j["satisfies_J2"] = satisfies_J2;
    if (first_moment.divergent)
        j["first_moment"] = "divergent";
    else
        j["first_moment"] = first_moment.value;
    if (std::isinf(mgf_abscissa))
        j["mgf_abscissa"] = "inf";
    else
        j["mgf_abscissa"] = mgf_abscissa;
    j["gamma_class"] = gamma_class.empty() ? nlohmann::json(nullptr) : nlohmann::json(gamma_class);
    j["mass"] = mass;
    return j;
}

Kernel::Kernel(Family family)
    : family_(family)
{
    std::visit(Overloaded{
                   [](const CompactUniform& k) { require(k.r > 0 && std::isfinite(k.r), "uniform radius must be positive"); },
                   [](const CompactCosine& k) { require(k.r > 0 && std::isfinite(k.r), "cosine radius must be positive"); },
                   [](const AlgebraicTail& k) {
                       require(k.gamma > 1 && std::isfinite(k.gamma), "algebraic exponent gamma must exceed 1");
                       require(k.a > 0 && std::isfinite(k.a), "algebraic offset a must be positive");
                   },
                   [](const LightExponential& k) {
                       require(k.lambda0 > 0 && std::isfinite(k.lambda0), "exponential rate lambda0 must be positive");
                   },
               },
               family_);
}

Kernel Kernel::from_json(const nlohmann::json& j)
{
    if (!j.is_object() || !j.contains("family"))
        throw ValidationError("kernel: specification must be an object with a \"family\" key");
    const std::string fam = j.at("family").get<std::string>();
    auto num = [&](const char* key, double fallback) {
        return j.contains(key) && !j.at(key).is_null() ? j.at(key).get<double>() : fallback;
    };
    Kernel k = [&]() {
        if (fam == "compact-uniform")
            return Kernel::uniform(num("r", 1.0));
        if (fam == "compact-cosine")
            return Kernel::cosine(num("r", 1.0));
        if (fam == "algebraic")
            return Kernel::algebraic(num("gamma", 2.0), num("a", 1.0));
        if (fam == "light-exponential")
            return Kernel::exponential(num("lambda0", 1.0));
        throw ValidationError("kernel: unknown family \"" + fam + "\"");
    }();
    if (j.contains("truncate") && !j.at("truncate").is_null())
        k = k.truncate(j.at("truncate").get<double>());
    return k;
}

nlohmann::json Kernel::to_json() const
{
    nlohmann::json j = std::visit(Overloaded{
                                      [](const CompactUniform& k) { return nlohmann::json{{"family", "compact-uniform"}, {"r", k.r}}; },
                                      [](const CompactCosine& k) { return nlohmann::json{{"family", "compact-cosine"}, {"r", k.r}}; },
                                      [](const AlgebraicTail& k) {
                                          return nlohmann::json{{"family", "algebraic"}, {"gamma", k.gamma}, {"a", k.a}};
                                      },
                                      [](const LightExponential& k) {
                                          return nlohmann::json{{"family", "light-exponential"}, {"lambda0", k.lambda0}};
                                      },
                                  },
                                  family_);
    if (truncation_)
        j["truncate"] = *truncation_;
    return j;
}

std::string Kernel::family_name() const
{
    return to_json().at("family").get<std::string>();
}

double Kernel::normalization() const
{
    return std::visit(Overloaded{
                          [](const CompactUniform& k) { return 1.0 / (2.0 * k.r); },
                          [](const CompactCosine& k) { return 1.0 / (2.0 * k.r); },
                          [](const AlgebraicTail& k) { return 0.5 * (k.gamma - 1.0) * std::pow(k.a, k.gamma - 1.0); },
                          [](const LightExponential& k) { return 0.5 * k.lambda0; },
                      },
                      family_);
}

double Kernel::base_evaluate(double x) const
{
    const double ax = std::abs(x);
    return std::visit(Overloaded{
                          [ax](const CompactUniform& k) { return ax <= k.r ? 0.5 / k.r : 0.0; },
                          [ax](const CompactCosine& k) {
                              return ax <= k.r ? 0.5 * (1.0 + std::cos(kPi * ax / k.r)) / k.r : 0.0;
                          },
                          [ax](const AlgebraicTail& k) {
                              return 0.5 * (k.gamma - 1.0) / k.a * std::pow(1.0 + ax / k.a, -k.gamma);
                          },
                          [ax](const LightExponential& k) { return 0.5 * k.lambda0 * std::exp(-k.lambda0 * ax); },
                      },
                      family_);
}

double Kernel::evaluate(double x) const
{
    if (truncation_)
        return xi_plateau(x / *truncation_) * base_evaluate(x);
    return base_evaluate(x);
}

double Kernel::base_tail(double s) const
{
    return std::visit(Overloaded{
                          [s](const CompactUniform& k) { return s < k.r ? 0.5 * (k.r - s) / k.r : 0.0; },
                          [s](const CompactCosine& k) {
                              if (s >= k.r)
                                  return 0.0;
                              return 0.5 * ((k.r - s) - k.r / kPi * std::sin(kPi * s / k.r)) / k.r;
                          },
                          [s](const AlgebraicTail& k) { return 0.5 * std::pow(1.0 + s / k.a, 1.0 - k.gamma); },
                          [s](const LightExponential& k) { return 0.5 * std::exp(-k.lambda0 * s); },
                      },
                      family_);
}

double Kernel::tail_mass(double s) const
{
    s = std::max(s, 0.0);
    if (!truncation_)
        return base_tail(s);
    const double n = *truncation_;
    if (s >= 2.0 * n)
        return 0.0;
    if (s >= n)
        return std::max(0.0, (2.0 - s / n) * base_tail(s) - base_tail_integral(s, 2.0 * n) / n);
    return base_tail(s) - base_tail_integral(n, 2.0 * n) / n;
}

double Kernel::halfline_mass(double x) const
{
    return mass() - tail_mass(x);
}

double Kernel::mass() const
{
    return truncation_ ? 2.0 * tail_mass(0.0) : 1.0;
}

double Kernel::base_tail_integral(double a, double b) const
{
    if (!(b > a))
        return 0.0;
    return std::visit(Overloaded{
                          [a, b](const CompactUniform& k) {
                              const double bb = std::min(b, k.r);
                              if (a >= bb)
                                  return 0.0;
                              // ((r-a)^2 - (r-bb)^2) / (4r)
                              return (bb - a) * ((k.r - a) + (k.r - bb)) / (4.0 * k.r);
                          },
                          [a, b](const CompactCosine& k) {
                              const double bb = std::min(b, k.r);
                              if (a >= bb)
                                  return 0.0;
                              const double w = kPi / k.r;
                              const double lin = 0.5 * (bb - a) * ((k.r - a) + (k.r - bb));
                              // cos(wa) - cos(wbb) = 2 sin(w(a+bb)/2) sin(w(bb-a)/2)
                              const double cosdiff = 2.0 * std::sin(0.5 * w * (a + bb)) * std::sin(0.5 * w * (bb - a));
                              return (lin - (k.r / kPi) * cosdiff / w) / (2.0 * k.r);
                          },
                          [a, b](const AlgebraicTail& k) {
                              const double u1 = 1.0 + a / k.a;
                              const double p = 2.0 - k.gamma;
                              if (std::isinf(b))
                                  return p < 0 ? 0.5 * k.a * std::pow(u1, p) / (-p) : kInf;
                              const double L = std::log1p((b - a) / (k.a + a));
                              return 0.5 * k.a * std::pow(u1, p) * expm1_over(p, L);
                          },
                          [a, b](const LightExponential& k) {
                              const double head = 0.5 * std::exp(-k.lambda0 * a) / k.lambda0;
                              if (std::isinf(b))
                                  return head;
                              return head * -std::expm1(-k.lambda0 * (b - a));
                          },
                      },
                      family_);
}

double Kernel::base_tail_moment(double a, double b) const
{
    if (!(b > a))
        return 0.0;
    return std::visit(Overloaded{
                          [a, b](const CompactUniform& k) {
                              const double bb = std::min(b, k.r);
                              if (a >= bb)
                                  return 0.0;
                              const double R = k.r - a;
                              const double V = bb - a;
                              return (R * V * V / 2.0 - V * V * V / 3.0) / (2.0 * k.r);
                          },
                          [a, b](const CompactCosine& k) {
                              const double bb = std::min(b, k.r);
                              if (a >= bb)
                                  return 0.0;
                              const double R = k.r - a;
                              const double V = bb - a;
                              const double w = kPi / k.r;
                              const double lin = R * V * V / 2.0 - V * V * V / 3.0;
                              double osc;
                              if (w * V < 1e-3) {
                                  // int_0^V v sin(w(a+v)) dv, Taylor in v around a
                                  const double s0 = std::sin(w * a);
                                  const double c0 = std::cos(w * a);
                                  osc = s0 * V * V / 2.0 + c0 * w * V * V * V / 3.0 - s0 * w * w * V * V * V * V / 8.0;
                              } else {
                                  osc = -V * std::cos(w * bb) / w + (std::sin(w * bb) - std::sin(w * a)) / (w * w);
                              }
                              return (lin - (k.r / kPi) * osc) / (2.0 * k.r);
                          },
                          [a, b](const AlgebraicTail& k) {
                              const double u1 = 1.0 + a / k.a;
                              const double g = k.gamma;
                              if (std::isinf(b)) {
                                  if (g <= 3.0)
                                      return kInf;
                                  return 0.5 * k.a * k.a * std::pow(u1, 3.0 - g) / ((g - 3.0) * (g - 2.0));
                              }
                              const double L = std::log1p((b - a) / (k.a + a));
                              return 0.5 * k.a * k.a * std::pow(u1, 3.0 - g) * expm1_over_gap(3.0 - g, L);
                          },
                          [a, b](const LightExponential& k) {
                              const double l = k.lambda0;
                              const double head = 0.5 * std::exp(-l * a) / (l * l);
                              if (std::isinf(b))
                                  return head;
                              return head * one_minus_exp_poly(l * (b - a));
                          },
                      },
                      family_);
}

double Kernel::numeric_tail_integral(double a, double b) const
{
    const double n = *truncation_;
    b = std::min(b, 2.0 * n);
    if (!(b > a))
        return 0.0;
    std::vector<double> cuts{a, b};
    for (double c : {n, 2.0 * n, support_radius()})
        if (c > a && c < b)
            cuts.push_back(c);
    std::sort(cuts.begin(), cuts.end());
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        sum += gk_integrate([this](double s) { return tail_mass(s); }, cuts[i], cuts[i + 1]);
    return sum;
}

double Kernel::numeric_tail_moment(double a, double b) const
{
    const double n = *truncation_;
    b = std::min(b, 2.0 * n);
    if (!(b > a))
        return 0.0;
    std::vector<double> cuts{a, b};
    for (double c : {n, 2.0 * n, support_radius()})
        if (c > a && c < b)
            cuts.push_back(c);
    std::sort(cuts.begin(), cuts.end());
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        sum += gk_integrate([this, a](double s) { return (s - a) * tail_mass(s); }, cuts[i], cuts[i + 1]);
    return sum;
}

double Kernel::tail_integral(double a, double b) const
{
    if (a < 0 || b < a)
        throw DomainError("kernel: tail_integral needs 0 <= a <= b");
    return truncation_ ? numeric_tail_integral(a, b) : base_tail_integral(a, b);
}

double Kernel::tail_moment(double a, double b) const
{
    if (a < 0 || b < a)
        throw DomainError("kernel: tail_moment needs 0 <= a <= b");
    return truncation_ ? numeric_tail_moment(a, b) : base_tail_moment(a, b);
}

MomentValue Kernel::first_moment() const
{
    // int_0^inf x J = int_0^inf T
    const double v = tail_integral(0.0, kInf);
    return std::isfinite(v) ? MomentValue::finite(v) : MomentValue::infinite();
}

MomentValue Kernel::exp_moment(double lambda) const
{
    if (!(lambda > 0))
        throw DomainError("kernel: exp_moment needs lambda > 0");
    if (truncation_) {
        const double top = support_radius();
        const double v = 2.0 * gk_integrate([this, lambda](double x) { return evaluate(x) * std::cosh(lambda * x); }, 0.0, top);
        return MomentValue::finite(v);
    }
    return std::visit(Overloaded{
                          [lambda](const CompactUniform& k) {
                              const double z = lambda * k.r;
                              return MomentValue::finite(std::sinh(z) / z);
                          },
                          [lambda](const CompactCosine& k) {
                              const double w2 = kPi * kPi / (k.r * k.r);
                              return MomentValue::finite(std::sinh(lambda * k.r) / k.r * w2 / (lambda * (lambda * lambda + w2)));
                          },
                          [](const AlgebraicTail&) { return MomentValue::infinite(); },
                          [lambda](const LightExponential& k) {
                              if (lambda >= k.lambda0)
                                  return MomentValue::infinite();
                              const double l2 = k.lambda0 * k.lambda0;
                              return MomentValue::finite(l2 / (l2 - lambda * lambda));
                          },
                      },
                      family_);
}

double Kernel::mgf_abscissa() const
{
    if (truncation_)
        return kInf;
    return std::visit(Overloaded{
                          [](const CompactUniform&) { return kInf; },
                          [](const CompactCosine&) { return kInf; },
                          [](const AlgebraicTail&) { return 0.0; },
                          [](const LightExponential& k) { return k.lambda0; },
                      },
                      family_);
}

double Kernel::support_radius() const
{
    const double base = std::visit(Overloaded{
                                       [](const CompactUniform& k) { return k.r; },
                                       [](const CompactCosine& k) { return k.r; },
                                       [](const AlgebraicTail&) { return kInf; },
                                       [](const LightExponential&) { return kInf; },
                                   },
                                   family_);
    return truncation_ ? std::min(base, 2.0 * *truncation_) : base;
}

double Kernel::interaction_length() const
{
    return std::visit(Overloaded{
                          [](const CompactUniform& k) { return k.r; },
                          [](const CompactCosine& k) { return k.r; },
                          [](const AlgebraicTail& k) { return k.a; },
                          [](const LightExponential& k) { return 1.0 / k.lambda0; },
                      },
                      family_);
}

std::optional<AlgebraicBounds> Kernel::algebraic_bounds() const
{
    if (truncation_)
        return std::nullopt;
    if (const auto* alg = std::get_if<AlgebraicTail>(&family_)) {
        const double c = normalization();
        const double x_bar = 10.0 * alg->a;
        return AlgebraicBounds{c * std::pow(x_bar / (alg->a + x_bar), alg->gamma), c, x_bar};
    }
    return std::nullopt;
}

Kernel Kernel::truncate(double n) const
{
    if (!(n > 0))
        throw DomainError("kernel: truncation length must be positive");
    if (truncation_)
        throw ContractError("kernel: already truncated");
    Kernel k = *this;
    k.truncation_ = n;
    return k;
}

double Kernel::ramp_weight(double z, double len) const
{
    if (!(len > 0))
        return 0.0;
    if (len < 1e-9 * interaction_length())
        return 0.5 * len * evaluate(z - len / 3.0);
    // D = (1/len) int_alpha^beta J(w) (w - alpha) dw on [alpha, beta] = [z - len, z]
    const double alpha = z - len;
    const double beta = z;
    if (!std::isfinite(support_radius()) && (alpha >= 8.0 * len || beta <= -8.0 * len)) {
        // Far from the origin the tail-mass difference cancels badly; the
        // integrand is smooth on the short interval, so Gauss-Legendre is exact
        // to rounding.
        static constexpr double node[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363};
        static constexpr double weight[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
        double acc = 0.0;
        for (int i = 0; i < 4; ++i)
            for (double sg : {-1.0, 1.0}) {
                const double y = 0.5 * len * (1.0 + sg * node[i]);
                acc += weight[i] * evaluate(z - y) * (1.0 - y / len);
            }
        return 0.5 * len * acc;
    }
    double acc;
    if (alpha >= 0.0) {
        acc = tail_integral(alpha, beta) - len * tail_mass(beta);
    } else if (beta <= 0.0) {
        acc = len * tail_mass(-beta) - tail_integral(-beta, -alpha);
    } else {
        const double t0 = tail_mass(0.0);
        const double left = -alpha * t0 - tail_integral(0.0, -alpha);
        const double right = -beta * tail_mass(beta) + tail_integral(0.0, beta) + (-alpha) * (t0 - tail_mass(beta));
        acc = left + right;
    }
    return std::max(0.0, acc / len);
}

KernelReport Kernel::condition_report() const
{
    KernelReport rep;
    // Numerical audit of (J): symmetry, positivity at 0, unit mass.
    for (double x : {0.0, 0.1, 0.5, 1.0, 3.0, 7.0, 25.0}) {
        const double jp = evaluate(x);
        const double jm = evaluate(-x);
        if (jp < 0 || jm < 0)
            throw ValidationError("kernel: negative density");
        if (std::abs(jp - jm) > 1e-15 * std::max(1.0, jp))
            throw ValidationError("kernel: density is not even");
    }
    if (!(evaluate(0.0) > 0))
        throw ValidationError("kernel: J(0) must be positive");

    // Independent mass check: quadrature on [0, X] plus closed-form tail beyond X.
    const double X = std::isfinite(support_radius()) ? support_radius() : 50.0 * interaction_length();
    std::vector<double> cuts{0.0, X};
    if (truncation_) {
        for (double c : {*truncation_, 2.0 * *truncation_})
            if (c > 0 && c < X)
                cuts.push_back(c);
        std::sort(cuts.begin(), cuts.end());
    }
    double half = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        half += gk_integrate([this](double x) { return evaluate(x); }, cuts[i], cuts[i + 1]);
    half += tail_mass(X);
    rep.mass = 2.0 * half;
    const bool algebraic = std::holds_alternative<AlgebraicTail>(family_) && !truncation_;
    const double tol = algebraic ? 1e-6 : 1e-8;
    const bool unit = std::abs(rep.mass - 1.0) <= tol;
    if (!unit && !truncation_)
        throw ValidationError("kernel: total mass " + std::to_string(rep.mass) + " differs from 1");
    rep.satisfies_J = unit;

    rep.first_moment = first_moment();
    rep.satisfies_J1 = !rep.first_moment.divergent;
    rep.mgf_abscissa = mgf_abscissa();
    rep.satisfies_J2 = rep.mgf_abscissa > 0;
    if (algebraic) {
        const double g = std::get<AlgebraicTail>(family_).gamma;
        rep.gamma_class = g <= 2.0 ? "(1,2]" : "(2,inf)";
    }
    return rep;
}

} // namespace nlfb
