#pragma once

#include <limits>
#include <optional>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

namespace nlfb {

/// J(x) = 1/(2r) on |x| <= r.
struct CompactUniform {
    double r;
};

/// J(x) = (1 + cos(pi x / r)) / (2r) on |x| <= r.
struct CompactCosine {
    double r;
};

/// J(x) = c (a + |x|)^(-gamma) with c = (gamma - 1) a^(gamma - 1) / 2.
struct AlgebraicTail {
    double gamma;
    double a;
};

/// J(x) = (lambda0 / 2) exp(-lambda0 |x|).
struct LightExponential {
    double lambda0;
};

/// A moment that may diverge. Divergence is a classification outcome, not an error.
struct MomentValue {
    bool divergent = false;
    double value = std::numeric_limits<double>::infinity();

    static MomentValue finite(double v) { return {false, v}; }
    static MomentValue infinite() { return {true, std::numeric_limits<double>::infinity()}; }
};

/// Constants of the two-sided algebraic bound s1 |x|^-g <= J(x) <= s2 |x|^-g for |x| >= x_bar.
struct AlgebraicBounds {
    double varsigma1;
    double varsigma2;
    double x_bar;
};

struct KernelReport {
    bool satisfies_J = false;
    bool satisfies_J1 = false;
    bool satisfies_J2 = false;
    MomentValue first_moment;
    /// Supremum of lambda with a finite exponential moment; +inf for compact support, 0 for none.
    double mgf_abscissa = 0.0;
    /// "(1,2]", "(2,inf)" or empty.
    std::string gamma_class;
    double mass = 0.0;

    nlohmann::json to_json() const;
};

/// Even, nonnegative dispersal density on the real line.
///
/// All tail quantities are closed forms in terms of the tail mass
///   T(s) = int_s^inf J(z) dz,  s >= 0,
/// its integral over [a, b] and its first moment about a. Truncated kernels
/// J_n(x) = xi(x/n) J(x) keep a closed-form tail mass; their integrals fall back
/// to adaptive Gauss-Kronrod quadrature.
class Kernel {
public:
    using Family = std::variant<CompactUniform, CompactCosine, AlgebraicTail, LightExponential>;

    explicit Kernel(Family family);

    static Kernel uniform(double r) { return Kernel(CompactUniform{r}); }
    static Kernel cosine(double r) { return Kernel(CompactCosine{r}); }
    static Kernel algebraic(double gamma, double a = 1.0) { return Kernel(AlgebraicTail{gamma, a}); }
    static Kernel exponential(double lambda0) { return Kernel(LightExponential{lambda0}); }

    /// {"family": "compact-uniform"|"compact-cosine"|"algebraic"|"light-exponential", ...}
    static Kernel from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    const Family& family() const { return family_; }
    std::optional<double> truncation() const { return truncation_; }
    std::string family_name() const;

    /// Multiplicative scale in front of the family's shape; total mass is one.
    double normalization() const;

    double evaluate(double x) const;
    double operator()(double x) const { return evaluate(x); }

    /// T(s) = int_s^inf J, s >= 0.
    double tail_mass(double s) const;
    /// j(x) = int_0^inf J(x - y) dy = 1 - T(x), x >= 0.
    double halfline_mass(double x) const;
    /// int_{-inf}^{inf} J.
    double mass() const;

    /// int_a^b T(s) ds for 0 <= a <= b; b may be +inf (result may be +inf).
    double tail_integral(double a, double b) const;
    /// int_a^b (s - a) T(s) ds for 0 <= a <= b; b may be +inf.
    double tail_moment(double a, double b) const;

    /// int_0^inf x J(x) dx.
    MomentValue first_moment() const;
    /// int J(x) e^{lambda x} dx.
    MomentValue exp_moment(double lambda) const;
    double mgf_abscissa() const;

    /// Distance beyond which J vanishes; +inf for unbounded support.
    double support_radius() const;
    /// Characteristic jump length (support radius, decay length or shape offset).
    double interaction_length() const;

    std::optional<AlgebraicBounds> algebraic_bounds() const;

    /// J_n(x) = xi(x/n) J(x), xi = 1 on |x|<=1, 2-|x| on [1,2], 0 beyond.
    Kernel truncate(double n) const;

    /// D(z, len) = int_0^len J(z - y) (1 - y/len) dy: the weight a unit ramp
    /// descending over [0, len] receives when convolved at the point z.
    double ramp_weight(double z, double len) const;

    KernelReport condition_report() const;

private:
    double base_tail(double s) const;
    double base_tail_integral(double a, double b) const;
    double base_tail_moment(double a, double b) const;
    double base_evaluate(double x) const;
    double numeric_tail_integral(double a, double b) const;
    double numeric_tail_moment(double a, double b) const;

    Family family_;
    std::optional<double> truncation_;
};

} // namespace nlfb
