#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "spectrum_core.hpp"

namespace wpsle {

class ParameterError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class PrecisionLoss : public std::runtime_error {
public:
    PrecisionLoss(const std::string& what, double estimate)
        : std::runtime_error(what), error_estimate(estimate) {}
    double error_estimate;
};

class MissingRoot : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class AmbiguousCase : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class NotRepresentable : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

namespace detail {

inline constexpr double kIntegerSnap = 1e-10;
inline constexpr double kIntegerNear = 1e-6;

inline bool is_nonpositive_integer(double x, double tol = 0.0) {
    const double r = std::round(x);
    return r <= 0.0 && std::abs(x - r) <= tol;
}

}  // namespace detail

struct GammaValue {
    double argument;
    double value;
    bool pole;
};

inline GammaValue gamma_fn(double x) {
    if (detail::is_nonpositive_integer(x)) {
        return {x, std::numeric_limits<double>::quiet_NaN(), true};
    }
    return {x, std::tgamma(x), false};
}

/// 1/Gamma(x), exactly zero at the poles.
inline double rgamma(double x) {
    const GammaValue g = gamma_fn(x);
    return g.pole ? 0.0 : 1.0 / g.value;
}

struct Hyp2F1Result {
    double value;
    double error_estimate;
    int terms;
};

namespace detail {

// Plain Gauss series with a running tail bound and a rounding bound.
inline Hyp2F1Result series_2f1(double a, double b, double c, double x, int max_terms = 100000) {
    double term = 1.0, sum = 1.0, abs_sum = 1.0;
    const double eps = std::numeric_limits<double>::epsilon();
    const double settle = std::abs(a) + std::abs(b) + std::abs(c) + 2.0;
    for (int k = 0; k < max_terms; ++k) {
        const double num = (a + k) * (b + k);
        if (num == 0.0) return {sum, 4 * eps * abs_sum, k + 1};
        if (c + k == 0.0) throw ParameterError("2F1: c is a pole of the non-terminating series");
        const double ratio = num / ((c + k) * (k + 1.0)) * x;
        term *= ratio;
        sum += term;
        abs_sum += std::abs(term);
        if (k > settle) {
            const double rho = std::max(std::abs(ratio), x);
            if (rho < 1.0) {
                const double tail = std::abs(term) * rho / (1.0 - rho);
                if (tail <= eps * std::abs(sum) || tail == 0.0) {
                    return {sum, tail + 4 * eps * abs_sum, k + 2};
                }
            }
        }
    }
    return {sum, std::numeric_limits<double>::infinity(), max_terms};
}

}  // namespace detail

/// Gauss 2F1(a, b; c; x) for x in [0, 1] with an error estimate.
///
/// Polynomials are summed directly. Otherwise the series is used up to
/// x = 0.75 and the z -> 1 - z connection formula beyond, which needs
/// c - a - b not to be an integer.
inline Hyp2F1Result gauss_2f1_checked(double a, double b, double c, double x) {
    if (!(x >= 0.0 && x <= 1.0)) throw ParameterError("2F1: argument outside [0, 1]");
    const bool terminates = detail::is_nonpositive_integer(a) || detail::is_nonpositive_integer(b);
    if (terminates) {
        const double n = std::min(detail::is_nonpositive_integer(a) ? -a : INFINITY,
                                  detail::is_nonpositive_integer(b) ? -b : INFINITY);
        for (int k = 0; k < n; ++k) {
            if (c + k == 0.0) throw ParameterError("2F1: c is a pole before the series terminates");
        }
        return detail::series_2f1(a, b, c, x, static_cast<int>(n) + 1);
    }
    if (detail::is_nonpositive_integer(c)) throw ParameterError("2F1: c is a non-positive integer");
    const double s = c - a - b;
    if (x <= 0.75 || std::abs(s - std::round(s)) < 1e-8) {
        if (x == 1.0 && s <= 0.0) throw ParameterError("2F1: divergent at x = 1");
        return detail::series_2f1(a, b, c, x);
    }
    const double y = 1.0 - x;
    const double lg = std::tgamma(c);
    const double k1 = lg * std::tgamma(s) * rgamma(c - a) * rgamma(c - b);
    const double k2 = lg * std::tgamma(-s) * rgamma(a) * rgamma(b);
    const Hyp2F1Result f1 = detail::series_2f1(a, b, 1.0 - s, y);
    Hyp2F1Result f2{0.0, 0.0, 0};
    double w = 0.0;
    if (k2 != 0.0 && y > 0.0) {
        f2 = detail::series_2f1(c - a, c - b, 1.0 + s, y);
        w = std::pow(y, s);
    }
    const double eps = std::numeric_limits<double>::epsilon();
    const double t1 = k1 * f1.value, t2 = k2 * w * f2.value;
    const double err = std::abs(k1) * f1.error_estimate + std::abs(k2 * w) * f2.error_estimate +
                       8 * eps * (std::abs(t1) + std::abs(t2));
    return {t1 + t2, err, f1.terms + f2.terms};
}

inline double gauss_2f1(double a, double b, double c, double x, double rel_tol = 1e-10) {
    const Hyp2F1Result r = gauss_2f1_checked(a, b, c, x);
    if (!(r.error_estimate <= rel_tol * std::max(1.0, std::abs(r.value)))) {
        throw PrecisionLoss("2F1: error estimate exceeds tolerance", r.error_estimate);
    }
    return r.value;
}

template <class T>
struct BasicHyperParams {
    T a, b, c;
    T a_prime, b_prime, c_prime;
};

using HyperParams = BasicHyperParams<double>;

template <class T>
BasicHyperParams<T> hyper_params(const BasicKappa<T>& kappa, const BasicMomentPoint<T>& pt, const T& gamma) {
    const auto s = scalar_traits<T>::sqrt(disc_1(kappa, pt));
    if (!s) throw MissingRoot("gamma_1 does not exist at this moment point");
    const T g1 = (1 + *s) / kappa.value(), g1m = (1 - *s) / kappa.value();
    const T gd = dual_gamma(kappa, gamma);
    BasicHyperParams<T> h{gamma - g1, gamma - g1m, 1 + gamma - gd, gd - g1, gd - g1m, 1 + gd - gamma};
    if constexpr (std::is_same_v<T, Rational>) {
        if (h.c - h.a - h.b != Rational(1, 2)) throw std::logic_error("c - a - b != 1/2");
    } else {
        if (std::abs(h.c - h.a - h.b - 0.5) > 1e-12 * (1 + std::abs(h.a) + std::abs(h.b) + std::abs(h.c))) {
            throw std::logic_error("c - a - b != 1/2");
        }
    }
    return h;
}

enum class ProfileCase { I, II, III, IV };

inline std::string_view to_string(ProfileCase c) {
    switch (c) {
        case ProfileCase::I: return "I";
        case ProfileCase::II: return "II";
        case ProfileCase::III: return "III";
        case ProfileCase::IV: return "IV";
    }
    return "?";
}

/// A normalized test function u^exponent * g_0(u) with g_0(0) = 1, regular at u = 4.
///
/// `gamma` is the requested parameter and `params` are taken relative to it.
/// In case I the unprimed branch is absent and the exponent is the dual value.
struct TestProfile {
    double kappa;
    double p;
    double q;
    double gamma;
    double gamma_prime;
    ProfileCase which;
    std::optional<int> n;
    std::optional<int> m;
    double c1;
    double c2;
    bool normalized = true;
    HyperParams params;
    double exponent;
    std::vector<double> poly;   // coefficients of g_0 in x = u/4 (cases I, II)
    double endpoint_value = 0;  // g_0(4), case IV
    double switch_mismatch = 0; // series vs connection at x = 0.75, case IV

    bool polynomial() const { return which != ProfileCase::IV; }
};

namespace detail {

inline std::vector<double> hyp_poly(double a, double b, double c, int n) {
    std::vector<double> out(n + 1);
    out[0] = 1.0;
    for (int k = 0; k < n; ++k) {
        if (std::abs(c + k) <= kIntegerSnap) throw NotRepresentable("c hits a pole inside a terminating series");
        out[k + 1] = out[k] * (a + k) * (b + k) / ((c + k) * (k + 1.0));
    }
    return out;
}

// Which of two parameters terminates the series; returns its degree.
inline std::optional<int> degree_of(double a, double b) {
    std::optional<int> d;
    for (double v : {a, b}) {
        if (is_nonpositive_integer(v, kIntegerSnap)) {
            const int n = static_cast<int>(-std::round(v));
            d = d ? std::min(*d, n) : n;
        }
    }
    return d;
}

inline bool near_pole(double v) {
    return is_nonpositive_integer(v, kIntegerNear) && !is_nonpositive_integer(v, kIntegerSnap);
}

struct Jet {
    double f, d1, d2;
};

inline Jet horner(const std::vector<double>& c, double x) {
    double f = 0, d1 = 0, d2 = 0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) {
        d2 = d2 * x + 2 * d1;
        d1 = d1 * x + f;
        f = f * x + *it;
    }
    return {f, d1, d2};
}

inline Jet hyp_jet(double a, double b, double c, double x) {
    const double f = gauss_2f1_checked(a, b, c, x).value;
    const double k1 = a * b / c;
    const double f1 = k1 == 0.0 ? 0.0 : k1 * gauss_2f1_checked(a + 1, b + 1, c + 1, x).value;
    const double k2 = k1 * (a + 1) * (b + 1) / (c + 1);
    const double f2 = k2 == 0.0 ? 0.0 : k2 * gauss_2f1_checked(a + 2, b + 2, c + 2, x).value;
    return {f, f1, f2};
}

// Case IV near x = 1: g_0 = K * 2F1(a, b; 1/2; 1 - x), the solution regular there.
inline Jet endpoint_jet(const HyperParams& h, double k, double x) {
    const double y = 1.0 - x;
    const double a = h.a, b = h.b;
    const double f = series_2f1(a, b, 0.5, y).value;
    const double d1 = -2 * a * b * series_2f1(a + 1, b + 1, 1.5, y).value;
    const double d2 = 2 * a * b * (a + 1) * (b + 1) / 1.5 * series_2f1(a + 2, b + 2, 2.5, y).value;
    return {k * f, k * d1, k * d2};
}

inline Jet generic_jet(const HyperParams& h, double c0, double x) {
    const Jet lead = hyp_jet(h.a, h.b, h.c, x);
    const Jet sub = hyp_jet(h.a_prime, h.b_prime, h.c_prime, x);
    const double s = 1.0 - h.c;
    const double xs = std::pow(x, s);
    const double xs1 = s * std::pow(x, s - 1);
    const double xs2 = s * (s - 1) * std::pow(x, s - 2);
    return {lead.f + c0 * xs * sub.f, lead.d1 + c0 * (xs1 * sub.f + xs * sub.d1),
            lead.d2 + c0 * (xs2 * sub.f + 2 * xs1 * sub.d1 + xs * sub.d2)};
}

}  // namespace detail

struct ProfileOptions {
    double switch_tolerance = 1e-8;
};

inline TestProfile build_test_profile(const Kappa& kappa, const MomentPoint& pt, double gamma,
                                      const ProfileOptions& opts = {}) {
    const HyperParams h = hyper_params(kappa, pt, gamma);
    const double k = kappa.value();
    TestProfile prof{k, pt.p, pt.q, gamma, dual_gamma(kappa, gamma), ProfileCase::IV,
                     std::nullopt, std::nullopt, 1.0, 0.0, true, h, gamma, {}, 0.0, 0.0};

    for (double v : {h.a, h.b, h.a_prime, h.b_prime, h.c}) {
        if (detail::near_pole(v)) {
            throw AmbiguousCase("a hypergeometric parameter sits within 1e-6 of a non-positive integer");
        }
    }
    const auto n_un = detail::degree_of(h.a, h.b);
    const auto n_pr = detail::degree_of(h.a_prime, h.b_prime);

    if (n_un) {
        try {
            prof.poly = detail::hyp_poly(h.a, h.b, h.c, *n_un);
            prof.which = ProfileCase::II;
            prof.n = *n_un;
            return prof;
        } catch (const NotRepresentable&) {
            if (!n_pr) throw;
        }
    }
    if (n_pr) {
        prof.which = ProfileCase::I;
        prof.n = *n_pr;
        if (n_un) prof.m = *n_un;
        prof.c1 = 0.0;
        prof.c2 = 1.0;
        prof.exponent = prof.gamma_prime;
        prof.poly = detail::hyp_poly(h.a_prime, h.b_prime, h.c_prime, *n_pr);
        return prof;
    }
    if (!(gamma < prof.gamma_prime)) {
        throw NotRepresentable("gamma exceeds its dual and neither branch terminates");
    }
    if (detail::is_nonpositive_integer(h.c, detail::kIntegerSnap)) {
        throw NotRepresentable("c is a non-positive integer: the two branches are degenerate");
    }
    prof.c2 = -std::tgamma(h.c) * std::tgamma(h.a_prime) * std::tgamma(h.b_prime) * rgamma(h.a) *
              rgamma(h.b) * rgamma(h.c_prime);
    prof.endpoint_value = std::pow(std::numbers::pi, -1.5) * std::cos(std::numbers::pi * (h.a + h.b)) *
                          std::tgamma(h.c) * std::tgamma(0.5 - h.a) * std::tgamma(0.5 - h.b);
    const double near = detail::generic_jet(h, prof.c2, 0.75).f;
    const double far = detail::endpoint_jet(h, prof.endpoint_value, 0.75).f;
    prof.switch_mismatch = std::abs(near - far);
    if (!std::isfinite(near) || !std::isfinite(far) ||
        prof.switch_mismatch > opts.switch_tolerance * std::max(1.0, std::abs(near))) {
        throw PrecisionLoss("g_0: connection formula disagrees with the series at u = 3",
                            prof.switch_mismatch);
    }
    return prof;
}

struct G0Jet {
    double value;
    double du;
    double d2u;
};

/// g_0 and its first two u-derivatives on [0, 4].
inline G0Jet eval_g0(const TestProfile& prof, double u) {
    if (!(u >= 0.0 && u <= 4.0)) throw ParameterError("eval_g0: u outside [0, 4]");
    const double x = u / 4.0;
    detail::Jet j;
    if (prof.polynomial()) {
        j = detail::horner(prof.poly, x);
    } else if (x > 0.75) {
        j = detail::endpoint_jet(prof.params, prof.endpoint_value, x);
    } else {
        j = detail::generic_jet(prof.params, prof.c2, x);
    }
    return {j.f, j.d1 / 4.0, j.d2 / 16.0};
}

/// g(u) = u^exponent g_0(u) with derivatives.
inline G0Jet eval_g(const TestProfile& prof, double u) {
    const G0Jet g0 = eval_g0(prof, u);
    const double e = prof.exponent;
    const double ue = std::pow(u, e), ue1 = e * std::pow(u, e - 1), ue2 = e * (e - 1) * std::pow(u, e - 2);
    return {ue * g0.value, ue1 * g0.value + ue * g0.du, ue2 * g0.value + 2 * ue1 * g0.du + ue * g0.d2u};
}

inline double regularity_defect(const TestProfile& prof) {
    const HyperParams& h = prof.params;
    const double rp = std::sqrt(std::numbers::pi);
    const auto term = [&](double coeff, double a, double b, double c) {
        if (coeff == 0.0) return 0.0;
        const double ra = rgamma(a), rb = rgamma(b);
        if (ra == 0.0 || rb == 0.0) return 0.0;
        return coeff * rp * std::tgamma(c) * ra * rb;
    };
    return term(prof.c1, h.a, h.b, h.c) + term(prof.c2, h.a_prime, h.b_prime, h.c_prime);
}

enum class Positivity { ProvedPositive, NumericallyPositive, Indefinite };

inline std::string_view to_string(Positivity p) {
    switch (p) {
        case Positivity::ProvedPositive: return "ProvedPositive";
        case Positivity::NumericallyPositive: return "NumericallyPositive";
        case Positivity::Indefinite: return "Indefinite";
    }
    return "?";
}

inline Positivity positivity_certificate(const TestProfile& prof, int grid = 4096) {
    const Kappa kappa(prof.kappa);
    const auto roots = gamma_roots(kappa, MomentPoint(prof.p, prof.q));
    const double g1_dual = dual_gamma(kappa, *roots.gamma_1);
    if (std::min(prof.gamma, prof.gamma_prime) < g1_dual) return Positivity::ProvedPositive;
    for (int i = 0; i < grid; ++i) {
        const double u = 4.0 * i / (grid - 1);
        if (eval_g0(prof, u).value < -1e-12) return Positivity::Indefinite;
    }
    return Positivity::NumericallyPositive;
}

/// Residual of the hypergeometric equation satisfied by g_0.
inline double g0_ode_residual(const TestProfile& prof, double u) {
    const Kappa kappa(prof.kappa);
    const MomentPoint pt(prof.p, prof.q);
    const double k = prof.kappa, e = prof.exponent;
    const G0Jet j = eval_g0(prof, u);
    return quad_A(kappa, pt, e) * j.value + (k / 2 * (2 - u) + (k * e - 1) * (4 - u)) * j.du +
           k / 2 * (4 - u) * u * j.d2u;
}

/// Residual of the boundary equation for g = u^exponent g_0.
inline double boundary_residual(const TestProfile& prof, double u) {
    const Kappa kappa(prof.kappa);
    const MomentPoint pt(prof.p, prof.q);
    const double k = prof.kappa;
    const double beta = beta_gamma(kappa, pt, prof.exponent);
    const G0Jet g = eval_g(prof, u);
    return (2 * prof.p - (prof.q - prof.p) * u - 2 * beta) * g.value +
           (k / 2 * (2 - u) - (4 - u)) * u * g.du + k / 2 * (4 - u) * u * u * g.d2u;
}

inline std::string serialize(const TestProfile& prof) {
    std::ostringstream os;
    os.precision(17);
    os << "kappa=" << prof.kappa << "\np=" << prof.p << "\nq=" << prof.q << "\ngamma=" << prof.gamma
       << "\ngamma_prime=" << prof.gamma_prime << "\ncase=" << to_string(prof.which) << "\nn="
       << (prof.n ? std::to_string(*prof.n) : "") << "\nm=" << (prof.m ? std::to_string(*prof.m) : "")
       << "\nC1=" << prof.c1 << "\nC2=" << prof.c2 << "\nnormalized=" << (prof.normalized ? 1 : 0) << "\n";
    return os.str();
}

}  // namespace wpsle
