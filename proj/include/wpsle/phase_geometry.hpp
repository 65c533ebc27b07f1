#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "spectrum_core.hpp"

namespace wpsle {

enum class Curve { Red, Green, BlueQuartic };

template <class T>
struct BasicCurvePoint {
    T gamma;
    T p;
    T q;
    Curve curve;
};

using CurvePoint = BasicCurvePoint<double>;

inline std::string_view to_string(Curve c) {
    switch (c) {
        case Curve::Red: return "red";
        case Curve::Green: return "green";
        case Curve::BlueQuartic: return "blue_quartic";
    }
    return "?";
}

/// Red parabola: A and C vanish at the same gamma.
template <class T>
BasicCurvePoint<T> red_point(const BasicKappa<T>& kappa, const T& gamma) {
    const T& k = kappa.value();
    return {gamma, (2 + k / 2) * gamma - k * gamma * gamma / 2, (3 + k / 2) * gamma - k * gamma * gamma,
            Curve::Red};
}

/// Green parabola, parametrised by the dual exponent gamma'.
template <class T>
BasicCurvePoint<T> green_point(const BasicKappa<T>& kappa, const T& gamma_dual) {
    const T& k = kappa.value();
    const T p = (4 + k) * (4 + k) / (8 * k) - k * gamma_dual * gamma_dual / 2;
    return {gamma_dual, p, p + gamma_dual - k * gamma_dual * gamma_dual / 2, Curve::Green};
}

template <class T>
T quartic_delta(const BasicKappa<T>& kappa, const T& gamma) {
    const T& k = kappa.value();
    return 4 * k * k * gamma * gamma - 2 * k * (4 + k) * gamma + (8 + k) * (8 + k) / 4 + 4 * k;
}

class CurveDefect : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Blue quartic, the locus where beta_tip(p) meets beta at a root of A^sigma.
template <class T>
BasicCurvePoint<T> blue_quartic_point(const BasicKappa<T>& kappa, const T& gamma) {
    const T& k = kappa.value();
    const T delta = quartic_delta(kappa, gamma);
    if (delta < 0) throw CurveDefect("quartic discriminant is negative");
    const T root = *scalar_traits<T>::sqrt(delta);
    const T p = k / 16 + (1 + k / 4) * gamma - k * gamma * gamma / 2 - root / 8;
    const T q = p + gamma - k * gamma * gamma / 2;
    BasicCurvePoint<T> out{gamma, p, q, Curve::BlueQuartic};
    if constexpr (std::is_same_v<T, double>) {
        const MomentPoint pt(p, q);
        const auto bundle = spectrum_functions(kappa, pt);
        const double a = quad_A(kappa, pt, gamma);
        const double scale = 1.0 + std::abs(p) + std::abs(gamma) * std::abs(gamma) * k;
        if (!bundle.beta_tip || std::abs(a) > 1e-9 * scale ||
            std::abs(*bundle.beta_tip - beta_gamma(kappa, pt, gamma)) > 1e-9 * scale) {
            throw CurveDefect("quartic point fails its defining identities");
        }
    }
    return out;
}

/// Uncorrected variant: the linear term is multiplied into p instead of added. Kept for comparison only.
inline CurvePoint blue_quartic_point_uncorrected(const Kappa& kappa, double gamma) {
    const double k = kappa.value();
    const double root = std::sqrt(quartic_delta(kappa, gamma));
    const double p = k / 16 * (1 + k / 4) * gamma - k * gamma * gamma / 2 - root / 8;
    return {gamma, p, p + gamma - k * gamma * gamma, Curve::BlueQuartic};
}

enum class LineKind { Vertical, Diagonal };

/// Vertical lines read p = offset; diagonal lines read q - p = offset.
template <class T>
struct BasicLine {
    std::string name;
    LineKind kind;
    T offset;

    double side(double p, double q) const {
        const double o = scalar_traits<T>::to_double(offset);
        return kind == LineKind::Vertical ? p - o : (q - p) - o;
    }
};

template <class T>
struct BasicTransitionLines {
    BasicLine<T> d_prime_0, d_0, d_1, d_3, d_4, delta_0, delta_1;

    std::vector<BasicLine<T>> all() const { return {d_prime_0, d_0, d_1, d_3, d_4, delta_0, delta_1}; }
};

using Line = BasicLine<double>;
using TransitionLines = BasicTransitionLines<double>;

template <class T>
BasicTransitionLines<T> transition_lines(const BasicKappa<T>& kappa) {
    const T& k = kappa.value();
    return {
        {"D'_0", LineKind::Vertical, -1 - 3 * k / 8},
        {"D_0", LineKind::Vertical, 3 * (4 + k) * (4 + k) / (32 * k)},
        {"D_1", LineKind::Diagonal, (16 - k * k) / (32 * k)},
        {"D_3", LineKind::Diagonal, -1 - k / 2},
        {"D_4", LineKind::Diagonal, -(2 + k) * (4 + k) / (2 * k)},
        {"Delta_0", LineKind::Vertical, (4 + k) * (4 + k) / (8 * k)},
        {"Delta_1", LineKind::Diagonal, T(1) / (2 * k)},
    };
}

template <class T>
struct BasicMFoldTransform {
    long m;

    explicit BasicMFoldTransform(long m_) : m(m_) {
        if (m == 0) throw std::invalid_argument("m-fold transform needs m != 0");
    }
    BasicMomentPoint<T> forward(const BasicMomentPoint<T>& pt) const {
        const T mm(m);
        return {pt.p, (1 - 1 / mm) * pt.p + pt.q / mm};
    }
    BasicMomentPoint<T> inverse(const BasicMomentPoint<T>& pt) const {
        const T mm(m);
        return {pt.p, (1 - mm) * pt.p + mm * pt.q};
    }
};

using MFoldTransform = BasicMFoldTransform<double>;

enum class PhaseRegion { Tip, Bulk, Linear, One };
enum class ValidityStatus {
    ProvedDHLZ_I,
    ProvedDHLZ_II,
    ProvedDHLZ_III,
    ProvedDHLZ_IV,
    ProvedNew,
    UpperBoundOnly,
    LowerBoundOnly,
    Unknown
};
enum class ProofZone { ZoneI, ZoneII, ZoneIII, ZoneIV, Outside };
enum class EIE { E_minus, I, E_plus, AboveDelta1 };

inline std::string_view to_string(PhaseRegion r) {
    constexpr std::array<std::string_view, 4> names{"Tip", "Bulk", "Linear", "One"};
    return names[static_cast<int>(r)];
}
inline std::string_view to_string(ValidityStatus v) {
    constexpr std::array<std::string_view, 8> names{"ProvedDHLZ_I", "ProvedDHLZ_II", "ProvedDHLZ_III",
                                                    "ProvedDHLZ_IV", "ProvedNew",     "UpperBoundOnly",
                                                    "LowerBoundOnly", "Unknown"};
    return names[static_cast<int>(v)];
}
inline std::string_view to_string(ProofZone z) {
    constexpr std::array<std::string_view, 5> names{"ZoneI", "ZoneII", "ZoneIII", "ZoneIV", "Outside"};
    return names[static_cast<int>(z)];
}
inline std::string_view to_string(EIE e) {
    constexpr std::array<std::string_view, 4> names{"E_minus", "I", "E_plus", "AboveDelta1"};
    return names[static_cast<int>(e)];
}

class Unclassifiable : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Phase of the conjectured spectrum. Boundary points go to the first phase
/// in the order Tip, Bulk, Linear, One.
inline PhaseRegion classify_conjecture(const Kappa& kappa, const MomentPoint& pt) {
    if (!std::isfinite(pt.p) || !std::isfinite(pt.q)) throw Unclassifiable("non-finite moment point");
    const auto roots = gamma_roots(kappa, pt);
    const double glin = roots.gamma_lin;
    if (!roots.gamma_0 || *roots.gamma_0 > glin) {
        if (!roots.gamma_1 || *roots.gamma_1 <= glin) return PhaseRegion::Linear;
        return PhaseRegion::One;
    }
    const double g0 = *roots.gamma_0;
    if (g0 > -0.5) {
        if (!roots.gamma_1) return PhaseRegion::Bulk;
        const double g1_dual = dual_gamma(kappa, *roots.gamma_1);
        return g1_dual >= g0 ? PhaseRegion::Bulk : PhaseRegion::One;
    }
    if (!roots.gamma_1) return PhaseRegion::Tip;
    const auto bundle = spectrum_functions(kappa, pt);
    return *bundle.beta_tip >= *bundle.beta_1 ? PhaseRegion::Tip : PhaseRegion::One;
}

inline double conjectured_beta(const Kappa& kappa, const MomentPoint& pt) {
    const auto bundle = spectrum_functions(kappa, pt);
    switch (classify_conjecture(kappa, pt)) {
        case PhaseRegion::Tip: return *bundle.beta_tip;
        case PhaseRegion::Bulk: return *bundle.beta_0;
        case PhaseRegion::Linear: return bundle.beta_lin;
        case PhaseRegion::One:
            if (!bundle.beta_1) throw Unclassifiable("beta_1 undefined in its own phase");
            return *bundle.beta_1;
    }
    throw Unclassifiable("unreachable phase");
}

/// Closed strict-interior test for the red parabola at abscissa p.
inline bool inside_red(const Kappa& kappa, const MomentPoint& pt, bool closed = false) {
    const auto roots = gamma_roots(kappa, pt);
    if (!roots.gamma_0) return false;
    const double qa = red_point(kappa, *roots.gamma_0).q;
    const double qb = red_point(kappa, *roots.gamma_0_plus).q;
    const double lo = std::min(qa, qb), hi = std::max(qa, qb);
    return closed ? (pt.q >= lo && pt.q <= hi) : (pt.q > lo && pt.q < hi);
}

/// Interior of the green parabola.
inline bool inside_green(const Kappa& kappa, const MomentPoint& pt) {
    const double k = kappa.value();
    const double apex = (4 + k) * (4 + k) / (8 * k);
    if (pt.p >= apex) return false;
    const double s = std::sqrt(2 * (apex - pt.p) / k);
    return pt.q > green_point(kappa, -s).q && pt.q < green_point(kappa, s).q;
}

inline EIE partition_EIE(const Kappa& kappa, const MomentPoint& pt) {
    if (disc_1(kappa, pt) < 0) return EIE::AboveDelta1;
    if (inside_red(kappa, pt)) return EIE::I;
    const auto lm = landmarks(kappa);
    if (pt.p <= lm.t1_point.first) {
        const auto g0 = gamma_roots(kappa, pt).gamma_0;
        if (g0 && pt.q >= red_point(kappa, *g0).q) return EIE::E_minus;
    }
    return EIE::E_plus;
}

/// Sector where both gamma_0 and gamma_1 are real: left of Delta_0, below Delta_1.
inline bool in_sector_S(const Kappa& kappa, const MomentPoint& pt) {
    return disc_0(kappa, pt) > 0 && disc_1(kappa, pt) > 0;
}

/// Green interior left of D_0.
inline bool in_green_domain(const Kappa& kappa, const MomentPoint& pt) {
    return pt.p < landmarks(kappa).p0 && inside_green(kappa, pt);
}

/// The racket between the green left branch, the red parabola and D_3.
inline bool in_racket(const Kappa& kappa, const MomentPoint& pt) {
    if (classify_conjecture(kappa, pt) != PhaseRegion::One) return false;
    if (pt.q - pt.p < transition_lines(kappa).d_3.offset) return false;
    return inside_red(kappa, pt, true);
}

inline ValidityStatus classify_validity(const Kappa& kappa, const MomentPoint& pt) {
    const PhaseRegion phase = classify_conjecture(kappa, pt);
    if (phase == PhaseRegion::Tip || phase == PhaseRegion::Bulk) return ValidityStatus::ProvedDHLZ_I;
    if (phase == PhaseRegion::Linear) return ValidityStatus::ProvedDHLZ_II;
    if (in_green_domain(kappa, pt)) return ValidityStatus::ProvedDHLZ_III;
    if (in_racket(kappa, pt)) return ValidityStatus::ProvedDHLZ_IV;
    switch (partition_EIE(kappa, pt)) {
        case EIE::I: return ValidityStatus::ProvedNew;
        case EIE::E_plus: return ValidityStatus::UpperBoundOnly;
        case EIE::E_minus: return ValidityStatus::LowerBoundOnly;
        case EIE::AboveDelta1: break;
    }
    return ValidityStatus::Unknown;
}

struct ZoneExponents {
    double gamma_0;
    double gamma_1;
    double gamma_1_dual;
    double shifted_dual;  // gamma'_1 + 2/kappa
};

inline std::optional<ZoneExponents> zone_exponents(const Kappa& kappa, const MomentPoint& pt) {
    const auto roots = gamma_roots(kappa, pt);
    if (!roots.gamma_0 || !roots.gamma_1) return std::nullopt;
    const double g1d = dual_gamma(kappa, *roots.gamma_1);
    return ZoneExponents{*roots.gamma_0, *roots.gamma_1, g1d, g1d + 2 / kappa.value()};
}

/// Raw zone inequalities; exposed so the partition property can be tested.
inline std::array<bool, 4> zone_membership(const Kappa& kappa, const MomentPoint& pt, bool strict = true) {
    std::array<bool, 4> in{false, false, false, false};
    const auto e = zone_exponents(kappa, pt);
    if (!e) return in;
    auto lt = [strict](double a, double b) { return strict ? a < b : a <= b; };
    const double g0 = e->gamma_0, g1 = e->gamma_1, g1d = e->gamma_1_dual, sd = e->shifted_dual;
    in[0] = lt(std::max(-0.5, g1d), g0) && lt(g0, std::min(sd, g1));
    in[1] = lt(g1d, g0) && lt(g0, std::min(-0.5, sd));
    in[2] = lt(sd, std::min(-0.5, g0));
    in[3] = lt(std::max(-0.5, g1d), std::min(sd, g1)) && lt(std::min(sd, g1), g0);
    return in;
}

inline ProofZone proof_zone(const Kappa& kappa, const MomentPoint& pt) {
    if (!in_sector_S(kappa, pt) || classify_conjecture(kappa, pt) != PhaseRegion::One) {
        return ProofZone::Outside;
    }
    for (bool strict : {true, false}) {
        const auto in = zone_membership(kappa, pt, strict);
        // Zones I and IV are closed in the geometric description, so they win ties.
        for (int z : {0, 3, 1, 2}) {
            if (in[z]) return static_cast<ProofZone>(z);
        }
    }
    return ProofZone::Outside;
}

inline double m_fold_beta(const Kappa& kappa, long m, const MomentPoint& pt) {
    if (m == 0) throw std::invalid_argument("m-fold spectrum needs m != 0");
    const double k = kappa.value();
    const double md = static_cast<double>(m);
    const double radicand = 1 + (2 * k / md) * (pt.p - pt.q);
    if (radicand < 0) throw std::domain_error("m-fold radicand is negative");
    return (1 + 2 / md) * pt.p - (2 / md) * pt.q - 0.5 - 0.5 * std::sqrt(radicand);
}

/// q on the green left branch above abscissa p (p must not exceed the apex).
inline double green_left_q(const Kappa& kappa, double p) {
    const double k = kappa.value();
    const double apex = (4 + k) * (4 + k) / (8 * k);
    return green_point(kappa, std::sqrt(std::max(0.0, 2 * (apex - p) / k))).q;
}

inline double green_right_q(const Kappa& kappa, double p) {
    const double k = kappa.value();
    const double apex = (4 + k) * (4 + k) / (8 * k);
    return green_point(kappa, -std::sqrt(std::max(0.0, 2 * (apex - p) / k))).q;
}

/// The quartic branch through Q_0 and beyond (gamma >= 1 + 2/kappa) is a graph
/// over p <= p'_0; bracket and solve for its ordinate.
inline double quartic_q_left(const Kappa& kappa, double p) {
    const double k = kappa.value();
    const double g_start = 1 + 2 / k;
    auto f = [&](double g) { return blue_quartic_point(kappa, g).p - p; };
    double lo = g_start, hi = g_start + 1;
    if (f(lo) < 0) throw std::domain_error("abscissa lies right of Q_0");
    while (f(hi) > 0) hi = lo + 2 * (hi - lo);
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(52),
                                                     iters);
    return blue_quartic_point(kappa, 0.5 * (r.first + r.second)).q;
}

struct CurveSample {
    double kappa;
    Curve curve;
    double gamma;
    double p;
    double q;
};

/// Uniform parameter samples along the three curves for plotting and export.
inline std::vector<CurveSample> sample_curves(const Kappa& kappa, double gamma_lo, double gamma_hi,
                                              int count) {
    std::vector<CurveSample> out;
    out.reserve(static_cast<std::size_t>(3 * count));
    for (Curve c : {Curve::Red, Curve::Green, Curve::BlueQuartic}) {
        for (int i = 0; i < count; ++i) {
            const double g = gamma_lo + (gamma_hi - gamma_lo) * i / (count - 1);
            CurvePoint pt = c == Curve::Red     ? red_point(kappa, g)
                            : c == Curve::Green ? green_point(kappa, g)
                                                : blue_quartic_point(kappa, g);
            out.push_back({kappa.value(), c, g, pt.p, pt.q});
        }
    }
    return out;
}

}  // namespace wpsle
