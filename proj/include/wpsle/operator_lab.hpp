#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include "phase_geometry.hpp"
#include "special_functions.hpp"

namespace wpsle {

class SingularPoint : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class Inadmissible : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class MeshTooCoarse : public std::runtime_error {
public:
    MeshTooCoarse(const std::string& what, double estimate) : std::runtime_error(what), estimate(estimate) {}
    double estimate;
};

class ConstructionFailed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnsupportedZone : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A point of the unit disc stored through its gap to the circle, so that
/// 1 - r^2 and |1 - z|^2 stay accurate as r -> 1.
struct DiskPoint {
    double gap;    // 1 - r
    double theta;

    static DiskPoint polar(double r, double theta) { return {1.0 - r, theta}; }
    static DiskPoint from_gap(double gap, double theta) { return {gap, theta}; }

    double r() const { return 1.0 - gap; }
    double w() const { return gap * (2.0 - gap); }
    double u() const {
        const double sh = std::sin(theta / 2);
        return gap * gap + 4.0 * r() * sh * sh;
    }
    double minus_log_w() const { return -(std::log(gap) + std::log(2.0 - gap)); }
    std::complex<double> z() const { return std::polar(r(), theta); }
};

struct MixedProfile {
    TestProfile psi0;
    TestProfile psi1;
};

/// psi_1 defaults to the gamma_1 profile (g_0 = 1); n > 0 selects gamma_1 - n.
inline MixedProfile make_mixed(const Kappa& kappa, const MomentPoint& pt, double gamma, int n = 0) {
    const auto roots = gamma_roots(kappa, pt);
    if (!roots.gamma_1) throw MissingRoot("gamma_1 does not exist at this moment point");
    return {build_test_profile(kappa, pt, gamma), build_test_profile(kappa, pt, *roots.gamma_1 - n)};
}

struct LogModifiedTestFunction {
    std::variant<TestProfile, MixedProfile> base;
    double delta = 0.0;
};

namespace detail {

inline std::vector<const TestProfile*> components(const LogModifiedTestFunction& fn) {
    if (const auto* single = std::get_if<TestProfile>(&fn.base)) return {single};
    const auto& mixed = std::get<MixedProfile>(fn.base);
    return {&mixed.psi0, &mixed.psi1};
}

inline double profile_beta(const TestProfile& prof) {
    return beta_gamma(Kappa(prof.kappa), MomentPoint(prof.p, prof.q), prof.exponent);
}

}  // namespace detail

/// The three blocks of P(D)[psi]/psi: C(gamma) w^2/u^2, the remaining w and w^2 terms, and
/// the logarithmic correction for a factor (-log w)^delta.
struct ActionTerms {
    double leading;
    double rest;
    double log_term;
    double total() const { return leading + rest + log_term; }
};

inline ActionTerms action_terms(const TestProfile& prof, const DiskPoint& pt, double delta = 0.0) {
    const double u = pt.u();
    if (!(u > 0.0)) throw SingularPoint("operator action is singular at z = 1");
    const Kappa kappa(prof.kappa);
    const MomentPoint mp(prof.p, prof.q);
    const double k = prof.kappa, g = prof.exponent, w = pt.w();
    const double A = quad_A(kappa, mp, g), C = quad_C(kappa, mp, g);
    const G0Jet j = eval_g0(prof, u);
    const double L = j.du / j.value, M = j.d2u / j.value;
    double t1, t2;
    if (u > 3.0) {
        t1 = -(A + C) / u + (1 - k / 2 - 2 * k * g) * L - k * u * M;
        t2 = (2 - k * g) * L / u - k / 2 * M;
    } else {
        t1 = -(A + C) / u + 2 * A / (4 - u) + L * (k / 2 - 1 - 2 * k / (4 - u));
        t2 = (A / (4 - u) + L * (1 + k / 2 - k / (4 - u))) / u;
    }
    const double r = pt.r();
    const double log_term = delta == 0.0 ? 0.0 : -2 * delta * r * r / (u * pt.minus_log_w());
    return {C * (w / u) * (w / u), w * t1 + w * w * t2, log_term};
}

/// P(D)[psi]/psi for a standard test function.
inline double action_closed_form(const TestProfile& prof, const DiskPoint& pt) {
    const ActionTerms t = action_terms(prof, pt);
    return t.leading + t.rest;
}

struct ActionValue {
    double ratio;       // P(D)[phi] / |phi|
    double phi_sign;
    double scale;       // sum of the magnitudes of the summed terms
};

inline ActionValue action_signed(const LogModifiedTestFunction& fn, const DiskPoint& pt) {
    const auto parts = detail::components(fn);
    const double lu = std::log(pt.u()), lw = -pt.minus_log_w();
    std::vector<double> logmag(parts.size());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < parts.size(); ++i) {
        logmag[i] = -detail::profile_beta(*parts[i]) * lw + parts[i]->exponent * lu;
        top = std::max(top, logmag[i]);
    }
    double weight = 0.0, acc = 0.0, mag = 0.0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const double a = std::exp(logmag[i] - top) * eval_g0(*parts[i], pt.u()).value;
        const ActionTerms t = action_terms(*parts[i], pt);
        weight += a;
        acc += a * (t.leading + t.rest);
        mag += std::abs(a) * (std::abs(t.leading) + std::abs(t.rest));
    }
    const double r = pt.r();
    const double sign = weight > 0 ? 1.0 : (weight < 0 ? -1.0 : 0.0);
    const double log_term = -2 * fn.delta * r * r / (pt.u() * pt.minus_log_w());
    return {acc / std::abs(weight) + sign * log_term, sign, mag / std::abs(weight) + std::abs(log_term)};
}

/// P(D)[psi l_delta] / (psi l_delta).
inline double action_log_modified(const LogModifiedTestFunction& fn, const DiskPoint& pt) {
    const ActionValue v = action_signed(fn, pt);
    return v.ratio * v.phi_sign;
}

// ---------------------------------------------------------------------------
// The operator in polar coordinates, applied to a pointwise jet or to a mesh.

struct PolarJet {
    double g, g_r, g_theta, g_thetatheta;
};

inline double polar_potential(const Kappa& kappa, const MomentPoint& mp, const DiskPoint& pt) {
    (void)kappa;
    const double r = pt.r(), c = std::cos(pt.theta), u = pt.u();
    const double c2 = std::cos(2 * pt.theta);
    return -2 * mp.p * (1 - 2 * r * c + r * r * c2) / (u * u) + 2 * mp.q * (1 - r * c) / u + 2 * mp.p - 2 * mp.q;
}

inline double apply_polar(const Kappa& kappa, const MomentPoint& mp, const DiskPoint& pt, const PolarJet& j) {
    const double r = pt.r(), u = pt.u();
    return kappa.value() / 2 * j.g_thetatheta - 2 * r * std::sin(pt.theta) / u * j.g_theta -
           r * pt.w() / u * j.g_r + polar_potential(kappa, mp, pt) * j.g;
}

/// Jet of psi / psi(point) computed analytically from g = u^gamma g_0.
inline PolarJet profile_jet(const TestProfile& prof, const DiskPoint& pt) {
    const double r = pt.r(), u = pt.u(), w = pt.w();
    const double beta = detail::profile_beta(prof);
    const G0Jet g = eval_g(prof, u);
    const double ur = 2 * (r - std::cos(pt.theta)), ut = 2 * r * std::sin(pt.theta), utt = 2 * r * std::cos(pt.theta);
    const double L = g.du / g.value, M = g.d2u / g.value;
    return {1.0, 2 * beta * r / w + L * ur, L * ut, M * ut * ut + L * utt};
}

struct PolarMesh {
    double r_min;
    double r_max;
    int nr;
    int ntheta;

    double hr() const { return (r_max - r_min) / (nr - 1); }
    double htheta() const { return 2 * std::numbers::pi / ntheta; }
    double r(int i) const { return r_min + i * hr(); }
    double theta(int j) const { return -std::numbers::pi + j * htheta(); }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * ntheta + j; }
    PolarMesh refined() const { return {r_min, r_max, 2 * nr - 1, 2 * ntheta}; }
};

inline std::vector<double> sample_field(const PolarMesh& mesh, const std::function<double(double, double)>& field) {
    std::vector<double> out(static_cast<std::size_t>(mesh.nr) * mesh.ntheta);
    for (int i = 0; i < mesh.nr; ++i)
        for (int j = 0; j < mesh.ntheta; ++j) out[mesh.index(i, j)] = field(mesh.r(i), mesh.theta(j));
    return out;
}

/// Second-order central differences of the polar operator. Boundary rows in r are NaN.
inline std::vector<double> fd_operator(const Kappa& kappa, const MomentPoint& mp, const PolarMesh& mesh,
                                       const std::vector<double>& values) {
    if (mesh.nr < 3 || mesh.ntheta < 3 || values.size() != static_cast<std::size_t>(mesh.nr) * mesh.ntheta) {
        throw std::invalid_argument("fd_operator: mesh and values disagree");
    }
    const double hr = mesh.hr(), ht = mesh.htheta();
    std::vector<double> out(values.size(), std::numeric_limits<double>::quiet_NaN());
    for (int i = 1; i + 1 < mesh.nr; ++i) {
        for (int j = 0; j < mesh.ntheta; ++j) {
            const int jp = (j + 1) % mesh.ntheta, jm = (j + mesh.ntheta - 1) % mesh.ntheta;
            const double g = values[mesh.index(i, j)];
            const PolarJet jet{g, (values[mesh.index(i + 1, j)] - values[mesh.index(i - 1, j)]) / (2 * hr),
                               (values[mesh.index(i, jp)] - values[mesh.index(i, jm)]) / (2 * ht),
                               (values[mesh.index(i, jp)] - 2 * g + values[mesh.index(i, jm)]) / (ht * ht)};
            out[mesh.index(i, j)] = apply_polar(kappa, mp, DiskPoint::polar(mesh.r(i), mesh.theta(j)), jet);
        }
    }
    return out;
}

struct FdResult {
    std::vector<double> residual;   // on the coarse mesh
    double truncation_estimate;     // Richardson estimate, max over interior coarse nodes
};

/// fd_operator with a Richardson check against one refinement of the mesh.
inline FdResult fd_operator_checked(const Kappa& kappa, const MomentPoint& mp, const PolarMesh& mesh,
                                    const std::function<double(double, double)>& field, double tolerance) {
    const PolarMesh fine = mesh.refined();
    const auto coarse_res = fd_operator(kappa, mp, mesh, sample_field(mesh, field));
    const auto fine_res = fd_operator(kappa, mp, fine, sample_field(fine, field));
    double est = 0.0;
    for (int i = 1; i + 1 < mesh.nr; ++i) {
        for (int j = 0; j < mesh.ntheta; ++j) {
            const double d = coarse_res[mesh.index(i, j)] - fine_res[fine.index(2 * i, 2 * j)];
            est = std::max(est, std::abs(d) * 4.0 / 3.0);
        }
    }
    if (!(est <= tolerance)) throw MeshTooCoarse("fd_operator: truncation estimate exceeds tolerance", est);
    return {coarse_res, est};
}

// ---------------------------------------------------------------------------
// Sign verification on an annulus near the unit circle.

enum class SignVerdict { StrictlyNegative, StrictlyPositive, MixedSign };

inline std::string_view to_string(SignVerdict v) {
    switch (v) {
        case SignVerdict::StrictlyNegative: return "StrictlyNegative";
        case SignVerdict::StrictlyPositive: return "StrictlyPositive";
        case SignVerdict::MixedSign: return "MixedSign";
    }
    return "?";
}

struct SignGrid {
    double r0 = 0.9;
    double eta = 1e-5;
    int nr = 512;
    int ntheta = 512;
    unsigned workers = 1;
    bool keep_samples = false;
};

struct SignSample {
    double r;
    double theta;
    double value;
};

struct SignReport {
    SignGrid grid;
    double min_value;
    double max_value;
    SignVerdict verdict;
    SignSample worst;
    long nonpositive_phi;
    std::vector<SignSample> samples;
};

/// Gaps to the circle are geometric in 1 - r; angles are half uniform and half
/// clustered geometrically towards theta = 0 from both sides.
inline std::vector<DiskPoint> sign_grid_points(const SignGrid& g, int row) {
    const double g0 = 1.0 - g.r0;
    const double gap = g.nr == 1 ? g0 : g0 * std::pow(g.eta / g0, static_cast<double>(row) / (g.nr - 1));
    std::vector<DiskPoint> pts;
    pts.reserve(g.ntheta);
    const int uniform = g.ntheta / 2, clustered = (g.ntheta - uniform) / 2;
    for (int j = 0; j < uniform; ++j) {
        pts.push_back(DiskPoint::from_gap(gap, -std::numbers::pi + (j + 0.5) * 2 * std::numbers::pi / uniform));
    }
    const double tmin = g.eta / 10, tmax = 1.0;
    for (int j = 0; j < clustered; ++j) {
        const double t = clustered == 1 ? tmin : tmin * std::pow(tmax / tmin, static_cast<double>(j) / (clustered - 1));
        pts.push_back(DiskPoint::from_gap(gap, t));
        pts.push_back(DiskPoint::from_gap(gap, -t));
    }
    return pts;
}

inline void check_admissible(const LogModifiedTestFunction& fn) {
    const auto* mixed = std::get_if<MixedProfile>(&fn.base);
    if (!mixed) {
        if (positivity_certificate(std::get<TestProfile>(fn.base)) == Positivity::Indefinite) {
            throw Inadmissible("single profile violates g_0 > 0 on [0, 4]");
        }
        return;
    }
    const TestProfile& p0 = mixed->psi0;
    const Kappa kappa(p0.kappa);
    const auto roots = gamma_roots(kappa, MomentPoint(p0.p, p0.q));
    if (!roots.gamma_1) throw MissingRoot("gamma_1 does not exist at this moment point");
    const double g1 = *roots.gamma_1, g1d = dual_gamma(kappa, g1);
    const double g = p0.exponent;
    if (!(g1d < g)) throw Inadmissible("mixed profile violates gamma'_1 < gamma");
    if (!(g < g1)) throw Inadmissible("mixed profile violates gamma < gamma_1");
    if (!(g < g1d + 2 / kappa.value())) throw Inadmissible("mixed profile violates gamma < gamma'_1 + 2/kappa");
}

/// A sample counts as negative (positive) when it lies below -1e-12 (above
/// +1e-12) times the magnitude of the terms that were summed to produce it.
inline SignReport verify_sign(const LogModifiedTestFunction& fn, const SignGrid& grid = {}) {
    check_admissible(fn);
    constexpr double rel_tol = 1e-12;
    struct RowResult {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        double lo_rel = std::numeric_limits<double>::infinity();
        double hi_rel = -std::numeric_limits<double>::infinity();
        SignSample lo_at{}, hi_at{};
        long nonpositive = 0;
        long not_negative = 0;
        long not_positive = 0;
        std::vector<SignSample> samples;
    };
    std::vector<RowResult> rows(grid.nr);
    const unsigned nw = std::max(1u, grid.workers);
    const auto work = [&](unsigned worker) {
        for (int i = static_cast<int>(worker); i < grid.nr; i += static_cast<int>(nw)) {
            RowResult& rr = rows[i];
            for (const DiskPoint& pt : sign_grid_points(grid, i)) {
                const ActionValue v = action_signed(fn, pt);
                const SignSample s{pt.r(), pt.theta, v.ratio};
                const double rel = v.ratio / v.scale;
                if (!(v.phi_sign > 0)) ++rr.nonpositive;
                if (!(rel < -rel_tol)) ++rr.not_negative;
                if (!(rel > rel_tol)) ++rr.not_positive;
                rr.lo = std::min(rr.lo, v.ratio);
                rr.hi = std::max(rr.hi, v.ratio);
                if (rel < rr.lo_rel || std::isnan(rel)) {
                    rr.lo_rel = rel;
                    rr.lo_at = s;
                }
                if (rel > rr.hi_rel || std::isnan(rel)) {
                    rr.hi_rel = rel;
                    rr.hi_at = s;
                }
                if (grid.keep_samples) rr.samples.push_back(s);
            }
        }
    };
    if (nw == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < nw; ++t) pool.emplace_back(work, t);
        for (auto& th : pool) th.join();
    }
    SignReport rep{grid, std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
                   SignVerdict::MixedSign, {}, 0, {}};
    SignSample lo_at{}, hi_at{};
    double lo_rel = std::numeric_limits<double>::infinity(), hi_rel = -lo_rel;
    long not_negative = 0, not_positive = 0;
    for (auto& rr : rows) {
        rep.min_value = std::min(rep.min_value, rr.lo);
        rep.max_value = std::max(rep.max_value, rr.hi);
        if (rr.lo_rel < lo_rel || std::isnan(rr.lo_rel)) {
            lo_rel = rr.lo_rel;
            lo_at = rr.lo_at;
        }
        if (rr.hi_rel > hi_rel || std::isnan(rr.hi_rel)) {
            hi_rel = rr.hi_rel;
            hi_at = rr.hi_at;
        }
        rep.nonpositive_phi += rr.nonpositive;
        not_negative += rr.not_negative;
        not_positive += rr.not_positive;
        if (grid.keep_samples) rep.samples.insert(rep.samples.end(), rr.samples.begin(), rr.samples.end());
    }
    if (rep.nonpositive_phi == 0 && not_negative == 0) {
        rep.verdict = SignVerdict::StrictlyNegative;
        rep.worst = hi_at;
    } else if (rep.nonpositive_phi == 0 && not_positive == 0) {
        rep.verdict = SignVerdict::StrictlyPositive;
        rep.worst = lo_at;
    } else {
        rep.verdict = SignVerdict::MixedSign;
        rep.worst = std::abs(hi_rel) < std::abs(lo_rel) ? hi_at : lo_at;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Integral means exponents and the zone-wise constructions.

inline double exponent_of(const TestProfile& prof) {
    return beta_from_pair(detail::profile_beta(prof), prof.exponent);
}

inline double exponent_of(const MixedProfile& mixed) {
    return std::max(exponent_of(mixed.psi0), exponent_of(mixed.psi1));
}

inline double exponent_of(const LogModifiedTestFunction& fn) {
    return std::visit([](const auto& b) { return exponent_of(b); }, fn.base);
}

struct SubSolution {
    MixedProfile profile;
    double delta;
    double gamma;
    double epsilon;
    ProofZone zone;
    SignReport report;

    LogModifiedTestFunction function() const { return {profile, delta}; }
};

struct SubSolutionOptions {
    SignGrid grid{};
    double delta = 1.0;
    double epsilon0 = 1e-3;
    int max_refinements = 10;
};

struct GammaWindow {
    double lo;
    double hi;
};

/// Open interval for gamma: gamma'_1 < gamma < min(gamma_0, gamma_1, gamma'_1 + 2/kappa, gamma_lin).
inline GammaWindow subsolution_window(const Kappa& kappa, const MomentPoint& pt) {
    const auto r = gamma_roots(kappa, pt);
    if (!r.gamma_0 || !r.gamma_1) throw MissingRoot("sub-solution needs gamma_0 and gamma_1");
    const double g1d = dual_gamma(kappa, *r.gamma_1);
    return {g1d, std::min({*r.gamma_0, *r.gamma_1, g1d + 2 / kappa.value(), r.gamma_lin})};
}

namespace detail {

/// Midpoint of (lo, hi) at the first attempt; later attempts move the same
/// relative distance towards hi as epsilon shrinks.
inline double toward_upper(double lo, double hi, double eps, double eps0 = 1e-3) {
    return hi - (hi - lo) / 2 * (eps / eps0);
}

}  // namespace detail

/// Candidate gamma for a zone at refinement level k (epsilon = epsilon0 / 2^k).
inline double zone_gamma(const Kappa& kappa, const MomentPoint& pt, ProofZone zone, double eps) {
    const auto r = gamma_roots(kappa, pt);
    const double g0 = *r.gamma_0, g1 = *r.gamma_1, g1d = dual_gamma(kappa, g1), gl = r.gamma_lin;
    const double k = kappa.value();
    switch (zone) {
        case ProofZone::ZoneI: {
            const double lo = std::max(-0.5, g1d), hi = std::min(g0, gl);
            return detail::toward_upper(lo, hi, eps);
        }
        case ProofZone::ZoneII: return g0 - eps;
        case ProofZone::ZoneIII: return g1d + 2 / k - eps;
        case ProofZone::ZoneIV: {
            const double lo = std::max(-0.5, g1d), hi = std::min({g1d + 2 / k, g1, gl});
            return detail::toward_upper(lo, hi, eps);
        }
        case ProofZone::Outside: break;
    }
    throw UnsupportedZone("point is outside the four proof zones");
}

inline SubSolution choose_subsolution(const Kappa& kappa, const MomentPoint& pt, const SubSolutionOptions& opt = {}) {
    const ProofZone zone = proof_zone(kappa, pt);
    if (zone == ProofZone::Outside) throw UnsupportedZone("point is outside the four proof zones");
    const auto roots = gamma_roots(kappa, pt);
    const double beta1 = beta_gamma(kappa, pt, *roots.gamma_1);
    const GammaWindow win = subsolution_window(kappa, pt);
    std::string last = "no candidate tried";
    std::vector<double> schedule{opt.epsilon0};
    for (int level = 1; level <= opt.max_refinements; ++level) {
        schedule.push_back(opt.epsilon0 / std::ldexp(1.0, level));
        schedule.push_back(opt.epsilon0 * std::ldexp(1.0, level));
    }
    for (const double eps : schedule) {
        const double g = zone_gamma(kappa, pt, zone, eps);
        if (!(win.lo < g && g < win.hi)) {
            last = "candidate gamma outside the admissible window";
            continue;
        }
        MixedProfile mixed;
        try {
            mixed = make_mixed(kappa, pt, g);
        } catch (const std::exception& e) {
            last = e.what();
            continue;
        }
        if (!(exponent_of(mixed.psi0) < beta1)) {
            last = "psi_0 exponent is not below beta(gamma_1)";
            continue;
        }
        SubSolution sol{mixed, opt.delta, g, eps, zone, {}};
        sol.report = verify_sign(sol.function(), opt.grid);
        if (sol.report.verdict == SignVerdict::StrictlyNegative) return sol;
        last = "sign report is " + std::string(to_string(sol.report.verdict));
    }
    throw ConstructionFailed("no sub-solution within the epsilon schedule: " + last);
}

struct Feasibility {
    bool feasible;
    double lo;
    double hi;
};

/// Super-solution window gamma_0 < gamma < min(gamma_0^+, gamma_1, gamma'_1 + 2/kappa, gamma_lin).
inline Feasibility supersolution_feasibility(const Kappa& kappa, const MomentPoint& pt) {
    const auto r = gamma_roots(kappa, pt);
    if (!r.gamma_0 || !r.gamma_1) throw MissingRoot("feasibility needs gamma_0 and gamma_1");
    const double g1d = dual_gamma(kappa, *r.gamma_1);
    const double hi = std::min({*r.gamma_0_plus, *r.gamma_1, g1d + 2 / kappa.value(), r.gamma_lin});
    const double lo = *r.gamma_0;
    return {hi - lo > 1e-12 * std::max(1.0, std::abs(lo)), lo, hi};
}

}  // namespace wpsle
