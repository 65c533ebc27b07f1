#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <numbers>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "phase_geometry.hpp"
#include "spectrum_core.hpp"

namespace wpsle {

class FlowError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class StepCollapse : public FlowError {
public:
    using FlowError::FlowError;
};

class NonConvergence : public FlowError {
public:
    using FlowError::FlowError;
};

class FailureBudgetExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SimConfig {
    double dt = 1e-3;
    double horizon_cap = 30.0;
    double tol = 1e-6;           // stabilisation of e^t f_t and log f_t' + t over one probe window
    double probe = 1.0;
    double min_horizon = 0.0;    // keep integrating at least this long after convergence
    double guard = 0.1;          // distance to the driving point below which base steps are refined
    double dt_min = 1e-13;
    int max_coarsen = 8;         // coarse steps use at most 2^max_coarsen base steps
    bool coarsen = true;
    double failure_budget = 1e-3;
    std::uint64_t seed = 42;
    unsigned workers = 1;
};

namespace detail {

inline std::seed_seq stream_seed(std::uint64_t seed, std::uint64_t stream, std::uint32_t purpose) {
    return std::seed_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                         static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), purpose};
}

constexpr int kBridgeBits = 40;
constexpr std::uint64_t kBridgeOne = std::uint64_t{1} << kBridgeBits;

}  // namespace detail

/// Brownian driving path on the grid t_k = k dt for one sample stream. Grid values are
/// drawn in order from a stream fixed by (seed, stream) and extended on demand, so the
/// realization does not depend on how far it has been read. Not thread-safe.
class DrivingPath {
public:
    DrivingPath(const Kappa& kappa, double dt, std::uint64_t seed, std::uint64_t stream = 0)
        : kappa_(kappa.value()), dt_(dt), seed_(seed), stream_(stream) {
        if (!(dt > 0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
        auto ss = detail::stream_seed(seed, stream, 0);
        grid_engine_.seed(ss);
        b_.push_back(0.0);
    }

    static DrivingPath frozen(const Kappa& kappa, double dt) {
        DrivingPath p(kappa, dt, 0, 0);
        p.frozen_ = true;
        return p;
    }

    double kappa() const { return kappa_; }
    double dt() const { return dt_; }
    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    bool is_frozen() const { return frozen_; }

    double b(std::size_t k) const {
        while (b_.size() <= k) b_.push_back(b_.back() + (frozen_ ? 0.0 : std::sqrt(dt_) * normal_(grid_engine_)));
        return b_[k];
    }

    std::complex<double> lambda(std::size_t k) const { return std::polar(1.0, std::sqrt(kappa_) * b(k)); }

    /// Increments Delta B_k for k < n.
    std::vector<double> increments(std::size_t n) const {
        b(n);
        std::vector<double> out(n);
        for (std::size_t k = 0; k < n; ++k) out[k] = b_[k + 1] - b_[k];
        return out;
    }

private:
    double kappa_;
    double dt_;
    std::uint64_t seed_;
    std::uint64_t stream_;
    bool frozen_ = false;
    mutable std::mt19937_64 grid_engine_;
    mutable std::normal_distribution<double> normal_;
    mutable std::vector<double> b_;
};

/// Path with ceil(T/dt) increments already drawn.
inline DrivingPath sample_driving(const Kappa& kappa, double horizon, double dt, std::uint64_t seed,
                                  std::uint64_t stream = 0) {
    if (!(horizon > 0) || !(dt > 0) || dt > horizon) throw std::invalid_argument("need 0 < dt <= T");
    DrivingPath path(kappa, dt, seed, stream);
    path.b(static_cast<std::size_t>(std::ceil(horizon / dt)));
    return path;
}

struct FlowSample {
    std::complex<double> z;
    std::complex<double> f_tilde;
    std::complex<double> log_deriv;        // log f_T'(z)
    std::complex<double> renormalized;     // e^T f_T(z)
    std::complex<double> log_renormalized; // log of the above, continued along the flow
    std::complex<double> log_renorm_deriv; // log f_T'(z) + T
    double horizon;
    long steps;
    bool converged;
};

namespace detail {

/// Brownian bridge values inside one base interval, drawn on first request.
class BridgeCache {
public:
    BridgeCache(const DrivingPath& path, std::uint64_t z_tag)
        : path_(path), engine_(), frozen_(path.is_frozen()) {
        auto ss = stream_seed(path.seed(), path.stream(), static_cast<std::uint32_t>(1 + (z_tag % 0xFFFFFFF0u)));
        engine_.seed(ss);
    }

    void reset(std::size_t k) {
        if (k != k_) {
            k_ = k;
            values_.clear();
        }
    }

    double at(std::uint64_t key) {
        if (key == 0) return path_.b(k_);
        if (key == kBridgeOne) return path_.b(k_ + 1);
        if (auto it = values_.find(key); it != values_.end()) return it->second;
        const std::uint64_t s = key & (~key + 1);
        const double mid = 0.5 * (at(key - s) + at(key + s));
        const double sd = std::sqrt(path_.dt() * std::ldexp(static_cast<double>(s), -(kBridgeBits + 1)));
        const double v = frozen_ ? mid : mid + sd * normal_(engine_);
        values_.emplace(key, v);
        return v;
    }

private:
    const DrivingPath& path_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
    bool frozen_;
    std::size_t k_ = static_cast<std::size_t>(-1);
    std::map<std::uint64_t, double> values_;
};

struct FlowState {
    std::complex<double> log_f;  // log(e^t f_t)
    std::complex<double> lhat;   // log f_t' + t
};

inline FlowState flow_field(double t, const FlowState& y, std::complex<double> lam) {
    const std::complex<double> f = std::exp(y.log_f - t);
    const std::complex<double> d = f - lam;
    return {2.0 * f / d, 2.0 * f * (f - 2.0 * lam) / (d * d)};
}

inline FlowState rk4(double t, double h, const FlowState& y, std::complex<double> l0, std::complex<double> lm,
                     std::complex<double> l1) {
    const auto k1 = flow_field(t, y, l0);
    const auto k2 = flow_field(t + h / 2, {y.log_f + h / 2 * k1.log_f, y.lhat + h / 2 * k1.lhat}, lm);
    const auto k3 = flow_field(t + h / 2, {y.log_f + h / 2 * k2.log_f, y.lhat + h / 2 * k2.lhat}, lm);
    const auto k4 = flow_field(t + h, {y.log_f + h * k3.log_f, y.lhat + h * k3.lhat}, l1);
    return {y.log_f + h / 6 * (k1.log_f + 2.0 * k2.log_f + 2.0 * k3.log_f + k4.log_f),
            y.lhat + h / 6 * (k1.lhat + 2.0 * k2.lhat + 2.0 * k3.lhat + k4.lhat)};
}

}  // namespace detail

/// Integrates the reverse radial Loewner flow and its log-derivative in the renormalised
/// variables log(e^t f_t) and log f_t' + t, whose vector fields are O(|f_t|). Base steps of
/// size dt are refined dyadically (Brownian bridge) when |f_t| is close to the circle and
/// coarsened dyadically along the grid once |f_t| has decayed.
inline FlowSample evolve_reverse_flow(std::complex<double> z, const DrivingPath& path, const SimConfig& cfg = {}) {
    if (!(std::abs(z) < 1.0) || z == 0.0) throw std::invalid_argument("flow needs 0 < |z| < 1");
    const double dt = path.dt();
    const double abs_z = std::abs(z);
    const double reach = 4 * std::sqrt(path.kappa() * dt);
    int coarse_cap = 0;
    if (cfg.coarsen) {
        coarse_cap = std::max(0, std::min(cfg.max_coarsen, static_cast<int>(std::floor(std::log2(cfg.probe / (4 * dt))))));
    }
    std::uint64_t tag;
    {
        const double re = z.real(), im = z.imag();
        std::uint64_t a, b;
        std::memcpy(&a, &re, sizeof a);
        std::memcpy(&b, &im, sizeof b);
        tag = a * 0x9E3779B97F4A7C15ull ^ (b + 0x632BE59BD9B4E019ull);
    }
    detail::BridgeCache bridge(path, tag);
    detail::FlowState y{std::log(z), 0.0};
    std::size_t k = 0;
    std::uint64_t off = 0;
    double t = 0.0;
    long steps = 0;
    const auto cap_steps = static_cast<std::size_t>(std::ceil(cfg.horizon_cap / dt));
    double next_probe = cfg.probe;
    detail::FlowState last = y;
    double last_log_mod = std::log(abs_z);
    bool converged = false;
    double converged_at = 0.0;
    std::complex<double> lam_here = path.lambda(0);

    while (true) {
        if (k >= cap_steps) {
            if (converged) break;
            throw NonConvergence("reverse flow did not stabilise before the horizon cap");
        }
        const std::complex<double> f = std::exp(y.log_f - t);
        const double gap = std::max(1.0 - std::abs(f), std::abs(f - lam_here) - reach);
        int refine = 0;
        if (gap < cfg.guard) refine = static_cast<int>(std::ceil(2 * std::log2(cfg.guard / gap)));
        std::complex<double> l0 = lam_here, lm, l1;
        double h;
        if (refine > 0 || off != 0) {
            if (refine >= detail::kBridgeBits) throw StepCollapse("step refinement exceeds the bridge resolution");
            std::uint64_t s = detail::kBridgeOne >> refine;
            if (off != 0) s = std::min(s, off & (~off + 1));
            s = std::max<std::uint64_t>(s, 2);
            h = dt * std::ldexp(static_cast<double>(s), -detail::kBridgeBits);
            if (h < cfg.dt_min) throw StepCollapse("step size fell below dt_min near the driving point");
            bridge.reset(k);
            const double sq = std::sqrt(path.kappa());
            lm = std::polar(1.0, sq * bridge.at(off + s / 2));
            l1 = std::polar(1.0, sq * bridge.at(off + s));
            off += s;
            if (off == detail::kBridgeOne) {
                off = 0;
                ++k;
                l1 = path.lambda(k);
            }
        } else {
            int c = 0;
            if (coarse_cap > 0) {
                const double ratio = abs_z / std::abs(f);
                c = std::min(coarse_cap, ratio >= 2 ? static_cast<int>(std::floor(std::log2(ratio))) : 0);
                if (k != 0) c = std::min(c, std::countr_zero(k));
                while (c > 0 && k + (std::size_t{1} << c) > cap_steps) --c;
            }
            const std::size_t n = std::size_t{1} << c;
            h = dt * static_cast<double>(n);
            if (c == 0) {
                bridge.reset(k);
                lm = std::polar(1.0, std::sqrt(path.kappa()) * bridge.at(detail::kBridgeOne / 2));
            } else {
                lm = path.lambda(k + n / 2);
            }
            k += n;
            l1 = path.lambda(k);
        }
        y = detail::rk4(t, h, y, l0, lm, l1);
        lam_here = l1;
        t = static_cast<double>(k) * dt + dt * std::ldexp(static_cast<double>(off), -detail::kBridgeBits);
        ++steps;
        if (!std::isfinite(y.log_f.real()) || !std::isfinite(y.lhat.real())) {
            throw FlowError("reverse flow produced a non-finite state");
        }
        if (off == 0 && t >= next_probe - 1e-12) {
            const double log_mod = y.log_f.real() - t;
            if (!(log_mod < last_log_mod)) throw FlowError("|f_t| failed to decrease between checkpoints");
            last_log_mod = log_mod;
            const bool stable = std::abs(y.log_f - last.log_f) < cfg.tol && std::abs(y.lhat - last.lhat) < cfg.tol;
            if (stable && !converged) {
                converged = true;
                converged_at = t;
            }
            if (!stable) converged = false;
            last = y;
            next_probe += cfg.probe;
            if (converged && t >= std::max(converged_at, cfg.min_horizon)) break;
        }
    }
    return {z,
            std::exp(y.log_f - t),
            y.lhat - t,
            std::exp(y.log_f),
            y.log_f,
            y.lhat,
            t,
            steps,
            converged};
}

// ---------------------------------------------------------------------------
// Moments, fits and red-parabola validation.

struct MomentEstimate {
    double mean;
    double stderr_;
    long n;
    long failures;
    double kappa, p, q;
    std::complex<double> z;
};

namespace detail {

inline double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 8) {
        double s = 0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

struct SampleStats {
    double mean;
    double stderr_;
    long n;
};

inline SampleStats stats(const std::vector<double>& values, const std::vector<char>& ok) {
    std::vector<double> kept;
    kept.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        if (ok[i]) kept.push_back(values[i]);
    const auto n = static_cast<long>(kept.size());
    if (n < 2) return {std::nan(""), std::nan(""), n};
    const double mean = pairwise_sum(kept.data(), kept.size()) / n;
    for (double& v : kept) v = (v - mean) * (v - mean);
    const double var = pairwise_sum(kept.data(), kept.size()) / (n - 1);
    return {mean, std::sqrt(var / n), n};
}

inline double log_integrand(const MomentPoint& pt, std::complex<double> z, const FlowSample& s) {
    return pt.q * std::log(std::abs(z)) + pt.p * s.log_renorm_deriv.real() - pt.q * s.log_renormalized.real();
}

/// Integrand of the m-fold map z -> f(z^m)^{1/m}, given the flow started at w = z^m.
inline double log_integrand_m_fold(const MomentPoint& pt, long m, std::complex<double> z, const FlowSample& s) {
    const double md = static_cast<double>(m);
    const double log_r = std::log(std::abs(z));
    const double log_f = s.log_renormalized.real();
    return pt.q * log_r + pt.p * ((md - 1) * log_r + s.log_renorm_deriv.real() + (1 / md - 1) * log_f) -
           pt.q / md * log_f;
}

/// Runs body(j) for j in [0, n) over the configured workers with a fixed interleaving.
template <class Body>
void for_samples(long n, unsigned workers, Body&& body) {
    const unsigned nw = std::max(1u, workers);
    if (nw == 1) {
        for (long j = 0; j < n; ++j) body(j);
        return;
    }
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < nw; ++w) {
        pool.emplace_back([&, w] {
            for (long j = w; j < n; j += nw) body(j);
        });
    }
    for (auto& th : pool) th.join();
}

inline void check_budget(long failures, long n, double budget) {
    if (static_cast<double>(failures) > budget * static_cast<double>(n)) {
        throw FailureBudgetExceeded(std::to_string(failures) + " of " + std::to_string(n) +
                                    " samples failed, above the failure budget");
    }
}

}  // namespace detail

/// Mixed moments E(|z|^q |f'(z)|^p / |f(z)|^q) at several points, sharing one driving path per sample.
inline std::vector<MomentEstimate> estimate_moments(const Kappa& kappa, const MomentPoint& pt,
                                                    const std::vector<std::complex<double>>& zs, long n,
                                                    const SimConfig& cfg = {}) {
    if (n < 100) throw std::invalid_argument("need at least 100 samples");
    if (!(cfg.dt > 0) || cfg.dt > cfg.horizon_cap) throw std::invalid_argument("need 0 < dt <= horizon cap");
    for (auto z : zs)
        if (!(std::abs(z) < 1)) throw std::invalid_argument("moment points must lie in the open unit disc");
    std::vector<std::vector<double>> values(zs.size(), std::vector<double>(n));
    std::vector<std::vector<char>> ok(zs.size(), std::vector<char>(n, 0));
    detail::for_samples(n, cfg.workers, [&](long j) {
        const DrivingPath path(kappa, cfg.dt, cfg.seed, static_cast<std::uint64_t>(j));
        for (std::size_t i = 0; i < zs.size(); ++i) {
            if (zs[i] == 0.0) {
                values[i][j] = 1.0;
                ok[i][j] = 1;
                continue;
            }
            try {
                const FlowSample s = evolve_reverse_flow(zs[i], path, cfg);
                values[i][j] = std::exp(detail::log_integrand(pt, zs[i], s));
                ok[i][j] = std::isfinite(values[i][j]) ? 1 : 0;
            } catch (const FlowError&) {
                ok[i][j] = 0;
            }
        }
    });
    std::vector<MomentEstimate> out;
    for (std::size_t i = 0; i < zs.size(); ++i) {
        const auto st = detail::stats(values[i], ok[i]);
        const long failures = n - st.n;
        detail::check_budget(failures, n, cfg.failure_budget);
        out.push_back({st.mean, st.stderr_, st.n, failures, kappa.value(), pt.p, pt.q, zs[i]});
    }
    return out;
}

inline MomentEstimate estimate_moment(const Kappa& kappa, const MomentPoint& pt, std::complex<double> z, long n,
                                      const SimConfig& cfg = {}) {
    return estimate_moments(kappa, pt, {z}, n, cfg).front();
}

struct BetaFit {
    std::vector<double> radii;
    std::vector<double> circle_means;
    std::vector<double> circle_stderrs;
    double slope;
    double slope_stderr;
    double intercept;
};

class InsufficientSignal : public std::runtime_error {
public:
    InsufficientSignal(const std::string& what, BetaFit fit) : std::runtime_error(what), fit(std::move(fit)) {}
    BetaFit fit;
};

/// Least-squares slope of log(circle mean) against -log(1 - r) for the m-fold map (m = 1 is the map
/// itself). Circle means use M uniform angles per sample path, so the stderr of each mean reflects the
/// correlation between angles.
inline BetaFit fit_beta(const Kappa& kappa, const MomentPoint& pt, const std::vector<double>& radii, int angles,
                        long n, const SimConfig& cfg = {}, double max_slope_stderr = 0.5, long m = 1) {
    if (m < 1) throw std::invalid_argument("fit supports m-fold maps with m >= 1");
    if (radii.size() < 4) throw std::invalid_argument("fit needs at least four radii");
    for (std::size_t i = 0; i < radii.size(); ++i) {
        if (!(radii[i] > 0 && radii[i] < 1)) throw std::invalid_argument("radii must lie in (0, 1)");
        if (i > 0 && !(radii[i] > radii[i - 1])) throw std::invalid_argument("radii must increase");
    }
    if (angles < 1 || n < 2) throw std::invalid_argument("fit needs angles >= 1 and n >= 2");
    const std::size_t nr = radii.size();
    std::vector<std::vector<double>> circle(nr, std::vector<double>(n));
    std::vector<std::vector<char>> ok(nr, std::vector<char>(n, 0));
    detail::for_samples(n, cfg.workers, [&](long j) {
        const DrivingPath path(kappa, cfg.dt, cfg.seed, static_cast<std::uint64_t>(j));
        std::vector<double> vals(angles);
        for (std::size_t i = 0; i < nr; ++i) {
            bool good = true;
            for (int a = 0; a < angles && good; ++a) {
                const auto z = std::polar(radii[i], 2 * std::numbers::pi * a / angles);
                try {
                    const auto w = m == 1 ? z : std::pow(z, static_cast<int>(m));
                    vals[a] = std::exp(detail::log_integrand_m_fold(pt, m, z, evolve_reverse_flow(w, path, cfg)));
                    good = std::isfinite(vals[a]);
                } catch (const FlowError&) {
                    good = false;
                }
            }
            if (good) {
                circle[i][j] = detail::pairwise_sum(vals.data(), vals.size()) / angles;
                ok[i][j] = 1;
            }
        }
    });
    BetaFit fit{radii, {}, {}, 0, 0, 0};
    std::vector<double> x(nr), y(nr), sy(nr);
    for (std::size_t i = 0; i < nr; ++i) {
        const auto st = detail::stats(circle[i], ok[i]);
        detail::check_budget(n - st.n, n, cfg.failure_budget);
        fit.circle_means.push_back(st.mean);
        fit.circle_stderrs.push_back(st.stderr_);
        x[i] = -std::log(1 - radii[i]);
        y[i] = std::log(st.mean);
        sy[i] = st.stderr_ / st.mean;
    }
    double xm = 0, ym = 0;
    for (std::size_t i = 0; i < nr; ++i) {
        xm += x[i] / nr;
        ym += y[i] / nr;
    }
    double sxx = 0, sxy = 0, var = 0;
    for (std::size_t i = 0; i < nr; ++i) {
        sxx += (x[i] - xm) * (x[i] - xm);
        sxy += (x[i] - xm) * (y[i] - ym);
    }
    fit.slope = sxy / sxx;
    fit.intercept = ym - fit.slope * xm;
    for (std::size_t i = 0; i < nr; ++i) var += (x[i] - xm) * (x[i] - xm) * sy[i] * sy[i];
    fit.slope_stderr = std::sqrt(var) / sxx;
    if (!(fit.slope_stderr <= max_slope_stderr)) {
        throw InsufficientSignal("slope stderr exceeds the requested threshold", fit);
    }
    return fit;
}

struct RedCheck {
    std::complex<double> z;
    double exact;
    MomentEstimate estimate;
    double z_score;
    bool pass;
};

struct RedValidation {
    double kappa;
    double gamma;
    double p, q;
    std::vector<RedCheck> rows;
    bool all_pass() const {
        return std::all_of(rows.begin(), rows.end(), [](const RedCheck& r) { return r.pass; });
    }
};

/// (1 - |z|^2)^{-kappa gamma^2 / 2} |1 - z|^{2 gamma}, the moment on the red parabola.
inline double red_exact_moment(double kappa, double gamma, std::complex<double> z) {
    return std::pow(1 - std::norm(z), -kappa * gamma * gamma / 2) * std::pow(std::abs(1.0 - z), 2 * gamma);
}

inline RedValidation validate_red_parabola(const Kappa& kappa, double gamma, const std::vector<std::complex<double>>& zs,
                                           long n, const SimConfig& cfg = {}, double sigmas = 4.0) {
    const auto rp = red_point(kappa, gamma);
    const MomentPoint pt(rp.p, rp.q);
    const auto est = estimate_moments(kappa, pt, zs, n, cfg);
    RedValidation out{kappa.value(), gamma, rp.p, rp.q, {}};
    for (std::size_t i = 0; i < zs.size(); ++i) {
        const double exact = red_exact_moment(kappa.value(), gamma, zs[i]);
        const double diff = std::abs(est[i].mean - exact);
        const double zscore = est[i].stderr_ > 0 ? diff / est[i].stderr_ : (diff == 0 ? 0.0 : INFINITY);
        out.rows.push_back({zs[i], exact, est[i], zscore, diff <= sigmas * est[i].stderr_});
    }
    return out;
}

}  // namespace wpsle
