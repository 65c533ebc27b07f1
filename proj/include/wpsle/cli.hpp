#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "csv.hpp"
#include "operator_lab.hpp"
#include "phase_geometry.hpp"
#include "sle_monte_carlo.hpp"
#include "special_functions.hpp"
#include "spectrum_core.hpp"

namespace wpsle::cli {

enum ExitCode : int { Ok = 0, ValidationFailed = 1, BadInput = 2, ConstructionError = 3, IoFailure = 4 };

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    double kappa = 2.0;
    double p = 1.25;
    double q = 1.5;
    long m = 1;
    double gamma = 0.5;
    std::uint64_t seed = 42;
    double dt = 1e-3;
    double horizon_cap = 30.0;
    double flow_tol = 1e-6;
    double failure_budget = 1e-3;
    long samples = 4000;
    int angles = 64;
    int grid = 512;
    unsigned workers = 1;
    std::vector<std::string> z{"0.5:0"};
    std::vector<double> radii{0.75, 0.875, 0.9375, 0.96875, 0.984375, 0.9921875};
    std::vector<double> window{-5, 5, -10, 6};
    std::string overlay = "phase";
    bool feasibility = false;
    double max_slope_stderr = 0.5;
    std::string out;
};

/// One "# key=value" line per setting, printed at the top of every report.
inline void print_header(std::ostream& os, const std::string& command, const RunConfig& c) {
    auto join = [](const auto& xs) {
        std::string s;
        for (const auto& x : xs) {
            if (!s.empty()) s += ',';
            if constexpr (std::is_same_v<std::decay_t<decltype(x)>, std::string>) {
                s += x;
            } else {
                s += csv::num(x);
            }
        }
        return s;
    };
    os << "# wpsle " << command << '\n'
       << "# kappa=" << csv::num(c.kappa) << "\n# p=" << csv::num(c.p) << "\n# q=" << csv::num(c.q)
       << "\n# m=" << c.m << "\n# gamma=" << csv::num(c.gamma) << "\n# seed=" << c.seed
       << "\n# dt=" << csv::num(c.dt) << "\n# horizon_cap=" << csv::num(c.horizon_cap)
       << "\n# flow_tol=" << csv::num(c.flow_tol) << "\n# failure_budget=" << csv::num(c.failure_budget)
       << "\n# samples=" << c.samples << "\n# angles=" << c.angles << "\n# grid=" << c.grid
       << "\n# workers=" << c.workers << "\n# z=" << join(c.z) << "\n# radii=" << join(c.radii)
       << "\n# window=" << join(c.window) << "\n# overlay=" << c.overlay
       << "\n# max_slope_stderr=" << csv::num(c.max_slope_stderr) << "\n# out=" << c.out << '\n';
}

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

inline std::complex<double> parse_point(const std::string& s) {
    const auto colon = s.find(':');
    try {
        std::size_t used = 0;
        const double re = std::stod(s.substr(0, colon), &used);
        double im = 0;
        if (colon != std::string::npos) im = std::stod(s.substr(colon + 1));
        return {re, im};
    } catch (const std::logic_error&) {
        throw ConfigError("disk point '" + s + "' is not of the form re:im");
    }
}

inline std::vector<std::complex<double>> points(const RunConfig& c) {
    std::vector<std::complex<double>> out;
    for (const auto& s : c.z) {
        const auto z = parse_point(s);
        require(std::abs(z) < 1, "disk point '" + s + "' must satisfy |z| < 1");
        out.push_back(z);
    }
    require(!out.empty(), "at least one disk point is required");
    return out;
}

inline SimConfig sim_config(const RunConfig& c) {
    require(c.dt > 0 && std::isfinite(c.dt), "dt must be positive");
    require(c.horizon_cap > 0, "horizon_cap must be positive");
    require(c.dt <= c.horizon_cap, "dt must not exceed the horizon cap");
    require(c.flow_tol > 0, "flow_tol must be positive");
    require(c.failure_budget >= 0 && c.failure_budget <= 1, "failure_budget must lie in [0, 1]");
    require(c.workers >= 1, "workers must be at least 1");
    SimConfig s;
    s.dt = c.dt;
    s.horizon_cap = c.horizon_cap;
    s.tol = c.flow_tol;
    s.failure_budget = c.failure_budget;
    s.seed = c.seed;
    s.workers = c.workers;
    return s;
}

inline std::ostream& open_or(std::ofstream& file, const std::string& path, std::ostream& fallback) {
    if (path.empty()) return fallback;
    file.open(path, std::ios::binary);
    if (!file) throw IoError("cannot open '" + path + "' for writing");
    return file;
}

inline void close_checked(std::ofstream& file, const std::string& path) {
    if (!file.is_open()) return;
    file.close();
    if (!file) throw IoError("failed writing '" + path + "'");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// spectrum / phase

inline csv::Table spectrum_table(const RunConfig& c, bool with_m) {
    const Kappa k(c.kappa);
    const MomentPoint pt(c.p, c.q);
    const auto roots = gamma_roots(k, pt);
    const auto b = spectrum_functions(k, pt);
    const auto phase = classify_conjecture(k, pt);
    const double beta = conjectured_beta(k, pt);
    std::string coinciding;
    const std::array<std::pair<PhaseRegion, std::optional<double>>, 4> by_phase{
        {{PhaseRegion::Tip, b.beta_tip}, {PhaseRegion::Bulk, b.beta_0}, {PhaseRegion::Linear, b.beta_lin},
         {PhaseRegion::One, b.beta_1}}};
    for (const auto& [ph, v] : by_phase) {
        if (v && std::abs(*v - beta) <= 1e-10 * std::max(1.0, std::abs(beta))) {
            if (!coinciding.empty()) coinciding += '|';
            coinciding += to_string(ph);
        }
    }
    csv::Table t;
    t.header = {"kappa", "p", "q", "gamma_0", "gamma_0_plus", "gamma_1_minus", "gamma_1", "gamma_lin",
                "beta_0", "beta_tip", "beta_1", "beta_lin", "beta", "phase", "coinciding", "validity"};
    csv::Row row{csv::num(c.kappa),        csv::num(c.p),           csv::num(c.q),
                 csv::num(roots.gamma_0),  csv::num(roots.gamma_0_plus), csv::num(roots.gamma_1_minus),
                 csv::num(roots.gamma_1),  csv::num(roots.gamma_lin), csv::num(b.beta_0),
                 csv::num(b.beta_tip),     csv::num(b.beta_1),      csv::num(b.beta_lin),
                 csv::num(beta),           std::string(to_string(phase)), coinciding,
                 std::string(to_string(classify_validity(k, pt)))};
    if (with_m) {
        const auto qm = MFoldTransform(c.m).forward(pt).q;
        t.header.insert(t.header.end(), {"m", "q_m", "beta_m"});
        row.insert(row.end(), {csv::num(c.m), csv::num(qm), csv::num(m_fold_beta(k, c.m, pt))});
    }
    t.rows.push_back(std::move(row));
    return t;
}

inline csv::Table phase_table(const RunConfig& c) {
    const Kappa k(c.kappa);
    const MomentPoint pt(c.p, c.q);
    auto flag = [](bool b) { return std::string(b ? "1" : "0"); };
    csv::Table t;
    t.header = {"kappa", "p", "q", "phase", "validity", "proof_zone", "eie", "in_sector_S", "in_green_domain",
                "inside_red"};
    t.rows.push_back({csv::num(c.kappa), csv::num(c.p), csv::num(c.q),
                      std::string(to_string(classify_conjecture(k, pt))),
                      std::string(to_string(classify_validity(k, pt))), std::string(to_string(proof_zone(k, pt))),
                      std::string(to_string(partition_EIE(k, pt))), flag(in_sector_S(k, pt)),
                      flag(in_green_domain(k, pt)), flag(inside_red(k, pt))});
    return t;
}

// ---------------------------------------------------------------------------
// diagram

struct DiagramSpec {
    double kappa;
    long m;
    double p_lo, p_hi, q_lo, q_hi;
    int resolution;
    bool validity;
};

inline DiagramSpec diagram_spec(const RunConfig& c) {
    detail::require(c.window.size() == 4, "window needs four values p_lo,p_hi,q_lo,q_hi");
    const auto& w = c.window;
    detail::require(std::isfinite(w[0] + w[1] + w[2] + w[3]), "window bounds must be finite");
    detail::require(w[0] < w[1] && w[2] < w[3], "window is empty");
    detail::require(c.grid >= 1 && c.grid <= 4096, "diagram resolution must lie in [1, 4096]");
    detail::require(c.overlay == "phase" || c.overlay == "validity", "overlay must be 'phase' or 'validity'");
    detail::require(c.m != 0, "m must be non-zero");
    return {c.kappa, c.m, w[0], w[1], w[2], w[3], c.grid, c.overlay == "validity"};
}

/// Samples of the diagram: raster cells, transition curves, lines and landmarks, all in the
/// (p, q) plane of the m-fold map (points of the base plane are pulled back by the m-fold relation).
inline csv::Table diagram_table(const DiagramSpec& d) {
    const Kappa k(d.kappa);
    const MFoldTransform tm(d.m);
    auto in_window = [&](double p, double q) { return p >= d.p_lo && p <= d.p_hi && q >= d.q_lo && q <= d.q_hi; };
    csv::Table t;
    t.header = {"kind", "label", "p", "q", "gamma"};
    const int n = d.resolution;
    for (int j = 0; j < n; ++j) {
        const double q = d.q_lo + (j + 0.5) * (d.q_hi - d.q_lo) / n;
        for (int i = 0; i < n; ++i) {
            const double p = d.p_lo + (i + 0.5) * (d.p_hi - d.p_lo) / n;
            const MomentPoint base = tm.forward(MomentPoint(p, q));
            std::string label;
            try {
                label = d.validity ? std::string(to_string(classify_validity(k, base)))
                                   : std::string(to_string(classify_conjecture(k, base)));
            } catch (const std::domain_error&) {
                label = "Unclassified";
            }
            t.rows.push_back({"raster", label, csv::num(p), csv::num(q), ""});
        }
    }
    for (const auto& s : sample_curves(k, -4.0, 4.0, 801)) {
        const auto pt = tm.inverse(MomentPoint(s.p, s.q));
        if (in_window(pt.p, pt.q))
            t.rows.push_back({"curve", std::string(to_string(s.curve)), csv::num(pt.p), csv::num(pt.q), csv::num(s.gamma)});
    }
    const auto lines = transition_lines(k);
    for (const auto& line : {lines.d_prime_0, lines.d_0, lines.d_1}) {
        if (line.kind == LineKind::Vertical) {
            for (double q : {d.q_lo, d.q_hi}) t.rows.push_back({"line", line.name, csv::num(line.offset), csv::num(q), ""});
        } else {
            const double off = static_cast<double>(d.m) * line.offset;
            for (double p : {d.p_lo, d.p_hi}) t.rows.push_back({"line", line.name, csv::num(p), csv::num(p + off), ""});
        }
    }
    const auto lm = landmarks(k);
    const std::vector<std::pair<std::string, std::pair<double, double>>> marks{
        {"P0", {lm.p0, lm.q0}},           {"P1", {lm.p1, lm.q1}},   {"Q0", lm.q_prime_0_point},
        {"Q0'", lm.q0_prime_point},       {"T0", lm.t0_point},      {"T1", lm.t1_point}};
    for (const auto& [name, xy] : marks) {
        const auto pt = tm.inverse(MomentPoint(xy.first, xy.second));
        if (in_window(pt.p, pt.q)) t.rows.push_back({"landmark", name, csv::num(pt.p), csv::num(pt.q), ""});
    }
    return t;
}

inline std::string region_color(const std::string& label) {
    static const std::map<std::string, std::string> colors{
        {"Tip", "#f4cccc"},           {"Bulk", "#d9ead3"},          {"Linear", "#cfe2f3"},
        {"One", "#fff2cc"},           {"ProvedDHLZ_I", "#b6d7a8"},  {"ProvedDHLZ_II", "#a2c4c9"},
        {"ProvedDHLZ_III", "#9fc5e8"}, {"ProvedDHLZ_IV", "#b4a7d6"}, {"ProvedNew", "#ffe599"},
        {"UpperBoundOnly", "#f9cb9c"}, {"LowerBoundOnly", "#ea9999"}, {"Unknown", "#eeeeee"}};
    const auto it = colors.find(label);
    return it == colors.end() ? "#ffffff" : it->second;
}

inline std::string curve_color(const std::string& label) {
    if (label == "red") return "#cc0000";
    if (label == "green") return "#38761d";
    if (label == "blue_quartic") return "#1155cc";
    return "#444444";
}

inline void write_svg(std::ostream& os, const DiagramSpec& d, const csv::Table& t) {
    const double size = 800, margin = 40;
    auto x = [&](double p) { return margin + (p - d.p_lo) / (d.p_hi - d.p_lo) * size; };
    auto y = [&](double q) { return margin + (d.q_hi - q) / (d.q_hi - d.q_lo) * size; };
    auto f = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", v);
        return std::string(buf);
    };
    const double cw = size / d.resolution;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << size + 2 * margin << "\" height=\""
       << size + 2 * margin << "\">\n"
       << "<defs><clipPath id=\"plot\"><rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << size
       << "\" height=\"" << size << "\"/></clipPath></defs>\n<g clip-path=\"url(#plot)\">\n";
    std::map<std::string, std::vector<std::pair<double, double>>> paths;
    std::vector<std::string> order;
    for (const auto& r : t.rows) {
        const double p = std::stod(r[2]), q = std::stod(r[3]);
        if (r[0] == "raster") {
            os << "<rect x=\"" << f(x(p) - cw / 2) << "\" y=\"" << f(y(q) - cw / 2) << "\" width=\"" << f(cw)
               << "\" height=\"" << f(cw) << "\" fill=\"" << region_color(r[1]) << "\"/>\n";
        } else if (r[0] == "curve" || r[0] == "line") {
            const std::string key = r[0] + ":" + r[1];
            if (!paths.count(key)) order.push_back(key);
            paths[key].emplace_back(p, q);
        }
    }
    for (const auto& key : order) {
        const std::string label = key.substr(key.find(':') + 1);
        const bool is_line = key.rfind("line:", 0) == 0;
        os << "<path fill=\"none\" stroke=\"" << curve_color(label) << "\" stroke-width=\"" << (is_line ? 1 : 2)
           << "\"" << (is_line ? " stroke-dasharray=\"6,4\"" : "") << " d=\"";
        const auto& pts = paths[key];
        for (std::size_t i = 0; i < pts.size(); ++i) {
            os << (i == 0 ? "M" : " L") << f(x(pts[i].first)) << ',' << f(y(pts[i].second));
        }
        os << "\"/>\n";
    }
    os << "</g>\n";
    for (const auto& r : t.rows) {
        if (r[0] != "landmark") continue;
        const double px = x(std::stod(r[2])), py = y(std::stod(r[3]));
        os << "<circle cx=\"" << f(px) << "\" cy=\"" << f(py) << "\" r=\"4\" fill=\"black\"/>\n"
           << "<text x=\"" << f(px + 6) << "\" y=\"" << f(py - 6) << "\" font-size=\"14\">" << r[1] << "</text>\n";
    }
    os << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << size << "\" height=\"" << size
       << "\" fill=\"none\" stroke=\"black\"/>\n"
       << "<text x=\"" << margin << "\" y=\"" << margin - 12 << "\" font-size=\"14\">kappa=" << csv::num(d.kappa)
       << (d.m != 1 ? " m=" + std::to_string(d.m) : std::string()) << " p in [" << csv::num(d.p_lo) << ", "
       << csv::num(d.p_hi) << "] q in [" << csv::num(d.q_lo) << ", " << csv::num(d.q_hi) << "]</text>\n</svg>\n";
}

// ---------------------------------------------------------------------------
// testfn / verify

inline csv::Table testfn_table(const RunConfig& c, const TestProfile& prof) {
    detail::require(c.grid >= 2, "grid must be at least 2");
    csv::Table t;
    t.header = {"u", "g0", "g0_u", "g0_uu", "ode_residual"};
    for (int i = 0; i < c.grid; ++i) {
        const double u = 4.0 * i / (c.grid - 1);
        const auto g = eval_g0(prof, u);
        t.rows.push_back({csv::num(u), csv::num(g.value), csv::num(g.du), csv::num(g.d2u),
                          csv::num(g0_ode_residual(prof, u))});
    }
    return t;
}

inline csv::Table sign_table(const SignReport& r) {
    csv::Table t;
    t.header = {"r", "theta", "value"};
    for (const auto& s : r.samples) t.rows.push_back({csv::num(s.r), csv::num(s.theta), csv::num(s.value)});
    return t;
}

// ---------------------------------------------------------------------------
// Monte Carlo

inline csv::Table moments_table(const std::vector<MomentEstimate>& es) {
    csv::Table t;
    t.header = {"kappa", "p", "q", "z_re", "z_im", "n", "mean", "stderr"};
    for (const auto& e : es) {
        t.rows.push_back({csv::num(e.kappa), csv::num(e.p), csv::num(e.q), csv::num(e.z.real()), csv::num(e.z.imag()),
                          csv::num(e.n), csv::num(e.mean), csv::num(e.stderr_)});
    }
    return t;
}

inline csv::Table fit_table(const RunConfig& c, const BetaFit& f) {
    csv::Table t;
    t.header = {"kind", "kappa", "p", "q", "m", "radius", "value", "stderr", "intercept"};
    for (std::size_t i = 0; i < f.radii.size(); ++i) {
        t.rows.push_back({"radius", csv::num(c.kappa), csv::num(c.p), csv::num(c.q), csv::num(c.m),
                          csv::num(f.radii[i]), csv::num(f.circle_means[i]), csv::num(f.circle_stderrs[i]), ""});
    }
    t.rows.push_back({"summary", csv::num(c.kappa), csv::num(c.p), csv::num(c.q), csv::num(c.m), "",
                      csv::num(f.slope), csv::num(f.slope_stderr), csv::num(f.intercept)});
    return t;
}

inline csv::Table red_table(const RedValidation& v) {
    csv::Table t;
    t.header = {"kappa", "gamma", "p", "q", "z_re", "z_im", "exact", "n", "mean", "stderr", "z_score", "pass"};
    for (const auto& r : v.rows) {
        t.rows.push_back({csv::num(v.kappa), csv::num(v.gamma), csv::num(v.p), csv::num(v.q), csv::num(r.z.real()),
                          csv::num(r.z.imag()), csv::num(r.exact), csv::num(r.estimate.n), csv::num(r.estimate.mean),
                          csv::num(r.estimate.stderr_), csv::num(r.z_score), r.pass ? "1" : "0"});
    }
    return t;
}

// ---------------------------------------------------------------------------

inline int dispatch(const std::string& cmd, const RunConfig& c, bool m_given, std::ostream& out) {
    std::ofstream file;
    const Kappa kappa(c.kappa);
    if (cmd == "spectrum" || cmd == "phase") {
        const auto t = cmd == "spectrum" ? spectrum_table(c, m_given) : phase_table(c);
        print_header(out, cmd, c);
        csv::write(detail::open_or(file, c.out, out), t);
        detail::close_checked(file, c.out);
        return Ok;
    }
    if (cmd == "diagram") {
        const auto spec = diagram_spec(c);
        detail::require(!c.out.empty(), "diagram needs --out (writes <out>.svg and <out>.csv)");
        const auto t = diagram_table(spec);
        print_header(out, cmd, c);
        std::ofstream svg;
        write_svg(detail::open_or(svg, c.out + ".svg", out), spec, t);
        detail::close_checked(svg, c.out + ".svg");
        csv::write(detail::open_or(file, c.out + ".csv", out), t);
        detail::close_checked(file, c.out + ".csv");
        out << "# wrote " << c.out << ".svg and " << c.out << ".csv\n";
        return Ok;
    }
    if (cmd == "testfn") {
        const auto prof = build_test_profile(kappa, MomentPoint(c.p, c.q), c.gamma);
        const auto t = testfn_table(c, prof);
        print_header(out, cmd, c);
        std::istringstream lines(serialize(prof));
        for (std::string line; std::getline(lines, line);) out << "# " << line << '\n';
        out << "# positivity=" << to_string(positivity_certificate(prof)) << "\n# exponent=" << csv::num(exponent_of(prof))
            << '\n';
        csv::write(detail::open_or(file, c.out, out), t);
        detail::close_checked(file, c.out);
        return Ok;
    }
    if (cmd == "verify") {
        const MomentPoint pt(c.p, c.q);
        if (c.feasibility) {
            const auto f = supersolution_feasibility(kappa, pt);
            print_header(out, cmd, c);
            out << "feasibility,lo,hi\n"
                << (f.feasible ? "Feasible" : "Infeasible") << ',' << csv::num(f.lo) << ',' << csv::num(f.hi) << '\n';
            return Ok;
        }
        detail::require(c.grid >= 4, "grid must be at least 4");
        detail::require(c.workers >= 1, "workers must be at least 1");
        SubSolutionOptions opt;
        opt.grid.nr = opt.grid.ntheta = c.grid;
        opt.grid.workers = c.workers;
        opt.grid.keep_samples = !c.out.empty();
        const auto sol = choose_subsolution(kappa, pt, opt);
        print_header(out, cmd, c);
        std::ostringstream summary;
        summary << "# zone=" << to_string(sol.zone) << "\n# gamma=" << csv::num(sol.gamma)
                << "\n# epsilon=" << csv::num(sol.epsilon) << "\n# delta=" << csv::num(sol.delta)
                << "\n# exponent=" << csv::num(exponent_of(sol.function()))
                << "\n# verdict=" << to_string(sol.report.verdict) << "\n# min_value=" << csv::num(sol.report.min_value)
                << "\n# max_value=" << csv::num(sol.report.max_value) << "\n# worst_r=" << csv::num(sol.report.worst.r)
                << "\n# worst_theta=" << csv::num(sol.report.worst.theta) << '\n';
        out << summary.str();
        if (!c.out.empty()) {
            auto& os = detail::open_or(file, c.out, out);
            print_header(os, cmd, c);
            os << summary.str();
            csv::write(os, sign_table(sol.report));
            detail::close_checked(file, c.out);
        }
        return sol.report.verdict == SignVerdict::StrictlyNegative ? Ok : ValidationFailed;
    }
    if (cmd == "simulate") {
        const auto sim = detail::sim_config(c);
        const auto zs = detail::points(c);
        detail::require(c.samples >= 100, "samples must be at least 100");
        const auto t = moments_table(estimate_moments(kappa, MomentPoint(c.p, c.q), zs, c.samples, sim));
        print_header(out, cmd, c);
        csv::write(detail::open_or(file, c.out, out), t);
        detail::close_checked(file, c.out);
        return Ok;
    }
    if (cmd == "fit-beta") {
        const auto sim = detail::sim_config(c);
        detail::require(c.samples >= 2, "samples must be at least 2");
        detail::require(c.angles >= 1, "angles must be at least 1");
        detail::require(c.m >= 1, "fit-beta supports m >= 1");
        BetaFit fit;
        int code = Ok;
        try {
            fit = fit_beta(kappa, MomentPoint(c.p, c.q), c.radii, c.angles, c.samples, sim, c.max_slope_stderr, c.m);
        } catch (const InsufficientSignal& e) {
            fit = e.fit;
            code = ValidationFailed;
        }
        print_header(out, cmd, c);
        if (code != Ok) out << "# insufficient signal: slope stderr above max_slope_stderr\n";
        csv::write(detail::open_or(file, c.out, out), fit_table(c, fit));
        detail::close_checked(file, c.out);
        return code;
    }
    if (cmd == "validate-red") {
        const auto sim = detail::sim_config(c);
        detail::require(c.samples >= 100, "samples must be at least 100");
        const auto v = validate_red_parabola(kappa, c.gamma, detail::points(c), c.samples, sim);
        print_header(out, cmd, c);
        csv::write(detail::open_or(file, c.out, out), red_table(v));
        detail::close_checked(file, c.out);
        return v.all_pass() ? Ok : ValidationFailed;
    }
    throw ConfigError("unknown command '" + cmd + "'");
}

inline const std::vector<std::string>& default_red_points() {
    static const std::vector<std::string> pts{"0.5:0",  "0.15:0.25980762113533157", "-0.4:0",
                                              "0:0.6",  "-0.3:-0.45",               "0.2:-0.1"};
    return pts;
}

/// Runs the command line `args` (without the program name). Reports go to `out`, diagnostics to `err`.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunConfig c;
    CLI::App app{"Generalized integral means spectrum laboratory for whole-plane SLE", "wpsle"};
    app.set_config("--config", "", "key=value configuration file ('#' starts a comment)");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1, 1);
    app.add_option("--kappa", c.kappa, "SLE parameter kappa > 0")->capture_default_str();
    app.add_option("--p", c.p, "moment exponent p")->capture_default_str();
    app.add_option("--q", c.q, "moment exponent q")->capture_default_str();
    app.add_option("--m", c.m, "m-fold symmetry order")->capture_default_str();
    app.add_option("--gamma", c.gamma, "exponent gamma (testfn, validate-red)")->capture_default_str();
    app.add_option("--seed", c.seed, "master seed")->envname("WPSLE_SEED")->capture_default_str();
    app.add_option("--dt", c.dt, "base time step of the flow")->capture_default_str();
    app.add_option("--horizon-cap,--horizon_cap", c.horizon_cap, "largest flow horizon T")->capture_default_str();
    app.add_option("--flow-tol,--flow_tol", c.flow_tol, "stabilisation tolerance of the flow")->capture_default_str();
    app.add_option("--failure-budget,--failure_budget", c.failure_budget, "tolerated fraction of failed samples")
        ->capture_default_str();
    app.add_option("--samples", c.samples, "Monte-Carlo sample count")->capture_default_str();
    app.add_option("--angles", c.angles, "angles per circle in fit-beta")->capture_default_str();
    app.add_option("--grid", c.grid, "grid size (sign grid, diagram raster, testfn table)")->capture_default_str();
    app.add_option("--workers", c.workers, "worker threads")->capture_default_str();
    auto* zopt = app.add_option("--z", c.z, "disk points re:im, comma separated")->delimiter(',');
    app.add_option("--radii", c.radii, "fit radii, comma separated")->delimiter(',');
    app.add_option("--window", c.window, "diagram window p_lo,p_hi,q_lo,q_hi")->delimiter(',')->expected(4);
    app.add_option("--overlay", c.overlay, "diagram raster: phase or validity")->capture_default_str();
    app.add_flag("--feasibility", c.feasibility, "verify: report super-solution feasibility only");
    app.add_option("--max-slope-stderr,--max_slope_stderr", c.max_slope_stderr, "fit-beta signal threshold")
        ->capture_default_str();
    app.add_option("--out", c.out, "output path");
    const std::vector<std::pair<std::string, std::string>> commands{
        {"spectrum", "gamma roots, spectrum functions and phase at (kappa, p, q)"},
        {"phase", "phase, validity status and proof zone at (kappa, p, q)"},
        {"diagram", "phase diagram as SVG plus CSV samples"},
        {"testfn", "hypergeometric test profile at (kappa, p, q, gamma)"},
        {"verify", "construct a sub-solution and certify its sign"},
        {"simulate", "Monte-Carlo moments at disk points"},
        {"fit-beta", "fit the integral means exponent from circle averages"},
        {"validate-red", "compare Monte-Carlo moments with the exact solution on the red parabola"}};
    for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

    std::vector<std::string> storage{"wpsle"};
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : storage) argv.push_back(s.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return Ok;
    } catch (const CLI::ParseError& e) {
        err << "wpsle: " << e.what() << '\n';
        return BadInput;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "validate-red" && zopt->count() == 0) c.z = default_red_points();
    try {
        return dispatch(cmd, c, app.count("--m") > 0, out);
    } catch (const IoError& e) {
        err << "wpsle: " << e.what() << '\n';
        return IoFailure;
    } catch (const ConstructionFailed& e) {
        err << "wpsle: construction failed: " << e.what() << '\n';
        return ConstructionError;
    } catch (const UnsupportedZone& e) {
        err << "wpsle: unsupported zone: " << e.what() << '\n';
        return BadInput;
    } catch (const std::invalid_argument& e) {
        err << "wpsle: invalid input: " << e.what() << '\n';
        return BadInput;
    } catch (const std::domain_error& e) {
        err << "wpsle: invalid input: " << e.what() << '\n';
        return BadInput;
    } catch (const std::exception& e) {
        err << "wpsle: " << e.what() << '\n';
        return ValidationFailed;
    }
}

}  // namespace wpsle::cli
