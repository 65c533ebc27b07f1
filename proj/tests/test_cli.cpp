#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "wpsle/cli.hpp"

using namespace wpsle;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;

    csv::Table table() const {
        std::istringstream is(out);
        return csv::read(is);
    }
    std::string header_value(const std::string& key) const {
        const std::string tag = "# " + key + "=";
        std::istringstream is(out);
        for (std::string line; std::getline(is, line);)
            if (line.rfind(tag, 0) == 0) return line.substr(tag.size());
        return "<missing>";
    }
};

Result call(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string cell(const csv::Table& t, std::size_t row, const std::string& col) {
    const auto c = t.column(col);
    if (c >= t.header.size() || row >= t.rows.size()) return "<missing>";
    return t.rows[row][c];
}

double num(const csv::Table& t, std::size_t row, const std::string& col) { return std::stod(cell(t, row, col)); }

std::string body(const std::string& out) {
    std::istringstream is(out);
    std::string s;
    for (std::string line; std::getline(is, line);)
        if (line.empty() || line.front() != '#') s += line + "\n";
    return s;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "wpsle_cli_test";
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

TEST(CliSpectrum, RedPointValues) {
    const auto r = call({"spectrum", "--kappa", "2", "--p", "1.25", "--q", "1.5"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto t = r.table();
    EXPECT_NEAR(num(t, 0, "beta_0"), 0.25, 1e-12);
    EXPECT_NEAR(num(t, 0, "beta_1"), 0.25, 1e-12);
    EXPECT_EQ(cell(t, 0, "coinciding"), "Bulk|One");
    EXPECT_EQ(cell(t, 0, "validity"), "ProvedDHLZ_I");
}

TEST(CliSpectrum, LinearPhase) {
    const auto t = call({"spectrum", "--kappa", "2", "--p", "2", "--q", "3"}).table();
    EXPECT_NEAR(num(t, 0, "beta_lin"), 0.875, 1e-12);
    EXPECT_EQ(cell(t, 0, "phase"), "Linear");
    EXPECT_EQ(cell(t, 0, "gamma_1"), "");
}

TEST(CliSpectrum, MFoldOnTheDiagonal) {
    const auto t = call({"spectrum", "--p", "3", "--q", "3", "--m", "5"}).table();
    EXPECT_NEAR(num(t, 0, "beta_m"), 2.0, 1e-12);
    const auto plain = call({"spectrum", "--p", "3", "--q", "3"}).table();
    EXPECT_EQ(plain.column("beta_m"), plain.header.size());
}

TEST(CliSpectrum, ExitCodes) {
    const auto bad = call({"spectrum", "--kappa", "-1"});
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.err.find("kappa"), std::string::npos);
    EXPECT_EQ(call({"spectrum", "--kappa", "abc"}).code, 2);
    EXPECT_EQ(call({"spectrum", "--bogus", "1"}).code, 2);
    EXPECT_EQ(call({"spectrum", "--m", "0", "--p", "1", "--q", "1"}).code, 2);
    EXPECT_EQ(call({}).code, 2);
    EXPECT_EQ(call({"--help"}).code, 0);
}

TEST(CliSpectrum, CsvRoundTripsExactly) {
    const auto t = call({"spectrum", "--kappa", "6", "--p", "-0.7", "--q", "0.3"}).table();
    const Kappa k(6.0);
    const MomentPoint pt(-0.7, 0.3);
    const auto roots = gamma_roots(k, pt);
    const auto b = spectrum_functions(k, pt);
    EXPECT_EQ(num(t, 0, "gamma_lin"), roots.gamma_lin);
    EXPECT_EQ(num(t, 0, "beta_lin"), b.beta_lin);
    if (roots.gamma_0) EXPECT_EQ(num(t, 0, "gamma_0"), *roots.gamma_0);
    if (b.beta_0) EXPECT_EQ(num(t, 0, "beta_0"), *b.beta_0);
    for (const auto& v : t.rows[0]) {
        char* end = nullptr;
        const double x = std::strtod(v.c_str(), &end);
        if (end != v.c_str() && *end == '\0') EXPECT_EQ(csv::num(x), v);
    }
}

TEST(CliPhase, ClassifiesAndRejects) {
    const auto r = call({"phase", "--kappa", "2", "--p", "-3", "--q", "10"});
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(cell(r.table(), 0, "phase"), "Tip");
    EXPECT_EQ(cell(call({"phase", "--p", "-1.5", "--q", "-6"}).table(), 0, "proof_zone"), "ZoneI");
    EXPECT_EQ(call({"phase", "--kappa", "0"}).code, 2);
}

TEST(CliConfig, FileValuesAndOverrides) {
    const auto path = scratch("run.cfg");
    {
        std::ofstream os(path);
        os << "# spectrum query\nkappa=4\np=0.5   # trailing comment\nq=0.25\n";
    }
    const auto r = call({"spectrum", "--config", path.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.header_value("kappa"), "4");
    EXPECT_EQ(r.header_value("p"), "0.5");
    const auto o = call({"spectrum", "--config", path.string(), "--p", "1"});
    EXPECT_EQ(o.header_value("p"), "1");
    EXPECT_EQ(o.header_value("kappa"), "4");
    {
        std::ofstream os(path);
        os << "kapa=4\n";
    }
    EXPECT_EQ(call({"spectrum", "--config", path.string()}).code, 2);
    EXPECT_EQ(call({"spectrum", "--config", scratch("missing.cfg").string()}).code, 2);
}

TEST(CliConfig, HeaderListsEveryDefault) {
    const auto r = call({"phase"});
    for (const char* key : {"kappa", "p", "q", "m", "gamma", "seed", "dt", "horizon_cap", "flow_tol", "failure_budget",
                            "samples", "angles", "grid", "workers", "z", "radii", "window", "overlay",
                            "max_slope_stderr", "out"}) {
        EXPECT_NE(r.header_value(key), "<missing>") << key;
    }
    EXPECT_EQ(r.header_value("seed"), "42");
}

TEST(CliConfig, SeedEnvironmentOverride) {
    ::setenv("WPSLE_SEED", "777", 1);
    const auto env = call({"phase"});
    const auto flag = call({"phase", "--seed", "5"});
    ::unsetenv("WPSLE_SEED");
    EXPECT_EQ(env.header_value("seed"), "777");
    EXPECT_EQ(flag.header_value("seed"), "5");
}

TEST(CliDiagram, LandmarksAndFiles) {
    const auto base = scratch("diag").string();
    const auto r = call({"diagram", "--kappa", "2", "--grid", "8", "--out", base});
    ASSERT_EQ(r.code, 0) << r.err;
    std::ifstream is(base + ".csv");
    const auto t = csv::read(is);
    bool found = false;
    for (const auto& row : t.rows) {
        if (row[0] == "landmark" && row[1] == "P0") {
            found = true;
            EXPECT_EQ(std::stod(row[2]), 1.6875);
            EXPECT_EQ(std::stod(row[3]), 1.875);
        }
    }
    EXPECT_TRUE(found);
    const auto svg = slurp(base + ".svg");
    EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
    EXPECT_NE(svg.find("version=\"1.1\""), std::string::npos);
    EXPECT_NE(svg.find(">P0</text>"), std::string::npos);
    EXPECT_NE(svg.find("#cc0000"), std::string::npos);
    EXPECT_NE(svg.find("#38761d"), std::string::npos);
    EXPECT_NE(svg.find("#1155cc"), std::string::npos);
}

TEST(CliDiagram, GoldenCsvIsByteStable) {
    const auto base = scratch("golden").string();
    ASSERT_EQ(call({"diagram", "--kappa", "2", "--grid", "16", "--out", base}).code, 0);
    EXPECT_EQ(slurp(base + ".csv"), slurp(fs::path(WPSLE_GOLDEN_DIR) / "diagram_kappa2_r16.csv"));
}

TEST(CliDiagram, NegativeMReversesVerticalOrder) {
    // Run-length compressed region sequence up each raster column.
    auto columns = [](long m) {
        const auto base = scratch("mfold" + std::to_string(m)).string();
        EXPECT_EQ(call({"diagram", "--kappa", "2", "--m", std::to_string(m), "--grid", "41", "--window",
                        "-3,3,-300,300", "--out", base})
                      .code,
                  0);
        std::ifstream is(base + ".csv");
        const auto t = csv::read(is);
        std::vector<std::vector<std::string>> cols(41);
        std::size_t i = 0;
        for (const auto& row : t.rows) {
            if (row[0] != "raster") continue;
            auto& col = cols[i % 41];
            if (col.empty() || col.back() != row[1]) col.push_back(row[1]);
            ++i;
        }
        return cols;
    };
    const auto up = columns(30), down = columns(-30);
    int multi = 0;
    for (std::size_t c = 0; c < up.size(); ++c) {
        auto rev = down[c];
        std::reverse(rev.begin(), rev.end());
        EXPECT_EQ(up[c], rev) << "column " << c;
        if (up[c].size() > 1) ++multi;
    }
    EXPECT_GT(multi, 10);
}

TEST(CliDiagram, ExitCodes) {
    const auto base = scratch("d").string();
    EXPECT_EQ(call({"diagram", "--window", "1,0,0,1", "--out", base}).code, 2);
    EXPECT_EQ(call({"diagram", "--window", "0,1,0,1"}).code, 2);
    EXPECT_EQ(call({"diagram", "--grid", "5000", "--out", base}).code, 2);
    EXPECT_EQ(call({"diagram", "--overlay", "colour", "--out", base}).code, 2);
    EXPECT_EQ(call({"diagram", "--grid", "4", "--out", "/nonexistent-dir/x"}).code, 4);
    EXPECT_EQ(call({"diagram", "--grid", "4", "--overlay", "validity", "--out", base}).code, 0);
}

TEST(CliTestfn, ProfileTable) {
    const auto r = call({"testfn", "--kappa", "2", "--p", "-1.5", "--q", "-6", "--gamma", "-0.45", "--grid", "9"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto t = r.table();
    ASSERT_EQ(t.rows.size(), 9u);
    EXPECT_EQ(num(t, 0, "u"), 0.0);
    EXPECT_EQ(num(t, 8, "u"), 4.0);
    for (std::size_t i = 0; i < t.rows.size(); ++i) EXPECT_LT(std::abs(num(t, i, "ode_residual")), 1e-8);
    EXPECT_NE(r.header_value("positivity"), "<missing>");
    EXPECT_EQ(call({"testfn", "--p", "1.25", "--q", "1.5", "--gamma", "0.5", "--grid", "1"}).code, 2);
}

TEST(CliVerify, ZoneOneSucceeds) {
    const auto path = scratch("verify.csv");
    const auto r = call({"verify", "--kappa", "2", "--p", "-1.5", "--q", "-6", "--grid", "32", "--out", path.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.header_value("verdict"), "StrictlyNegative");
    EXPECT_EQ(r.header_value("zone"), "ZoneI");
    std::ifstream is(path);
    const auto t = csv::read(is);
    EXPECT_EQ(t.header, (csv::Row{"r", "theta", "value"}));
    EXPECT_EQ(t.rows.size(), 32u * 32u);
    for (const auto& row : t.rows) EXPECT_LT(std::stod(row[2]), 0.0);
}

TEST(CliVerify, ExitCodes) {
    EXPECT_EQ(call({"verify", "--p", "2", "--q", "3", "--grid", "32"}).code, 2);
    EXPECT_EQ(call({"verify", "--p", "-1.75", "--q", "-5.75", "--grid", "32"}).code, 3);
    EXPECT_EQ(call({"verify", "--p", "-1.5", "--q", "-6", "--grid", "2"}).code, 2);
    EXPECT_EQ(call({"verify", "--p", "-1.5", "--q", "-6", "--grid", "16", "--out", "/nonexistent-dir/r"}).code, 4);
}

TEST(CliVerify, FeasibilityQuery) {
    const Kappa k(2.0);
    for (auto [p, q] : {std::pair{-1.0, -3.0}, std::pair{-1.5, -6.0}}) {
        const auto r = call({"verify", "--feasibility", "--p", csv::num(p), "--q", csv::num(q)});
        ASSERT_EQ(r.code, 0) << r.err;
        const auto f = supersolution_feasibility(k, MomentPoint(p, q));
        EXPECT_EQ(cell(r.table(), 0, "feasibility"), f.feasible ? "Feasible" : "Infeasible");
    }
}

TEST(CliSimulate, DeterministicAcrossRunsAndWorkers) {
    const std::vector<std::string> args{"simulate", "--samples", "100", "--z", "0.5:0,-0.2:0.3"};
    const auto a = call(args);
    ASSERT_EQ(a.code, 0) << a.err;
    auto more = args;
    more.insert(more.end(), {"--workers", "4"});
    const auto b = call(more);
    EXPECT_EQ(body(a.out), body(b.out));
    EXPECT_EQ(a.out, call(args).out);
    const auto t = a.table();
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(num(t, 1, "z_im"), 0.3);
    EXPECT_EQ(num(t, 0, "n"), 100);
}

TEST(CliSimulate, SeedChangesEstimates) {
    const auto a = call({"simulate", "--samples", "100"});
    const auto b = call({"simulate", "--samples", "100", "--seed", "43"});
    EXPECT_NE(body(a.out), body(b.out));
}

TEST(CliSimulate, ExitCodes) {
    EXPECT_EQ(call({"simulate", "--dt", "40"}).code, 2);
    EXPECT_EQ(call({"simulate", "--samples", "10"}).code, 2);
    EXPECT_EQ(call({"simulate", "--z", "1.2:0"}).code, 2);
    EXPECT_EQ(call({"simulate", "--z", "half"}).code, 2);
    EXPECT_EQ(call({"simulate", "--samples", "100", "--out", "/nonexistent-dir/s.csv"}).code, 4);
}

TEST(CliFitBeta, SummaryRowAndExitCodes) {
    const auto r = call({"fit-beta", "--samples", "4", "--angles", "8"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto t = r.table();
    ASSERT_EQ(t.rows.size(), 7u);
    EXPECT_EQ(cell(t, 6, "kind"), "summary");
    EXPECT_EQ(num(t, 0, "radius"), 0.75);
    EXPECT_EQ(call({"fit-beta", "--radii", "0.5,0.6,0.7"}).code, 2);
    EXPECT_EQ(call({"fit-beta", "--m", "0"}).code, 2);
    const auto weak = call({"fit-beta", "--samples", "4", "--angles", "4", "--max-slope-stderr", "1e-9"});
    EXPECT_EQ(weak.code, 1);
    EXPECT_EQ(weak.table().rows.size(), 7u);
}

TEST(CliValidateRed, DefaultBudgetPasses) {
    const auto r = call({"validate-red", "--kappa", "2", "--gamma", "0.5"});
    ASSERT_EQ(r.code, 0) << r.err << r.out;
    const auto t = r.table();
    ASSERT_EQ(t.rows.size(), 6u);
    EXPECT_EQ(num(t, 0, "z_re"), 0.5);
    EXPECT_NEAR(num(t, 0, "exact"), 0.537285, 1e-6);
    for (std::size_t i = 0; i < t.rows.size(); ++i) EXPECT_EQ(cell(t, i, "pass"), "1");
}

TEST(CliValidateRed, MismatchedMomentFails) {
    // An unbounded stabilisation tolerance stops every flow at the first probe (T = 1), far from the limit.
    const auto r = call({"validate-red", "--gamma", "0.5", "--flow-tol", "1e300", "--samples", "1000", "--z=-0.6:0"});
    EXPECT_EQ(r.code, 1) << r.out;
}
