#include <cmath>
#include <numbers>
#include <random>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <gtest/gtest.h>

#include "wpsle/special_functions.hpp"

using namespace wpsle;
using boost::multiprecision::cpp_bin_float_quad;

namespace {

struct QuadSeries {
    double value;
    double abs_sum;
};

// Brute-force Gauss series in 113-bit arithmetic.
QuadSeries quad_2f1(double a, double b, double c, double x, int min_terms = 200) {
    cpp_bin_float_quad term = 1, sum = 1, abs_sum = 1;
    const cpp_bin_float_quad A = a, B = b, C = c, X = x;
    for (int k = 0; k < 200000; ++k) {
        term *= (A + k) * (B + k) / ((C + k) * (k + 1)) * X;
        sum += term;
        abs_sum += boost::multiprecision::abs(term);
        if (k >= min_terms && boost::multiprecision::abs(term) < 1e-34 * abs_sum) break;
        if (term == 0) break;
    }
    return {sum.convert_to<double>(), abs_sum.convert_to<double>()};
}

// Lanczos approximation (g = 7, nine coefficients) with reflection, written out independently.
double lanczos_gamma(double z) {
    static const double coef[] = {0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
                                  771.32342877765313,   -176.61502916214059,   12.507343278686905,
                                  -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
    if (z < 0.5) return std::numbers::pi / (std::sin(std::numbers::pi * z) * lanczos_gamma(1 - z));
    z -= 1;
    double x = coef[0];
    for (int i = 1; i < 9; ++i) x += coef[i] / (z + i);
    const double t = z + 7.5;
    return std::sqrt(2 * std::numbers::pi) * std::pow(t, z + 0.5) * std::exp(-t) * x;
}

Rational R(long long n, long long d = 1) { return Rational(n, d); }

double gamma1(double k, double p, double q) { return (1 + std::sqrt(1 + 2 * k * (p - q))) / k; }

}  // namespace

TEST(Gauss2F1, TrivialValues) {
    EXPECT_EQ(gauss_2f1(0.4, -1.7, 2.2, 0.0), 1.0);
    for (double x : {0.0, 0.3, 0.8, 1.0}) {
        EXPECT_NEAR(gauss_2f1(-1.0, 0.9, 1.8, x), 1.0 - 0.9 / 1.8 * x, 1e-15);
    }
}

TEST(Gauss2F1, QuadPrecisionReferencePoint) {
    const QuadSeries ref = quad_2f1(0.3, 0.7, 1.5, 0.25);
    EXPECT_NEAR(gauss_2f1(0.3, 0.7, 1.5, 0.25), ref.value, 1e-15);
}

TEST(Gauss2F1, RandomDrawsAgainstQuadSeries) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> ab(-2.5, 2.5), cd(0.3, 4.0), xd(0.0, 0.95);
    int checked = 0, connection = 0;
    while (checked < 1000) {
        const double a = ab(rng), b = ab(rng), x = xd(rng);
        double c = cd(rng);
        if (x > 0.75) {
            c = a + b + 0.5;
            if (c < 0.3) continue;
            ++connection;
        }
        const QuadSeries ref = quad_2f1(a, b, c, x);
        const Hyp2F1Result got = gauss_2f1_checked(a, b, c, x);
        EXPECT_NEAR(got.value, ref.value, 1e-12 * std::max(1.0, ref.abs_sum)) << a << ' ' << b << ' ' << c << ' ' << x;
        EXPECT_LE(std::abs(got.value - ref.value), 10 * got.error_estimate + 1e-15 * ref.abs_sum);
        ++checked;
    }
    EXPECT_GT(connection, 100);
}

TEST(Gauss2F1, ContinuousAcrossConnectionSwitch) {
    for (double a : {-1.3, 0.2, 1.7}) {
        for (double b : {-0.6, 0.45, 2.1}) {
            const double c = a + b + 0.5;
            if (c <= 0) continue;
            const double lo = gauss_2f1(a, b, c, 0.75);
            const double hi = gauss_2f1(a, b, c, std::nextafter(0.75, 1.0));
            EXPECT_NEAR(lo, hi, 1e-12 * std::max(1.0, std::abs(lo)));
        }
    }
}

TEST(Gauss2F1, GaussSummationAtOne) {
    const double a = 0.3, b = -0.4, c = a + b + 0.5;
    const double expected = std::tgamma(c) * std::tgamma(0.5) / (std::tgamma(c - a) * std::tgamma(c - b));
    EXPECT_NEAR(gauss_2f1(a, b, c, 1.0), expected, 1e-13);
}

TEST(Gauss2F1, ParameterErrors) {
    EXPECT_THROW(gauss_2f1(0.3, 0.7, -2.0, 0.5), ParameterError);
    EXPECT_THROW(gauss_2f1(-3.0, 0.7, -1.0, 0.5), ParameterError);
    EXPECT_NO_THROW(gauss_2f1(-1.0, 0.7, -2.0, 0.5));
    EXPECT_THROW(gauss_2f1(0.3, 0.7, 1.5, 1.2), ParameterError);
}

TEST(GammaFn, Values) {
    EXPECT_EQ(gamma_fn(1.0).value, 1.0);
    EXPECT_FALSE(gamma_fn(1.0).pole);
    EXPECT_TRUE(gamma_fn(-1.0).pole);
    EXPECT_TRUE(gamma_fn(0.0).pole);
    EXPECT_EQ(rgamma(-2.0), 0.0);
    EXPECT_NEAR(lanczos_gamma(0.5), std::sqrt(std::numbers::pi), 1e-14);
    EXPECT_NEAR(gamma_fn(0.5).value, lanczos_gamma(0.5), 1e-14);
}

TEST(GammaFn, AgreesWithLanczosAndDuplication) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> zd(-4.5, 8.0);
    for (int i = 0; i < 500; ++i) {
        const double z = zd(rng);
        if (std::abs(z - std::round(z)) < 1e-3 && z < 0.5) continue;
        const double g = gamma_fn(z).value;
        EXPECT_NEAR(g, lanczos_gamma(z), 1e-12 * std::abs(g));
        const double lhs = lanczos_gamma(z) * lanczos_gamma(z + 0.5);
        const double rhs = std::pow(2.0, 1 - 2 * z) * std::sqrt(std::numbers::pi) * lanczos_gamma(2 * z);
        if (std::abs(2 * z - std::round(2 * z)) > 1e-3 || 2 * z > 0) {
            EXPECT_NEAR(lhs, rhs, 1e-11 * std::abs(rhs));
        }
    }
}

TEST(HyperParams, ExactExamples) {
    const auto h = hyper_params(ExactKappa(R(2)), ExactMomentPoint(R(5, 4), R(3, 2)), R(1, 2));
    EXPECT_EQ(h.a, 0);
    EXPECT_EQ(h.b, 0);
    EXPECT_EQ(h.c, R(1, 2));
    const auto z = hyper_params(ExactKappa(R(2)), ExactMomentPoint(R(3), R(3)), R(0));
    EXPECT_EQ(z.a, -1);
    EXPECT_EQ(z.b, 0);
    EXPECT_EQ(z.c, R(-1, 2));
}

TEST(HyperParams, HalfIdentityExact) {
    for (long long k : {1, 2, 3, 4, 8}) {
        for (long long num : {-7, 0, 3, 11}) {
            // p - q chosen so that 1 + 2 kappa (p - q) = 9.
            const ExactKappa kappa(R(k));
            const ExactMomentPoint pt(R(num, 5), R(num, 5) - R(4, k));
            const auto h = hyper_params(kappa, pt, R(num, 7));
            EXPECT_EQ(h.c - h.a - h.b, R(1, 2));
            EXPECT_EQ(h.b_prime, R(1, 2) - h.a);
            EXPECT_EQ(h.a_prime, R(1, 2) - h.b);
            EXPECT_EQ(h.c_prime, 2 - h.c);
        }
    }
}

TEST(HyperParams, MissingRoot) {
    EXPECT_THROW(hyper_params(Kappa(2.0), MomentPoint(0.0, 5.0), 0.1), MissingRoot);
}

TEST(BuildProfile, ConstantProfileOnRedPoint) {
    const auto prof = build_test_profile(Kappa(2.0), MomentPoint(1.25, 1.5), 0.5);
    EXPECT_EQ(prof.which, ProfileCase::II);
    EXPECT_EQ(prof.n, 0);
    for (double u : {0.0, 1.0, 2.5, 4.0}) {
        EXPECT_EQ(eval_g0(prof, u).value, 1.0);
        EXPECT_EQ(eval_g0(prof, u).du, 0.0);
    }
    EXPECT_EQ(quad_A(Kappa(2.0), MomentPoint(1.25, 1.5), 0.5), 0.0);
    EXPECT_EQ(regularity_defect(prof), 0.0);
    EXPECT_NE(positivity_certificate(prof), Positivity::Indefinite);
    EXPECT_EQ(positivity_certificate(prof), Positivity::ProvedPositive);
}

TEST(BuildProfile, ConstantProfileBelowTheDiagonalNeedsTheScan) {
    const Kappa k(2.0);
    const MomentPoint pt(1.0, 0.0);
    const auto prof = build_test_profile(k, pt, gamma1(2.0, 1.0, 0.0));
    EXPECT_EQ(prof.which, ProfileCase::II);
    EXPECT_EQ(prof.n, 0);
    EXPECT_NEAR(std::min(prof.gamma, prof.gamma_prime), dual_gamma(k, prof.gamma), 1e-15);
    EXPECT_EQ(positivity_certificate(prof), Positivity::NumericallyPositive);
}

TEST(BuildProfile, DegreeOnePolynomial) {
    // At p = q = 0 the series at gamma_1 - 1 stops at b = 0, so g_0 is constant there.
    const auto flat = build_test_profile(Kappa(2.0), MomentPoint(0.0, 0.0), 0.0);
    EXPECT_EQ(flat.which, ProfileCase::II);
    EXPECT_EQ(flat.n, 0);

    const double g1 = gamma1(2.0, 1.0, 0.0);
    const auto prof = build_test_profile(Kappa(2.0), MomentPoint(1.0, 0.0), g1 - 1);
    EXPECT_EQ(prof.which, ProfileCase::II);
    EXPECT_EQ(prof.n, 1);
    ASSERT_EQ(prof.poly.size(), 2u);
    const auto& h = prof.params;
    EXPECT_NEAR(prof.poly[1], -h.b / h.c, 1e-14);
    EXPECT_NEAR(h.b / h.c, 1.68, 0.01);
    EXPECT_EQ(regularity_defect(prof), 0.0);
    EXPECT_EQ(positivity_certificate(prof), Positivity::Indefinite);
}

TEST(BuildProfile, GenericCaseIV) {
    const Kappa k(2.0);
    const MomentPoint pt(1.0, 0.0);
    const double g1d = dual_gamma(k, gamma1(2.0, 1.0, 0.0));
    const auto prof = build_test_profile(k, pt, g1d - 0.05);
    EXPECT_EQ(prof.which, ProfileCase::IV);
    const auto& h = prof.params;
    const double c0 = -std::tgamma(h.c) / (std::tgamma(h.a) * std::tgamma(h.b)) * std::tgamma(h.a_prime) *
                      std::tgamma(h.b_prime) / std::tgamma(h.c_prime);
    EXPECT_NEAR(prof.c2 / prof.c1, c0, 1e-12 * std::abs(c0));
    EXPECT_NEAR(regularity_defect(prof), 0.0, 1e-12);
    EXPECT_EQ(positivity_certificate(prof), Positivity::ProvedPositive);

    const auto j4 = eval_g0(prof, 4.0);
    EXPECT_NEAR(j4.du / j4.value, quad_A(k, pt, prof.gamma) / 2.0, 1e-8);
    EXPECT_EQ(eval_g0(prof, 0.0).value, 1.0);
}

TEST(BuildProfile, GenericDefectNonzero) {
    auto prof = build_test_profile(Kappa(2.0), MomentPoint(1.0, 0.0), -0.3);
    prof.c1 = prof.c2 = 1.0;
    EXPECT_GT(std::abs(regularity_defect(prof)), 1e-3);
}

TEST(BuildProfile, CaseIUsesDualExponent) {
    // gamma' = gamma_1 - 1 makes the primed series terminate at degree 1.
    const Kappa k(2.0);
    const MomentPoint pt(1.0, 0.0);
    const double gamma = dual_gamma(k, gamma1(2.0, 1.0, 0.0) - 1);
    const auto prof = build_test_profile(k, pt, gamma);
    EXPECT_EQ(prof.which, ProfileCase::I);
    EXPECT_EQ(prof.c1, 0.0);
    EXPECT_GT(prof.c2, 0.0);
    EXPECT_DOUBLE_EQ(prof.exponent, prof.gamma_prime);
    EXPECT_EQ(regularity_defect(prof), 0.0);
    for (int i = 1; i < 64; ++i) EXPECT_NEAR(boundary_residual(prof, i / 16.0), 0.0, 1e-12);
}

TEST(BuildProfile, DoubleTerminationLineIsResonant) {
    // n = 1, m = 0 on the line q = p - (9 kappa^2 - 16) / (32 kappa): c = 1 - (n - m) = 0.
    const double kap = 2.0, p = 1.0, q = p - (9 * kap * kap - 16) / (32 * kap);
    const Kappa k(kap);
    const MomentPoint pt(p, q);
    const double g = gamma1(kap, p, q) - 1;
    const auto h = hyper_params(k, pt, g);
    EXPECT_NEAR(h.a, -1.0, 1e-15);
    EXPECT_NEAR(h.a_prime, 0.0, 1e-15);
    EXPECT_NEAR(h.c, 0.0, 1e-15);
    EXPECT_THROW(gauss_2f1(-1.0, h.b, 0.0, 0.5), ParameterError);

    const auto prof = build_test_profile(k, pt, g);
    EXPECT_EQ(prof.which, ProfileCase::I);
    EXPECT_EQ(prof.n, 0);
    EXPECT_EQ(prof.m, 1);
    EXPECT_EQ(regularity_defect(prof), 0.0);
    for (int i = 1; i < 64; ++i) {
        EXPECT_NEAR(g0_ode_residual(prof, i / 16.0), 0.0, 1e-12);
        EXPECT_NEAR(boundary_residual(prof, i / 16.0), 0.0, 1e-12);
    }
}

TEST(BuildProfile, Errors) {
    EXPECT_THROW(build_test_profile(Kappa(2.0), MomentPoint(1.0, 0.0), 1.3), NotRepresentable);
    const double g1 = gamma1(2.0, 1.0, 0.0);
    EXPECT_THROW(build_test_profile(Kappa(2.0), MomentPoint(1.0, 0.0), g1 - 1 + 1e-8), AmbiguousCase);
    EXPECT_THROW(build_test_profile(Kappa(2.0), MomentPoint(0.0, 3.0), 0.1), MissingRoot);
}

TEST(Profile, EndpointMatchesGaussSummation) {
    const Kappa k(2.0);
    const MomentPoint pt(1.0, 0.0);
    for (double g : {-0.9, -0.5, -0.17, 0.3}) {
        const auto prof = build_test_profile(k, pt, g);
        ASSERT_EQ(prof.which, ProfileCase::IV);
        const auto& h = prof.params;
        const double sp = std::sqrt(std::numbers::pi);
        const double lead = sp * std::tgamma(h.c) / (std::tgamma(h.c - h.a) * std::tgamma(h.c - h.b));
        const double sub = sp * std::tgamma(h.c_prime) /
                           (std::tgamma(h.c_prime - h.a_prime) * std::tgamma(h.c_prime - h.b_prime));
        EXPECT_NEAR(eval_g0(prof, 4.0).value, lead + prof.c2 * sub, 1e-8 * std::max(1.0, std::abs(lead)));
    }
}

TEST(Profile, SmoothAcrossEvaluatorSwitch) {
    const auto prof = build_test_profile(Kappa(3.0), MomentPoint(0.5, -1.0), -0.4);
    ASSERT_EQ(prof.which, ProfileCase::IV);
    const auto lo = eval_g0(prof, 3.0);
    const auto hi = eval_g0(prof, std::nextafter(3.0, 4.0));
    EXPECT_NEAR(lo.value, hi.value, 1e-9);
    EXPECT_NEAR(lo.du, hi.du, 1e-8);
    EXPECT_NEAR(lo.d2u, hi.d2u, 1e-7);
}

TEST(Profile, HornerMatchesSeries) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> kd(0.5, 8.0), pd(-3.0, 2.0), dq(-4.0, 0.0);
    int built = 0;
    for (int trial = 0; trial < 400 && built < 100; ++trial) {
        const double kap = kd(rng), p = pd(rng), q = p + dq(rng);
        const int n = static_cast<int>(trial % 4);
        const double g = gamma1(kap, p, q) - n;
        TestProfile prof;
        try {
            prof = build_test_profile(Kappa(kap), MomentPoint(p, q), g);
        } catch (const std::domain_error&) {
            continue;
        }
        if (!prof.polynomial()) continue;
        ++built;
        const auto& h = prof.params;
        for (int i = 0; i <= 32; ++i) {
            const double x = i / 32.0;
            const double series = prof.which == ProfileCase::I
                                      ? detail::series_2f1(h.a_prime, h.b_prime, h.c_prime, x).value
                                      : detail::series_2f1(h.a, h.b, h.c, x).value;
            const double horner = eval_g0(prof, 4 * x).value;
            EXPECT_NEAR(horner, series, 1e-12 * std::max(1.0, std::abs(series)));
        }
    }
    EXPECT_GE(built, 50);
}

class ProfileProperties : public ::testing::TestWithParam<double> {};

TEST_P(ProfileProperties, OdeAndBoundaryResiduals) {
    const double kap = GetParam();
    const Kappa k(kap);
    std::mt19937_64 rng(static_cast<unsigned>(kap * 100));
    std::uniform_real_distribution<double> pd(-3.0, 2.0), dq(-3.0, 0.5), gd(0.0, 1.0);
    int built = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const MomentPoint pt(pd(rng), 0.0);
        const MomentPoint at(pt.p, pt.p + dq(rng));
        if (disc_1(k, at) <= 0) continue;
        const double lo = -1.5, hi = gamma_lin(k);
        const double g = lo + (hi - lo) * gd(rng);
        TestProfile prof;
        try {
            prof = build_test_profile(k, at, g);
        } catch (const std::domain_error&) {
            continue;
        } catch (const PrecisionLoss&) {
            continue;
        }
        ++built;
        for (int i = 1; i <= 512; ++i) {
            const double u = 4.0 * i / 513.0;
            const G0Jet j = eval_g0(prof, u);
            const double scale = std::max({1.0, std::abs(j.value) * (1 + std::abs(quad_A(k, at, prof.exponent))),
                                           std::abs(j.du) * 4 * (kap + 4 * std::abs(kap * prof.exponent - 1)),
                                           std::abs(j.d2u) * 8 * kap});
            ASSERT_LE(std::abs(g0_ode_residual(prof, u)), 1e-8 * scale) << "u=" << u << " g=" << g;
            const G0Jet gj = eval_g(prof, u);
            const double bscale =
                std::max({1.0, std::abs(gj.value) * 8 * (1 + std::abs(at.p) + std::abs(at.q)),
                          std::abs(gj.du) * u * (kap + 4), std::abs(gj.d2u) * u * u * 2 * kap});
            ASSERT_LE(std::abs(boundary_residual(prof, u)), 1e-8 * bscale) << "u=" << u << " g=" << g;
        }
        const G0Jet j4 = eval_g0(prof, 4.0);
        EXPECT_NEAR(j4.du, quad_A(k, at, prof.exponent) / kap * j4.value, 1e-8 * std::max(1.0, std::abs(j4.value)));
    }
    EXPECT_GE(built, 100);
}

INSTANTIATE_TEST_SUITE_P(Kappas, ProfileProperties, ::testing::Values(1.0, 2.0, 4.0, 6.0, 8.0));
