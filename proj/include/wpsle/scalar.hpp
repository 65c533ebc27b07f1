#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

namespace wpsle {

using Rational = boost::multiprecision::cpp_rational;

// Per-scalar hooks used by the templated closed forms. Doubles take the
// ordinary square root; rationals only admit perfect squares.
template <class T>
struct scalar_traits;

template <>
struct scalar_traits<double> {
    static std::optional<double> sqrt(double x) {
        if (x < 0.0) return std::nullopt;
        return std::sqrt(x);
    }
    static bool finite(double x) { return std::isfinite(x); }
    static double to_double(double x) { return x; }
};

template <>
struct scalar_traits<Rational> {
    static std::optional<Rational> sqrt(const Rational& x) {
        using boost::multiprecision::cpp_int;
        if (x < 0) return std::nullopt;
        cpp_int num = boost::multiprecision::numerator(x);
        cpp_int den = boost::multiprecision::denominator(x);
        cpp_int rn = boost::multiprecision::sqrt(num);
        cpp_int rd = boost::multiprecision::sqrt(den);
        if (rn * rn != num || rd * rd != den) {
            throw std::domain_error("square root of " + x.str() + " is not rational");
        }
        return Rational(rn, rd);
    }
    static bool finite(const Rational&) { return true; }
    static double to_double(const Rational& x) { return x.convert_to<double>(); }
};

inline Rational rational(long long num, long long den = 1) { return Rational(num, den); }

}  // namespace wpsle
