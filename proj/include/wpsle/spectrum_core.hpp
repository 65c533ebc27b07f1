#pragma once

#include <optional>
#include <stdexcept>
#include <utility>

#include "scalar.hpp"

namespace wpsle {

template <class T>
class BasicKappa {
public:
    explicit BasicKappa(T value) : value_(std::move(value)) {
        if (!scalar_traits<T>::finite(value_) || !(value_ > 0)) {
            throw std::invalid_argument("kappa must be positive and finite");
        }
    }
    const T& value() const { return value_; }
    operator const T&() const { return value_; }

private:
    T value_;
};

template <class T>
struct BasicMomentPoint {
    T p{};
    T q{};

    BasicMomentPoint() = default;
    BasicMomentPoint(T p_, T q_) : p(std::move(p_)), q(std::move(q_)) {
        if (!scalar_traits<T>::finite(p) || !scalar_traits<T>::finite(q)) {
            throw std::invalid_argument("moment point must be finite");
        }
    }
    friend bool operator==(const BasicMomentPoint&, const BasicMomentPoint&) = default;
};

using Kappa = BasicKappa<double>;
using MomentPoint = BasicMomentPoint<double>;
using ExactKappa = BasicKappa<Rational>;
using ExactMomentPoint = BasicMomentPoint<Rational>;

template <class T>
struct BasicSpectrumQuadratics {
    T a_sigma;
    T c;
    T beta;
};

template <class T>
struct BasicGammaRoots {
    std::optional<T> gamma_0;
    std::optional<T> gamma_0_plus;
    std::optional<T> gamma_1_minus;
    std::optional<T> gamma_1;
    T gamma_lin;
};

template <class T>
struct BasicSpectrumBundle {
    std::optional<T> beta_tip;
    std::optional<T> beta_0;
    std::optional<T> beta_1;
    T beta_lin;
};

using SpectrumQuadratics = BasicSpectrumQuadratics<double>;
using GammaRoots = BasicGammaRoots<double>;
using SpectrumBundle = BasicSpectrumBundle<double>;

/// A^sigma(gamma) = -kappa gamma^2 / 2 + gamma + p - q.
template <class T>
T quad_A(const BasicKappa<T>& kappa, const BasicMomentPoint<T>& pt, const T& gamma) {
    const T& k = kappa.value();
    return -k * gamma * gamma / 2 + gamma + pt.p - pt.q;
}

/// C(gamma) = -kappa gamma^2 / 2 + (2 + kappa/2) gamma - p.
template <class T>
T quad_C(const BasicKappa<T>& kappa, const BasicMomentPoint<T>& pt, const T& gamma) {
    const T& k = kappa.value();
    return -k * gamma * gamma / 2 + (2 + k / 2) * gamma - pt.p;
}

/// beta(gamma) = kappa gamma^2 - (2 + kappa/2) gamma + p.
template <class T>
T beta_gamma(const BasicKappa<T>& kappa, const BasicMomentPoint<T>& pt, const T& gamma) {
    const T& k = kappa.value();
    return k * gamma * gamma - (2 + k / 2) * gamma + pt.p;
}

template <class T>
BasicSpectrumQuadratics<T> quadratics(const BasicKappa<T>& kappa, const BasicMomentPoint<T>& pt,
                                      const T& gamma) {
    return {quad_A(kappa, pt, gamma), quad_C(kappa, pt, gamma), beta_gamma(kappa, pt, gamma)};
}

/// gamma' = 2/kappa + 1/2 - gamma; an involution that preserves beta.
template <class T>
T dual_gamma(const BasicKappa<T>& kappa, const T& gamma) {
    return T(2) / kappa.value() + T(1) / 2 - gamma;
}

template <class T>
T gamma_lin(const BasicKappa<T>& kappa) {
    return T(1) / kappa.value() + T(1) / 4;
}

/// Discriminant governing gamma_0, gamma_0^+: (4+kappa)^2 - 8 kappa p.
template <class T>
T disc_0(const BasicKappa<T>& kappa, const BasicMomentPoint<T>& pt) {
    const T& k = kappa.value();
    return (4 + k) * (4 + k) - 8 * k * pt.p;
}

/// Discriminant governing gamma_1^-, gamma_1: 1 + 2 kappa (p - q).
template <class T>
T disc_1(const BasicKappa<T>& kappa, const BasicMomentPoint<T>& pt) {
    return 1 + 2 * kappa.value() * (pt.p - pt.q);
}

template <class T>
BasicGammaRoots<T> gamma_roots(const BasicKappa<T>& kappa, const BasicMomentPoint<T>& pt) {
    const T& k = kappa.value();
    BasicGammaRoots<T> roots{std::nullopt, std::nullopt, std::nullopt, std::nullopt, gamma_lin(kappa)};
    if (auto s = scalar_traits<T>::sqrt(disc_0(kappa, pt))) {
        const T centre = T(2) / k + T(1) / 2;
        roots.gamma_0 = centre - *s / (2 * k);
        roots.gamma_0_plus = centre + *s / (2 * k);
    }
    if (auto s = scalar_traits<T>::sqrt(disc_1(kappa, pt))) {
        roots.gamma_1_minus = (1 - *s) / k;
        roots.gamma_1 = (1 + *s) / k;
    }
    return roots;
}

/// Piecewise integral-means rule: beta when gamma >= -1/2, else beta - 2 gamma - 1.
template <class T>
T beta_from_pair(const T& beta, const T& gamma) {
    if (gamma >= T(-1) / 2) return beta;
    return beta - 2 * gamma - 1;
}

template <class T>
T beta_lin(const BasicKappa<T>& kappa, const BasicMomentPoint<T>& pt) {
    const T& k = kappa.value();
    return pt.p - (4 + k) * (4 + k) / (16 * k);
}

template <class T>
BasicSpectrumBundle<T> spectrum_functions(const BasicKappa<T>& kappa, const BasicMomentPoint<T>& pt) {
    const auto roots = gamma_roots(kappa, pt);
    BasicSpectrumBundle<T> out{std::nullopt, std::nullopt, std::nullopt, beta_lin(kappa, pt)};
    if (roots.gamma_0) {
        const T b0 = beta_gamma(kappa, pt, *roots.gamma_0);
        out.beta_0 = b0;
        out.beta_tip = b0 - 2 * *roots.gamma_0 - 1;
    }
    if (roots.gamma_1) out.beta_1 = beta_gamma(kappa, pt, *roots.gamma_1);
    return out;
}

template <class T>
struct BasicLandmarks {
    T p0, q0;
    T p1, q1;
    T p_prime_0;
    std::pair<T, T> q_prime_0_point;  // Q_0
    std::pair<T, T> q0_prime_point;   // Q'_0
    std::pair<T, T> t0_point;
    std::pair<T, T> t1_point;
    std::optional<T> p_star;          // absent in exact mode when irrational
    T p_hat;
    T p_of_kappa;
};

using Landmarks = BasicLandmarks<double>;

template <class T>
BasicLandmarks<T> landmarks(const BasicKappa<T>& kappa) {
    const T& k = kappa.value();
    BasicLandmarks<T> lm;
    lm.p0 = 3 * (4 + k) * (4 + k) / (32 * k);
    lm.q0 = (4 + k) * (8 + k) / (16 * k);
    lm.p1 = (8 + k) * (8 + 3 * k) / (32 * k);
    lm.q1 = lm.q0;
    lm.p_prime_0 = -1 - 3 * k / 8;
    lm.q_prime_0_point = {lm.p_prime_0, -2 - 7 * k / 8};
    lm.q0_prime_point = {lm.p_prime_0, lm.p_prime_0 - (2 + k) * (4 + k) / (2 * k)};
    lm.t0_point = {(4 + k) * (4 + k) / (8 * k), (4 + k) / (2 * k)};
    lm.t1_point = {(2 + k / 2) / k - T(1) / (2 * k), (3 + k / 2) / k - T(1) / k};
    try {
        if (auto s = scalar_traits<T>::sqrt(2 * (4 + k) * (4 + k) + 4)) {
            lm.p_star = (*s - 6) * (*s + 2) / (32 * k);
        }
    } catch (const std::domain_error&) {
        lm.p_star = std::nullopt;
    }
    lm.p_hat = 1 + k / 2;
    lm.p_of_kappa = (6 + k) * (2 + k) / (8 * k);
    return lm;
}

}  // namespace wpsle
