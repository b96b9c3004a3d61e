#pragma once

// Forward-mode dual numbers with a fixed number of tangent directions.

#include <array>
#include <cmath>

namespace seqoed::ad {

template <int N>
struct Dual {
    double value = 0.0;
    std::array<double, N> grad{};

    constexpr Dual() = default;
    constexpr Dual(double v) : value(v) {} // NOLINT(google-explicit-constructor)

    static Dual variable(double v, int direction)
    {
        Dual d(v);
        d.grad[direction] = 1.0;
        return d;
    }

    Dual& operator+=(const Dual& o)
    {
        value += o.value;
        for (int i = 0; i < N; ++i)
            grad[i] += o.grad[i];
        return *this;
    }
    Dual& operator-=(const Dual& o)
    {
        value -= o.value;
        for (int i = 0; i < N; ++i)
            grad[i] -= o.grad[i];
        return *this;
    }
    Dual& operator*=(const Dual& o)
    {
        for (int i = 0; i < N; ++i)
            grad[i] = grad[i] * o.value + value * o.grad[i];
        value *= o.value;
        return *this;
    }
    Dual& operator/=(const Dual& o)
    {
        const double inv = 1.0 / o.value;
        const double q = value * inv;
        for (int i = 0; i < N; ++i)
            grad[i] = (grad[i] - q * o.grad[i]) * inv;
        value = q;
        return *this;
    }

    friend Dual operator+(Dual a, const Dual& b) { return a += b; }
    friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
    friend Dual operator*(Dual a, const Dual& b) { return a *= b; }
    friend Dual operator/(Dual a, const Dual& b) { return a /= b; }
    friend Dual operator-(Dual a)
    {
        a.value = -a.value;
        for (auto& g : a.grad)
            g = -g;
        return a;
    }
};

template <int N>
Dual<N> exp(const Dual<N>& a)
{
    Dual<N> r(std::exp(a.value));
    for (int i = 0; i < N; ++i)
        r.grad[i] = r.value * a.grad[i];
    return r;
}

template <int N>
Dual<N> log(const Dual<N>& a)
{
    Dual<N> r(std::log(a.value));
    for (int i = 0; i < N; ++i)
        r.grad[i] = a.grad[i] / a.value;
    return r;
}

/// 10^a
template <int N>
Dual<N> exp10(const Dual<N>& a)
{
    static const double ln10 = std::log(10.0);
    Dual<N> r(std::pow(10.0, a.value));
    for (int i = 0; i < N; ++i)
        r.grad[i] = r.value * ln10 * a.grad[i];
    return r;
}

inline double exp10(double a) { return std::pow(10.0, a); }

template <int N>
double value_of(const Dual<N>& a)
{
    return a.value;
}
inline double value_of(double a) { return a; }

} // namespace seqoed::ad
