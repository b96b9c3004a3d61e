#pragma once

// Binary vapor-liquid equilibrium under modified Raoult's law: Antoine vapor
// pressures, NRTL activity coefficients with symmetric, temperature-independent
// non-randomness, and the implicit bubble-point model (l, P) -> (v, T).
//
// Parameter order everywhere: θ = (a12, a21, b12, b21, c12).

#include "core.hpp"
#include "dual.hpp"
#include "model.hpp"

#include <array>
#include <string>
#include <utility>

namespace seqoed::vle {

struct AntoineParams {
    std::string component;
    double A = 0.0; // dimensionless
    double B = 0.0; // K
    double C = 0.0; // K
};

/// Liquid mole fraction of component 1 and pressure in Pa.
struct InputPoint {
    double l = 0.0;
    double P = 0.0;

    Point to_point() const { return make_point({l, P}); }
    static InputPoint from_point(const Point& x) { return {x[0], x[1]}; }
};

/// Vapor mole fraction of component 1 and equilibrium temperature in K.
struct Output {
    double v = 0.0;
    double T = 0.0;
};

struct ParamVector {
    double a12 = 0.0;
    double a21 = 0.0;
    double b12 = 0.0; // K
    double b21 = 0.0; // K
    double c12 = 0.3;

    static constexpr int size = 5;

    Vector to_vector() const
    {
        Vector v(size);
        v << a12, a21, b12, b21, c12;
        return v;
    }

    static ParamVector from_vector(const Vector& v)
    {
        if (v.size() != size)
            throw DomainError("NRTL parameter vector must have 5 entries");
        return {v[0], v[1], v[2], v[3], v[4]};
    }

    bool is_finite() const
    {
        return std::isfinite(a12) && std::isfinite(a21) && std::isfinite(b12) && std::isfinite(b21) &&
               std::isfinite(c12);
    }
};

/// Box Θ for the NRTL parameters.
struct ParamBox {
    Vector lower;
    Vector upper;

    bool contains(const Vector& theta) const
    {
        return (theta.array() >= lower.array()).all() && (theta.array() <= upper.array()).all();
    }
};

inline ParamBox default_param_box()
{
    ParamBox box{Vector(5), Vector(5)};
    box.lower << -50.0, -50.0, -10000.0, -10000.0, 0.01;
    box.upper << 50.0, 50.0, 10000.0, 10000.0, 0.6;
    return box;
}

/// Propanol (1) and propyl acetate (2).
inline std::array<AntoineParams, 2> propanol_propyl_acetate()
{
    return {{{"propanol", 4.65413, 1292.869, -91.992}, {"propyl acetate", 3.84871, 1088.392, -90.571}}};
}

/// Final least-squares estimate on the complete 36-experiment dataset.
inline ParamVector theta_tot() { return {9.396525, -10.305843, -786.446701, 1510.352034, 0.010000}; }

/// Operating temperature window in K.
inline constexpr double kTemperatureMin = 300.0;
inline constexpr double kTemperatureMax = 450.0;
inline constexpr double kPressureMin = 1e5;
inline constexpr double kPressureMax = 3e5;

namespace detail {

template <typename S>
S saturation_pressure(const S& T, const AntoineParams& p)
{
    using ad::exp10;
    return 1e5 * exp10(p.A - p.B / (T + p.C));
}

inline void check_antoine_domain(double T, const AntoineParams& p)
{
    if (!(T > 0.0) || T + p.C == 0.0)
        throw DomainError("Antoine equation evaluated outside its domain at T = " + std::to_string(T) + " K");
}

/// ln γ1, ln γ2 for liquid composition (l, 1 - l).
template <typename S>
std::array<S, 2> nrtl_log_gamma(double l, const S& T, const S& a12, const S& a21, const S& b12, const S& b21,
                                const S& c12)
{
    using ad::exp;
    using std::exp;
    const std::array<double, 2> x{l, 1.0 - l};
    // tau[i][j], G[i][j]
    std::array<std::array<S, 2>, 2> tau{{{S(0.0), a12 + b12 / T}, {a21 + b21 / T, S(0.0)}}};
    std::array<std::array<S, 2>, 2> G{{{S(1.0), exp(-c12 * tau[0][1])}, {exp(-c12 * tau[1][0]), S(1.0)}}};

    std::array<S, 2> denom{}; // Σ_k x_k G_kj
    std::array<S, 2> numer{}; // Σ_k x_k τ_kj G_kj
    for (int j = 0; j < 2; ++j) {
        denom[j] = S(0.0);
        numer[j] = S(0.0);
        for (int k = 0; k < 2; ++k) {
            denom[j] += x[k] * G[k][j];
            numer[j] += x[k] * tau[k][j] * G[k][j];
        }
    }

    std::array<S, 2> out{};
    for (int i = 0; i < 2; ++i) {
        S s = numer[i] / denom[i];
        for (int j = 0; j < 2; ++j)
            s += (x[j] * G[i][j] / denom[j]) * (tau[i][j] - numer[j] / denom[j]);
        out[i] = s;
    }
    return out;
}

template <typename S>
std::array<S, 2> nrtl_log_gamma(double l, const S& T, const std::array<S, 5>& th)
{
    return nrtl_log_gamma(l, T, th[0], th[1], th[2], th[3], th[4]);
}

/// Partial pressures P_i(T) γ_i l_i in Pa.
template <typename S>
std::array<S, 2> partial_pressures(double l, const S& T, const std::array<S, 5>& th,
                                   const std::array<AntoineParams, 2>& antoine)
{
    using ad::exp;
    using std::exp;
    const auto lg = nrtl_log_gamma(l, T, th);
    return {saturation_pressure(T, antoine[0]) * exp(lg[0]) * l,
            saturation_pressure(T, antoine[1]) * exp(lg[1]) * (1.0 - l)};
}

} // namespace detail

/// Saturation vapor pressure in Pa: 1e5 · 10^(A − B/(T + C)).
inline double antoine_pressure(double T, const AntoineParams& p)
{
    detail::check_antoine_domain(T, p);
    return detail::saturation_pressure(T, p);
}

/// Boiling temperature of the pure component at pressure P (Antoine inversion).
inline double antoine_temperature(double P, const AntoineParams& p)
{
    if (!(P > 0.0))
        throw DomainError("pressure must be positive");
    const double denom = p.A - std::log10(P / 1e5);
    if (denom <= 0.0)
        throw DomainError("Antoine inversion has no solution at this pressure");
    return p.B / denom - p.C;
}

/// Activity coefficients (γ1, γ2).
inline std::pair<double, double> nrtl_gamma(double l, double T, const ParamVector& theta)
{
    if (!(l >= 0.0 && l <= 1.0))
        throw DomainError("liquid mole fraction outside [0, 1]");
    if (!(T > 0.0))
        throw DomainError("temperature must be positive");
    const auto lg = detail::nrtl_log_gamma(l, T, theta.a12, theta.a21, theta.b12, theta.b21, theta.c12);
    return {std::exp(lg[0]), std::exp(lg[1])};
}

struct BubblePointOptions {
    double bracket_margin = 20.0; // K beyond the pure-component boiling points
    double max_temperature = 2000.0; // K, upper limit of bracket widening
    double residual_tolerance = 1e-10;
    int max_iterations = 200;
};

namespace detail {

inline void check_inputs(const InputPoint& x, const ParamVector& theta)
{
    if (!(x.l >= 0.0 && x.l <= 1.0))
        throw DomainError("liquid mole fraction outside [0, 1]");
    if (!(x.P > 0.0) || !std::isfinite(x.P))
        throw DomainError("pressure must be positive and finite");
    if (!theta.is_finite())
        throw DomainError("NRTL parameters must be finite");
}

/// Equilibrium temperature from Σ P_i(T) γ_i l_i = P by safeguarded Newton
/// inside a bracket around the pure-component boiling points.
inline double solve_temperature(const InputPoint& x, const ParamVector& theta,
                                const std::array<AntoineParams, 2>& antoine, const BubblePointOptions& opt)
{
    using D1 = ad::Dual<1>;
    const std::array<D1, 5> th{theta.a12, theta.a21, theta.b12, theta.b21, theta.c12};
    const double tb1 = antoine_temperature(x.P, antoine[0]);
    const double tb2 = antoine_temperature(x.P, antoine[1]);

    auto residual = [&](double T) {
        const auto pp = partial_pressures(x.l, D1::variable(T, 0), th, antoine);
        const D1 g = (pp[0] + pp[1] - x.P) / x.P;
        return std::pair{g.value, g.grad[0]};
    };

    double floor = 1.0;
    for (const auto& a : antoine)
        floor = std::max(floor, -a.C + 1.0);
    double lo = std::max(std::min(tb1, tb2) - opt.bracket_margin, floor);
    double hi = std::max(tb1, tb2) + opt.bracket_margin;

    auto [glo, dlo] = residual(lo);
    auto [ghi, dhi] = residual(hi);
    // Strongly non-ideal mixtures boil outside the pure-component range: widen the bracket.
    for (double step = opt.bracket_margin; glo > 0.0 && lo > floor; step *= 2.0) {
        hi = lo;
        ghi = glo;
        lo = std::max(lo - step, floor);
        std::tie(glo, dlo) = residual(lo);
    }
    for (double step = opt.bracket_margin; ghi < 0.0 && hi < opt.max_temperature; step *= 2.0) {
        lo = hi;
        glo = ghi;
        hi = std::min(hi + step, opt.max_temperature);
        std::tie(ghi, dhi) = residual(hi);
    }
    if (!std::isfinite(glo) || !std::isfinite(ghi) || glo * ghi > 0.0)
        throw ConvergenceError("bubble-point residual has no sign change on [" + std::to_string(lo) + ", " +
                               std::to_string(hi) + "] K");
    if (glo == 0.0)
        return lo;
    if (ghi == 0.0)
        return hi;
    // Orient so that g(neg) < 0 < g(pos).
    double neg = glo < 0.0 ? lo : hi;
    double pos = glo < 0.0 ? hi : lo;

    double T = std::clamp(x.l * tb1 + (1.0 - x.l) * tb2, std::min(lo, hi), std::max(lo, hi));
    double last_step = hi - lo;
    for (int it = 0; it < opt.max_iterations; ++it) {
        auto [g, dg] = residual(T);
        if (!std::isfinite(g))
            g = (T - neg) * (pos - neg) > 0 ? 1.0 : -1.0; // treat overflow as far side
        if (std::abs(g) < 1e-15)
            return T;
        if (g < 0.0)
            neg = T;
        else
            pos = T;

        double next = T - g / dg;
        const double a = std::min(neg, pos);
        const double b = std::max(neg, pos);
        const bool newton_ok = std::isfinite(next) && next > a && next < b &&
                               std::abs(next - T) < 0.5 * std::abs(last_step);
        if (!newton_ok)
            next = 0.5 * (neg + pos);
        last_step = next - T;
        T = next;
        if (std::abs(last_step) <= 1e-13 * T || b - a <= 1e-13 * T) {
            auto [gf, df] = residual(T);
            (void)df;
            if (std::abs(gf) < opt.residual_tolerance)
                return T;
        }
    }
    auto [gf, df] = residual(T);
    (void)df;
    if (std::abs(gf) < opt.residual_tolerance)
        return T;
    throw ConvergenceError("bubble-point temperature iteration did not converge");
}

} // namespace detail

/// Bubble point (v, T) for liquid composition l at pressure P.
inline Output bubble_point(const InputPoint& x, const ParamVector& theta,
                           const std::array<AntoineParams, 2>& antoine = propanol_propyl_acetate(),
                           const BubblePointOptions& opt = {})
{
    detail::check_inputs(x, theta);
    const double T = detail::solve_temperature(x, theta, antoine, opt);
    const std::array<double, 5> th{theta.a12, theta.a21, theta.b12, theta.b21, theta.c12};
    const auto pp = detail::partial_pressures(x.l, T, th, antoine);
    if (x.l == 0.0 || x.l == 1.0)
        return {x.l, T}; // a pure liquid boils to the same pure vapor
    const double v = pp[0] / x.P;
    return {std::clamp(v, 0.0, 1.0), T};
}

/// Bubble point together with ∂(v, T)/∂θ (2 × 5) from the implicit function theorem.
inline std::pair<Output, Matrix> bubble_point_with_jacobian(const InputPoint& x, const ParamVector& theta,
                                                             const std::array<AntoineParams, 2>& antoine =
                                                                 propanol_propyl_acetate(),
                                                             const BubblePointOptions& opt = {})
{
    using D6 = ad::Dual<6>; // directions 0..4: θ, 5: T
    detail::check_inputs(x, theta);
    const double T = detail::solve_temperature(x, theta, antoine, opt);

    const std::array<D6, 5> th{D6::variable(theta.a12, 0), D6::variable(theta.a21, 1), D6::variable(theta.b12, 2),
                               D6::variable(theta.b21, 3), D6::variable(theta.c12, 4)};
    const auto pp = detail::partial_pressures(x.l, D6::variable(T, 5), th, antoine);
    const D6 g = (pp[0] + pp[1] - x.P) / x.P;
    const D6 v = pp[0] / x.P;

    Matrix jac(2, 5);
    const double dg_dT = g.grad[5];
    const bool insensitive = x.l == 0.0 || x.l == 1.0;
    if (insensitive) {
        jac.setZero();
    } else {
        if (!(std::abs(dg_dT) > 0.0) || !std::isfinite(dg_dT))
            throw SingularityError("bubble-point residual has vanishing temperature derivative");
        for (int k = 0; k < 5; ++k) {
            const double dT = -g.grad[k] / dg_dT;
            jac(1, k) = dT;
            jac(0, k) = v.grad[k] + v.grad[5] * dT;
        }
    }
    if (!jac.allFinite())
        throw SingularityError("bubble-point Jacobian is not finite");
    return {{insensitive ? x.l : std::clamp(v.value, 0.0, 1.0), T}, jac};
}

inline Matrix bubble_point_jacobian(const InputPoint& x, const ParamVector& theta,
                                    const std::array<AntoineParams, 2>& antoine = propanol_propyl_acetate())
{
    return bubble_point_with_jacobian(x, theta, antoine).second;
}

/// Relative residual of the defining equation at a computed output.
inline double bubble_point_residual(const InputPoint& x, const Output& y, const ParamVector& theta,
                                    const std::array<AntoineParams, 2>& antoine = propanol_propyl_acetate())
{
    const std::array<double, 5> th{theta.a12, theta.a21, theta.b12, theta.b21, theta.c12};
    const auto pp = detail::partial_pressures(x.l, y.T, th, antoine);
    return (pp[0] + pp[1] - x.P) / x.P;
}

/// The bubble-point model as a ParametricModel: x = (l, P), y = (v, T), θ ∈ R⁵.
class VleModel final : public ParametricModel {
public:
    explicit VleModel(std::array<AntoineParams, 2> antoine = propanol_propyl_acetate()) : antoine_(std::move(antoine))
    {
    }

    int input_dim() const override { return 2; }
    int param_dim() const override { return 5; }
    int output_dim() const override { return 2; }

    Vector predict(const Point& x, const Vector& theta) const override
    {
        const Output y = bubble_point(InputPoint::from_point(x), ParamVector::from_vector(theta), antoine_);
        Vector out(2);
        out << y.v, y.T;
        return out;
    }

    Matrix jacobian(const Point& x, const Vector& theta) const override
    {
        return predict_with_jacobian(x, theta).second;
    }

    std::pair<Vector, Matrix> predict_with_jacobian(const Point& x, const Vector& theta) const override
    {
        auto [y, jac] = bubble_point_with_jacobian(InputPoint::from_point(x), ParamVector::from_vector(theta), antoine_);
        Vector out(2);
        out << y.v, y.T;
        return {out, jac};
    }

    const std::array<AntoineParams, 2>& antoine() const { return antoine_; }

private:
    std::array<AntoineParams, 2> antoine_;
};

/// σ_v = 0.0015 mol/mol, σ_T = 0.03 K.
inline NoiseModel case_study_noise() { return NoiseModel::from_sigmas({0.0015, 0.03}); }

} // namespace seqoed::vle
