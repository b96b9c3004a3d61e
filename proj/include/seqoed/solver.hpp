#pragma once

// Adaptive-discretization solver for locally ε-optimal weighted designs on a
// finite design space.

#include "core.hpp"
#include "criteria.hpp"
#include "model.hpp"

#include <span>
#include <string>
#include <vector>

namespace seqoed {

/// Finite candidate set X̲ together with the enclosing box used for scaling.
struct DesignSpace {
    std::string name;
    std::vector<Point> points;

    std::size_t size() const { return points.size(); }

    /// Side lengths λ_j of the smallest box containing every candidate.
    Vector box_lengths() const
    {
        if (points.empty())
            throw DomainError("empty design space");
        Vector lo = points.front(), hi = points.front();
        for (const auto& p : points) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        return hi - lo;
    }

    /// Smallest scaled max-norm distance between two distinct candidates.
    double mesh_size() const;

    void validate() const
    {
        if (points.empty())
            throw DomainError("design space has no candidates");
        for (std::size_t i = 0; i < points.size(); ++i)
            for (std::size_t j = i + 1; j < points.size(); ++j)
                if (points[i] == points[j])
                    throw DomainError("design space contains duplicate candidate " + std::to_string(j));
    }

    /// Full factorial grid; the first axis varies slowest.
    static DesignSpace grid(std::string name, const std::vector<std::vector<double>>& axes)
    {
        DesignSpace s{std::move(name), {}};
        std::vector<std::size_t> idx(axes.size(), 0);
        for (const auto& a : axes)
            if (a.empty())
                return s;
        while (true) {
            Point p(static_cast<Eigen::Index>(axes.size()));
            for (std::size_t d = 0; d < axes.size(); ++d)
                p[static_cast<Eigen::Index>(d)] = axes[d][idx[d]];
            s.points.push_back(std::move(p));
            std::size_t d = axes.size();
            while (d > 0) {
                --d;
                if (++idx[d] < axes[d].size())
                    break;
                idx[d] = 0;
                if (d == 0)
                    return s;
            }
            if (axes.empty())
                return s;
        }
    }
};

inline std::vector<double> linspace(double a, double b, int n)
{
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        v[static_cast<std::size_t>(i)] = n == 1 ? a : a + (b - a) * i / (n - 1);
    return v;
}

/// max_j |x_j − x'_j| / λ_j, skipping coordinates with λ_j = 0.
inline double scaled_distance(const Point& x, const Point& y, const Vector& lambda)
{
    double d = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j)
        if (lambda[j] > 0.0)
            d = std::max(d, std::abs(x[j] - y[j]) / lambda[j]);
    return d;
}

inline double scaled_distance(const Point& x, const Point& y, const DesignSpace& space)
{
    return scaled_distance(x, y, space.box_lengths());
}

inline double DesignSpace::mesh_size() const
{
    const Vector lambda = box_lengths();
    double best = kInf;
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j)
            best = std::min(best, scaled_distance(points[i], points[j], lambda));
    return best;
}

/// 10 × 10 equidistant grid on [0, 1] × [1, 3] bar.
inline DesignSpace oed_grid() { return DesignSpace::grid("oed", {linspace(0.0, 1.0, 10), linspace(1e5, 3e5, 10)}); }

/// 9 × 3 equidistant grid on [0.05, 0.95] × [1, 3] bar.
inline DesignSpace fed_grid() { return DesignSpace::grid("fed", {linspace(0.05, 0.95, 9), linspace(1e5, 3e5, 3)}); }

/// Square-root factors F(x) of the one-point matrices of every candidate at θ̄.
inline std::vector<Matrix> candidate_factors(const ParametricModel& model, const DesignSpace& space,
                                             const Vector& theta, const NoiseModel& noise)
{
    std::vector<Matrix> out;
    out.reserve(space.size());
    for (const auto& x : space.points)
        out.push_back(info_factor(model, x, theta, noise));
    return out;
}

/// Factors for candidates known only through their one-point matrices.
inline std::vector<Matrix> factors_from_info(std::span<const Matrix> info)
{
    std::vector<Matrix> out;
    out.reserve(info.size());
    for (const auto& m : info)
        out.push_back(psd_factor(m));
    return out;
}

namespace detail {

inline double regularized_logdet(const Matrix& m)
{
    const double tau = 1e-8 * std::max(1.0, m.trace() / static_cast<double>(m.rows()));
    Matrix r = m;
    r.diagonal().array() += tau;
    Eigen::LLT<Matrix> llt(r);
    if (llt.info() != Eigen::Success)
        return -kInf;
    return 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
}

} // namespace detail

/// Greedy choice of a small candidate subset admitting an invertible combined
/// matrix αM⁻ + (1 − α)M(ξ) under uniform weights: points are added one at a
/// time by largest gain in regularized log det. Indices in order of selection.
inline std::vector<std::size_t> initial_support(const TwoStageContext& ctx, std::span<const Matrix> factors)
{
    ctx.validate();
    if (factors.empty())
        throw InfeasibleError("empty design space");
    const auto p = factors[0].cols();
    // Jacobi scaling from the total information, so the regularization ignores parameter units.
    Vector d = ctx.alpha > 0.0 ? Vector(ctx.prior_info.diagonal()) : Vector::Zero(p);
    for (const auto& f : factors)
        d += f.colwise().squaredNorm().transpose();
    Vector s(p);
    for (Eigen::Index i = 0; i < p; ++i)
        s[i] = d[i] > 0.0 ? 1.0 / std::sqrt(d[i]) : 1.0;
    const Matrix prior_s = ctx.alpha > 0.0 ? Matrix(s.asDiagonal() * ctx.prior_info * s.asDiagonal())
                                           : Matrix::Zero(p, p);
    std::vector<Matrix> scaled;
    scaled.reserve(factors.size());
    for (const auto& f : factors) {
        const Matrix fs = f * s.asDiagonal();
        scaled.push_back(fs.transpose() * fs);
    }

    const Matrix prior_root = ctx.alpha > 0.0 ? ctx.prior_root() : Matrix{};
    std::vector<std::size_t> chosen;
    std::vector<char> used(factors.size(), 0);
    Matrix sum = Matrix::Zero(p, p);
    while (chosen.size() < factors.size()) {
        double best = -kInf;
        std::size_t arg = factors.size();
        const double n = static_cast<double>(chosen.size() + 1);
        for (std::size_t i = 0; i < factors.size(); ++i) {
            if (used[i])
                continue;
            const Matrix trial = ctx.alpha * prior_s + (1.0 - ctx.alpha) * (sum + scaled[i]) / n;
            const double v = detail::regularized_logdet(trial);
            if (v > best) {
                best = v;
                arg = i;
            }
        }
        if (arg == factors.size())
            break;
        used[arg] = 1;
        chosen.push_back(arg);
        sum += scaled[arg];
        std::vector<Matrix> sub;
        for (auto i : chosen)
            sub.push_back(factors[i]);
        const std::vector<double> w(chosen.size(), 1.0 / static_cast<double>(chosen.size()));
        if (CombinedRoot(ctx.alpha, prior_root, sub, w).invertible())
            return chosen;
    }
    throw InfeasibleError("no subset of the design space yields an invertible information matrix");
}

struct InnerSolveOptions {
    double tolerance = 1e-6;
    int max_iterations = 100000;
};

struct InnerSolveResult {
    std::vector<double> weights;
    int iterations = 0;
    double gap = kInf; // max(−min ψ, max_{w>0} ψ) over the support
    double value = kInf;
};

/// Scale applied to sensitivities before comparing them with a tolerance:
/// 1 for D (already dimensionless), 1/Ψ for A, which is not unit-invariant.
inline double certificate_scale(Criterion c, double value)
{
    return c == Criterion::D ? 1.0 : 1.0 / value;
}

namespace detail {

/// argmin over γ ∈ [0, γmax] of Ψ(RᵀR + γ RᵀCR) for symmetric C.
inline double line_search(Criterion c, const CombinedRoot& root, const Matrix& C, double gamma_max)
{
    if (gamma_max <= 0.0)
        return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (C + C.transpose()));
    const Vector lam = es.eigenvalues();
    Vector coef = Vector::Ones(lam.size());
    if (c == Criterion::A)
        for (Eigen::Index i = 0; i < lam.size(); ++i)
            coef[i] = root.inverse_apply(es.eigenvectors().col(i)).squaredNorm();
    // φ'(γ); +∞ once the matrix leaves the positive definite cone.
    auto dphi = [&](double g) {
        double d = 0.0;
        for (Eigen::Index i = 0; i < lam.size(); ++i) {
            const double q = 1.0 + g * lam[i];
            if (q <= 0.0)
                return kInf;
            d += c == Criterion::D ? -lam[i] / q : -coef[i] * lam[i] / (q * q);
        }
        return d;
    };
    if (dphi(0.0) >= 0.0)
        return 0.0;
    if (dphi(gamma_max) <= 0.0)
        return gamma_max;
    double lo = 0.0, hi = gamma_max;
    for (int it = 0; it < 200 && hi - lo > 1e-16 * gamma_max; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (dphi(mid) > 0.0)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

/// Optimal weights on a fixed support (given by factors) by Frank-Wolfe with
/// away steps and exact line search. Stops once every support point's scaled
/// sensitivity is ≥ −tol and every weighted point's is ≤ tol.
inline InnerSolveResult inner_weight_solve(const TwoStageContext& ctx, std::span<const Matrix> factors,
                                           std::vector<double> weights = {}, const InnerSolveOptions& opt = {})
{
    const std::size_t k = factors.size();
    if (k == 0)
        throw DomainError("inner weight solve needs a nonempty support");
    if (weights.size() != k)
        weights.assign(k, 1.0 / static_cast<double>(k));
    InnerSolveResult res;
    std::vector<double> sens(k);
    std::vector<Matrix> U(k);
    for (int it = 0;; ++it) {
        res.iterations = it;
        const SensitivityField field(ctx, factors, weights);
        const double cs = certificate_scale(ctx.criterion, field.value());
        std::size_t fw = 0, away = k;
        for (std::size_t i = 0; i < k; ++i) {
            sens[i] = cs * field(factors[i]);
            if (sens[i] < sens[fw])
                fw = i;
            if (weights[i] > 0.0 && (away == k || sens[i] > sens[away]))
                away = i;
        }
        const double gap_fw = -sens[fw];
        const double gap_away = away < k ? sens[away] : 0.0;
        res.gap = std::max(gap_fw, gap_away);
        if (res.gap <= opt.tolerance || k == 1)
            break;
        if (it >= opt.max_iterations)
            throw ConvergenceError("inner weight solve did not reach tolerance " + std::to_string(opt.tolerance) +
                                   " (gap " + std::to_string(res.gap) + ")");

        // C = R⁻ᵀ B R⁻¹ for the step direction B, assembled from whitened factors.
        const auto& root = field.root();
        const auto p = factors[0].cols();
        Matrix W = Matrix::Zero(p, p);
        for (std::size_t i = 0; i < k; ++i)
            if (weights[i] > 0.0) {
                U[i] = root.whiten(factors[i]);
                W += weights[i] * U[i] * U[i].transpose();
            }
        const bool toward = gap_fw >= gap_away;
        const std::size_t j = toward ? fw : away;
        if (!(weights[j] > 0.0))
            U[j] = root.whiten(factors[j]);
        const Matrix Uj = U[j] * U[j].transpose();
        double g;
        if (toward) {
            g = detail::line_search(ctx.criterion, root, (1.0 - ctx.alpha) * (Uj - W), 1.0);
            if (g > 0.0) {
                for (auto& w : weights)
                    w *= 1.0 - g;
                weights[j] += g;
            }
        } else {
            const double wa = weights[j];
            const double gmax = wa / (1.0 - wa);
            g = detail::line_search(ctx.criterion, root, (1.0 - ctx.alpha) * (W - Uj), gmax);
            if (g > 0.0) {
                for (auto& w : weights)
                    w *= 1.0 + g;
                weights[j] = g >= gmax ? 0.0 : weights[j] - g;
            }
        }
        if (!(g > 0.0))
            throw ConvergenceError("inner weight solve stalled with gap " + std::to_string(res.gap));
    }
    res.value = CombinedRoot(ctx, factors, weights).value(ctx.criterion);
    res.weights = std::move(weights);
    return res;
}

/// Zero weights below the threshold and renormalize.
inline void prune_weights(std::vector<double>& w, double threshold = 1e-9)
{
    double total = 0.0;
    for (auto& x : w) {
        if (x < threshold)
            x = 0.0;
        total += x;
    }
    if (total > 0.0)
        for (auto& x : w)
            x /= total;
}

struct SolveOptions {
    double epsilon = 5e-5;
    int max_outer_iterations = 200;
    double prune_threshold = 1e-9;
};

struct SolveReport {
    WeightedDesign design;                   // support of ξ⁺ (positive weights only)
    std::vector<std::size_t> support;        // candidate indices of design.points
    std::vector<std::size_t> discretization; // final X̲^k as candidate indices
    std::vector<std::size_t> added;          // candidate added in each refinement
    std::vector<double> values;              // discretized optimum per iteration
    int iterations = 0;
    int inner_iterations = 0;
    double min_sensitivity = -kInf; // scaled as in certificate_scale
    std::size_t argmin_sensitivity = 0;
    double criterion_value = kInf;
    double epsilon = 0.0;
};

/// Scaled sensitivities of every candidate for a design given by candidate weights.
inline std::vector<double> grid_sensitivities(const TwoStageContext& ctx, std::span<const Matrix> factors,
                                              std::span<const double> weights)
{
    const SensitivityField field(ctx, factors, weights);
    const double cs = certificate_scale(ctx.criterion, field.value());
    std::vector<double> s(factors.size());
    for (std::size_t i = 0; i < factors.size(); ++i)
        s[i] = cs * field(factors[i]);
    return s;
}

/// Locally ε-optimal weighted design on the candidate set with factors
/// `factors`. The discretization grows by the strongest violator (lowest index
/// on ties) until no candidate has sensitivity below −ε.
inline SolveReport solve_weighted(const TwoStageContext& ctx, const DesignSpace& space,
                                  std::span<const Matrix> factors, const SolveOptions& opt = {})
{
    if (factors.size() != space.size())
        throw DomainError("candidate factors do not match the design space");
    if (!(opt.epsilon > 0.0))
        throw DomainError("optimality tolerance must be positive");
    SolveReport rep;
    rep.epsilon = opt.epsilon;
    std::vector<std::size_t> disc = initial_support(ctx, factors);
    std::vector<double> w(disc.size(), 1.0 / static_cast<double>(disc.size()));
    InnerSolveOptions inner;
    inner.tolerance = std::min(opt.epsilon / 10.0, 1e-6);

    for (int outer = 0;; ++outer) {
        std::vector<Matrix> sub;
        sub.reserve(disc.size());
        for (auto i : disc)
            sub.push_back(factors[i]);
        InnerSolveResult r;
        try {
            r = inner_weight_solve(ctx, sub, w, inner);
        } catch (const Error& e) {
            throw ConvergenceError("inner solve failed at outer iteration " + std::to_string(outer) + ": " + e.what());
        }
        rep.inner_iterations += r.iterations;
        w = r.weights;
        prune_weights(w, opt.prune_threshold);

        std::vector<double> full(factors.size(), 0.0);
        for (std::size_t j = 0; j < disc.size(); ++j)
            full[disc[j]] += w[j];
        rep.values.push_back(CombinedRoot(ctx, factors, full).value(ctx.criterion));
        const auto s = grid_sensitivities(ctx, factors, full);
        std::size_t arg = 0;
        for (std::size_t i = 1; i < s.size(); ++i)
            if (s[i] < s[arg])
                arg = i;
        rep.min_sensitivity = s[arg];
        rep.argmin_sensitivity = arg;
        rep.iterations = outer;
        if (s[arg] >= -opt.epsilon) {
            rep.criterion_value = rep.values.back();
            break;
        }
        if (outer >= opt.max_outer_iterations)
            throw ConvergenceError("adaptive discretization exceeded " + std::to_string(opt.max_outer_iterations) +
                                   " iterations");
        if (std::find(disc.begin(), disc.end(), arg) != disc.end()) {
            if (inner.tolerance <= 1e-12)
                throw ConvergenceError("strongest violator already in the discretization");
            inner.tolerance /= 100.0;
            continue;
        }
        disc.push_back(arg);
        rep.added.push_back(arg);
        w.push_back(0.0);
    }
    rep.discretization = disc;
    std::vector<std::size_t> order(disc.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return disc[a] < disc[b]; });
    for (auto j : order)
        if (w[j] > 0.0) {
            rep.support.push_back(disc[j]);
            rep.design.points.push_back(space.points[disc[j]]);
            rep.design.weights.push_back(w[j]);
        }
    return rep;
}

inline SolveReport solve_weighted(const TwoStageContext& ctx, const DesignSpace& space, const ParametricModel& model,
                                  const NoiseModel& noise, const SolveOptions& opt = {})
{
    const auto factors = candidate_factors(model, space, ctx.theta, noise);
    return solve_weighted(ctx, space, factors, opt);
}

} // namespace seqoed
