#pragma once

// Weighted least-squares estimation: SSE evaluation, the closed-form linear
// estimator, a box-projected Levenberg-Marquardt local solver with multistart,
// and the linearized covariance approximation.

#include "core.hpp"
#include "model.hpp"

#include <optional>
#include <random>
#include <tuple>

namespace seqoed {

/// One experiment: the input actually realized, the observed output and,
/// optionally, the input that had been planned.
struct Observation {
    Point x;
    Vector y;
    std::optional<Point> planned;
};

using Dataset = std::vector<Observation>;

inline UnweightedDesign actual_inputs(const Dataset& data)
{
    UnweightedDesign d;
    d.reserve(data.size());
    for (const auto& o : data)
        d.push_back(o.x);
    return d;
}

/// Model evaluation failed at a given data record.
class ModelEvaluationError : public EstimationError {
public:
    ModelEvaluationError(std::size_t index, const std::string& what)
        : EstimationError("model evaluation failed at record " + std::to_string(index) + ": " + what), index_(index)
    {
    }
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

/// Box constraints; empty vectors mean unconstrained.
struct Bounds {
    Vector lower;
    Vector upper;

    bool empty() const { return lower.size() == 0; }

    Vector project(const Vector& theta) const
    {
        if (empty())
            return theta;
        return theta.cwiseMax(lower).cwiseMin(upper);
    }
};

/// Whitened residuals L⁻¹(f(x_i, θ) − y_i) stacked over the dataset.
inline Vector whitened_residuals(const ParametricModel& model, const Vector& theta, const Dataset& data,
                                 const NoiseModel& noise)
{
    const int dy = model.output_dim();
    Vector r(static_cast<Eigen::Index>(data.size()) * dy);
    for (std::size_t i = 0; i < data.size(); ++i) {
        Vector f;
        try {
            f = model.predict(data[i].x, theta);
        } catch (const Error& e) {
            throw ModelEvaluationError(i, e.what());
        }
        r.segment(static_cast<Eigen::Index>(i) * dy, dy) = noise.whiten(Vector(f - data[i].y));
    }
    return r;
}

/// Whitened residuals and their Jacobian w.r.t. θ.
inline std::pair<Vector, Matrix> whitened_residuals_and_jacobian(const ParametricModel& model, const Vector& theta,
                                                                 const Dataset& data, const NoiseModel& noise)
{
    const int dy = model.output_dim();
    const auto n = static_cast<Eigen::Index>(data.size());
    Vector r(n * dy);
    Matrix J(n * dy, model.param_dim());
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::pair<Vector, Matrix> fj;
        try {
            fj = model.predict_with_jacobian(data[i].x, theta);
        } catch (const Error& e) {
            throw ModelEvaluationError(i, e.what());
        }
        const auto row = static_cast<Eigen::Index>(i) * dy;
        r.segment(row, dy) = noise.whiten(Vector(fj.first - data[i].y));
        J.middleRows(row, dy) = noise.whiten(fj.second);
    }
    return {r, J};
}

/// Σ_i (f(x_i, θ) − y_i)ᵀ ς⁻¹ (f(x_i, θ) − y_i).
inline double weighted_sse(const ParametricModel& model, const Vector& theta, const Dataset& data,
                           const NoiseModel& noise)
{
    return whitened_residuals(model, theta, data, noise).squaredNorm();
}

/// ∇_θ SSE = 2 Jᵀ ς⁻¹ r.
inline Vector weighted_sse_gradient(const ParametricModel& model, const Vector& theta, const Dataset& data,
                                    const NoiseModel& noise)
{
    auto [r, J] = whitened_residuals_and_jacobian(model, theta, data, noise);
    return 2.0 * J.transpose() * r;
}

struct LinearEstimate {
    Vector theta;
    bool rank_deficient = false; // minimal-norm solution returned
    int rank = 0;
};

/// Closed-form weighted least squares for f(x, θ) = c(x) + J(x) θ.
inline LinearEstimate linear_lse(const LinearModel& model, const Dataset& data, const NoiseModel& noise)
{
    if (data.empty())
        throw EstimationError("empty dataset");
    const int dy = model.output_dim();
    const auto n = static_cast<Eigen::Index>(data.size());
    Matrix J(n * dy, model.param_dim());
    Vector b(n * dy);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i) * dy;
        J.middleRows(row, dy) = noise.whiten(model.regressor(data[i].x));
        b.segment(row, dy) = noise.whiten(Vector(data[i].y - model.offset(data[i].x)));
    }
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(J);
    LinearEstimate out;
    out.rank = static_cast<int>(cod.rank());
    out.rank_deficient = out.rank < model.param_dim();
    out.theta = cod.solve(b);
    return out;
}

struct LevenbergMarquardtOptions {
    int max_iterations = 5000;
    double gradient_tolerance = 1e-8; // scaled (cosine) gradient measure
    double step_tolerance = 1e-12;    // relative step length
    double initial_lambda = 1e-3;
    double max_lambda = 1e16;
};

struct LocalFit {
    Vector theta;
    double sse = kInf;
    bool converged = false;
    int iterations = 0;
    double gradient_measure = kInf;
};

namespace detail {

/// max_i |J_iᵀ r| / (‖J_i‖ ‖r‖) over free coordinates; components sitting on a
/// bound with the gradient pointing out of the box are ignored.
inline double scaled_gradient(const Vector& r, const Matrix& J, const Vector& theta, const Bounds& bounds)
{
    const double rn = r.norm();
    if (rn == 0.0)
        return 0.0;
    const Vector g = J.transpose() * r;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        if (!bounds.empty()) {
            if (theta[i] <= bounds.lower[i] && g[i] > 0.0)
                continue;
            if (theta[i] >= bounds.upper[i] && g[i] < 0.0)
                continue;
        }
        const double cn = J.col(i).norm();
        if (cn == 0.0)
            continue;
        worst = std::max(worst, std::abs(g[i]) / (cn * rn));
    }
    return worst;
}

} // namespace detail

/// Levenberg-Marquardt with Marquardt diagonal scaling, λ ×10 / ÷10 adaptation
/// and projection of every trial point onto the box.
inline LocalFit levenberg_marquardt(const ParametricModel& model, const Dataset& data, const NoiseModel& noise,
                                    Vector theta, const Bounds& bounds = {}, const LevenbergMarquardtOptions& opt = {})
{
    LocalFit fit;
    theta = bounds.project(theta);
    Vector r;
    Matrix J;
    try {
        std::tie(r, J) = whitened_residuals_and_jacobian(model, theta, data, noise);
    } catch (const Error&) {
        fit.theta = theta;
        return fit;
    }
    double sse = r.squaredNorm();
    double lambda = opt.initial_lambda;
    const int p = static_cast<int>(theta.size());

    for (int it = 0; it < opt.max_iterations; ++it) {
        fit.iterations = it;
        const double gm = detail::scaled_gradient(r, J, theta, bounds);
        fit.gradient_measure = gm;
        if (gm < opt.gradient_tolerance || sse == 0.0) {
            fit.converged = true;
            break;
        }
        const Matrix A = J.transpose() * J;
        const Vector g = J.transpose() * r;
        // Coordinates held at a bound by the gradient are frozen for this step.
        std::vector<int> free;
        for (int i = 0; i < p; ++i) {
            const bool pinned = !bounds.empty() && ((theta[i] <= bounds.lower[i] && g[i] > 0.0) ||
                                                    (theta[i] >= bounds.upper[i] && g[i] < 0.0));
            if (!pinned)
                free.push_back(i);
        }
        const auto nf = static_cast<Eigen::Index>(free.size());
        Matrix Af(nf, nf);
        Vector gf(nf);
        for (Eigen::Index a = 0; a < nf; ++a) {
            gf[a] = g[free[a]];
            for (Eigen::Index b = 0; b < nf; ++b)
                Af(a, b) = A(free[a], free[b]);
        }
        Vector d = Af.diagonal();
        const double dmax = nf > 0 ? std::max(d.maxCoeff(), 1.0) : 1.0;
        for (Eigen::Index i = 0; i < nf; ++i)
            d[i] = std::max(d[i], 1e-12 * dmax);

        bool accepted = false;
        bool small_step = false;
        while (lambda <= opt.max_lambda) {
            Matrix H = Af;
            H.diagonal() += lambda * d;
            const Vector step_f = H.ldlt().solve(-gf);
            Vector step = Vector::Zero(p);
            for (Eigen::Index a = 0; a < nf; ++a)
                step[free[a]] = step_f[a];
            const Vector trial = bounds.project(theta + step);
            const Vector actual_step = trial - theta;
            double rel = 0.0;
            for (int i = 0; i < p; ++i)
                rel = std::max(rel, std::abs(actual_step[i]) / std::max(std::abs(theta[i]), 1.0));
            if (rel < opt.step_tolerance) {
                small_step = true;
                break;
            }
            Vector r_new;
            Matrix J_new;
            bool ok = true;
            try {
                std::tie(r_new, J_new) = whitened_residuals_and_jacobian(model, trial, data, noise);
            } catch (const Error&) {
                ok = false;
            }
            const double sse_new = ok ? r_new.squaredNorm() : kInf;
            if (ok && std::isfinite(sse_new) && sse_new < sse) {
                theta = trial;
                r = std::move(r_new);
                J = std::move(J_new);
                sse = sse_new;
                lambda = std::max(lambda / 10.0, 1e-12);
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        if (small_step) {
            fit.converged = true;
            break;
        }
        if (!accepted) {
            // No descent for any damping: stationary to working precision.
            fit.converged = detail::scaled_gradient(r, J, theta, bounds) < 1e-5;
            break;
        }
    }
    fit.theta = theta;
    fit.sse = sse;
    if (!fit.converged) {
        fit.gradient_measure = detail::scaled_gradient(r, J, theta, bounds);
        fit.converged = fit.gradient_measure < opt.gradient_tolerance;
    }
    return fit;
}

struct EstimationConfig {
    Bounds bounds;
    int multistarts = 32;
    std::uint64_t seed = 0;
    std::vector<Vector> warm_starts; // tried before the random starts
    double filter_factor = 100.0;    // reject a start whose SSE exceeds this multiple of the best seen
    LevenbergMarquardtOptions lm;
};

struct EstimateResult {
    Vector theta;
    double sse = kInf;
    bool converged = false;
    int start_index = -1;
    int starts_tried = 0;  // local solves actually run
    int starts_converged = 0;
};

/// Multistart weighted least squares. Start k < warm_starts.size() is the k-th
/// warm start; the rest are drawn uniformly from the box with the given seed.
/// Among converged local solves the smallest SSE wins, ties going to the lower
/// start index.
inline EstimateResult wls_estimate(const ParametricModel& model, const Dataset& data, const NoiseModel& noise,
                                   const EstimationConfig& config)
{
    if (data.empty())
        throw EstimationError("cannot estimate parameters from an empty dataset");
    const int p = model.param_dim();
    if (config.bounds.empty() && config.warm_starts.empty())
        throw EstimationError("random starts need finite parameter bounds");

    std::vector<Vector> starts = config.warm_starts;
    if (!config.bounds.empty()) {
        std::mt19937_64 rng(config.seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (int k = 0; k < config.multistarts; ++k) {
            Vector t(p);
            for (int i = 0; i < p; ++i)
                t[i] = config.bounds.lower[i] + unit(rng) * (config.bounds.upper[i] - config.bounds.lower[i]);
            starts.push_back(std::move(t));
        }
    }

    EstimateResult best;
    EstimateResult fallback; // best non-converged run, reported when nothing converges
    double best_candidate = kInf;
    std::string last_error = "no admissible start value";
    for (std::size_t k = 0; k < starts.size(); ++k) {
        const Vector start = config.bounds.project(starts[k]);
        double s0;
        try {
            s0 = weighted_sse(model, start, data, noise);
        } catch (const Error& e) {
            last_error = e.what();
            continue;
        }
        if (!std::isfinite(s0))
            continue;
        if (s0 > config.filter_factor * best_candidate)
            continue;
        best_candidate = std::min(best_candidate, s0);

        const LocalFit fit = levenberg_marquardt(model, data, noise, start, config.bounds, config.lm);
        ++best.starts_tried;
        if (fit.converged) {
            ++best.starts_converged;
            if (fit.sse < best.sse) {
                best.theta = fit.theta;
                best.sse = fit.sse;
                best.converged = true;
                best.start_index = static_cast<int>(k);
            }
        } else if (fit.sse < fallback.sse) {
            fallback.theta = fit.theta;
            fallback.sse = fit.sse;
            fallback.start_index = static_cast<int>(k);
        }
    }
    if (!best.converged) {
        if (fallback.start_index < 0)
            throw EstimationError("all " + std::to_string(starts.size()) +
                                  " start values failed; last error: " + last_error);
        fallback.starts_tried = best.starts_tried;
        fallback.starts_converged = 0;
        return fallback;
    }
    return best;
}

/// Linearized covariance M_f(x̃, θ̄)⁻¹ of the least-squares estimator.
inline Matrix covariance_from_info(const Matrix& info)
{
    if (!is_invertible(info))
        throw SingularityError("information matrix is singular; covariance undefined", null_space(info));
    Matrix cov = info.llt().solve(Matrix::Identity(info.rows(), info.cols()));
    return 0.5 * (cov + cov.transpose());
}

inline Matrix covariance_estimate(const ParametricModel& model, std::span<const Point> design, const Vector& theta,
                                  const NoiseModel& noise)
{
    return covariance_from_info(design_info(model, design, theta, noise));
}

} // namespace seqoed
