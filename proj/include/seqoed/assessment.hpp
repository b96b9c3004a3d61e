#pragma once

// Design-quality metrics: prediction errors, linearization- and sampling-based
// prediction uncertainties and their worst cases over an evaluation grid.

#include "core.hpp"
#include "estimation.hpp"
#include "model.hpp"
#include "solver.hpp"

#include <map>
#include <random>

namespace seqoed {

/// Component-wise root mean squared prediction error on a reference dataset.
inline Vector rmse(const ParametricModel& model, const Vector& theta, const Dataset& reference)
{
    if (reference.empty())
        throw DomainError("reference dataset is empty");
    Vector acc = Vector::Zero(model.output_dim());
    for (std::size_t i = 0; i < reference.size(); ++i) {
        Vector f;
        try {
            f = model.predict(reference[i].x, theta);
        } catch (const Error& e) {
            throw ModelEvaluationError(i, e.what());
        }
        acc += (f - reference[i].y).cwiseAbs2();
    }
    return (acc / static_cast<double>(reference.size())).cwiseSqrt();
}

/// Which information matrix the linearized variance uses: the plain sum M(x̃)
/// (variance of the estimate from this very design) or the per-experiment
/// matrix M(ξ_x̃) = M(x̃)/n (design quality independent of its size).
enum class InfoNormalization { total, per_experiment };

inline std::string to_string(InfoNormalization n) { return n == InfoNormalization::total ? "total" : "per_experiment"; }

inline InfoNormalization normalization_from_string(std::string_view s)
{
    if (s == "total")
        return InfoNormalization::total;
    if (s == "per_experiment" || s == "per-experiment")
        return InfoNormalization::per_experiment;
    throw DomainError("unknown information normalization '" + std::string(s) + "'");
}

/// Linearized prediction standard deviations at many points for one design.
class LinearizedPredictor {
public:
    LinearizedPredictor(const ParametricModel& model, const UnweightedDesign& design, const Vector& theta,
                        const NoiseModel& noise, InfoNormalization norm = InfoNormalization::total)
        : model_(&model), theta_(theta)
    {
        if (design.empty())
            throw DomainError("design is empty");
        const int dy = model.output_dim();
        Matrix Z(static_cast<Eigen::Index>(design.size()) * dy, model.param_dim());
        for (std::size_t i = 0; i < design.size(); ++i)
            Z.middleRows(static_cast<Eigen::Index>(i) * dy, dy) = info_factor(model, design[i], theta, noise);
        if (norm == InfoNormalization::per_experiment)
            Z /= std::sqrt(static_cast<double>(design.size()));
        const std::vector<double> one{1.0};
        root_.emplace(0.0, Matrix{}, std::span<const Matrix>(&Z, 1), one);
        if (!root_->invertible()) {
            const Matrix M = Z.transpose() * Z;
            throw SingularityError("information matrix of the design is singular", null_space(M));
        }
    }

    /// (σ_1, …, σ_dy) at x: sqrt(∇f_jᵀ M⁻¹ ∇f_j).
    Vector operator()(const Point& x) const
    {
        const Matrix J = model_->jacobian(x, theta_);
        const Matrix U = root_->whiten(J); // p × dy
        return U.colwise().norm().transpose();
    }

private:
    const ParametricModel* model_;
    Vector theta_;
    std::optional<CombinedRoot> root_;
};

inline Vector lin_prediction_sigma(const ParametricModel& model, const Point& x, const UnweightedDesign& design,
                                   const Vector& theta, const NoiseModel& noise,
                                   InfoNormalization norm = InfoNormalization::total)
{
    return LinearizedPredictor(model, design, theta, noise, norm)(x);
}

struct SamplingOptions {
    int n_sam = 1000;
    std::uint64_t seed = 1;
    int multistarts = 8;      // random starts per refit, after the warm start θ̄
    int retry_cap = 10;       // redraws allowed per sample before giving up
    double noise_scale = 1.0; // multiplies the simulated noise; 0 gives noiseless refits
    Bounds bounds;
    LevenbergMarquardtOptions lm;
};

/// Sampling-based prediction standard deviations at every point of `points`:
/// refit θ̂ on n_sam synthetic datasets f(x̃, θ̄) + ε and take the population
/// standard deviation (divisor n_sam) of the predictions. Row i belongs to points[i].
inline Matrix sam_prediction_sigmas(const ParametricModel& model, std::span<const Point> points,
                                    const UnweightedDesign& design, const Vector& theta, const NoiseModel& noise,
                                    const SamplingOptions& opt = {})
{
    if (opt.n_sam < 2)
        throw DomainError("sampling needs at least two samples");
    if (design.empty())
        throw DomainError("design is empty");
    const int dy = model.output_dim();
    const auto np = static_cast<Eigen::Index>(points.size());

    Dataset base;
    base.reserve(design.size());
    for (const auto& x : design)
        base.push_back({x, model.predict(x, theta), std::nullopt});

    std::vector<Matrix> preds;
    preds.reserve(static_cast<std::size_t>(opt.n_sam));
    for (int s = 0; s < opt.n_sam; ++s) {
        bool done = false;
        std::string last;
        for (int attempt = 0; attempt <= opt.retry_cap && !done; ++attempt) {
            std::seed_seq seq{static_cast<std::uint64_t>(opt.seed), static_cast<std::uint64_t>(s),
                              static_cast<std::uint64_t>(attempt)};
            std::mt19937_64 rng(seq);
            std::normal_distribution<double> normal;
            Dataset data = base;
            for (auto& o : data) {
                Vector z(dy);
                for (int j = 0; j < dy; ++j)
                    z[j] = normal(rng);
                o.y += opt.noise_scale * (noise.cholesky() * z);
            }
            EstimationConfig cfg;
            cfg.bounds = opt.bounds;
            cfg.multistarts = opt.bounds.empty() ? 0 : opt.multistarts;
            cfg.seed = rng();
            cfg.warm_starts = {theta};
            cfg.lm = opt.lm;
            try {
                const EstimateResult est = wls_estimate(model, data, noise, cfg);
                if (!est.converged) {
                    last = "refit did not converge";
                    continue;
                }
                Matrix p(np, dy);
                for (Eigen::Index i = 0; i < np; ++i)
                    p.row(i) = model.predict(points[static_cast<std::size_t>(i)], est.theta).transpose();
                preds.push_back(std::move(p));
                done = true;
            } catch (const Error& e) {
                last = e.what();
            }
        }
        if (!done)
            throw EstimationError("sample " + std::to_string(s) + " failed after " + std::to_string(opt.retry_cap) +
                                  " redraws: " + last);
    }
    Matrix mean = Matrix::Zero(np, dy);
    for (const auto& p : preds)
        mean += p;
    mean /= static_cast<double>(opt.n_sam);
    Matrix var = Matrix::Zero(np, dy);
    for (const auto& p : preds)
        var += (p - mean).cwiseAbs2();
    return (var / static_cast<double>(opt.n_sam)).cwiseSqrt();
}

inline Vector sam_prediction_sigma(const ParametricModel& model, const Point& x, const UnweightedDesign& design,
                                   const Vector& theta, const NoiseModel& noise, const SamplingOptions& opt = {})
{
    return sam_prediction_sigmas(model, std::span<const Point>(&x, 1), design, theta, noise, opt).row(0).transpose();
}

/// 201 × 21 equidistant evaluation grid over [0, 1] × [1, 3] bar.
inline DesignSpace evaluation_grid(int nl = 201, int np = 21)
{
    return DesignSpace::grid("evaluation", {linspace(0.0, 1.0, nl), linspace(1e5, 3e5, np)});
}

struct WorstCase {
    Vector sigma;                 // max over the grid, per output
    std::vector<Point> argmax;    // maximizing grid point, per output
    std::vector<double> curve_x;  // distinct values of the first input coordinate
    Matrix curve;                 // max over the remaining coordinates, per output
    Matrix values;                // σ at every grid point (row per point)
};

/// Worst case and first-coordinate curves from pointwise σ values on a grid.
inline WorstCase summarize_worst_case(const DesignSpace& grid, const Matrix& values)
{
    WorstCase wc;
    wc.values = values;
    const auto dy = values.cols();
    wc.sigma = Vector::Zero(dy);
    wc.argmax.assign(static_cast<std::size_t>(dy), grid.points.front());
    std::map<double, Vector> curve;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Vector row = values.row(static_cast<Eigen::Index>(i)).transpose();
        for (Eigen::Index j = 0; j < dy; ++j)
            if (row[j] > wc.sigma[j]) {
                wc.sigma[j] = row[j];
                wc.argmax[static_cast<std::size_t>(j)] = grid.points[i];
            }
        auto [it, inserted] = curve.try_emplace(grid.points[i][0], row);
        if (!inserted)
            it->second = it->second.cwiseMax(row);
    }
    wc.curve.resize(static_cast<Eigen::Index>(curve.size()), dy);
    Eigen::Index r = 0;
    for (const auto& [x, v] : curve) {
        wc.curve_x.push_back(x);
        wc.curve.row(r++) = v.transpose();
    }
    return wc;
}

inline WorstCase worst_case_lin_sigma(const ParametricModel& model, const UnweightedDesign& design,
                                      const Vector& theta, const NoiseModel& noise, const DesignSpace& grid,
                                      InfoNormalization norm = InfoNormalization::total)
{
    if (grid.points.empty())
        throw DomainError("evaluation grid is empty");
    const LinearizedPredictor pred(model, design, theta, noise, norm);
    Matrix values(static_cast<Eigen::Index>(grid.size()), model.output_dim());
    for (std::size_t i = 0; i < grid.size(); ++i)
        values.row(static_cast<Eigen::Index>(i)) = pred(grid.points[i]).transpose();
    return summarize_worst_case(grid, values);
}

inline WorstCase worst_case_sam_sigma(const ParametricModel& model, const UnweightedDesign& design,
                                      const Vector& theta, const NoiseModel& noise, const DesignSpace& grid,
                                      const SamplingOptions& opt = {})
{
    if (grid.points.empty())
        throw DomainError("evaluation grid is empty");
    return summarize_worst_case(grid, sam_prediction_sigmas(model, grid.points, design, theta, noise, opt));
}

} // namespace seqoed
