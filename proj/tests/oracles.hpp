#pragma once

// Reference criterion evaluations for tests. Information matrices of the VLE
// model are too ill-conditioned for dense determinants, so values are taken
// from a column-equilibrated QR of explicitly stacked whitened Jacobians.

#include <seqoed/criteria.hpp>

#include <cmath>
#include <vector>

namespace oracle {

using namespace seqoed;

/// Ψ(ZᵀZ) for the D or A criterion.
inline double qr_value(Criterion c, const Matrix& Z)
{
    const Vector s = Z.colwise().norm().cwiseInverse().transpose();
    const Matrix Zs = Z * s.asDiagonal();
    const Eigen::HouseholderQR<Matrix> qr(Zs);
    const Matrix R = qr.matrixQR().topRows(Z.cols()).triangularView<Eigen::Upper>();
    if (c == Criterion::D) {
        double logdet = 0.0;
        for (Eigen::Index i = 0; i < R.rows(); ++i)
            logdet += 2.0 * std::log(std::abs(R(i, i)));
        return -logdet + 2.0 * s.array().log().sum();
    }
    const Matrix Rinv = R.triangularView<Eigen::Upper>().solve(Matrix::Identity(R.rows(), R.cols()));
    double tr = 0.0;
    for (Eigen::Index j = 0; j < R.rows(); ++j)
        tr += s[j] * s[j] * Rinv.row(j).squaredNorm();
    return tr;
}

/// Ψ(α M(x̃⁻)/n⁻ + (1 − α) Σ_i w_i m(x_i)); points with zero weight are skipped.
inline double two_stage(Criterion c, double alpha, const UnweightedDesign& prior, const UnweightedDesign& points,
                        const std::vector<double>& weights, const ParametricModel& model, const Vector& theta,
                        const NoiseModel& noise)
{
    std::vector<Matrix> blocks;
    if (alpha > 0.0)
        for (const auto& x : prior)
            blocks.push_back(std::sqrt(alpha / static_cast<double>(prior.size())) * info_factor(model, x, theta, noise));
    for (std::size_t i = 0; i < points.size(); ++i)
        if (weights[i] > 0.0)
            blocks.push_back(std::sqrt((1.0 - alpha) * weights[i]) * info_factor(model, points[i], theta, noise));
    const auto dy = blocks.front().rows();
    Matrix Z(static_cast<Eigen::Index>(blocks.size()) * dy, model.param_dim());
    for (std::size_t i = 0; i < blocks.size(); ++i)
        Z.middleRows(static_cast<Eigen::Index>(i) * dy, dy) = blocks[i];
    return qr_value(c, Z);
}

/// Uniform design on `points`.
inline double two_stage_uniform(Criterion c, double alpha, const UnweightedDesign& prior,
                                const UnweightedDesign& points, const ParametricModel& model, const Vector& theta,
                                const NoiseModel& noise)
{
    return two_stage(c, alpha, prior, points, std::vector<double>(points.size(), 1.0 / points.size()), model, theta,
                     noise);
}

/// One-sided second-order difference of Ψ along ξ → (1 − t)ξ + tδ_x at t = 0.
inline double directional_fd(Criterion c, double alpha, const UnweightedDesign& prior, const UnweightedDesign& design,
                             const Point& x, const ParametricModel& model, const Vector& theta,
                             const NoiseModel& noise, double h = 1e-4)
{
    auto at = [&](double t) {
        UnweightedDesign pts = design;
        std::vector<double> w(design.size(), (1.0 - t) / design.size());
        pts.push_back(x);
        w.push_back(t);
        return two_stage(c, alpha, prior, pts, w, model, theta, noise);
    };
    return (-3.0 * at(0.0) + 4.0 * at(h) - at(2.0 * h)) / (2.0 * h);
}

} // namespace oracle
