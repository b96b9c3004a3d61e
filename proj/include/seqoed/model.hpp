#pragma once

// Parametric-model abstraction, measurement-noise model, experimental designs
// and Fisher information matrices.

#include "core.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <unordered_map>

namespace seqoed {

/// A parametric model y = f(x, θ) together with its parameter Jacobian D_θ f.
class ParametricModel {
public:
    virtual ~ParametricModel() = default;

    virtual int input_dim() const = 0;
    virtual int param_dim() const = 0;
    virtual int output_dim() const = 0;

    virtual Vector predict(const Point& x, const Vector& theta) const = 0;

    /// d_y × d_θ matrix of partial derivatives of the outputs w.r.t. θ.
    virtual Matrix jacobian(const Point& x, const Vector& theta) const = 0;

    /// Prediction and Jacobian in one call; models with a shared solve override this.
    virtual std::pair<Vector, Matrix> predict_with_jacobian(const Point& x, const Vector& theta) const
    {
        return {predict(x, theta), jacobian(x, theta)};
    }
};

/// Model defined by closures, convenient for small explicit models.
class FunctionModel final : public ParametricModel {
public:
    using PredictFn = std::function<Vector(const Point&, const Vector&)>;
    using JacobianFn = std::function<Matrix(const Point&, const Vector&)>;

    FunctionModel(int input_dim, int param_dim, int output_dim, PredictFn predict, JacobianFn jacobian)
        : dx_(input_dim), dtheta_(param_dim), dy_(output_dim), predict_(std::move(predict)),
          jacobian_(std::move(jacobian))
    {
    }

    int input_dim() const override { return dx_; }
    int param_dim() const override { return dtheta_; }
    int output_dim() const override { return dy_; }
    Vector predict(const Point& x, const Vector& theta) const override { return predict_(x, theta); }
    Matrix jacobian(const Point& x, const Vector& theta) const override { return jacobian_(x, theta); }

private:
    int dx_, dtheta_, dy_;
    PredictFn predict_;
    JacobianFn jacobian_;
};

/// Models that are linear in θ: f(x, θ) = c(x) + J(x) θ, given by regressor rows.
class LinearModel final : public ParametricModel {
public:
    using OffsetFn = std::function<Vector(const Point&)>;
    using RegressorFn = std::function<Matrix(const Point&)>;

    LinearModel(int input_dim, int param_dim, int output_dim, RegressorFn regressor, OffsetFn offset = {})
        : dx_(input_dim), dtheta_(param_dim), dy_(output_dim), regressor_(std::move(regressor)),
          offset_(std::move(offset))
    {
    }

    int input_dim() const override { return dx_; }
    int param_dim() const override { return dtheta_; }
    int output_dim() const override { return dy_; }

    Vector offset(const Point& x) const { return offset_ ? offset_(x) : Vector::Zero(dy_); }
    Matrix regressor(const Point& x) const { return regressor_(x); }

    Vector predict(const Point& x, const Vector& theta) const override { return offset(x) + regressor(x) * theta; }
    Matrix jacobian(const Point& x, const Vector&) const override { return regressor(x); }

private:
    int dx_, dtheta_, dy_;
    RegressorFn regressor_;
    OffsetFn offset_;
};

/// Polynomial regression in one input: f(x, θ) = Σ_k θ_k x^k, k < degree + 1.
inline LinearModel polynomial_model(int degree)
{
    const int p = degree + 1;
    return LinearModel(1, p, 1, [p](const Point& x) {
        Matrix row(1, p);
        double xk = 1.0;
        for (int k = 0; k < p; ++k) {
            row(0, k) = xk;
            xk *= x[0];
        }
        return row;
    });
}

/// Gaussian measurement noise with covariance ς (d_y × d_y, positive definite).
class NoiseModel {
public:
    NoiseModel() = default;

    explicit NoiseModel(Matrix covariance) : covariance_(std::move(covariance))
    {
        if (covariance_.rows() != covariance_.cols() || covariance_.rows() == 0)
            throw DomainError("noise covariance must be a nonempty square matrix");
        Eigen::LLT<Matrix> llt(covariance_);
        if (llt.info() != Eigen::Success)
            throw DomainError("noise covariance must be positive definite");
        chol_ = llt.matrixL();
        precision_ = llt.solve(Matrix::Identity(covariance_.rows(), covariance_.cols()));
        precision_ = 0.5 * (precision_ + precision_.transpose()).eval();
    }

    static NoiseModel from_sigmas(std::initializer_list<double> sigmas)
    {
        Vector s(static_cast<Eigen::Index>(sigmas.size()));
        Eigen::Index i = 0;
        for (double v : sigmas)
            s[i++] = v;
        return from_sigmas(s);
    }

    static NoiseModel from_sigmas(const Vector& sigmas)
    {
        return NoiseModel(Matrix(sigmas.array().square().matrix().asDiagonal()));
    }

    int dim() const { return static_cast<int>(covariance_.rows()); }
    const Matrix& covariance() const { return covariance_; }
    const Matrix& precision() const { return precision_; }

    /// Lower Cholesky factor L with ς = L Lᵀ.
    const Matrix& cholesky() const { return chol_; }

    /// L⁻¹ r, so that ‖whiten(r)‖² = rᵀ ς⁻¹ r.
    Vector whiten(const Vector& r) const { return chol_.triangularView<Eigen::Lower>().solve(r); }
    Matrix whiten(const Matrix& j) const { return chol_.triangularView<Eigen::Lower>().solve(j); }

    Vector sigmas() const { return covariance_.diagonal().cwiseSqrt(); }

private:
    Matrix covariance_;
    Matrix precision_;
    Matrix chol_;
};

using UnweightedDesign = std::vector<Point>;

/// Probability-weighted design: weights[i] belongs to points[i].
struct WeightedDesign {
    std::vector<double> weights;
    std::vector<Point> points;

    std::size_t size() const { return points.size(); }

    double total_weight() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

    /// ξ_x̃: equal weight 1/n on each entry of an unweighted design (replications add up).
    static WeightedDesign from_unweighted(const UnweightedDesign& design)
    {
        if (design.empty())
            throw DomainError("cannot weight an empty design");
        WeightedDesign xi;
        const double w = 1.0 / static_cast<double>(design.size());
        for (const auto& x : design) {
            auto it = std::find_if(xi.points.begin(), xi.points.end(), [&](const Point& p) { return p == x; });
            if (it == xi.points.end()) {
                xi.points.push_back(x);
                xi.weights.push_back(w);
            } else {
                xi.weights[static_cast<std::size_t>(it - xi.points.begin())] += w;
            }
        }
        return xi;
    }

    /// Points carrying positive weight.
    WeightedDesign support() const
    {
        WeightedDesign s;
        for (std::size_t i = 0; i < size(); ++i)
            if (weights[i] > 0.0) {
                s.weights.push_back(weights[i]);
                s.points.push_back(points[i]);
            }
        return s;
    }

    bool is_valid(double tol = 1e-12) const
    {
        if (weights.size() != points.size() || weights.empty())
            return false;
        for (double w : weights)
            if (!(w >= 0.0))
                return false;
        return std::abs(total_weight() - 1.0) <= tol;
    }
};

/// m_f(x, θ̄) = D_θf(x, θ̄)ᵀ ς⁻¹ D_θf(x, θ̄).
inline Matrix one_point_info(const ParametricModel& model, const Point& x, const Vector& theta, const NoiseModel& noise)
{
    const Matrix wj = noise.whiten(model.jacobian(x, theta));
    Matrix m = wj.transpose() * wj;
    return 0.5 * (m + m.transpose());
}

/// Information matrix from a precomputed Jacobian.
inline Matrix info_from_jacobian(const Matrix& jac, const NoiseModel& noise)
{
    const Matrix wj = noise.whiten(jac);
    Matrix m = wj.transpose() * wj;
    return 0.5 * (m + m.transpose());
}

/// M_f(x̃, θ̄) = Σ_i m_f(x_i, θ̄).
inline Matrix design_info(const ParametricModel& model, std::span<const Point> design, const Vector& theta,
                          const NoiseModel& noise)
{
    Matrix m = Matrix::Zero(model.param_dim(), model.param_dim());
    for (const auto& x : design)
        m += one_point_info(model, x, theta, noise);
    return m;
}

/// M_f(ξ, θ̄) = Σ_x w_x m_f(x, θ̄).
inline Matrix design_info(const ParametricModel& model, const WeightedDesign& xi, const Vector& theta,
                          const NoiseModel& noise)
{
    Matrix m = Matrix::Zero(model.param_dim(), model.param_dim());
    for (std::size_t i = 0; i < xi.size(); ++i)
        if (xi.weights[i] != 0.0)
            m += xi.weights[i] * one_point_info(model, xi.points[i], theta, noise);
    return m;
}

/// Weighted sum of precomputed one-point matrices.
inline Matrix combine_info(std::span<const Matrix> one_point, std::span<const double> weights, int dim)
{
    Matrix m = Matrix::Zero(dim, dim);
    for (std::size_t i = 0; i < weights.size(); ++i)
        if (weights[i] != 0.0)
            m += weights[i] * one_point[i];
    return m;
}

/// Eigenvalue tolerance below which a PSD matrix is declared invalid.
inline constexpr double kPsdTolerance = 1e-10;

/// Smallest admissible eigenvalue of the Jacobi-scaled matrix (unit diagonal)
/// for numerical invertibility. Information matrices of azeotropic systems are
/// intrinsically ill-conditioned, so this sits far below kPsdTolerance while
/// staying well above rounding noise.
inline constexpr double kInvertibilityTolerance = 1e-13;

inline bool is_symmetric(const Matrix& m, double tol = 1e-12)
{
    if (m.rows() != m.cols())
        return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

/// Jacobi-scaled copy D^{-1/2} M D^{-1/2}; zero diagonal entries stay zero.
inline Matrix jacobi_scaled(const Matrix& m)
{
    Vector d = m.diagonal();
    Vector s(d.size());
    for (Eigen::Index i = 0; i < d.size(); ++i)
        s[i] = d[i] > 0.0 ? 1.0 / std::sqrt(d[i]) : 0.0;
    return s.asDiagonal() * m * s.asDiagonal();
}

inline bool is_psd(const Matrix& m, double tol = kPsdTolerance)
{
    if (!is_symmetric(m, 1e-9))
        return false;
    const Matrix s = jacobi_scaled(m);
    if (s.size() == 0)
        return true;
    Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -tol;
}

/// Numerical invertibility of a PSD matrix, judged on its Jacobi-scaled form
/// so that parameters with very different units do not distort the test.
inline bool is_invertible(const Matrix& m, double tol = kInvertibilityTolerance)
{
    if (m.rows() == 0)
        return false;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        if (!(m(i, i) > 0.0))
            return false;
    Eigen::SelfAdjointEigenSolver<Matrix> es(jacobi_scaled(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() > tol;
}

/// Orthonormal basis of the numerically deficient directions of a PSD matrix,
/// judged on the Jacobi-scaled matrix like is_invertible.
inline Matrix null_space(const Matrix& m, double tol = kInvertibilityTolerance)
{
    Vector s(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        s[i] = m(i, i) > 0.0 ? 1.0 / std::sqrt(m(i, i)) : 1.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(s.asDiagonal() * m * s.asDiagonal()));
    std::vector<Eigen::Index> cols;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        if (es.eigenvalues()[i] <= tol)
            cols.push_back(i);
    Matrix basis(m.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k)
        basis.col(static_cast<Eigen::Index>(k)) = s.asDiagonal() * es.eigenvectors().col(cols[k]);
    if (basis.cols() > 0)
        basis = Eigen::HouseholderQR<Matrix>(basis).householderQ() * Matrix::Identity(m.rows(), basis.cols());
    return basis;
}

/// One-point information matrices for a fixed list of candidate points,
/// keyed by point index and tied to one reference parameter θ̄.
/// Rebinding to a different θ̄ drops every cached entry.
class InfoCache {
public:
    InfoCache(const ParametricModel& model, std::vector<Point> points, const NoiseModel& noise)
        : model_(&model), points_(std::move(points)), noise_(noise)
    {
    }

    void bind(const Vector& theta)
    {
        if (bound_ && theta_.size() == theta.size() && theta_ == theta)
            return;
        theta_ = theta;
        bound_ = true;
        cache_.assign(points_.size(), std::nullopt);
    }

    const Matrix& at(std::size_t index)
    {
        if (!bound_)
            throw StateError("InfoCache used before binding a reference parameter");
        auto& slot = cache_.at(index);
        if (!slot)
            slot = one_point_info(*model_, points_[index], theta_, noise_);
        return *slot;
    }

    /// Fill every entry.
    void compute_all()
    {
        for (std::size_t i = 0; i < points_.size(); ++i)
            (void)at(i);
    }

    std::size_t size() const { return points_.size(); }
    const std::vector<Point>& points() const { return points_; }
    const Vector& theta() const { return theta_; }
    const ParametricModel& model() const { return *model_; }
    const NoiseModel& noise() const { return noise_; }

private:
    const ParametricModel* model_;
    std::vector<Point> points_;
    NoiseModel noise_;
    Vector theta_;
    bool bound_ = false;
    std::vector<std::optional<Matrix>> cache_;
};

} // namespace seqoed
