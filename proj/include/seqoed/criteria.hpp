#pragma once

// Design criteria, the two-stage criterion and its sensitivity function.
//
// Information matrices of implicit models are often badly conditioned, so the
// combined matrix is handled through a square-root factor: every one-point
// matrix is m = FᵀF with F the whitened Jacobian, and A = ZᵀZ = RᵀR with Z the
// stacked, weight-scaled factors. Quantities such as tr(A⁻¹m) then become
// ‖R⁻ᵀFᵀ‖², which loses only cond(R) = √cond(A) digits.

#include "core.hpp"
#include "model.hpp"

#include <span>
#include <string>
#include <string_view>

namespace seqoed {

enum class Criterion { D, A };

inline std::string to_string(Criterion c) { return c == Criterion::D ? "D" : "A"; }

inline Criterion criterion_from_string(std::string_view s)
{
    if (s == "D" || s == "d")
        return Criterion::D;
    if (s == "A" || s == "a")
        return Criterion::A;
    throw DomainError("unknown design criterion '" + std::string(s) + "'");
}

/// D: −ln det M, A: tr M⁻¹; +∞ when M is not positive definite.
inline double criterion_value(Criterion c, const Matrix& M)
{
    if (M.rows() == 0 || !is_invertible(M))
        return kInf;
    Eigen::LLT<Matrix> llt(M);
    if (llt.info() != Eigen::Success)
        return kInf;
    if (c == Criterion::D) {
        const Vector d = Matrix(llt.matrixL()).diagonal();
        return -2.0 * d.array().log().sum();
    }
    return llt.solve(Matrix::Identity(M.rows(), M.cols())).trace();
}

/// ∇Ψ(A): −A⁻¹ for D, −A⁻² for A.
inline Matrix criterion_gradient(Criterion c, const Matrix& A)
{
    if (!is_invertible(A))
        throw SingularityError("criterion gradient needs a positive definite matrix", null_space(A));
    Matrix inv = A.llt().solve(Matrix::Identity(A.rows(), A.cols()));
    inv = 0.5 * (inv + inv.transpose()).eval();
    if (c == Criterion::D)
        return -inv;
    return -(inv * inv);
}

/// F with FᵀF = M for a symmetric PSD matrix (negative eigenvalues clipped).
inline Matrix psd_factor(const Matrix& M)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (M + M.transpose()));
    const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return root.asDiagonal() * es.eigenvectors().transpose();
}

/// Whitened Jacobian F(x) with m_f(x, θ̄) = FᵀF.
inline Matrix info_factor(const ParametricModel& model, const Point& x, const Vector& theta, const NoiseModel& noise)
{
    return noise.whiten(model.jacobian(x, theta));
}

/// Ψ^(α)(ξ) = Ψ(α M(ξ_x̃⁻) + (1 − α) M(ξ)), with M(ξ_x̃⁻) = M(x̃⁻)/n⁻ held fixed.
struct TwoStageContext {
    Criterion criterion = Criterion::D;
    double alpha = 0.0;
    Matrix prior_info;   // M(ξ_x̃⁻, θ̄); zero matrix when there is no prior design
    Matrix prior_factor; // optional: rows with prior_factorᵀ prior_factor = prior_info
    Vector theta;        // θ̄

    Matrix combined(const Matrix& M) const
    {
        if (alpha == 0.0 || prior_info.size() == 0)
            return M;
        return alpha * prior_info + (1.0 - alpha) * M;
    }

    /// Square-root factor of the prior information (derived from prior_info if not given).
    Matrix prior_root() const
    {
        if (prior_factor.size() != 0)
            return prior_factor;
        if (prior_info.size() == 0)
            return {};
        return psd_factor(prior_info);
    }

    void validate() const
    {
        if (!(alpha >= 0.0 && alpha < 1.0))
            throw DomainError("importance factor must lie in [0, 1)");
        if (alpha > 0.0 && prior_info.size() == 0)
            throw DomainError("a positive importance factor needs a prior design");
    }
};

inline TwoStageContext make_two_stage_context(Criterion c, double alpha, const UnweightedDesign& prior,
                                              const ParametricModel& model, const Vector& theta,
                                              const NoiseModel& noise)
{
    TwoStageContext ctx;
    ctx.criterion = c;
    ctx.alpha = alpha;
    ctx.theta = theta;
    const int p = model.param_dim();
    if (prior.empty()) {
        ctx.prior_info = Matrix::Zero(p, p);
    } else {
        const int dy = model.output_dim();
        const double scale = 1.0 / std::sqrt(static_cast<double>(prior.size()));
        ctx.prior_factor.resize(static_cast<Eigen::Index>(prior.size()) * dy, p);
        for (std::size_t i = 0; i < prior.size(); ++i)
            ctx.prior_factor.middleRows(static_cast<Eigen::Index>(i) * dy, dy) =
                scale * info_factor(model, prior[i], theta, noise);
        ctx.prior_info = ctx.prior_factor.transpose() * ctx.prior_factor;
        ctx.prior_info = 0.5 * (ctx.prior_info + ctx.prior_info.transpose()).eval();
    }
    ctx.validate();
    return ctx;
}

inline double two_stage_value(const TwoStageContext& ctx, const Matrix& M)
{
    return criterion_value(ctx.criterion, ctx.combined(M));
}

inline double two_stage_value(const TwoStageContext& ctx, const WeightedDesign& xi, const ParametricModel& model,
                              const NoiseModel& noise)
{
    return two_stage_value(ctx, design_info(model, xi, ctx.theta, noise));
}

/// Upper-triangular R with RᵀR = αM⁻ + (1 − α) Σ_i w_i F_iᵀF_i.
class CombinedRoot {
public:
    CombinedRoot(const TwoStageContext& ctx, std::span<const Matrix> factors, std::span<const double> weights)
        : CombinedRoot(ctx.alpha, ctx.alpha > 0.0 ? ctx.prior_root() : Matrix{}, factors, weights)
    {
    }

    CombinedRoot(double alpha, const Matrix& prior_root, std::span<const Matrix> factors,
                 std::span<const double> weights)
    {
        if (factors.empty() && prior_root.size() == 0)
            throw DomainError("no information to combine");
        const Eigen::Index p = factors.empty() ? prior_root.cols() : factors[0].cols();
        Eigen::Index rows = alpha > 0.0 ? prior_root.rows() : 0;
        for (std::size_t i = 0; i < factors.size(); ++i)
            if (weights[i] > 0.0)
                rows += factors[i].rows();
        Matrix Z(std::max<Eigen::Index>(rows, p), p);
        Z.setZero();
        Eigen::Index r = 0;
        if (alpha > 0.0 && prior_root.rows() > 0) {
            Z.middleRows(r, prior_root.rows()) = std::sqrt(alpha) * prior_root;
            r += prior_root.rows();
        }
        for (std::size_t i = 0; i < factors.size(); ++i)
            if (weights[i] > 0.0) {
                Z.middleRows(r, factors[i].rows()) = std::sqrt((1.0 - alpha) * weights[i]) * factors[i];
                r += factors[i].rows();
            }
        // Column scaling keeps the QR and the rank test independent of parameter units.
        scale_.resize(p);
        for (Eigen::Index j = 0; j < p; ++j) {
            const double n = Z.col(j).norm();
            scale_[j] = n > 0.0 ? 1.0 / n : 0.0;
        }
        const Matrix Zs = Z * scale_.asDiagonal();
        Eigen::HouseholderQR<Matrix> qr(Zs);
        Rs_ = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
        for (Eigen::Index j = 0; j < p; ++j)
            if (Rs_(j, j) < 0.0)
                Rs_.row(j) *= -1.0;
        invertible_ = scale_.minCoeff() > 0.0;
        if (invertible_) {
            const Eigen::JacobiSVD<Matrix> svd(Rs_);
            const double smin = svd.singularValues().minCoeff();
            invertible_ = smin * smin > kInvertibilityTolerance;
        }
    }

    bool invertible() const { return invertible_; }

    /// R⁻ᵀ Fᵀ, so that tr(A⁻¹ FᵀF) = ‖·‖²_F.
    Matrix whiten(const Matrix& F) const
    {
        const Matrix Ft = scale_.asDiagonal() * F.transpose();
        return Rs_.transpose().triangularView<Eigen::Lower>().solve(Ft);
    }

    /// A⁻¹ Fᵀ, so that tr(A⁻² FᵀF) = ‖·‖²_F.
    Matrix solve(const Matrix& F) const
    {
        return scale_.asDiagonal() * Matrix(Rs_.triangularView<Eigen::Upper>().solve(whiten(F)));
    }

    /// R⁻¹ v.
    Vector inverse_apply(const Vector& v) const
    {
        return scale_.asDiagonal() * Vector(Rs_.triangularView<Eigen::Upper>().solve(v));
    }

    double value(Criterion c) const
    {
        if (!invertible_)
            return kInf;
        if (c == Criterion::D)
            return -2.0 * (Rs_.diagonal().array().log().sum() - scale_.array().log().sum());
        const Matrix Rinv = Rs_.triangularView<Eigen::Upper>().solve(Matrix::Identity(Rs_.rows(), Rs_.cols()));
        return (scale_.asDiagonal() * Rinv).squaredNorm();
    }

    /// Ψ'(A)[FᵀF] = −tr(G FᵀF) with G = A⁻¹ (D) or A⁻² (A), returned without the sign.
    double directional(Criterion c, const Matrix& F) const
    {
        return c == Criterion::D ? whiten(F).squaredNorm() : solve(F).squaredNorm();
    }

private:
    Vector scale_;
    Matrix Rs_; // factor of the column-scaled problem: A = S⁻¹ RsᵀRs S⁻¹
    bool invertible_ = false;
};

/// Sensitivity of Ψ^(α) at ξ along m(x) − M(ξ) for candidates given by factors:
/// ψ(x) = −(1 − α)(tr(G m(x)) − tr(G M(ξ))), G = A⁻¹ (D) or A⁻² (A).
class SensitivityField {
public:
    SensitivityField(const TwoStageContext& ctx, std::span<const Matrix> factors, std::span<const double> weights)
        : criterion_(ctx.criterion), scale_(1.0 - ctx.alpha), root_(ctx, factors, weights)
    {
        if (!root_.invertible())
            throw SingularityError("sensitivity undefined: combined information matrix is singular");
        for (std::size_t i = 0; i < factors.size(); ++i)
            if (weights[i] > 0.0)
                base_ += weights[i] * root_.directional(criterion_, factors[i]);
    }

    double operator()(const Matrix& factor) const
    {
        return -scale_ * (root_.directional(criterion_, factor) - base_);
    }

    const CombinedRoot& root() const { return root_; }
    double value() const { return root_.value(criterion_); }

private:
    Criterion criterion_;
    double scale_;
    CombinedRoot root_;
    double base_ = 0.0;
};

/// Sensitivity function evaluated from matrices (convenient for small models).
class Sensitivity {
public:
    Sensitivity(const TwoStageContext& ctx, const Matrix& M) : scale_(1.0 - ctx.alpha)
    {
        const Matrix A = ctx.combined(M);
        if (!is_invertible(A))
            throw SingularityError("sensitivity undefined: combined information matrix is singular", null_space(A));
        grad_ = criterion_gradient(ctx.criterion, A);
        base_ = grad_.cwiseProduct(M).sum();
    }

    double operator()(const Matrix& m) const { return scale_ * (grad_.cwiseProduct(m).sum() - base_); }

    const Matrix& gradient() const { return grad_; }

private:
    double scale_;
    Matrix grad_;
    double base_ = 0.0;
};

inline double sensitivity(const TwoStageContext& ctx, const WeightedDesign& xi, const Point& x,
                          const ParametricModel& model, const NoiseModel& noise)
{
    std::vector<Matrix> factors;
    factors.reserve(xi.size());
    for (const auto& p : xi.points)
        factors.push_back(info_factor(model, p, ctx.theta, noise));
    const SensitivityField field(ctx, factors, xi.weights);
    return field(info_factor(model, x, ctx.theta, noise));
}

} // namespace seqoed
