#include <seqoed/io.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace seqoed;

namespace {

Matrix random_spd(int p, std::mt19937_64& rng)
{
    std::normal_distribution<double> n;
    Matrix B(p + 2, p);
    for (Eigen::Index i = 0; i < B.rows(); ++i)
        for (Eigen::Index j = 0; j < B.cols(); ++j)
            B(i, j) = n(rng);
    return B.transpose() * B;
}

struct VleSetup {
    vle::VleModel model;
    NoiseModel noise = vle::case_study_noise();
    Vector theta = vle::theta_tot().to_vector();
    UnweightedDesign prior = fixtures::stage_inputs("init");
};

} // namespace

TEST(Criterion, ValuesMatchEigenvalues)
{
    std::mt19937_64 rng(1);
    for (int rep = 0; rep < 10; ++rep) {
        const Matrix M = random_spd(4, rng);
        const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(M).eigenvalues();
        EXPECT_NEAR(criterion_value(Criterion::D, M), -ev.array().log().sum(), 1e-10);
        EXPECT_NEAR(criterion_value(Criterion::A, M), ev.cwiseInverse().sum(), 1e-9 * ev.cwiseInverse().sum());
    }
}

TEST(Criterion, SingularIsInfinite)
{
    Matrix M = Matrix::Zero(2, 2);
    M(0, 0) = 1.0;
    EXPECT_EQ(criterion_value(Criterion::D, M), kInf);
    EXPECT_EQ(criterion_value(Criterion::A, M), kInf);
}

TEST(Criterion, NamesRoundTrip)
{
    EXPECT_EQ(criterion_from_string(to_string(Criterion::A)), Criterion::A);
    EXPECT_EQ(criterion_from_string("D"), Criterion::D);
    EXPECT_THROW(criterion_from_string("E"), DomainError);
}

TEST(CombinedRootTest, AgreesWithDenseComputation)
{
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n;
    std::vector<Matrix> factors;
    for (int i = 0; i < 6; ++i) {
        Matrix F(2, 4);
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 4; ++c)
                F(r, c) = n(rng);
        factors.push_back(F);
    }
    const std::vector<double> w{0.1, 0.2, 0.3, 0.15, 0.05, 0.2};
    Matrix prior = random_spd(4, rng);
    TwoStageContext ctx;
    ctx.alpha = 0.4;
    ctx.prior_info = prior;
    ctx.theta = Vector::Zero(4);
    Matrix M = Matrix::Zero(4, 4);
    for (std::size_t i = 0; i < factors.size(); ++i)
        M += w[i] * factors[i].transpose() * factors[i];
    const Matrix A = ctx.combined(M);
    const CombinedRoot root(ctx, factors, w);
    ASSERT_TRUE(root.invertible());
    for (auto c : {Criterion::D, Criterion::A}) {
        const double dense = criterion_value(c, A);
        EXPECT_NEAR(root.value(c), dense, 1e-9 * std::abs(dense));
    }
    const Matrix Ainv = A.inverse();
    const Matrix& F = factors[2];
    EXPECT_NEAR(root.directional(Criterion::D, F), (Ainv * F.transpose() * F).trace(), 1e-9);
    EXPECT_NEAR(root.directional(Criterion::A, F), (Ainv * Ainv * F.transpose() * F).trace(), 1e-9);
}

TEST(TwoStage, ContextValidation)
{
    TwoStageContext ctx;
    ctx.alpha = 1.0;
    EXPECT_THROW(ctx.validate(), DomainError);
    ctx.alpha = 0.5;
    EXPECT_THROW(ctx.validate(), DomainError); // no prior design
    ctx.alpha = 0.0;
    EXPECT_NO_THROW(ctx.validate());
}

TEST(TwoStage, PriorInformationIsAveraged)
{
    const VleSetup s;
    const auto ctx = make_two_stage_context(Criterion::D, 0.5, s.prior, s.model, s.theta, s.noise);
    const Matrix expected = design_info(s.model, s.prior, s.theta, s.noise) / 6.0;
    EXPECT_LT((ctx.prior_info - expected).norm(), 1e-9 * expected.norm());
}

class SensitivityTest : public ::testing::TestWithParam<std::tuple<Criterion, double>> {};

TEST_P(SensitivityTest, MatchesDirectionalDerivative)
{
    const auto [criterion, alpha] = GetParam();
    const VleSetup s;
    const auto ctx = make_two_stage_context(criterion, alpha, s.prior, s.model, s.theta, s.noise);
    const UnweightedDesign design = fixtures::stage_inputs("oed1");
    const WeightedDesign xi = WeightedDesign::from_unweighted(design);
    const DesignSpace space = oed_grid();
    double worst = 0.0;
    for (std::size_t i = 0; i < space.size(); i += 3) {
        const Point& x = space.points[i];
        const double psi = sensitivity(ctx, xi, x, s.model, s.noise);
        const double fd = oracle::directional_fd(criterion, alpha, s.prior, design, x, s.model, s.theta, s.noise);
        worst = std::max(worst, std::abs(psi - fd) / std::max(std::abs(fd), 1e-3 * std::abs(psi) + 1e-12));
    }
    EXPECT_LT(worst, 1e-3);
}

TEST_P(SensitivityTest, MatrixAndFactorFormsAgree)
{
    const auto [criterion, alpha] = GetParam();
    const VleSetup s;
    const auto ctx = make_two_stage_context(criterion, alpha, s.prior, s.model, s.theta, s.noise);
    const WeightedDesign xi = WeightedDesign::from_unweighted(fixtures::stage_inputs("fed2"));
    const Sensitivity dense(ctx, design_info(s.model, xi, s.theta, s.noise));
    for (const auto& x : oed_grid().points) {
        const double a = dense(one_point_info(s.model, x, s.theta, s.noise));
        const double b = sensitivity(ctx, xi, x, s.model, s.noise);
        EXPECT_NEAR(a, b, 1e-4 * std::max(1.0, std::abs(b)));
    }
}

INSTANTIATE_TEST_SUITE_P(Criteria, SensitivityTest,
                         ::testing::Combine(::testing::Values(Criterion::D, Criterion::A),
                                            ::testing::Values(0.0, 0.5)));

TEST(Sensitivity, WeightedAverageOverDesignIsZero)
{
    // Σ_i w_i ψ(x_i) = 0 for any design, by linearity of the derivative.
    const VleSetup s;
    const auto ctx = make_two_stage_context(Criterion::D, 0.5, s.prior, s.model, s.theta, s.noise);
    const WeightedDesign xi = WeightedDesign::from_unweighted(fixtures::stage_inputs("oed2"));
    double acc = 0.0;
    for (std::size_t i = 0; i < xi.size(); ++i)
        acc += xi.weights[i] * sensitivity(ctx, xi, xi.points[i], s.model, s.noise);
    EXPECT_NEAR(acc, 0.0, 1e-8);
}

TEST(Sensitivity, SingularDesignThrows)
{
    const VleSetup s;
    const auto ctx = make_two_stage_context(Criterion::D, 0.0, {}, s.model, s.theta, s.noise);
    WeightedDesign one;
    one.points = {make_point({0.5, 1e5})};
    one.weights = {1.0};
    EXPECT_THROW(sensitivity(ctx, one, make_point({0.3, 2e5}), s.model, s.noise), SingularityError);
}
