#include <seqoed/io.hpp>
#include <seqoed/report.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace seqoed;

namespace {

UnweightedDesign line_points(std::initializer_list<double> xs)
{
    UnweightedDesign d;
    for (double x : xs)
        d.push_back(make_point({x}));
    return d;
}

} // namespace

TEST(Rmse, ComponentWise)
{
    const LinearModel m = polynomial_model(0);
    Dataset d{{make_point({0.0}), Vector::Constant(1, 1.0), std::nullopt},
              {make_point({1.0}), Vector::Constant(1, -3.0), std::nullopt}};
    EXPECT_DOUBLE_EQ(rmse(m, Vector::Zero(1), d)[0], std::sqrt(5.0));
    EXPECT_THROW(rmse(m, Vector::Zero(1), {}), DomainError);
}

TEST(Normalization, Names)
{
    EXPECT_EQ(normalization_from_string(to_string(InfoNormalization::total)), InfoNormalization::total);
    EXPECT_EQ(normalization_from_string("per_experiment"), InfoNormalization::per_experiment);
    EXPECT_THROW(normalization_from_string("mean"), DomainError);
}

TEST(LinSigma, LinearModelClosedForm)
{
    // Straight line on {−1, 1} with σ = 0.5: Var f(x) = σ²(1 + x²)/2.
    const LinearModel m = polynomial_model(1);
    const NoiseModel noise = NoiseModel::from_sigmas({0.5});
    const auto design = line_points({-1.0, 1.0});
    for (double x : {-1.0, 0.0, 0.3, 2.0}) {
        const double expected = 0.5 * std::sqrt((1.0 + x * x) / 2.0);
        EXPECT_NEAR(lin_prediction_sigma(m, make_point({x}), design, Vector::Zero(2), noise)[0], expected, 1e-12);
        EXPECT_NEAR(lin_prediction_sigma(m, make_point({x}), design, Vector::Zero(2), noise,
                                         InfoNormalization::per_experiment)[0],
                    expected * std::sqrt(2.0), 1e-12);
    }
}

TEST(LinSigma, SingularDesignThrows)
{
    const LinearModel m = polynomial_model(1);
    EXPECT_THROW(lin_prediction_sigma(m, make_point({0.0}), line_points({1.0, 1.0}), Vector::Zero(2),
                                      NoiseModel::from_sigmas({1.0})),
                 SingularityError);
}

TEST(SamSigma, LinearModelAgreesWithLinearization)
{
    const LinearModel m = polynomial_model(1);
    const NoiseModel noise = NoiseModel::from_sigmas({0.5});
    const auto design = line_points({-1.0, -0.5, 0.5, 1.0});
    SamplingOptions opt;
    opt.n_sam = 4000;
    const double lin = lin_prediction_sigma(m, make_point({0.7}), design, Vector::Zero(2), noise)[0];
    const double sam = sam_prediction_sigma(m, make_point({0.7}), design, Vector::Zero(2), noise, opt)[0];
    EXPECT_NEAR(sam / lin, 1.0, 0.05);
}

TEST(SamSigma, NoiselessRefitsGiveZero)
{
    const LinearModel m = polynomial_model(1);
    SamplingOptions opt;
    opt.n_sam = 5;
    opt.noise_scale = 0.0;
    const auto s = sam_prediction_sigma(m, make_point({0.3}), line_points({-1.0, 1.0}), Vector::Ones(2),
                                        NoiseModel::from_sigmas({1.0}), opt);
    EXPECT_NEAR(s[0], 0.0, 1e-10);
    opt.n_sam = 1;
    EXPECT_THROW(sam_prediction_sigma(m, make_point({0.3}), line_points({-1.0, 1.0}), Vector::Ones(2),
                                      NoiseModel::from_sigmas({1.0}), opt),
                 DomainError);
}

TEST(PureComponents, UncertaintiesVanish)
{
    const vle::VleModel model;
    const NoiseModel noise = vle::case_study_noise();
    const Vector theta = vle::theta_tot().to_vector();
    const auto design = fixtures::stage_inputs("tot");
    const LinearizedPredictor lin(model, design, theta, noise);
    std::vector<Point> pure;
    for (double l : {0.0, 1.0})
        for (double P : {1e5, 2e5, 3e5}) {
            pure.push_back(make_point({l, P}));
            EXPECT_LE(lin(pure.back()).cwiseAbs().maxCoeff(), 1e-12);
        }
    SamplingOptions opt;
    opt.n_sam = 4;
    const auto b = vle::default_param_box();
    opt.bounds = {b.lower, b.upper};
    opt.multistarts = 0;
    const Matrix sam = sam_prediction_sigmas(model, pure, design, theta, noise, opt);
    EXPECT_LE(sam.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(WorstCaseTest, SummaryPicksMaximaAndCurves)
{
    const DesignSpace grid = DesignSpace::grid("g", {{0.0, 1.0}, {10.0, 20.0}});
    Matrix values(4, 2);
    values << 1, 5, //
        3, 2,       //
        2, 7,       //
        0, 1;
    const WorstCase wc = summarize_worst_case(grid, values);
    EXPECT_EQ(wc.sigma[0], 3.0);
    EXPECT_EQ(wc.sigma[1], 7.0);
    EXPECT_EQ(wc.argmax[0], make_point({0.0, 20.0}));
    EXPECT_EQ(wc.argmax[1], make_point({1.0, 10.0}));
    ASSERT_EQ(wc.curve_x, (std::vector<double>{0.0, 1.0}));
    EXPECT_EQ(wc.curve(0, 0), 3.0);
    EXPECT_EQ(wc.curve(0, 1), 5.0);
    EXPECT_EQ(wc.curve(1, 0), 2.0);
    EXPECT_EQ(wc.curve(1, 1), 7.0);
}

TEST(WorstCaseTest, EvaluationGridShape)
{
    const DesignSpace g = evaluation_grid();
    EXPECT_EQ(g.size(), 201u * 21u);
    EXPECT_EQ(g.points.front(), make_point({0.0, 1e5}));
    EXPECT_EQ(g.points.back(), make_point({1.0, 3e5}));
}

TEST(WorstCaseTest, MoreDataNeverHurtsUnderTotalNormalization)
{
    const vle::VleModel model;
    const NoiseModel noise = vle::case_study_noise();
    const Vector theta = vle::theta_tot().to_vector();
    const DesignSpace grid = evaluation_grid(21, 5);
    const auto small = worst_case_lin_sigma(model, fixtures::stage_inputs("oed1"), theta, noise, grid);
    const auto big = worst_case_lin_sigma(model, fixtures::stage_inputs("oed2"), theta, noise, grid);
    for (int j = 0; j < 2; ++j)
        EXPECT_LE(big.sigma[j], small.sigma[j] * (1.0 + 1e-12));
}

TEST(PredictionCurves, PureEndpointsMatchAntoine)
{
    const vle::VleModel model;
    const auto curves = prediction_curves(model, vle::theta_tot().to_vector(), {1e5}, 11);
    ASSERT_EQ(curves.size(), 1u);
    ASSERT_EQ(curves[0].l.size(), 11u);
    EXPECT_NEAR(curves[0].T.back(), 369.78, 0.01);
    EXPECT_DOUBLE_EQ(curves[0].v.front(), 0.0);
    EXPECT_DOUBLE_EQ(curves[0].v.back(), 1.0);
}

TEST(PureComponents, VanishForRandomParametersAndDesigns)
{
    const vle::VleModel model;
    const NoiseModel noise = vle::case_study_noise();
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> a(-3.0, 3.0), b(-800.0, 1500.0), c(0.05, 0.5), u(0.0, 1.0);
    int checked = 0;
    for (int rep = 0; rep < 20; ++rep) {
        const Vector theta = vle::ParamVector{a(rng), a(rng), b(rng), b(rng), c(rng)}.to_vector();
        UnweightedDesign design;
        for (int i = 0; i < 8; ++i)
            design.push_back(make_point({0.05 + 0.9 * u(rng), 1e5 + 2e5 * u(rng)}));
        for (double l : {0.0, 1.0}) {
            const Point x = make_point({l, 1e5 + 2e5 * u(rng)});
            EXPECT_LE(one_point_info(model, x, theta, noise).cwiseAbs().maxCoeff(), 1e-12);
            try {
                EXPECT_LE(lin_prediction_sigma(model, x, design, theta, noise).maxCoeff(), 1e-12);
                ++checked;
            } catch (const SingularityError&) {
            }
        }
    }
    EXPECT_GT(checked, 20);
}
