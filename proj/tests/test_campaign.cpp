#include <seqoed/io.hpp>

#include <gtest/gtest.h>

using namespace seqoed;

namespace {

CampaignConfig line_config()
{
    CampaignConfig c;
    c.space = DesignSpace::grid("interval", {linspace(-1.0, 1.0, 5)});
    c.noise_sigmas = Vector::Constant(1, 0.1);
    c.bounds = {Vector::Constant(2, -10.0), Vector::Constant(2, 10.0)};
    c.multistarts = 2;
    c.max_experiments = 20;
    return c;
}

std::vector<ExperimentRecord> line_records(std::initializer_list<double> xs)
{
    std::vector<ExperimentRecord> r;
    for (double x : xs)
        r.push_back({"init", make_point({x}), make_point({x}), Vector::Constant(1, 1.0 + 2.0 * x), 0});
    return r;
}

std::vector<ScriptedSource::Entry> published_oed_entries()
{
    // The nine rows measured in the oed batches, keyed by their planned inputs.
    std::vector<ScriptedSource::Entry> entries;
    const auto& recs = fixtures::measurements();
    for (std::size_t i = 28; i < recs.size(); ++i) {
        const auto& r = recs[i];
        entries.push_back({make_point({r.l_planned, r.P_planned}), make_point({r.l_actual, r.P_actual}),
                           (Vector(2) << r.v, r.T).finished()});
    }
    return entries;
}

} // namespace

TEST(ScaledDistance, Examples)
{
    const Vector lambda = oed_grid().box_lengths();
    EXPECT_NEAR(scaled_distance(make_point({0.1, 1e5}), make_point({0.2, 1e5}), lambda), 0.1, 1e-12);
    EXPECT_NEAR(scaled_distance(make_point({0.0, 1e5}), make_point({1.0, 3e5}), lambda), 1.0, 1e-12);
    EXPECT_EQ(scaled_distance(make_point({0.4, 2e5}), make_point({0.4, 2e5}), lambda), 0.0);
    EXPECT_NEAR(scaled_distance(make_point({0.4, 1e5}), make_point({0.45, 1.4e5}), lambda), 0.2, 1e-12);
}

TEST(CampaignStatusTest, NamesRoundTrip)
{
    for (auto s : {CampaignStatus::awaiting_measurements, CampaignStatus::ready_to_propose,
                   CampaignStatus::terminated_budget, CampaignStatus::terminated_progress})
        EXPECT_EQ(status_from_string(to_string(s)), s);
    EXPECT_THROW(status_from_string("done"), DomainError);
}

TEST(Campaign, ProgressTerminationWhenOptimumIsAlreadyMeasured)
{
    // A line measured twice at each end: the next batch repeats the ends.
    const LinearModel m = polynomial_model(1);
    const auto cfg = line_config();
    auto st = new_campaign("line", line_records({-1.0, 1.0, -1.0, 1.0}));
    st = propose(st, cfg, m);
    EXPECT_EQ(st.status, CampaignStatus::terminated_progress);
    ASSERT_EQ(st.pending.size(), 2u);
    for (double d : st.history.back().distances)
        EXPECT_LT(d, cfg.delta);

    // The final batch may still be recorded, once.
    std::vector<Measurement> ms;
    for (const auto& x : st.pending)
        ms.push_back({x, Vector::Constant(1, 1.0 + 2.0 * x[0])});
    st = record_measurements(st, ms);
    EXPECT_EQ(st.records.size(), 6u);
    EXPECT_TRUE(st.pending.empty());
    EXPECT_EQ(st.status, CampaignStatus::terminated_progress);
    EXPECT_THROW(record_measurements(st, ms), StateError);
}

TEST(Campaign, BudgetTerminationDiscardsBatch)
{
    const LinearModel m = polynomial_model(1);
    auto cfg = line_config();
    cfg.max_experiments = 3;
    auto st = new_campaign("line", line_records({-1.0, 0.0, 0.5}));
    st = propose(st, cfg, m);
    EXPECT_EQ(st.status, CampaignStatus::terminated_budget);
    EXPECT_TRUE(st.pending.empty());
    EXPECT_EQ(st.records.size(), 3u);
    ASSERT_EQ(st.history.size(), 1u);
    EXPECT_FALSE(st.history[0].batch.empty());
}

TEST(Campaign, StateErrors)
{
    const LinearModel m = polynomial_model(1);
    const auto cfg = line_config();
    auto st = new_campaign("line", line_records({-0.5, 0.0, 0.5}));
    EXPECT_THROW(record_measurements(st, {}), StateError);
    st = propose(st, cfg, m);
    ASSERT_EQ(st.status, CampaignStatus::awaiting_measurements);
    EXPECT_THROW(propose(st, cfg, m), StateError);
    EXPECT_THROW(record_measurements(st, {}), DomainError);
    std::vector<Measurement> nan(st.pending.size(), {make_point({0.0}), Vector::Constant(1, std::nan(""))});
    EXPECT_THROW(record_measurements(st, nan), DomainError);
    EXPECT_THROW(new_campaign("empty", std::vector<ExperimentRecord>{}), DomainError);
    EXPECT_THROW(new_campaign("empty", UnweightedDesign{}), DomainError);
}

TEST(Campaign, UnmeasuredInitialDesign)
{
    auto st = new_campaign("line", UnweightedDesign{make_point({-0.5}), make_point({0.5})});
    EXPECT_EQ(st.status, CampaignStatus::awaiting_measurements);
    st = record_measurements(st, {{make_point({-0.5}), Vector::Constant(1, 0.0)},
                                  {make_point({0.5}), Vector::Constant(1, 2.0)}});
    EXPECT_EQ(st.status, CampaignStatus::ready_to_propose);
    EXPECT_EQ(st.records[0].batch, 0);
    EXPECT_EQ(st.records[0].label, "init");
}

TEST(Campaign, SimulatedRunIsDeterministicAndAppendOnly)
{
    const LinearModel m = polynomial_model(2);
    auto cfg = line_config();
    cfg.space = DesignSpace::grid("interval", {linspace(-1.0, 1.0, 21)});
    cfg.bounds = {Vector::Constant(3, -10.0), Vector::Constant(3, 10.0)};
    cfg.max_batch = 2;
    cfg.max_experiments = 12;
    const Vector truth = (Vector(3) << 0.5, -1.0, 2.0).finished();
    const auto init = new_campaign("quad", UnweightedDesign{make_point({-0.3}), make_point({0.0}), make_point({0.4})});

    auto run = [&](std::vector<CampaignState>* trace) {
        SimulatedSource src(m, truth, cfg.noise(), 7);
        return run_campaign(init, cfg, src, m, [&](const CampaignState& s) {
            if (trace)
                trace->push_back(s);
        });
    };
    std::vector<CampaignState> trace;
    const CampaignState a = run(&trace);
    const CampaignState b = run(nullptr);
    EXPECT_EQ(serialize({cfg, a}), serialize({cfg, b}));
    EXPECT_TRUE(is_terminal(a.status));
    EXPECT_LE(a.records.size(), cfg.max_experiments);

    for (std::size_t k = 1; k < trace.size(); ++k) {
        const auto& prev = trace[k - 1].records;
        const auto& cur = trace[k].records;
        ASSERT_GE(cur.size(), prev.size());
        for (std::size_t i = 0; i < prev.size(); ++i) {
            EXPECT_EQ(cur[i].actual, prev[i].actual);
            EXPECT_EQ(cur[i].y, prev[i].y);
        }
    }
    for (const auto& it : a.history) {
        EXPECT_LE(it.batch.size(), cfg.max_batch);
        EXPECT_GE(it.report.min_sensitivity, -cfg.epsilon);
    }
}

TEST(Campaign, ConfigValidation)
{
    EXPECT_THROW(config_from_json(json{{"max_batch", 0}}), DomainError);
    EXPECT_THROW(config_from_json(json{{"alpha", 1.0}}), DomainError);
    EXPECT_THROW(config_from_json(json{{"epsilon", -1.0}}), DomainError);
    EXPECT_THROW(config_from_json(json{{"delta", "x"}}), ParseError);
    auto cfg = case_study_config();
    EXPECT_THROW(cfg.validate(30), DomainError);
    EXPECT_NO_THROW(cfg.validate(27));
}

TEST(Campaign, ScriptedReplayOfPublishedBatches)
{
    // Initial design plus the recorded oed batches: three batches of three, then progress.
    const vle::VleModel model;
    const auto cfg = case_study_config();
    ScriptedSource src(published_oed_entries(), cfg.space.box_lengths());
    auto st = new_campaign("replay", to_experiments(fixtures::stage("init")));
    st = run_campaign(st, cfg, src, model);
    EXPECT_EQ(st.status, CampaignStatus::terminated_progress);
    EXPECT_EQ(st.records.size(), 15u);
    ASSERT_EQ(st.history.size(), 3u);
    for (const auto& it : st.history) {
        EXPECT_EQ(it.batch.size(), 3u);
        EXPECT_TRUE(it.exhaustive);
        EXPECT_GE(it.report.min_sensitivity, -cfg.epsilon);
    }
    for (double d : st.history.back().distances)
        EXPECT_LT(d, cfg.delta);
}
