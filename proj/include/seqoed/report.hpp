#pragma once

// Assessment reports shared by the command line tool and the HTTP service.

#include "assessment.hpp"
#include "io.hpp"
#include "vle.hpp"

namespace seqoed {

struct AssessOptions {
    InfoNormalization normalization = InfoNormalization::per_experiment;
    int grid_l = 201;
    int grid_P = 21;
    bool sampling = false;
    int n_sam = 1000;
    std::uint64_t seed = 1;
};

struct DesignMetrics {
    std::string name;
    std::size_t size = 0;
    Vector theta;       // estimate trained on the design
    double sse = 0.0;
    Vector rmse;        // of that estimate on the reference data
    WorstCase lin;      // at the reference parameter
    std::optional<WorstCase> sam;
};

/// Train on `design_data`, score on `reference`, and evaluate worst-case
/// prediction uncertainties of the design inputs at `theta_ref`.
inline DesignMetrics assess_design(const ParametricModel& model, std::string name, const Dataset& design_data,
                                   const UnweightedDesign& design_inputs, const Dataset& reference,
                                   const Vector& theta_ref, const NoiseModel& noise, const Bounds& bounds,
                                   const AssessOptions& opt, int multistarts = 32)
{
    DesignMetrics m;
    m.name = std::move(name);
    m.size = design_inputs.size();
    EstimationConfig cfg;
    cfg.bounds = bounds;
    cfg.multistarts = multistarts;
    cfg.seed = opt.seed;
    cfg.warm_starts = {theta_ref};
    const EstimateResult est = wls_estimate(model, design_data, noise, cfg);
    m.theta = est.theta;
    m.sse = est.sse;
    m.rmse = rmse(model, est.theta, reference);
    const DesignSpace grid = evaluation_grid(opt.grid_l, opt.grid_P);
    m.lin = worst_case_lin_sigma(model, design_inputs, theta_ref, noise, grid, opt.normalization);
    if (opt.sampling) {
        SamplingOptions so;
        so.n_sam = opt.n_sam;
        so.seed = opt.seed;
        so.bounds = bounds;
        m.sam = worst_case_sam_sigma(model, design_inputs, theta_ref, noise, grid, so);
    }
    return m;
}

struct ReplayOptions {
    AssessOptions assess;
    bool reconciled = false; // use the reconciled input assignment for the uncertainty measures
};

/// Metrics of one of the published design stages against the full dataset.
inline DesignMetrics replay_stage(std::string_view stage, const ReplayOptions& opt = {})
{
    const vle::VleModel model;
    const NoiseModel noise = vle::case_study_noise();
    const auto box = vle::default_param_box();
    const Dataset design_data = to_dataset(fixtures::stage(stage));
    const Dataset reference = to_dataset(fixtures::stage("tot"));
    return assess_design(model, std::string(stage), design_data, fixtures::stage_inputs(stage, opt.reconciled),
                         reference, vle::theta_tot().to_vector(), noise, {box.lower, box.upper}, opt.assess);
}

/// Metrics of a campaign's current design at its current estimate.
inline DesignMetrics assess_campaign(const CampaignState& state, const CampaignConfig& config,
                                     const ParametricModel& model, const AssessOptions& opt)
{
    if (state.records.empty())
        throw StateError("campaign '" + state.id + "' has no measurements");
    const Dataset data = state.dataset();
    EstimationConfig cfg;
    cfg.bounds = config.bounds;
    cfg.multistarts = config.multistarts;
    cfg.seed = config.seed;
    if (state.theta)
        cfg.warm_starts = {*state.theta};
    const Vector theta = wls_estimate(model, data, config.noise(), cfg).theta;
    AssessOptions o = opt;
    return assess_design(model, state.id, data, state.actual_design(), data, theta, config.noise(), config.bounds, o,
                         config.multistarts);
}

struct PredictionCurve {
    double pressure = 0.0;
    std::vector<double> l;
    std::vector<double> v;
    std::vector<double> T;
};

/// Bubble (l, T) and dew (v, T) curves at the given pressures.
inline std::vector<PredictionCurve> prediction_curves(const vle::VleModel& model, const Vector& theta,
                                                      const std::vector<double>& pressures, int points = 101)
{
    if (points < 2)
        throw DomainError("a curve needs at least two points");
    std::vector<PredictionCurve> out;
    for (double P : pressures) {
        if (!(P > 0.0) || !std::isfinite(P))
            throw DomainError("pressure must be positive");
        PredictionCurve c;
        c.pressure = P;
        for (double l : linspace(0.0, 1.0, points)) {
            const Vector y = model.predict(make_point({l, P}), theta);
            c.l.push_back(l);
            c.v.push_back(y[0]);
            c.T.push_back(y[1]);
        }
        out.push_back(std::move(c));
    }
    return out;
}

inline json to_json(const WorstCase& wc)
{
    json argmax = json::array();
    for (const auto& p : wc.argmax)
        argmax.push_back(to_std(p));
    json curve = json::array();
    for (Eigen::Index j = 0; j < wc.curve.cols(); ++j)
        curve.push_back(to_std(wc.curve.col(j)));
    return {{"sigma", to_std(wc.sigma)}, {"argmax", argmax}, {"curve_l", wc.curve_x}, {"curve", curve}};
}

inline json to_json(const DesignMetrics& m)
{
    json j = {{"name", m.name},
              {"size", m.size},
              {"theta", to_std(m.theta)},
              {"sse", m.sse},
              {"rmse", to_std(m.rmse)},
              {"sigma_lin", to_json(m.lin)}};
    if (m.sam)
        j["sigma_sam"] = to_json(*m.sam);
    return j;
}

inline json to_json(const std::vector<PredictionCurve>& curves)
{
    json a = json::array();
    for (const auto& c : curves)
        a.push_back({{"pressure", c.pressure}, {"l", c.l}, {"v", c.v}, {"T", c.T}});
    return a;
}

/// Worst-case curves over l as CSV (one row per l value).
inline std::string curve_csv(const WorstCase& wc)
{
    std::string out = "l,sigma_v,sigma_T\n";
    for (std::size_t i = 0; i < wc.curve_x.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out += detail::format_double(wc.curve_x[i]) + "," + detail::format_double(wc.curve(r, 0)) + "," +
               detail::format_double(wc.curve(r, 1)) + "\n";
    }
    return out;
}

} // namespace seqoed
