#pragma once

// Sequential measure → estimate → design campaigns.

#include "batch.hpp"
#include "core.hpp"
#include "criteria.hpp"
#include "estimation.hpp"
#include "model.hpp"
#include "solver.hpp"

#include <functional>
#include <random>
#include <string>

namespace seqoed {

struct CampaignConfig {
    double alpha = 0.5;
    double epsilon = 5e-5;
    double min_weight = 0.95;        // w̲⁺
    std::size_t max_batch = 3;       // n̄⁺
    std::size_t max_experiments = 27; // n̄
    double delta = 0.1;
    Criterion criterion = Criterion::D;
    DesignSpace space;
    Vector noise_sigmas;
    Bounds bounds;
    std::uint64_t seed = 1;
    int multistarts = 32;
    int n_sam = 1000;

    NoiseModel noise() const { return NoiseModel::from_sigmas(noise_sigmas); }

    void validate(std::size_t initial_size = 0) const
    {
        if (!(alpha >= 0.0 && alpha < 1.0))
            throw DomainError("alpha must lie in [0, 1)");
        if (!(epsilon > 0.0))
            throw DomainError("epsilon must be positive");
        if (!(min_weight > 0.0 && min_weight <= 1.0))
            throw DomainError("min_weight must lie in (0, 1]");
        if (max_batch < 1)
            throw DomainError("max_batch must be at least 1");
        if (max_experiments < initial_size)
            throw DomainError("max_experiments must be at least the size of the initial design");
        if (!(delta > 0.0))
            throw DomainError("delta must be positive");
        if (noise_sigmas.size() == 0 || (noise_sigmas.array() <= 0.0).any())
            throw DomainError("noise sigmas must be positive");
        if (n_sam < 2)
            throw DomainError("n_sam must be at least 2");
        if (multistarts < 0)
            throw DomainError("multistarts must be nonnegative");
        if (!bounds.empty() && (bounds.lower.array() > bounds.upper.array()).any())
            throw DomainError("parameter bounds are inverted");
        space.validate();
    }
};

enum class CampaignStatus { awaiting_measurements, ready_to_propose, terminated_budget, terminated_progress };

inline std::string to_string(CampaignStatus s)
{
    switch (s) {
    case CampaignStatus::awaiting_measurements:
        return "awaiting_measurements";
    case CampaignStatus::ready_to_propose:
        return "ready_to_propose";
    case CampaignStatus::terminated_budget:
        return "terminated_budget";
    case CampaignStatus::terminated_progress:
        return "terminated_progress";
    }
    return "unknown";
}

inline CampaignStatus status_from_string(std::string_view s)
{
    for (auto st : {CampaignStatus::awaiting_measurements, CampaignStatus::ready_to_propose,
                    CampaignStatus::terminated_budget, CampaignStatus::terminated_progress})
        if (to_string(st) == s)
            return st;
    throw DomainError("unknown campaign status '" + std::string(s) + "'");
}

inline bool is_terminal(CampaignStatus s)
{
    return s == CampaignStatus::terminated_budget || s == CampaignStatus::terminated_progress;
}

/// A performed experiment.
struct ExperimentRecord {
    std::string label;
    Point planned;
    Point actual;
    Vector y;
    int batch = 0; // 0 for the initial design, k + 1 for the batch proposed in iteration k
};

/// Outcome of one design iteration.
struct IterationRecord {
    int iteration = 0;
    Vector theta;
    double sse = 0.0;
    int start_index = -1;
    SolveReport report;
    UnweightedDesign survivors;
    UnweightedDesign batch;
    double batch_value = kInf;
    bool exhaustive = true;
    std::vector<double> distances; // scaled distance of each batch point to the existing design
};

struct CampaignState {
    std::string id;
    int iteration = 0;
    CampaignStatus status = CampaignStatus::ready_to_propose;
    std::vector<ExperimentRecord> records;
    UnweightedDesign pending; // proposed batch awaiting measurement
    std::optional<Vector> theta;
    std::vector<IterationRecord> history;

    Dataset dataset() const
    {
        Dataset d;
        d.reserve(records.size());
        for (const auto& r : records)
            d.push_back({r.actual, r.y, r.planned});
        return d;
    }

    UnweightedDesign actual_design() const
    {
        UnweightedDesign d;
        for (const auto& r : records)
            d.push_back(r.actual);
        return d;
    }

    UnweightedDesign planned_design() const
    {
        UnweightedDesign d;
        for (const auto& r : records)
            d.push_back(r.planned);
        return d;
    }
};

/// Result of performing one experiment.
struct Measurement {
    Point actual;
    Vector y;
};

/// Performs experiments; must return exactly one measurement per requested point.
class ExperimentSource {
public:
    virtual ~ExperimentSource() = default;
    virtual std::vector<Measurement> measure(const UnweightedDesign& batch) = 0;
};

/// Defers to an operator-supplied callback (e.g. interactive entry).
class ManualSource final : public ExperimentSource {
public:
    using Callback = std::function<std::vector<Measurement>(const UnweightedDesign&)>;
    explicit ManualSource(Callback cb) : cb_(std::move(cb)) {}
    std::vector<Measurement> measure(const UnweightedDesign& batch) override { return cb_(batch); }

private:
    Callback cb_;
};

/// Evaluates a hidden truth θ* and adds independent N(0, ς) noise.
class SimulatedSource final : public ExperimentSource {
public:
    SimulatedSource(const ParametricModel& model, Vector truth, NoiseModel noise, std::uint64_t seed)
        : model_(&model), truth_(std::move(truth)), noise_(std::move(noise)), rng_(seed)
    {
    }

    std::vector<Measurement> measure(const UnweightedDesign& batch) override
    {
        std::vector<Measurement> out;
        out.reserve(batch.size());
        std::normal_distribution<double> normal;
        for (const auto& x : batch) {
            Vector z(noise_.dim());
            for (int j = 0; j < noise_.dim(); ++j)
                z[j] = normal(rng_);
            out.push_back({x, model_->predict(x, truth_) + noise_.cholesky() * z});
        }
        return out;
    }

private:
    const ParametricModel* model_;
    Vector truth_;
    NoiseModel noise_;
    std::mt19937_64 rng_;
};

/// Replays recorded experiments: each requested point gets the record whose
/// planned input is nearest (scaled max-norm); among equally near records the
/// least used one wins, then the lowest index, so duplicates cycle.
class ScriptedSource final : public ExperimentSource {
public:
    struct Entry {
        Point planned;
        Point actual;
        Vector y;
    };

    ScriptedSource(std::vector<Entry> entries, Vector scale) : entries_(std::move(entries)), scale_(std::move(scale))
    {
        if (entries_.empty())
            throw DomainError("scripted source has no records");
        uses_.assign(entries_.size(), 0);
    }

    std::vector<Measurement> measure(const UnweightedDesign& batch) override
    {
        std::vector<Measurement> out;
        for (const auto& x : batch) {
            std::size_t best = 0;
            double bd = kInf;
            for (std::size_t i = 0; i < entries_.size(); ++i) {
                const double d = scaled_distance(x, entries_[i].planned, scale_);
                if (d < bd - 1e-12 || (std::abs(d - bd) <= 1e-12 && uses_[i] < uses_[best])) {
                    bd = d;
                    best = i;
                }
            }
            ++uses_[best];
            out.push_back({entries_[best].actual, entries_[best].y});
        }
        return out;
    }

private:
    std::vector<Entry> entries_;
    Vector scale_;
    std::vector<int> uses_;
};

inline void check_measurements(const UnweightedDesign& pending, const std::vector<Measurement>& m)
{
    if (m.size() != pending.size())
        throw DomainError("expected " + std::to_string(pending.size()) + " measurements, got " +
                          std::to_string(m.size()));
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (!m[i].actual.allFinite() || !m[i].y.allFinite())
            throw DomainError("measurement " + std::to_string(i) + " is not finite");
        if (m[i].actual.size() != pending[i].size())
            throw DomainError("measurement " + std::to_string(i) + " has the wrong input dimension");
    }
}

/// Start a campaign from measured initial experiments.
inline CampaignState new_campaign(std::string id, std::vector<ExperimentRecord> initial)
{
    if (initial.empty())
        throw DomainError("initial design is empty");
    CampaignState s;
    s.id = std::move(id);
    s.records = std::move(initial);
    s.status = CampaignStatus::ready_to_propose;
    return s;
}

/// Start a campaign whose initial design still has to be measured.
inline CampaignState new_campaign(std::string id, UnweightedDesign initial)
{
    if (initial.empty())
        throw DomainError("initial design is empty");
    CampaignState s;
    s.id = std::move(id);
    s.pending = std::move(initial);
    s.status = CampaignStatus::awaiting_measurements;
    return s;
}

/// Append measurements for the pending batch (allowed while awaiting
/// measurements, and once after progress termination for the final batch).
inline CampaignState record_measurements(const CampaignState& state, const std::vector<Measurement>& m)
{
    const bool final_batch = state.status == CampaignStatus::terminated_progress && !state.pending.empty();
    if (state.status != CampaignStatus::awaiting_measurements && !final_batch)
        throw StateError("campaign '" + state.id + "' is not awaiting measurements (status " +
                         to_string(state.status) + ")");
    check_measurements(state.pending, m);
    CampaignState next = state;
    const int batch = next.records.empty() ? 0 : static_cast<int>(next.history.size());
    for (std::size_t i = 0; i < m.size(); ++i)
        next.records.push_back({batch == 0 ? "init" : "batch" + std::to_string(batch), state.pending[i],
                                m[i].actual, m[i].y, batch});
    next.pending.clear();
    if (!final_batch)
        next.status = CampaignStatus::ready_to_propose;
    return next;
}

/// Estimate θ̂ on all data, compute the next batch and evaluate termination.
inline CampaignState propose(const CampaignState& state, const CampaignConfig& config, const ParametricModel& model)
{
    if (state.status != CampaignStatus::ready_to_propose)
        throw StateError("campaign '" + state.id + "' cannot propose (status " + to_string(state.status) + ")");
    config.validate(0);
    const NoiseModel noise = config.noise();
    const Dataset data = state.dataset();

    EstimationConfig ecfg;
    ecfg.bounds = config.bounds;
    ecfg.multistarts = config.multistarts;
    ecfg.seed = config.seed + static_cast<std::uint64_t>(state.iteration);
    if (state.theta)
        ecfg.warm_starts.push_back(*state.theta);
    const EstimateResult est = wls_estimate(model, data, noise, ecfg);

    IterationRecord it;
    it.iteration = state.iteration;
    it.theta = est.theta;
    it.sse = est.sse;
    it.start_index = est.start_index;

    const UnweightedDesign prior = state.actual_design();
    const TwoStageContext ctx = make_two_stage_context(config.criterion, config.alpha, prior, model, est.theta, noise);
    SolveOptions sopt;
    sopt.epsilon = config.epsilon;
    it.report = solve_weighted(ctx, config.space, model, noise, sopt);
    it.survivors = sieve(it.report.design, config.min_weight);
    const BatchSelection sel = select_batch_detailed(ctx, it.survivors, config.max_batch, model, noise);
    it.batch = sel.batch;
    it.batch_value = sel.value;
    it.exhaustive = sel.exhaustive;

    const Vector lambda = config.space.box_lengths();
    const UnweightedDesign existing = state.planned_design();
    bool all_close = true;
    for (const auto& x : it.batch) {
        double d = kInf;
        for (const auto& e : existing)
            d = std::min(d, scaled_distance(x, e, lambda));
        it.distances.push_back(d);
        if (!(d < config.delta))
            all_close = false;
    }

    CampaignState next = state;
    next.theta = est.theta;
    next.history.push_back(it);
    next.iteration = state.iteration + 1;
    next.pending = it.batch;
    if (state.records.size() + it.batch.size() > config.max_experiments) {
        next.status = CampaignStatus::terminated_budget;
        next.pending.clear();
    } else if (all_close) {
        next.status = CampaignStatus::terminated_progress;
    } else {
        next.status = CampaignStatus::awaiting_measurements;
    }
    return next;
}

/// One iteration: measure what is pending, then propose.
inline CampaignState campaign_step(const CampaignState& state, const CampaignConfig& config, ExperimentSource& source,
                                   const ParametricModel& model)
{
    if (is_terminal(state.status))
        throw StateError("campaign '" + state.id + "' has terminated");
    CampaignState s = state;
    if (s.status == CampaignStatus::awaiting_measurements)
        s = record_measurements(s, source.measure(s.pending));
    return propose(s, config, model);
}

/// Run until termination. After progress termination the final batch is
/// measured as well. `persist` sees every intermediate state.
inline CampaignState run_campaign(CampaignState state, const CampaignConfig& config, ExperimentSource& source,
                                  const ParametricModel& model,
                                  const std::function<void(const CampaignState&)>& persist = {})
{
    config.validate(state.records.size() + state.pending.size());
    while (!is_terminal(state.status)) {
        state = campaign_step(state, config, source, model);
        if (persist)
            persist(state);
    }
    if (state.status == CampaignStatus::terminated_progress && !state.pending.empty()) {
        state = record_measurements(state, source.measure(state.pending));
        if (persist)
            persist(state);
    }
    return state;
}

} // namespace seqoed
