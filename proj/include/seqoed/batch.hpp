#pragma once

// Conversion of a weighted design into a small batch of experiments.

#include "core.hpp"
#include "criteria.hpp"
#include "model.hpp"

#include <algorithm>
#include <numeric>

namespace seqoed {

inline constexpr double kSieveTolerance = 1e-12;

/// Repeatedly drop the lowest-weight support point while the weight that
/// remains is still at least `min_weight`. Survivors are returned once each,
/// by descending weight with lexicographic tie-breaking.
inline UnweightedDesign sieve(const WeightedDesign& xi, double min_weight)
{
    if (!(min_weight > 0.0 && min_weight <= 1.0))
        throw DomainError("minimal total weight must lie in (0, 1]");
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < xi.size(); ++i)
        if (xi.weights[i] > 0.0)
            order.push_back(i);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (xi.weights[a] != xi.weights[b])
            return xi.weights[a] > xi.weights[b];
        return lex_less(xi.points[a], xi.points[b]);
    });
    double remaining = 0.0;
    for (auto i : order)
        remaining += xi.weights[i];
    while (order.size() > 1) {
        const double w = xi.weights[order.back()];
        if (remaining - w < min_weight - kSieveTolerance)
            break;
        remaining -= w;
        order.pop_back();
    }
    UnweightedDesign out;
    out.reserve(order.size());
    for (auto i : order)
        out.push_back(xi.points[i]);
    return out;
}

namespace detail {

/// Ψ^(α) of the uniform design on the selected factors.
inline double subset_value(const TwoStageContext& ctx, const Matrix& prior_root, std::span<const Matrix> factors,
                           const std::vector<std::size_t>& subset)
{
    std::vector<Matrix> sub;
    sub.reserve(subset.size());
    for (auto i : subset)
        sub.push_back(factors[i]);
    const std::vector<double> w(subset.size(), 1.0 / static_cast<double>(subset.size()));
    return CombinedRoot(ctx.alpha, prior_root, sub, w).value(ctx.criterion);
}

inline double binomial(std::size_t n, std::size_t k)
{
    double c = 1.0;
    for (std::size_t i = 1; i <= k; ++i)
        c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    return c;
}

} // namespace detail

inline constexpr double kExhaustiveSubsetLimit = 1e5;

struct BatchSelection {
    UnweightedDesign batch;
    double value = kInf;
    bool exhaustive = true;
};

/// Size-n̄⁺ subset of the survivors minimizing Ψ(αM⁻ + (1 − α)M(ξ_subset)).
/// Exhaustive when C(n, n̄⁺) ≤ 1e5, greedy backward elimination otherwise.
/// Ties go to the lexicographically smallest subset.
inline BatchSelection select_batch_detailed(const TwoStageContext& ctx, const UnweightedDesign& survivors,
                                            std::size_t max_batch, const ParametricModel& model,
                                            const NoiseModel& noise)
{
    if (survivors.empty())
        throw DomainError("no experiments to select from");
    if (max_batch == 0)
        throw DomainError("batch size bound must be at least 1");
    const Matrix prior_root = ctx.alpha > 0.0 ? ctx.prior_root() : Matrix{};
    BatchSelection sel;
    if (survivors.size() <= max_batch) {
        sel.batch = survivors;
        std::vector<Matrix> f;
        for (const auto& x : survivors)
            f.push_back(info_factor(model, x, ctx.theta, noise));
        std::vector<std::size_t> all(survivors.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        sel.value = detail::subset_value(ctx, prior_root, f, all);
        return sel;
    }

    // Work on the survivors in lexicographic order so that enumeration order is tie-breaking order.
    std::vector<std::size_t> lex(survivors.size());
    std::iota(lex.begin(), lex.end(), std::size_t{0});
    std::sort(lex.begin(), lex.end(),
              [&](std::size_t a, std::size_t b) { return lex_less(survivors[a], survivors[b]); });
    std::vector<Matrix> factors;
    factors.reserve(lex.size());
    for (auto i : lex)
        factors.push_back(info_factor(model, survivors[i], ctx.theta, noise));

    const std::size_t n = lex.size();
    std::vector<std::size_t> best;
    if (detail::binomial(n, max_batch) <= kExhaustiveSubsetLimit) {
        std::vector<std::size_t> comb(max_batch);
        std::iota(comb.begin(), comb.end(), std::size_t{0});
        while (true) {
            const double v = detail::subset_value(ctx, prior_root, factors, comb);
            if (v < sel.value) {
                sel.value = v;
                best = comb;
            }
            std::size_t i = max_batch;
            while (i > 0 && comb[i - 1] == n - max_batch + i - 1)
                --i;
            if (i == 0)
                break;
            ++comb[i - 1];
            for (std::size_t j = i; j < max_batch; ++j)
                comb[j] = comb[j - 1] + 1;
        }
    } else {
        sel.exhaustive = false;
        std::vector<std::size_t> cur(n);
        std::iota(cur.begin(), cur.end(), std::size_t{0});
        while (cur.size() > max_batch) {
            double bv = kInf;
            std::size_t drop = cur.size();
            for (std::size_t k = 0; k < cur.size(); ++k) {
                std::vector<std::size_t> trial = cur;
                trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(k));
                const double v = detail::subset_value(ctx, prior_root, factors, trial);
                // Ties: keep the lexicographically smallest remainder, i.e. drop the largest point.
                if (v < bv || (v == bv && drop < cur.size())) {
                    bv = v;
                    drop = k;
                }
            }
            if (drop == cur.size())
                drop = cur.size() - 1;
            cur.erase(cur.begin() + static_cast<std::ptrdiff_t>(drop));
            sel.value = bv;
        }
        best = cur;
    }
    if (best.empty())
        throw InfeasibleError("every candidate batch leaves the information matrix singular");
    // Report the chosen points in survivor (descending weight) order.
    std::vector<std::size_t> picked;
    for (auto b : best)
        picked.push_back(lex[b]);
    std::sort(picked.begin(), picked.end());
    for (auto i : picked)
        sel.batch.push_back(survivors[i]);
    return sel;
}

inline UnweightedDesign select_batch(const TwoStageContext& ctx, const UnweightedDesign& survivors,
                                     std::size_t max_batch, const ParametricModel& model, const NoiseModel& noise)
{
    return select_batch_detailed(ctx, survivors, max_batch, model, noise).batch;
}

} // namespace seqoed
