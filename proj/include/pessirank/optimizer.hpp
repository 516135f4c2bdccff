#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "pessirank/core.hpp"
#include "pessirank/estimators.hpp"

namespace pessirank {

// Per-context chosen lists and their pessimistic values.
struct OptimizationResult {
    std::map<Context, RankedList> per_context;
    std::map<Context, double> per_context_value;
};

// Conservative off-policy optimization: per context, the list maximizing the
// substituted lower-bound value. The argmax never enumerates the list space;
// each model's sorted optimal-list construction is exact for factorized
// per-parameter bounds.
inline OptimizationResult pessimistic_optimize(const FittedParams& fitted, int k) {
    if (k < 1) throw std::invalid_argument("pessimistic_optimize: K must be >= 1");
    OptimizationResult result;
    for (const auto& [ctx, params] : fitted.per_context) {
        if (static_cast<int>(theta_of(params).size()) < k)
            throw std::invalid_argument("pessimistic_optimize: fewer than K items in context " +
                                        ctx);
        RankedList list = optimal_list(params, k);
        result.per_context_value[ctx] = list_value(list, params);
        result.per_context.emplace(ctx, std::move(list));
    }
    return result;
}

// Mean over contexts of V(A*, X) - V(chosen, X) under the true parameters.
inline double evaluation_error(const GroundTruth& truth, const OptimizationResult& result) {
    if (result.per_context.empty())
        throw std::invalid_argument("evaluation_error: empty result");
    double total = 0.0;
    int count = 0;
    for (const auto& [ctx, params] : truth.per_context) {
        const auto it = result.per_context.find(ctx);
        if (it == result.per_context.end())
            throw std::invalid_argument("evaluation_error: missing context " + ctx);
        if (it->second.size() != truth.k)
            throw std::invalid_argument("evaluation_error: list length != K in context " + ctx);
        const RankedList best = optimal_list(params, truth.k);
        total += list_value(best, params) - list_value(it->second, params);
        ++count;
    }
    if (static_cast<int>(result.per_context.size()) != count)
        throw std::invalid_argument("evaluation_error: result has extra contexts");
    return total / count;
}

// Certificate half-width of a list:
//   c(A, X) = sum_{a in A} sqrt(log(|E||X| / delta) / (2 n_{a,X})).
// Any unobserved list item makes the certificate infinite (distinguished
// value, so callers can classify the bound as vacuous instead of failing).
inline double certificate_width(const std::map<Context, std::map<Item, double>>& counts,
                                const RankedList& list, const Context& context, double delta,
                                int ground_set_size, int context_count) {
    if (!(delta > 0.0) || !(delta <= 1.0))
        throw std::invalid_argument("certificate_width: delta must be in (0, 1]");
    if (ground_set_size < 1 || context_count < 1)
        throw std::invalid_argument("certificate_width: set sizes must be >= 1");
    const auto ctx_it = counts.find(context);
    const double log_term =
        std::log(static_cast<double>(ground_set_size) * context_count / delta);
    double width = 0.0;
    for (const Item& a : list.items) {
        double n = 0.0;
        if (ctx_it != counts.end()) {
            const auto it = ctx_it->second.find(a);
            if (it != ctx_it->second.end()) n = it->second;
        }
        if (!(n >= 1.0)) return std::numeric_limits<double>::infinity();
        width += std::sqrt(log_term / (2.0 * n));
    }
    return width;
}

// One context's entry in a pessimism-bound check.
struct BoundCheckRow {
    Context context;
    double error = 0.0;            // V(A*, X) - V(chosen, X)
    double bound = 0.0;            // 2 c(A*, X)
    bool vacuous = false;          // certificate infinite (unobserved optimal item)
    bool concentration_held = true;
    bool violated = false;         // error > bound on a non-vacuous row
};

struct PessimismBoundReport {
    std::vector<BoundCheckRow> rows;
    bool any_violation = false;
    bool violation_under_concentration = false;
};

// Runs the Hoeffding pipeline (union over items and contexts) on one log and
// compares the realized error against 2 c(A*, X) per context. The joint
// concentration event |theta-hat - theta| <= sqrt(log(|E||X|/delta) / 2n) is
// checked directly over all observed item estimates; when it holds, the error
// can never exceed the bound. DCM / PBM position parameters are taken from
// the ground truth (known-position premise of the bound).
inline PessimismBoundReport verify_pessimism_bound(const GroundTruth& truth,
                                                   const std::vector<LoggedInteraction>& log,
                                                   double delta) {
    truth.validate();
    StatsTable stats = collect_stats(truth.kind, log);

    std::map<Item, int> ground_items;
    for (const auto& [ctx, params] : truth.per_context)
        for (const auto& [item, v] : theta_of(params)) ground_items.try_emplace(item);
    const int e_count = static_cast<int>(ground_items.size());
    const int x_count = static_cast<int>(truth.per_context.size());
    const double log_term = std::log(static_cast<double>(e_count) * x_count / delta);

    // Joint concentration over every observed item estimate.
    bool concentration = true;
    std::map<Context, std::map<Item, double>> counts;
    for (const auto& [ctx, items] : stats.item_stats) {
        const ThetaTable& truth_theta = theta_of(truth.per_context.at(ctx));
        for (const auto& [item, s] : items) {
            counts[ctx][item] = s.n();
            if (s.n() > 0.0) {
                const double mle = s.pos / s.n();
                const double width = std::sqrt(log_term / (2.0 * s.n()));
                if (std::fabs(mle - truth_theta.at(item)) > width) concentration = false;
            }
        }
    }

    EstimatorConfig config;
    config.kind = BoundKind::HoeffdingLcb;
    config.delta = delta;
    config.union_bound = UnionBoundMode::ItemsAndContexts;
    FittedParams fitted = lcb_table(stats, config);
    // Known-position premise: substitute the true lambda / p schedules.
    for (auto& [ctx, params] : fitted.per_context) {
        const ModelParams& true_params = truth.per_context.at(ctx);
        if (truth.kind == ModelKind::Dcm)
            std::get<DcmParams>(params).lambda = std::get<DcmParams>(true_params).lambda;
        else if (truth.kind == ModelKind::Pbm)
            std::get<PbmParams>(params).p = std::get<PbmParams>(true_params).p;
    }
    const OptimizationResult chosen = pessimistic_optimize(fitted, truth.k);

    PessimismBoundReport report;
    for (const auto& [ctx, params] : truth.per_context) {
        BoundCheckRow row;
        row.context = ctx;
        row.concentration_held = concentration;
        const RankedList best = optimal_list(params, truth.k);
        row.error = list_value(best, params) - list_value(chosen.per_context.at(ctx), params);
        row.bound = 2.0 * certificate_width(counts, best, ctx, delta, e_count, x_count);
        row.vacuous = std::isinf(row.bound);
        row.violated = !row.vacuous && row.error > row.bound + 1e-12;
        if (row.violated) {
            report.any_violation = true;
            if (concentration) report.violation_under_concentration = true;
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace pessirank
