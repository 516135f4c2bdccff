#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pessirank/core.hpp"
#include "pessirank/numerics.hpp"

namespace pessirank {

enum class BoundKind { Mle, Map, HoeffdingLcb, BayesLcb };
enum class UnionBoundMode { None, Items, ItemsAndContexts };
enum class PriorSource { Fixed, EmpiricalBayes };
enum class PriorPooling { Pooled, PerContext };

// How the position parameters (DCM lambda, PBM p) are treated when building a
// fitted table. ModelDefault bounds the DCM satisfaction probabilities
// (1 - lambda_k) with the configured bound kind and leaves the PBM examination
// estimates p-hat as-is; the other modes force one behavior for both models.
enum class PositionHandling { ModelDefault, PointEstimate, Lcb };

inline const char* to_string(BoundKind kind) {
    switch (kind) {
        case BoundKind::Mle: return "mle";
        case BoundKind::Map: return "map";
        case BoundKind::HoeffdingLcb: return "hoeffding";
        case BoundKind::BayesLcb: return "bayes";
    }
    return "?";
}

inline BoundKind bound_kind_from_string(std::string_view s) {
    if (s == "mle") return BoundKind::Mle;
    if (s == "map") return BoundKind::Map;
    if (s == "hoeffding") return BoundKind::HoeffdingLcb;
    if (s == "bayes") return BoundKind::BayesLcb;
    throw std::invalid_argument("unknown bound kind: " + std::string(s));
}

inline UnionBoundMode union_bound_from_string(std::string_view s) {
    if (s == "none") return UnionBoundMode::None;
    if (s == "items") return UnionBoundMode::Items;
    if (s == "full" || s == "items_and_contexts") return UnionBoundMode::ItemsAndContexts;
    throw std::invalid_argument("unknown union-bound mode: " + std::string(s));
}

inline const char* to_string(UnionBoundMode mode) {
    switch (mode) {
        case UnionBoundMode::None: return "none";
        case UnionBoundMode::Items: return "items";
        case UnionBoundMode::ItemsAndContexts: return "full";
    }
    return "?";
}

// The grid the prior search runs on by default: {2^(i-1)} for i = 1..10.
inline std::vector<double> default_eb_grid(int size = 10) {
    std::vector<double> grid;
    grid.reserve(static_cast<size_t>(size));
    double v = 1.0;
    for (int i = 0; i < size; ++i, v *= 2.0) grid.push_back(v);
    return grid;
}

struct EstimatorConfig {
    BoundKind kind = BoundKind::HoeffdingLcb;
    double delta = 0.05;
    BetaPrior prior{1.0, 1.0};
    std::optional<BetaPrior> position_prior;  // falls back to `prior` when unset
    UnionBoundMode union_bound = UnionBoundMode::ItemsAndContexts;
    PriorSource prior_source = PriorSource::Fixed;
    PriorPooling prior_pooling = PriorPooling::Pooled;
    PositionHandling position_handling = PositionHandling::ModelDefault;
    std::vector<double> eb_grid = default_eb_grid();

    void validate() const {
        if (!(delta > 0.0) || !(delta <= 1.0))
            throw std::invalid_argument("EstimatorConfig: delta must be in (0, 1]");
        prior.validate();
        if (position_prior) position_prior->validate();
        if (prior_source == PriorSource::EmpiricalBayes && eb_grid.empty())
            throw std::invalid_argument("EstimatorConfig: empty empirical-Bayes grid");
        for (double g : eb_grid)
            if (!(g > 0.0) || !std::isfinite(g))
                throw std::invalid_argument("EstimatorConfig: grid values must be positive");
    }
};

// Sufficient statistics extracted from a log under one model's examination
// rule. position_stats hold, per position, the DCM termination counts
// (click-was-last vs. more-clicks-below) or the PBM click-at-position counts;
// p_hat is the PBM examination estimate, pos / (pos + neg) of those counts.
struct StatsTable {
    ModelKind kind = ModelKind::Cm;
    int k = 0;
    std::map<Context, std::map<Item, BinomialStats>> item_stats;
    std::map<Context, std::vector<BinomialStats>> position_stats;
    std::map<Context, std::vector<double>> p_hat;
};

namespace detail {

inline int uniform_list_length(const std::vector<LoggedInteraction>& log) {
    int k = 0;
    for (size_t i = 0; i < log.size(); ++i) {
        log[i].validate();
        if (k == 0)
            k = log[i].list.size();
        else if (log[i].list.size() != k)
            throw std::invalid_argument("stats: ragged list length at record " +
                                        std::to_string(i + 1));
    }
    return k;
}

inline void touch_items(std::map<Item, BinomialStats>& stats, const RankedList& list) {
    for (const Item& a : list.items) stats.try_emplace(a);
}

}  // namespace detail

// CM examination rule: positions 1..first click are examined; a record with
// several clicks is truncated at the topmost one, the rest are discarded.
inline StatsTable collect_stats_cm(const std::vector<LoggedInteraction>& log) {
    StatsTable table;
    table.kind = ModelKind::Cm;
    table.k = detail::uniform_list_length(log);
    for (const LoggedInteraction& rec : log) {
        auto& items = table.item_stats[rec.context];
        detail::touch_items(items, rec.list);
        int first_click = -1;
        for (int k = 0; k < rec.list.size(); ++k)
            if (rec.clicks[static_cast<size_t>(k)] == 1) {
                first_click = k;
                break;
            }
        const int examined_end = first_click < 0 ? rec.list.size() : first_click + 1;
        for (int k = 0; k < examined_end; ++k) {
            BinomialStats& s = items[rec.list.items[static_cast<size_t>(k)]];
            if (k == first_click)
                s.pos += 1.0;
            else
                s.neg += 1.0;
        }
    }
    return table;
}

// DCM examination rule: positions 1..last click are examined (all K when there
// is no click). Position stats count, among clicks at position k, whether the
// click was the record's last one (termination) or not (continuation).
inline StatsTable collect_stats_dcm(const std::vector<LoggedInteraction>& log) {
    StatsTable table;
    table.kind = ModelKind::Dcm;
    table.k = detail::uniform_list_length(log);
    for (const LoggedInteraction& rec : log) {
        auto& items = table.item_stats[rec.context];
        detail::touch_items(items, rec.list);
        auto& positions = table.position_stats[rec.context];
        positions.resize(static_cast<size_t>(table.k));

        int last_click = -1;
        int total_clicks = 0;
        for (int k = 0; k < rec.list.size(); ++k)
            if (rec.clicks[static_cast<size_t>(k)] == 1) {
                last_click = k;
                ++total_clicks;
            }
        const int examined_end = last_click < 0 ? rec.list.size() : last_click + 1;
        int clicks_at_or_below = total_clicks;
        for (int k = 0; k < examined_end; ++k) {
            BinomialStats& s = items[rec.list.items[static_cast<size_t>(k)]];
            if (rec.clicks[static_cast<size_t>(k)] == 1) {
                s.pos += 1.0;
                if (clicks_at_or_below == 1)
                    positions[static_cast<size_t>(k)].pos += 1.0;  // last click in the record
                else
                    positions[static_cast<size_t>(k)].neg += 1.0;  // user kept clicking below
                --clicks_at_or_below;
            } else {
                s.neg += 1.0;
            }
        }
    }
    return table;
}

// PBM: first the per-position click rate p-hat, then examination-weighted
// fractional item counts. Position stats hold the raw click-at-position
// counts, so p-hat equals their MLE.
inline StatsTable collect_stats_pbm(const std::vector<LoggedInteraction>& log) {
    StatsTable table;
    table.kind = ModelKind::Pbm;
    table.k = detail::uniform_list_length(log);

    std::map<Context, int> records_per_context;
    for (const LoggedInteraction& rec : log) {
        ++records_per_context[rec.context];
        auto& positions = table.position_stats[rec.context];
        positions.resize(static_cast<size_t>(table.k));
        for (int k = 0; k < rec.list.size(); ++k) {
            if (rec.clicks[static_cast<size_t>(k)] == 1)
                positions[static_cast<size_t>(k)].pos += 1.0;
            else
                positions[static_cast<size_t>(k)].neg += 1.0;
        }
    }
    for (const auto& [ctx, positions] : table.position_stats) {
        auto& p_hat = table.p_hat[ctx];
        p_hat.resize(static_cast<size_t>(table.k), 0.0);
        const double n = records_per_context[ctx];
        for (int k = 0; k < table.k; ++k)
            p_hat[static_cast<size_t>(k)] = positions[static_cast<size_t>(k)].pos / n;
    }
    for (const LoggedInteraction& rec : log) {
        auto& items = table.item_stats[rec.context];
        detail::touch_items(items, rec.list);
        const auto& p_hat = table.p_hat[rec.context];
        for (int k = 0; k < rec.list.size(); ++k) {
            const double w = p_hat[static_cast<size_t>(k)];
            BinomialStats& s = items[rec.list.items[static_cast<size_t>(k)]];
            if (rec.clicks[static_cast<size_t>(k)] == 1)
                s.pos += w;
            else
                s.neg += w;
        }
    }
    return table;
}

inline StatsTable collect_stats(ModelKind kind, const std::vector<LoggedInteraction>& log) {
    switch (kind) {
        case ModelKind::Cm: return collect_stats_cm(log);
        case ModelKind::Dcm: return collect_stats_dcm(log);
        case ModelKind::Pbm: return collect_stats_pbm(log);
    }
    throw std::invalid_argument("collect_stats: bad model kind");
}

// MLE or MAP point estimate, clamped to [0, 1]. MAP with an undefined mode
// (denominator <= 0, e.g. Beta(1,1) and no data) falls back to the prior mean.
inline double point_estimate(const BinomialStats& stats, const EstimatorConfig& config) {
    stats.validate();
    switch (config.kind) {
        case BoundKind::Mle: {
            const double n = stats.n();
            if (!(n > 0.0)) throw std::invalid_argument("point_estimate: MLE on empty stats");
            return stats.pos / n;
        }
        case BoundKind::Map: {
            config.prior.validate();
            const double denom = stats.n() + config.prior.alpha + config.prior.beta - 2.0;
            if (denom > 0.0) {
                const double v = (stats.pos + config.prior.alpha - 1.0) / denom;
                return std::min(1.0, std::max(0.0, v));
            }
            return config.prior.mean();
        }
        default:
            throw std::invalid_argument("point_estimate: kind must be MLE or MAP");
    }
}

// Marginal log-likelihood of integer Bernoulli observations under a
// Beta(alpha, beta) prior on each variable's mean.
inline double beta_binomial_log_likelihood(const std::vector<BinomialStats>& stats,
                                           const BetaPrior& prior) {
    prior.validate();
    const double a = prior.alpha, b = prior.beta;
    const double ln_prior_norm = log_gamma(a + b) - log_gamma(a) - log_gamma(b);
    double total = 0.0;
    for (const BinomialStats& s : stats) {
        s.validate();
        if (std::fabs(s.pos - std::round(s.pos)) > 1e-9 ||
            std::fabs(s.neg - std::round(s.neg)) > 1e-9)
            throw std::invalid_argument(
                "beta_binomial_log_likelihood: fractional counts (the marginal likelihood "
                "is defined only for true Bernoulli observations)");
        total += ln_prior_norm + log_gamma(a + s.pos) + log_gamma(b + s.neg) -
                 log_gamma(a + b + s.n());
    }
    return total;
}

// Grid search maximizing the marginal likelihood. Ties go to the smaller
// alpha, then the smaller beta.
inline BetaPrior fit_empirical_bayes(const std::vector<BinomialStats>& stats,
                                     const std::vector<double>& grid) {
    if (grid.empty()) throw std::invalid_argument("fit_empirical_bayes: empty grid");
    std::vector<double> sorted = grid;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (double g : sorted)
        if (!(g > 0.0) || !std::isfinite(g))
            throw std::invalid_argument("fit_empirical_bayes: grid values must be positive");

    BetaPrior best{sorted.front(), sorted.front()};
    double best_ll = -std::numeric_limits<double>::infinity();
    for (double alpha : sorted) {
        for (double beta : sorted) {
            const double ll = beta_binomial_log_likelihood(stats, BetaPrior{alpha, beta});
            if (ll > best_ll) {
                best_ll = ll;
                best = BetaPrior{alpha, beta};
            }
        }
    }
    return best;
}

// Estimated model parameters, LCB-substituted per config.
struct FittedParams {
    ModelKind kind = ModelKind::Cm;
    int k = 0;
    std::map<Context, ModelParams> per_context;
};

namespace detail {

inline double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

// One bounded parameter value. MLE behaves as Hoeffding at delta = 1;
// parameters with no observations get 0 (frequentist kinds), the MAP
// fallback, or the pure-prior quantile (Bayes).
inline double bound_value(const BinomialStats& stats, BoundKind kind, double delta_eff,
                          const BetaPrior& prior) {
    switch (kind) {
        case BoundKind::Mle:
            return stats.n() > 0.0 ? stats.pos / stats.n() : 0.0;
        case BoundKind::Map: {
            EstimatorConfig map_cfg;
            map_cfg.kind = BoundKind::Map;
            map_cfg.prior = prior;
            return point_estimate(stats, map_cfg);
        }
        case BoundKind::HoeffdingLcb:
            return stats.n() > 0.0 ? clamp01(hoeffding_lcb(stats, delta_eff)) : 0.0;
        case BoundKind::BayesLcb:
            return bayes_lcb(stats, prior, delta_eff);
    }
    throw std::invalid_argument("bound_value: bad kind");
}

inline double raw_frequency(const BinomialStats& stats) {
    return stats.n() > 0.0 ? stats.pos / stats.n() : 0.0;
}

inline std::vector<BinomialStats> pooled_item_stats(const StatsTable& table) {
    std::vector<BinomialStats> out;
    for (const auto& [ctx, items] : table.item_stats)
        for (const auto& [item, s] : items) out.push_back(s);
    return out;
}

inline std::vector<BinomialStats> pooled_position_stats(const StatsTable& table) {
    std::vector<BinomialStats> out;
    for (const auto& [ctx, positions] : table.position_stats)
        for (const BinomialStats& s : positions) out.push_back(s);
    return out;
}

}  // namespace detail

// Number of distinct items across every context of the table.
inline int ground_set_size(const StatsTable& table) {
    std::map<Item, int> seen;
    for (const auto& [ctx, items] : table.item_stats)
        for (const auto& [item, s] : items) seen.try_emplace(item);
    return static_cast<int>(seen.size());
}

// Build the fitted parameter tables: the per-parameter effective delta is
// delta (none), delta/|E| (items) or delta/(|E||X|) (items and contexts), then
// the configured bound is applied and clamped into [0, 1].
inline FittedParams lcb_table(const StatsTable& stats, const EstimatorConfig& config) {
    config.validate();
    FittedParams fitted;
    fitted.kind = stats.kind;
    fitted.k = stats.k;

    const int e_count = std::max(1, ground_set_size(stats));
    const int x_count = std::max(1, static_cast<int>(stats.item_stats.size()));
    double delta_eff = config.delta;
    if (config.union_bound == UnionBoundMode::Items)
        delta_eff = config.delta / e_count;
    else if (config.union_bound == UnionBoundMode::ItemsAndContexts)
        delta_eff = config.delta / (static_cast<double>(e_count) * x_count);

    const bool needs_prior = config.kind == BoundKind::Map || config.kind == BoundKind::BayesLcb;
    BetaPrior pooled_item_prior = config.prior;
    BetaPrior pooled_position_prior = config.position_prior.value_or(config.prior);
    if (needs_prior && config.prior_source == PriorSource::EmpiricalBayes &&
        config.prior_pooling == PriorPooling::Pooled) {
        pooled_item_prior = fit_empirical_bayes(detail::pooled_item_stats(stats), config.eb_grid);
        if (!stats.position_stats.empty() && stats.kind == ModelKind::Dcm)
            pooled_position_prior =
                fit_empirical_bayes(detail::pooled_position_stats(stats), config.eb_grid);
    }

    for (const auto& [ctx, items] : stats.item_stats) {
        BetaPrior item_prior = pooled_item_prior;
        BetaPrior position_prior = pooled_position_prior;
        if (needs_prior && config.prior_source == PriorSource::EmpiricalBayes &&
            config.prior_pooling == PriorPooling::PerContext) {
            std::vector<BinomialStats> ctx_stats;
            for (const auto& [item, s] : items) ctx_stats.push_back(s);
            item_prior = fit_empirical_bayes(ctx_stats, config.eb_grid);
            const auto pit = stats.position_stats.find(ctx);
            if (pit != stats.position_stats.end() && stats.kind == ModelKind::Dcm)
                position_prior = fit_empirical_bayes(pit->second, config.eb_grid);
        }

        ThetaTable theta;
        for (const auto& [item, s] : items)
            theta[item] = detail::bound_value(s, config.kind, delta_eff, item_prior);

        switch (stats.kind) {
            case ModelKind::Cm:
                fitted.per_context.emplace(ctx, CmParams{std::move(theta)});
                break;
            case ModelKind::Dcm: {
                const auto& positions = stats.position_stats.at(ctx);
                std::vector<double> lambda(positions.size(), 0.0);
                for (size_t k = 0; k < positions.size(); ++k) {
                    double satisfied;  // bound or estimate of 1 - lambda_k
                    if (config.position_handling == PositionHandling::PointEstimate)
                        satisfied = detail::raw_frequency(positions[k]);
                    else
                        satisfied =
                            detail::bound_value(positions[k], config.kind, delta_eff, position_prior);
                    lambda[k] = 1.0 - satisfied;
                }
                fitted.per_context.emplace(ctx, DcmParams{std::move(theta), std::move(lambda)});
                break;
            }
            case ModelKind::Pbm: {
                std::vector<double> p = stats.p_hat.at(ctx);
                if (config.position_handling == PositionHandling::Lcb) {
                    const auto& positions = stats.position_stats.at(ctx);
                    for (size_t k = 0; k < positions.size(); ++k)
                        p[k] = detail::bound_value(positions[k], config.kind, delta_eff,
                                                   position_prior);
                }
                fitted.per_context.emplace(ctx, PbmParams{std::move(theta), std::move(p)});
                break;
            }
        }
    }
    return fitted;
}

}  // namespace pessirank
