#pragma once

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pessirank/random.hpp"

namespace pessirank {

using Item = std::string;
using Context = std::string;
using ThetaTable = std::map<Item, double>;

// Click indicators for one displayed list, entry k in {0, 1}.
using ClickVector = std::vector<int>;

enum class ModelKind { Cm, Dcm, Pbm };

inline const char* to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::Cm: return "cm";
        case ModelKind::Dcm: return "dcm";
        case ModelKind::Pbm: return "pbm";
    }
    return "?";
}

inline ModelKind model_kind_from_string(std::string_view s) {
    if (s == "cm") return ModelKind::Cm;
    if (s == "dcm") return ModelKind::Dcm;
    if (s == "pbm") return ModelKind::Pbm;
    throw std::invalid_argument("unknown model kind: " + std::string(s));
}

// An ordered list of K distinct items.
struct RankedList {
    std::vector<Item> items;

    RankedList() = default;
    explicit RankedList(std::vector<Item> it) : items(std::move(it)) { validate(); }

    int size() const { return static_cast<int>(items.size()); }

    void validate() const {
        if (items.empty()) throw std::invalid_argument("RankedList: empty list");
        for (const Item& it : items)
            if (it.empty()) throw std::invalid_argument("RankedList: empty item id");
        std::vector<Item> sorted = items;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw std::invalid_argument("RankedList: duplicate item in list");
    }

    bool operator==(const RankedList& other) const { return items == other.items; }
};

// One record of the logged dataset: context, shown list, observed clicks.
struct LoggedInteraction {
    Context context;
    RankedList list;
    ClickVector clicks;

    void validate() const {
        if (context.empty()) throw std::invalid_argument("LoggedInteraction: empty context");
        list.validate();
        if (static_cast<int>(clicks.size()) != list.size())
            throw std::invalid_argument("LoggedInteraction: clicks length != list length");
        for (int c : clicks)
            if (c != 0 && c != 1)
                throw std::invalid_argument("LoggedInteraction: click indicator not in {0,1}");
    }
};

namespace detail {

inline void check_probability(double v, const char* what) {
    if (!(v >= 0.0) || !(v <= 1.0))
        throw std::invalid_argument(std::string(what) + ": probability outside [0, 1]");
}

inline void check_theta(const ThetaTable& theta) {
    for (const auto& [item, v] : theta) {
        if (item.empty()) throw std::invalid_argument("theta: empty item id");
        check_probability(v, "theta");
    }
}

inline double theta_at(const ThetaTable& theta, const Item& item) {
    const auto it = theta.find(item);
    if (it == theta.end())
        throw std::out_of_range("no theta entry for item '" + item + "'");
    return it->second;
}

}  // namespace detail

struct CmParams {
    ThetaTable theta;

    void validate(int k = 0) const {
        detail::check_theta(theta);
        if (k > 0 && static_cast<int>(theta.size()) < k)
            throw std::invalid_argument("CmParams: fewer items than K");
    }
};

struct DcmParams {
    ThetaTable theta;
    std::vector<double> lambda;  // continuation probability after a click at position k

    void validate(int k = 0) const {
        detail::check_theta(theta);
        for (double v : lambda) detail::check_probability(v, "lambda");
        if (k > 0 && static_cast<int>(lambda.size()) < k)
            throw std::invalid_argument("DcmParams: lambda shorter than K");
        if (k > 0 && static_cast<int>(theta.size()) < k)
            throw std::invalid_argument("DcmParams: fewer items than K");
    }
};

struct PbmParams {
    ThetaTable theta;
    std::vector<double> p;  // examination probability of position k

    void validate(int k = 0) const {
        detail::check_theta(theta);
        for (double v : p) detail::check_probability(v, "p");
        if (k > 0 && static_cast<int>(p.size()) < k)
            throw std::invalid_argument("PbmParams: p shorter than K");
        if (k > 0 && static_cast<int>(theta.size()) < k)
            throw std::invalid_argument("PbmParams: fewer items than K");
    }
};

using ModelParams = std::variant<CmParams, DcmParams, PbmParams>;

inline ModelKind kind_of(const ModelParams& params) {
    if (std::holds_alternative<CmParams>(params)) return ModelKind::Cm;
    if (std::holds_alternative<DcmParams>(params)) return ModelKind::Dcm;
    return ModelKind::Pbm;
}

inline const ThetaTable& theta_of(const ModelParams& params) {
    return std::visit([](const auto& p) -> const ThetaTable& { return p.theta; }, params);
}

inline void validate_params(const ModelParams& params, int k = 0) {
    std::visit([k](const auto& p) { p.validate(k); }, params);
}

// ---- List values ----

// CM: probability of a click, 1 - prod_k (1 - theta_{a_k}).
inline double value_cm(const RankedList& list, const CmParams& params) {
    double no_click = 1.0;
    for (const Item& a : list.items) no_click *= 1.0 - detail::theta_at(params.theta, a);
    return 1.0 - no_click;
}

// DCM: probability of a satisfactory click, 1 - prod_k (1 - (1-lambda_k) theta_{a_k}).
inline double value_dcm(const RankedList& list, const DcmParams& params) {
    if (static_cast<int>(params.lambda.size()) < list.size())
        throw std::invalid_argument("value_dcm: lambda shorter than list");
    double miss = 1.0;
    for (int k = 0; k < list.size(); ++k) {
        const double theta = detail::theta_at(params.theta, list.items[static_cast<size_t>(k)]);
        miss *= 1.0 - (1.0 - params.lambda[static_cast<size_t>(k)]) * theta;
    }
    return 1.0 - miss;
}

// PBM: expected number of clicks, sum_k theta_{a_k} p_k.
inline double value_pbm(const RankedList& list, const PbmParams& params) {
    if (static_cast<int>(params.p.size()) < list.size())
        throw std::invalid_argument("value_pbm: p shorter than list");
    double total = 0.0;
    for (int k = 0; k < list.size(); ++k)
        total += detail::theta_at(params.theta, list.items[static_cast<size_t>(k)]) *
                 params.p[static_cast<size_t>(k)];
    return total;
}

inline double value_of(const RankedList& list, const CmParams& p) { return value_cm(list, p); }
inline double value_of(const RankedList& list, const DcmParams& p) { return value_dcm(list, p); }
inline double value_of(const RankedList& list, const PbmParams& p) { return value_pbm(list, p); }

inline double list_value(const RankedList& list, const ModelParams& params) {
    return std::visit([&list](const auto& p) { return value_of(list, p); }, params);
}

// ---- Optimal lists ----
// Ties are broken deterministically: descending score, then ascending item id
// for items, ascending index for positions.

namespace detail {

inline std::vector<Item> top_k_items(const ThetaTable& theta, int k) {
    if (k <= 0) throw std::invalid_argument("optimal list: K must be positive");
    if (static_cast<int>(theta.size()) < k)
        throw std::invalid_argument("optimal list: K exceeds number of items");
    std::vector<std::pair<Item, double>> entries(theta.begin(), theta.end());
    std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<Item> out;
    out.reserve(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) out.push_back(entries[static_cast<size_t>(i)].first);
    return out;
}

// Position indices 0..k-1 ordered by descending weight, ties by index.
inline std::vector<int> positions_by_weight(const std::vector<double>& weights, int k) {
    std::vector<int> order(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) order[static_cast<size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&weights](int a, int b) {
        const double wa = weights[static_cast<size_t>(a)], wb = weights[static_cast<size_t>(b)];
        if (wa != wb) return wa > wb;
        return a < b;
    });
    return order;
}

}  // namespace detail

// CM: the K items of highest attraction, in descending order.
inline RankedList optimal_list_cm(const CmParams& params, int k) {
    return RankedList(detail::top_k_items(params.theta, k));
}

// DCM: k-th most attractive item at the position with k-th highest (1 - lambda).
inline RankedList optimal_list_dcm(const DcmParams& params, int k) {
    if (static_cast<int>(params.lambda.size()) < k)
        throw std::invalid_argument("optimal_list_dcm: lambda shorter than K");
    const std::vector<Item> items = detail::top_k_items(params.theta, k);
    std::vector<double> weights(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i)
        weights[static_cast<size_t>(i)] = 1.0 - params.lambda[static_cast<size_t>(i)];
    const std::vector<int> order = detail::positions_by_weight(weights, k);
    std::vector<Item> out(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) out[static_cast<size_t>(order[static_cast<size_t>(i)])] = items[static_cast<size_t>(i)];
    return RankedList(std::move(out));
}

// PBM: k-th most attractive item at the position with k-th highest p.
inline RankedList optimal_list_pbm(const PbmParams& params, int k) {
    if (static_cast<int>(params.p.size()) < k)
        throw std::invalid_argument("optimal_list_pbm: p shorter than K");
    const std::vector<Item> items = detail::top_k_items(params.theta, k);
    std::vector<double> weights(params.p.begin(), params.p.begin() + k);
    const std::vector<int> order = detail::positions_by_weight(weights, k);
    std::vector<Item> out(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) out[static_cast<size_t>(order[static_cast<size_t>(i)])] = items[static_cast<size_t>(i)];
    return RankedList(std::move(out));
}

inline RankedList optimal_list(const ModelParams& params, int k) {
    if (std::holds_alternative<CmParams>(params)) return optimal_list_cm(std::get<CmParams>(params), k);
    if (std::holds_alternative<DcmParams>(params)) return optimal_list_dcm(std::get<DcmParams>(params), k);
    return optimal_list_pbm(std::get<PbmParams>(params), k);
}

// ---- Click simulation ----
// RNG draw order is part of the deterministic contract: positions top-down,
// and in the DCM the termination coin immediately follows a click.

inline ClickVector simulate_clicks_cm(const RankedList& list, const CmParams& params,
                                      RandomEngine& rng) {
    ClickVector clicks(static_cast<size_t>(list.size()), 0);
    for (int k = 0; k < list.size(); ++k) {
        const double theta = detail::theta_at(params.theta, list.items[static_cast<size_t>(k)]);
        if (rng.bernoulli(theta)) {
            clicks[static_cast<size_t>(k)] = 1;
            break;  // scanning stops at the first click
        }
    }
    return clicks;
}

struct DcmSimulation {
    ClickVector clicks;
    int satisfied_position = -1;  // position of the satisfactory click, -1 if none
};

inline DcmSimulation simulate_clicks_dcm_detailed(const RankedList& list, const DcmParams& params,
                                                  RandomEngine& rng) {
    if (static_cast<int>(params.lambda.size()) < list.size())
        throw std::invalid_argument("simulate_clicks: lambda shorter than list");
    DcmSimulation sim;
    sim.clicks.assign(static_cast<size_t>(list.size()), 0);
    for (int k = 0; k < list.size(); ++k) {
        const double theta = detail::theta_at(params.theta, list.items[static_cast<size_t>(k)]);
        if (rng.bernoulli(theta)) {
            sim.clicks[static_cast<size_t>(k)] = 1;
            if (rng.bernoulli(1.0 - params.lambda[static_cast<size_t>(k)])) {
                sim.satisfied_position = k;  // user leaves satisfied
                break;
            }
        }
    }
    return sim;
}

inline ClickVector simulate_clicks_pbm(const RankedList& list, const PbmParams& params,
                                       RandomEngine& rng) {
    if (static_cast<int>(params.p.size()) < list.size())
        throw std::invalid_argument("simulate_clicks: p shorter than list");
    ClickVector clicks(static_cast<size_t>(list.size()), 0);
    for (int k = 0; k < list.size(); ++k) {
        const double theta = detail::theta_at(params.theta, list.items[static_cast<size_t>(k)]);
        if (rng.bernoulli(params.p[static_cast<size_t>(k)] * theta))
            clicks[static_cast<size_t>(k)] = 1;
    }
    return clicks;
}

inline ClickVector simulate_clicks(const RankedList& list, const ModelParams& params,
                                   RandomEngine& rng) {
    if (std::holds_alternative<CmParams>(params))
        return simulate_clicks_cm(list, std::get<CmParams>(params), rng);
    if (std::holds_alternative<DcmParams>(params))
        return simulate_clicks_dcm_detailed(list, std::get<DcmParams>(params), rng).clicks;
    return simulate_clicks_pbm(list, std::get<PbmParams>(params), rng);
}

// Per-context model parameters used to simulate users and score lists.
struct GroundTruth {
    ModelKind kind = ModelKind::Cm;
    int k = 1;
    std::map<Context, ModelParams> per_context;

    void validate() const {
        if (k < 1) throw std::invalid_argument("GroundTruth: K must be >= 1");
        if (per_context.empty()) throw std::invalid_argument("GroundTruth: no contexts");
        for (const auto& [ctx, params] : per_context) {
            if (ctx.empty()) throw std::invalid_argument("GroundTruth: empty context id");
            if (kind_of(params) != kind)
                throw std::invalid_argument("GroundTruth: params kind mismatch in context " + ctx);
            validate_params(params, k);
        }
    }
};

}  // namespace pessirank
