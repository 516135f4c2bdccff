#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "pessirank/core.hpp"
#include "pessirank/linalg.hpp"
#include "pessirank/optimizer.hpp"

namespace pessirank {

// Clipping parameter M for the propensity weights; infinity disables clipping.
struct ClipConfig {
    double m = std::numeric_limits<double>::infinity();

    void validate() const {
        if (!(m > 0.0)) throw std::invalid_argument("ClipConfig: M must be positive");
    }
};

namespace detail {

struct ContextRecords {
    std::vector<const LoggedInteraction*> records;
};

inline std::map<Context, ContextRecords> group_by_context(
    const std::vector<LoggedInteraction>& log, int k) {
    if (log.empty()) throw std::invalid_argument("baseline: empty log");
    std::map<Context, ContextRecords> grouped;
    for (const LoggedInteraction& rec : log) {
        rec.validate();
        if (rec.list.size() != k)
            throw std::invalid_argument("baseline: record list length != K");
        grouped[rec.context].records.push_back(&rec);
    }
    return grouped;
}

inline int total_clicks(const LoggedInteraction& rec) {
    int c = 0;
    for (int y : rec.clicks) c += y;
    return c;
}

}  // namespace detail

// List-level clipped IPS. Propensities are the empirical list frequencies per
// context; the argmax runs over logged lists, since every unlogged list has
// estimate zero and loses to any positive one. Ties go to the list logged
// first.
inline OptimizationResult ips_optimize(const std::vector<LoggedInteraction>& log,
                                       const ClipConfig& clip, int k) {
    clip.validate();
    OptimizationResult result;
    for (const auto& [ctx, group] : detail::group_by_context(log, k)) {
        struct ListAgg {
            const RankedList* list = nullptr;
            int count = 0;
            double clicks = 0.0;
            size_t first_seen = 0;
        };
        std::map<std::vector<Item>, ListAgg> agg;
        std::vector<const ListAgg*> order;
        for (size_t t = 0; t < group.records.size(); ++t) {
            const LoggedInteraction& rec = *group.records[t];
            ListAgg& a = agg[rec.list.items];
            if (a.count == 0) {
                a.list = &rec.list;
                a.first_seen = t;
                order.push_back(&a);
            }
            ++a.count;
            a.clicks += detail::total_clicks(rec);
        }
        std::sort(order.begin(), order.end(),
                  [](const ListAgg* a, const ListAgg* b) { return a->first_seen < b->first_seen; });

        const double n_ctx = static_cast<double>(group.records.size());
        const ListAgg* best = nullptr;
        double best_value = -1.0;
        for (const ListAgg* a : order) {
            const double inv_propensity = n_ctx / a->count;  // 1 / p_{A,X}
            const double value = std::min(clip.m, inv_propensity) * a->clicks;
            if (value > best_value) {
                best_value = value;
                best = a;
            }
        }
        result.per_context.emplace(ctx, *best->list);
        result.per_context_value[ctx] = best_value;
    }
    return result;
}

// Item-position clipped IPS: per (item, position) scores, then a greedy fill
// over pairs by descending score, skipping used items and positions. Ties go
// to the higher position, then the smaller item id.
inline OptimizationResult item_position_ips_optimize(const std::vector<LoggedInteraction>& log,
                                                     const ClipConfig& clip, int k) {
    clip.validate();
    OptimizationResult result;
    for (const auto& [ctx, group] : detail::group_by_context(log, k)) {
        std::map<Item, std::vector<int>> impressions;  // per item, per position
        std::map<Item, std::vector<double>> clicks;
        for (const LoggedInteraction* rec : group.records) {
            for (int pos = 0; pos < k; ++pos) {
                const Item& a = rec->list.items[static_cast<size_t>(pos)];
                auto [imp_it, inserted] = impressions.try_emplace(a, std::vector<int>(k, 0));
                if (inserted) clicks.emplace(a, std::vector<double>(k, 0.0));
                ++imp_it->second[static_cast<size_t>(pos)];
                clicks[a][static_cast<size_t>(pos)] += rec->clicks[static_cast<size_t>(pos)];
            }
        }
        if (static_cast<int>(impressions.size()) < k)
            throw std::invalid_argument("item_position_ips: fewer than K items in context " + ctx);

        struct Entry {
            double score;
            int position;
            Item item;
        };
        const double n_ctx = static_cast<double>(group.records.size());
        std::vector<Entry> entries;
        for (const auto& [item, imp] : impressions) {
            for (int pos = 0; pos < k; ++pos) {
                double score = 0.0;
                if (imp[static_cast<size_t>(pos)] > 0) {
                    const double inv_propensity = n_ctx / imp[static_cast<size_t>(pos)];
                    score = std::min(clip.m, inv_propensity) * clicks[item][static_cast<size_t>(pos)];
                }
                entries.push_back(Entry{score, pos, item});
            }
        }
        std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
            if (a.score != b.score) return a.score > b.score;
            if (a.position != b.position) return a.position < b.position;
            return a.item < b.item;
        });

        std::vector<Item> slots(static_cast<size_t>(k));
        std::vector<bool> slot_used(static_cast<size_t>(k), false);
        std::set<Item> item_used;
        double value = 0.0;
        int filled = 0;
        for (const Entry& e : entries) {
            if (filled == k) break;
            if (slot_used[static_cast<size_t>(e.position)] || item_used.count(e.item)) continue;
            slots[static_cast<size_t>(e.position)] = e.item;
            slot_used[static_cast<size_t>(e.position)] = true;
            item_used.insert(e.item);
            value += e.score;
            ++filled;
        }
        result.per_context.emplace(ctx, RankedList(std::move(slots)));
        result.per_context_value[ctx] = value;
    }
    return result;
}

// Per-context regression weights over (position, item) indicator coordinates.
struct PiWeights {
    int k = 0;
    std::vector<Item> ground_set;  // sorted; coordinate = position * |E| + item index
    std::map<Context, std::vector<double>> per_context;
};

// Fit phi = pinv(E[1_A 1_A^T | X]) E[Y 1_A | X] from empirical moments.
inline PiWeights pi_fit(const std::vector<LoggedInteraction>& log, int k) {
    const auto grouped = detail::group_by_context(log, k);
    PiWeights weights;
    weights.k = k;
    std::set<Item> items;
    for (const LoggedInteraction& rec : log)
        items.insert(rec.list.items.begin(), rec.list.items.end());
    weights.ground_set.assign(items.begin(), items.end());

    std::map<Item, int> index;
    for (size_t i = 0; i < weights.ground_set.size(); ++i)
        index[weights.ground_set[i]] = static_cast<int>(i);
    const int e_count = static_cast<int>(weights.ground_set.size());
    const int dim = k * e_count;

    for (const auto& [ctx, group] : grouped) {
        Matrix moment(dim, dim);
        std::vector<double> target(static_cast<size_t>(dim), 0.0);
        const double n_ctx = static_cast<double>(group.records.size());
        std::vector<int> coords(static_cast<size_t>(k));
        for (const LoggedInteraction* rec : group.records) {
            for (int pos = 0; pos < k; ++pos)
                coords[static_cast<size_t>(pos)] =
                    pos * e_count + index[rec->list.items[static_cast<size_t>(pos)]];
            const double y = detail::total_clicks(*rec);
            for (int a : coords) {
                for (int b : coords) moment.at(a, b) += 1.0 / n_ctx;
                target[static_cast<size_t>(a)] += y / n_ctx;
            }
        }
        weights.per_context[ctx] = pseudoinverse(moment).multiply(target);
    }
    return weights;
}

// Greedy list construction from PI weights: positions top-down, each taking
// the best remaining item; ties by item id.
inline OptimizationResult pi_optimize(const PiWeights& weights, int k) {
    if (k != weights.k) throw std::invalid_argument("pi_optimize: K mismatch with fitted weights");
    const int e_count = static_cast<int>(weights.ground_set.size());
    if (e_count < k) throw std::invalid_argument("pi_optimize: fewer items than K");
    OptimizationResult result;
    for (const auto& [ctx, phi] : weights.per_context) {
        std::vector<bool> used(static_cast<size_t>(e_count), false);
        std::vector<Item> slots;
        double value = 0.0;
        for (int pos = 0; pos < k; ++pos) {
            int best = -1;
            double best_score = 0.0;
            for (int i = 0; i < e_count; ++i) {
                if (used[static_cast<size_t>(i)]) continue;
                const double score = phi[static_cast<size_t>(pos * e_count + i)];
                if (best < 0 || score > best_score) {
                    best = i;
                    best_score = score;
                }
            }
            used[static_cast<size_t>(best)] = true;
            slots.push_back(weights.ground_set[static_cast<size_t>(best)]);
            value += best_score;
        }
        result.per_context.emplace(ctx, RankedList(std::move(slots)));
        result.per_context_value[ctx] = value;
    }
    return result;
}

// The sweep grids: delta in {0.05, 0.10, ..., 1.00} paired positionally with
// M in {1, 5, 10, 50, 100, 200, ..., 1400, 1500, inf}.
inline std::vector<double> default_delta_grid() {
    std::vector<double> grid;
    for (int i = 1; i <= 20; ++i) grid.push_back(i / 20.0);
    return grid;
}

inline std::vector<double> default_clip_grid() {
    std::vector<double> grid = {1.0, 5.0, 10.0, 50.0};
    for (int m = 100; m <= 1500; m += 100) grid.push_back(m);
    grid.push_back(std::numeric_limits<double>::infinity());
    return grid;
}

// Positional pairing of a clipping grid with a delta grid.
inline std::map<double, double> clip_grid_to_delta(const std::vector<double>& clip_grid,
                                                   const std::vector<double>& delta_grid) {
    if (clip_grid.size() != delta_grid.size())
        throw std::invalid_argument("clip_grid_to_delta: grid length mismatch");
    std::map<double, double> mapping;
    for (size_t i = 0; i < clip_grid.size(); ++i) {
        if (!(clip_grid[i] > 0.0))
            throw std::invalid_argument("clip_grid_to_delta: M must be positive");
        if (!mapping.emplace(clip_grid[i], delta_grid[i]).second)
            throw std::invalid_argument("clip_grid_to_delta: duplicate clip value");
    }
    return mapping;
}

}  // namespace pessirank
