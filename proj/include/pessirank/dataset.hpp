#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pessirank/core.hpp"
#include "pessirank/numerics.hpp"
#include "pessirank/random.hpp"

namespace pessirank {

// Validation / schema failure on external data. CLI maps this to exit code 2.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::string padded_id(const char* prefix, int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%s%04d", prefix, i);
    return buf;
}

}  // namespace detail

// ---- Logged dataset files ----
// JSON Lines, one record per line:
//   {"context": "<id>", "items": ["<id>", ...], "clicks": [0|1, ...]}
// Keys are emitted in exactly that order, so identical input gives identical
// bytes.

inline std::vector<LoggedInteraction> read_log(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open log file: " + path);
    std::vector<LoggedInteraction> records;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where + ": invalid JSON: " + e.what());
        }
        if (!doc.is_object() || !doc.contains("context") || !doc.contains("items") ||
            !doc.contains("clicks"))
            throw DataError(where + ": record must have context, items, clicks");
        LoggedInteraction rec;
        try {
            rec.context = doc.at("context").get<std::string>();
            rec.list.items = doc.at("items").get<std::vector<std::string>>();
            rec.clicks = doc.at("clicks").get<std::vector<int>>();
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where + ": bad field type: " + e.what());
        }
        try {
            rec.validate();
        } catch (const std::exception& e) {
            throw DataError(where + ": " + e.what());
        }
        records.push_back(std::move(rec));
    }
    return records;
}

inline void write_log(const std::vector<LoggedInteraction>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write log file: " + path);
    for (const LoggedInteraction& rec : records) {
        rec.validate();
        nlohmann::ordered_json doc;
        doc["context"] = rec.context;
        doc["items"] = rec.list.items;
        doc["clicks"] = rec.clicks;
        out << doc.dump() << '\n';
    }
    if (!out) throw DataError("write failed: " + path);
}

// ---- Ground-truth files ----
// Single JSON document:
//   {"model": "cm|dcm|pbm", "k": K,
//    "contexts": {"<ctx>": {"theta": {"<item>": v}, "lambda": [...], "p": [...]}}}
// lambda appears only for dcm, p only for pbm.

inline void write_ground_truth(const GroundTruth& truth, const std::string& path) {
    truth.validate();
    nlohmann::ordered_json doc;
    doc["model"] = to_string(truth.kind);
    doc["k"] = truth.k;
    nlohmann::ordered_json contexts = nlohmann::ordered_json::object();
    for (const auto& [ctx, params] : truth.per_context) {
        nlohmann::ordered_json entry;
        nlohmann::ordered_json theta = nlohmann::ordered_json::object();
        for (const auto& [item, v] : theta_of(params)) theta[item] = v;
        entry["theta"] = std::move(theta);
        if (truth.kind == ModelKind::Dcm)
            entry["lambda"] = std::get<DcmParams>(params).lambda;
        else if (truth.kind == ModelKind::Pbm)
            entry["p"] = std::get<PbmParams>(params).p;
        contexts[ctx] = std::move(entry);
    }
    doc["contexts"] = std::move(contexts);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write ground-truth file: " + path);
    out << doc.dump(2) << '\n';
    if (!out) throw DataError("write failed: " + path);
}

inline GroundTruth read_ground_truth(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open ground-truth file: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": invalid JSON: " + e.what());
    }
    GroundTruth truth;
    try {
        truth.kind = model_kind_from_string(doc.at("model").get<std::string>());
        truth.k = doc.at("k").get<int>();
        for (const auto& [ctx, entry] : doc.at("contexts").items()) {
            ThetaTable theta = entry.at("theta").get<ThetaTable>();
            switch (truth.kind) {
                case ModelKind::Cm:
                    truth.per_context.emplace(ctx, CmParams{std::move(theta)});
                    break;
                case ModelKind::Dcm:
                    truth.per_context.emplace(
                        ctx, DcmParams{std::move(theta),
                                       entry.at("lambda").get<std::vector<double>>()});
                    break;
                case ModelKind::Pbm:
                    truth.per_context.emplace(
                        ctx, PbmParams{std::move(theta), entry.at("p").get<std::vector<double>>()});
                    break;
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": bad schema: " + e.what());
    }
    try {
        truth.validate();
    } catch (const std::exception& e) {
        throw DataError(path + ": " + e.what());
    }
    return truth;
}

// ---- Synthetic ground truth ----

struct PositionSource {
    enum class Kind { Fixed, UniformRandom };
    Kind kind = Kind::UniformRandom;
    std::vector<double> values;  // used when Fixed; length K

    void validate(int k) const {
        if (kind == Kind::Fixed) {
            if (static_cast<int>(values.size()) != k)
                throw std::invalid_argument("PositionSource: fixed schedule length != K");
            for (double v : values)
                if (!(v >= 0.0) || !(v <= 1.0))
                    throw std::invalid_argument("PositionSource: value outside [0, 1]");
        }
    }
};

struct GroundTruthSpec {
    ModelKind kind = ModelKind::Cm;
    int contexts = 1;
    int items = 10;
    int k = 3;
    BetaPrior theta_prior{1.0, 1.0};
    PositionSource positions;  // lambda (dcm) or p (pbm); ignored for cm

    void validate() const {
        if (contexts < 1) throw std::invalid_argument("GroundTruthSpec: contexts must be >= 1");
        if (k < 1) throw std::invalid_argument("GroundTruthSpec: K must be >= 1");
        if (items < k) throw std::invalid_argument("GroundTruthSpec: fewer items than K");
        theta_prior.validate();
        if (kind != ModelKind::Cm) positions.validate(k);
    }
};

// Draw theta i.i.d. from the prior per (context, item); lambda / p from the
// position source. Context ids are c0000.., item ids i0000.. so lexicographic
// order matches index order.
inline GroundTruth generate_ground_truth(const GroundTruthSpec& spec, RandomEngine& rng) {
    spec.validate();
    GroundTruth truth;
    truth.kind = spec.kind;
    truth.k = spec.k;
    for (int c = 0; c < spec.contexts; ++c) {
        ThetaTable theta;
        for (int i = 0; i < spec.items; ++i)
            theta[detail::padded_id("i", i)] = sample_beta(spec.theta_prior, rng);
        std::vector<double> positions;
        if (spec.kind != ModelKind::Cm) {
            if (spec.positions.kind == PositionSource::Kind::Fixed) {
                positions = spec.positions.values;
            } else {
                positions.resize(static_cast<size_t>(spec.k));
                for (double& v : positions) v = rng.next_double();
            }
        }
        const Context ctx = detail::padded_id("c", c);
        switch (spec.kind) {
            case ModelKind::Cm:
                truth.per_context.emplace(ctx, CmParams{std::move(theta)});
                break;
            case ModelKind::Dcm:
                truth.per_context.emplace(ctx, DcmParams{std::move(theta), std::move(positions)});
                break;
            case ModelKind::Pbm:
                truth.per_context.emplace(ctx, PbmParams{std::move(theta), std::move(positions)});
                break;
        }
    }
    return truth;
}

// ---- Logging policies ----

enum class PolicyKind { UniformPermutation, TruthSoftmax };

struct LoggingPolicySpec {
    PolicyKind kind = PolicyKind::UniformPermutation;
    double temperature = 1.0;  // softmax only

    void validate() const {
        if (kind == PolicyKind::TruthSoftmax && !(temperature > 0.0))
            throw std::invalid_argument("LoggingPolicySpec: temperature must be positive");
    }
};

namespace detail {

inline RankedList draw_uniform_permutation(const std::vector<Item>& items, int k,
                                           RandomEngine& rng) {
    std::vector<Item> pool = items;
    for (int i = 0; i < k; ++i) {
        const size_t j = i + rng.uniform_below(pool.size() - static_cast<size_t>(i));
        std::swap(pool[static_cast<size_t>(i)], pool[j]);
    }
    pool.resize(static_cast<size_t>(k));
    return RankedList(std::move(pool));
}

// Sequential sampling without replacement, weight exp(theta / temperature).
// Shifted by the max for numerical stability.
inline RankedList draw_softmax_list(const std::vector<Item>& items, const ThetaTable& theta,
                                    double temperature, int k, RandomEngine& rng) {
    double max_theta = 0.0;
    for (const Item& a : items) max_theta = std::max(max_theta, theta.at(a));
    std::vector<Item> pool = items;
    std::vector<double> weights(pool.size());
    std::vector<Item> chosen;
    for (int slot = 0; slot < k; ++slot) {
        double total = 0.0;
        for (size_t i = 0; i < pool.size(); ++i) {
            weights[i] = std::exp((theta.at(pool[i]) - max_theta) / temperature);
            total += weights[i];
        }
        double u = rng.next_double() * total;
        size_t pick = pool.size() - 1;
        for (size_t i = 0; i < pool.size(); ++i) {
            u -= weights[i];
            if (u < 0.0) {
                pick = i;
                break;
            }
        }
        chosen.push_back(pool[pick]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
        weights.resize(pool.size());
    }
    return RankedList(std::move(chosen));
}

}  // namespace detail

// Records for a single context.
inline std::vector<LoggedInteraction> generate_context_log(const GroundTruth& truth,
                                                           const Context& ctx,
                                                           const LoggingPolicySpec& policy,
                                                           int count, RandomEngine& rng) {
    policy.validate();
    const ModelParams& params = truth.per_context.at(ctx);
    const ThetaTable& theta = theta_of(params);
    if (static_cast<int>(theta.size()) < truth.k)
        throw std::invalid_argument("generate_context_log: fewer items than K in context " + ctx);
    std::vector<Item> items;
    items.reserve(theta.size());
    for (const auto& [item, v] : theta) items.push_back(item);

    std::vector<LoggedInteraction> records;
    records.reserve(static_cast<size_t>(count));
    for (int t = 0; t < count; ++t) {
        RankedList list = policy.kind == PolicyKind::UniformPermutation
                              ? detail::draw_uniform_permutation(items, truth.k, rng)
                              : detail::draw_softmax_list(items, theta, policy.temperature,
                                                          truth.k, rng);
        ClickVector clicks = simulate_clicks(list, params, rng);
        records.push_back(LoggedInteraction{ctx, std::move(list), std::move(clicks)});
    }
    return records;
}

// n_per_context records for every context, in context order. Each context
// draws from its own derived stream, so per-context generation order is
// schedule-independent.
inline std::vector<LoggedInteraction> generate_log(const GroundTruth& truth,
                                                   const LoggingPolicySpec& policy,
                                                   int n_per_context, RandomEngine& rng) {
    truth.validate();
    if (n_per_context < 0) throw std::invalid_argument("generate_log: negative count");
    const std::uint64_t base = rng.next_u64();
    std::vector<LoggedInteraction> records;
    records.reserve(static_cast<size_t>(n_per_context) * truth.per_context.size());
    std::uint64_t ctx_index = 0;
    for (const auto& [ctx, params] : truth.per_context) {
        RandomEngine ctx_rng(derive_stream_seed(base, ctx_index++));
        auto ctx_records = generate_context_log(truth, ctx, policy, n_per_context, ctx_rng);
        for (auto& rec : ctx_records) records.push_back(std::move(rec));
    }
    return records;
}

// ---- Relevance-grade ingestion (LTR-style corpora) ----

// lambda_k = 1 - exp(coeff * k + offset) / divisor, clamped into [0, 1].
// The default coefficients reproduce the printed schedule, which is negative
// at k = 1 before clamping; all three are configurable.
struct LambdaRule {
    double coeff = -1.0;
    double offset = 0.5;
    double divisor = 0.5;

    double at(int position) const {  // 1-based position
        const double raw = 1.0 - std::exp(coeff * position + offset) / divisor;
        return std::min(1.0, std::max(0.0, raw));
    }
};

struct RelevanceMapping {
    std::map<int, double> grade_to_attraction;
    LambdaRule lambda_rule;
    std::vector<double> pbm_examination;

    // Default attraction table: grade g -> g / 4.
    static RelevanceMapping with_default_attraction() {
        RelevanceMapping m;
        for (int g = 0; g <= 4; ++g) m.grade_to_attraction[g] = g / 4.0;
        return m;
    }
};

inline GroundTruth relevance_to_truth(const std::map<Context, std::map<Item, int>>& grades,
                                      const RelevanceMapping& mapping, ModelKind kind, int k) {
    if (grades.empty()) throw DataError("relevance_to_truth: no contexts");
    GroundTruth truth;
    truth.kind = kind;
    truth.k = k;
    std::vector<double> lambda;
    for (int pos = 1; pos <= k; ++pos) lambda.push_back(mapping.lambda_rule.at(pos));
    if (kind == ModelKind::Pbm && static_cast<int>(mapping.pbm_examination.size()) < k)
        throw DataError("relevance_to_truth: pbm_examination shorter than K");

    for (const auto& [ctx, item_grades] : grades) {
        ThetaTable theta;
        for (const auto& [item, grade] : item_grades) {
            if (grade < 0 || grade > 4)
                throw DataError("relevance_to_truth: grade outside 0..4 for item " + item);
            const auto it = mapping.grade_to_attraction.find(grade);
            if (it == mapping.grade_to_attraction.end())
                throw DataError("relevance_to_truth: no attraction mapping for grade " +
                                std::to_string(grade));
            theta[item] = it->second;
        }
        switch (kind) {
            case ModelKind::Cm:
                truth.per_context.emplace(ctx, CmParams{std::move(theta)});
                break;
            case ModelKind::Dcm:
                truth.per_context.emplace(ctx, DcmParams{std::move(theta), lambda});
                break;
            case ModelKind::Pbm:
                truth.per_context.emplace(
                    ctx, PbmParams{std::move(theta),
                                   std::vector<double>(mapping.pbm_examination.begin(),
                                                       mapping.pbm_examination.begin() + k)});
                break;
        }
    }
    try {
        truth.validate();
    } catch (const std::exception& e) {
        throw DataError(std::string("relevance_to_truth: ") + e.what());
    }
    return truth;
}

}  // namespace pessirank
