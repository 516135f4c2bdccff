#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "pessirank/baselines.hpp"
#include "pessirank/dataset.hpp"
#include "pessirank/estimators.hpp"
#include "pessirank/optimizer.hpp"

namespace pessirank {

struct TruthSource {
    enum class Kind { File, Generator };
    Kind kind = Kind::Generator;
    std::string file;
    GroundTruthSpec spec;
};

struct EstimatorSpec {
    std::string name;
    bool oracle = false;  // inject the true parameters; testing hook
    EstimatorConfig config;
};

struct BaselineSelection {
    bool ips = false;
    bool item_position_ips = false;
    bool pseudoinverse = false;

    bool any() const { return ips || item_position_ips || pseudoinverse; }
};

struct ExperimentConfig {
    TruthSource truth;
    LoggingPolicySpec policy;
    ModelKind estimator_model = ModelKind::Cm;  // may differ from the truth (mismatch runs)
    std::vector<EstimatorSpec> estimators;
    BaselineSelection baselines;
    std::vector<double> delta_grid = default_delta_grid();
    std::vector<double> clip_grid = default_clip_grid();
    int sample_size = 1000;  // total records per replicate, split across contexts
    int runs = 500;
    std::uint64_t base_seed = 0;
    double fixed_delta = 0.2;  // used by the sample-size sweep and the prior study
    int threads = 0;           // 0 = all hardware threads

    void validate() const {
        if (runs < 1) throw std::invalid_argument("ExperimentConfig: runs must be >= 1");
        if (sample_size < 1) throw std::invalid_argument("ExperimentConfig: sample_size must be >= 1");
        if (delta_grid.empty()) throw std::invalid_argument("ExperimentConfig: empty delta grid");
        for (double d : delta_grid)
            if (!(d > 0.0) || !(d <= 1.0))
                throw std::invalid_argument("ExperimentConfig: delta values must be in (0, 1]");
        if (!(fixed_delta > 0.0) || !(fixed_delta <= 1.0))
            throw std::invalid_argument("ExperimentConfig: fixed_delta must be in (0, 1]");
        if (estimators.empty() && !baselines.any())
            throw std::invalid_argument("ExperimentConfig: nothing to run");
        std::map<std::string, int> names;
        for (const EstimatorSpec& spec : estimators) {
            if (spec.name.empty())
                throw std::invalid_argument("ExperimentConfig: estimator with empty name");
            if (++names[spec.name] > 1)
                throw std::invalid_argument("ExperimentConfig: duplicate estimator name " +
                                            spec.name);
            spec.config.validate();
        }
        if (baselines.ips || baselines.item_position_ips)
            clip_grid_to_delta(clip_grid, delta_grid);  // validates the positional pairing
        if (truth.kind == TruthSource::Kind::Generator) truth.spec.validate();
        policy.validate();
    }
};

// Per-replicate errors: estimators indexed by the delta grid, baselines by the
// clip grid (the pseudoinverse baseline has no knob and repeats its error).
struct ReplicateRecord {
    std::map<std::string, std::vector<double>> estimator_errors;
    std::map<std::string, std::vector<double>> baseline_errors;
};

namespace detail {

inline GroundTruth materialize_truth(const ExperimentConfig& config,
                                     const std::optional<GroundTruth>& file_truth,
                                     RandomEngine& rng) {
    if (config.truth.kind == TruthSource::Kind::File) {
        if (file_truth) return *file_truth;
        return read_ground_truth(config.truth.file);
    }
    return generate_ground_truth(config.truth.spec, rng);
}

inline ReplicateRecord run_replicate_impl(const ExperimentConfig& config,
                                          const std::optional<GroundTruth>& file_truth,
                                          std::uint64_t seed) {
    RandomEngine rng(mix64(seed));
    const GroundTruth truth = materialize_truth(config, file_truth, rng);
    truth.validate();

    // sample_size records total, split as evenly as context order allows.
    const int x_count = static_cast<int>(truth.per_context.size());
    const int base_n = config.sample_size / x_count;
    const int remainder = config.sample_size % x_count;
    std::vector<LoggedInteraction> log;
    log.reserve(static_cast<size_t>(config.sample_size));
    int ctx_index = 0;
    for (const auto& [ctx, params] : truth.per_context) {
        const int count = base_n + (ctx_index < remainder ? 1 : 0);
        auto records = generate_context_log(truth, ctx, config.policy, count, rng);
        for (auto& rec : records) log.push_back(std::move(rec));
        ++ctx_index;
    }

    const StatsTable stats = collect_stats(config.estimator_model, log);
    ReplicateRecord record;
    const size_t n_delta = config.delta_grid.size();

    for (const EstimatorSpec& spec : config.estimators) {
        std::vector<double>& errors = record.estimator_errors[spec.name];
        errors.assign(n_delta, 0.0);
        if (spec.oracle) {
            FittedParams oracle{truth.kind, truth.k, truth.per_context};
            const double err =
                evaluation_error(truth, pessimistic_optimize(oracle, truth.k));
            std::fill(errors.begin(), errors.end(), err);
            continue;
        }
        EstimatorConfig cfg = spec.config;
        // Pooled empirical-Bayes priors do not depend on delta; fit them once.
        if ((cfg.kind == BoundKind::Map || cfg.kind == BoundKind::BayesLcb) &&
            cfg.prior_source == PriorSource::EmpiricalBayes &&
            cfg.prior_pooling == PriorPooling::Pooled) {
            cfg.prior = fit_empirical_bayes(detail::pooled_item_stats(stats), cfg.eb_grid);
            if (stats.kind == ModelKind::Dcm)
                cfg.position_prior =
                    fit_empirical_bayes(detail::pooled_position_stats(stats), cfg.eb_grid);
            cfg.prior_source = PriorSource::Fixed;
        }
        if (cfg.kind == BoundKind::Mle || cfg.kind == BoundKind::Map) {
            cfg.delta = 1.0;  // delta-independent rows
            const double err =
                evaluation_error(truth, pessimistic_optimize(lcb_table(stats, cfg), truth.k));
            std::fill(errors.begin(), errors.end(), err);
        } else {
            for (size_t j = 0; j < n_delta; ++j) {
                cfg.delta = config.delta_grid[j];
                errors[j] =
                    evaluation_error(truth, pessimistic_optimize(lcb_table(stats, cfg), truth.k));
            }
        }
    }

    // Baseline errors are also indexed by the delta grid: the clipped IPS
    // variants take the clipping value paired with each position, the
    // pseudoinverse baseline has no knob and repeats its error.
    if (config.baselines.ips) {
        std::vector<double>& errors = record.baseline_errors["ips"];
        errors.assign(n_delta, 0.0);
        for (size_t j = 0; j < n_delta; ++j)
            errors[j] = evaluation_error(
                truth, ips_optimize(log, ClipConfig{config.clip_grid[j]}, truth.k));
    }
    if (config.baselines.item_position_ips) {
        std::vector<double>& errors = record.baseline_errors["ip_ips"];
        errors.assign(n_delta, 0.0);
        for (size_t j = 0; j < n_delta; ++j)
            errors[j] = evaluation_error(
                truth, item_position_ips_optimize(log, ClipConfig{config.clip_grid[j]}, truth.k));
    }
    if (config.baselines.pseudoinverse) {
        std::vector<double>& errors = record.baseline_errors["pi"];
        const double err =
            evaluation_error(truth, pi_optimize(pi_fit(log, truth.k), truth.k));
        errors.assign(n_delta, err);
    }
    return record;
}

// Replicate i runs on stream seed mix64(base_seed + i); adding replicates
// never perturbs earlier ones. Worker threads pull indices from a shared
// counter and write into their own slot, so the result is schedule-free.
inline std::vector<ReplicateRecord> run_all_replicates(
    const ExperimentConfig& config, const std::optional<GroundTruth>& file_truth) {
    const int runs = config.runs;
    std::vector<ReplicateRecord> records(static_cast<size_t>(runs));
    int threads = config.threads > 0 ? config.threads
                                     : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, runs));

    std::atomic<int> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto worker = [&]() {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= runs) return;
            try {
                records[static_cast<size_t>(i)] =
                    run_replicate_impl(config, file_truth, config.base_seed + static_cast<std::uint64_t>(i));
            } catch (...) {
                std::lock_guard<std::mutex> guard(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return records;
}

struct Aggregate {
    double mean = 0.0;
    double std_error = 0.0;
};

// Two-pass mean and standard error (sample std / sqrt(n)); n = 1 gives 0.
inline Aggregate aggregate(const std::vector<double>& xs) {
    Aggregate out;
    const size_t n = xs.size();
    if (n == 0) return out;
    double sum = 0.0;
    for (double x : xs) sum += x;
    out.mean = sum / static_cast<double>(n);
    if (n < 2) return out;
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.std_error = std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
    return out;
}

}  // namespace detail

// Runs the full pipeline once: materialize truth, draw a log with clicks
// regenerated from it, fit every configured estimator, optimize, and score
// against the truth.
inline ReplicateRecord run_replicate(const ExperimentConfig& config, std::uint64_t seed) {
    config.validate();
    std::optional<GroundTruth> file_truth;
    if (config.truth.kind == TruthSource::Kind::File)
        file_truth = read_ground_truth(config.truth.file);
    return detail::run_replicate_impl(config, file_truth, seed);
}

struct SweepRow {
    std::string model;
    std::string estimator;
    double delta_or_m = 0.0;
    double mean_error = 0.0;
    double std_error = 0.0;
    int runs = 0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
};

namespace detail {

inline void sort_rows(std::vector<SweepRow>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        if (a.estimator != b.estimator) return a.estimator < b.estimator;
        return a.delta_or_m < b.delta_or_m;
    });
}

}  // namespace detail

// Mean and standard error per estimator and grid point over seeded replicates.
// Baseline rows are positioned at the delta paired with their clipping value.
// Mismatched estimators (estimator model != truth model) get the estimator
// model prefixed to their name, e.g. "dcm:bayes".
inline SweepResult sweep_delta(const ExperimentConfig& config) {
    config.validate();
    std::optional<GroundTruth> file_truth;
    if (config.truth.kind == TruthSource::Kind::File)
        file_truth = read_ground_truth(config.truth.file);
    const ModelKind truth_kind =
        file_truth ? file_truth->kind : config.truth.spec.kind;

    const std::vector<ReplicateRecord> records = detail::run_all_replicates(config, file_truth);

    SweepResult result;
    const std::string model_name = to_string(truth_kind);
    for (const EstimatorSpec& spec : config.estimators) {
        std::string row_name = spec.name;
        if (config.estimator_model != truth_kind && !spec.oracle)
            row_name = std::string(to_string(config.estimator_model)) + ":" + spec.name;
        for (size_t j = 0; j < config.delta_grid.size(); ++j) {
            std::vector<double> values;
            values.reserve(records.size());
            for (const ReplicateRecord& rec : records)
                values.push_back(rec.estimator_errors.at(spec.name)[j]);
            const detail::Aggregate agg = detail::aggregate(values);
            result.rows.push_back(SweepRow{model_name, row_name, config.delta_grid[j], agg.mean,
                                           agg.std_error, config.runs});
        }
    }
    if (!records.empty()) {
        for (const auto& [name, unused] : records.front().baseline_errors) {
            for (size_t j = 0; j < config.delta_grid.size(); ++j) {
                std::vector<double> values;
                values.reserve(records.size());
                for (const ReplicateRecord& rec : records)
                    values.push_back(rec.baseline_errors.at(name)[j]);
                const detail::Aggregate agg = detail::aggregate(values);
                result.rows.push_back(SweepRow{model_name, name, config.delta_grid[j], agg.mean,
                                               agg.std_error, config.runs});
            }
        }
    }
    detail::sort_rows(result.rows);
    return result;
}

// LCB-vs-MLE comparison at the validated fixed delta while the log size
// varies; the delta_or_m column carries the sample size. Baselines are not
// part of this protocol.
inline SweepResult sweep_sample_size(const ExperimentConfig& config,
                                     const std::vector<int>& sizes) {
    if (sizes.empty()) throw std::invalid_argument("sweep_sample_size: no sizes");
    SweepResult result;
    for (int n : sizes) {
        if (n < 1) throw std::invalid_argument("sweep_sample_size: sizes must be >= 1");
        ExperimentConfig sub = config;
        sub.sample_size = n;
        sub.delta_grid = {config.fixed_delta};
        sub.baselines = BaselineSelection{};
        SweepResult partial = sweep_delta(sub);
        for (SweepRow& row : partial.rows) {
            row.delta_or_m = n;
            result.rows.push_back(std::move(row));
        }
    }
    detail::sort_rows(result.rows);
    return result;
}

// A sweep where the estimator model deliberately differs from the model that
// generated the data. With matching models this is exactly sweep_delta.
inline SweepResult mismatch_experiment(const ExperimentConfig& config) {
    return sweep_delta(config);
}

// Empirical-Bayes error as a function of the prior grid size m, on the grid
// {2^(i-1)} for i = 1..m, at the fixed delta. Takes the first configured
// empirical-Bayes estimator as the template, or synthesizes a Bayesian one.
inline SweepResult prior_grid_study(const ExperimentConfig& config,
                                    const std::vector<int>& grid_sizes) {
    if (grid_sizes.empty()) throw std::invalid_argument("prior_grid_study: no grid sizes");
    EstimatorSpec tmpl;
    tmpl.name = "bayes_eb";
    tmpl.config.kind = BoundKind::BayesLcb;
    tmpl.config.prior_source = PriorSource::EmpiricalBayes;
    tmpl.config.union_bound = UnionBoundMode::None;
    for (const EstimatorSpec& spec : config.estimators) {
        if (!spec.oracle && spec.config.prior_source == PriorSource::EmpiricalBayes) {
            tmpl = spec;
            break;
        }
    }
    SweepResult result;
    for (int m : grid_sizes) {
        if (m < 1) throw std::invalid_argument("prior_grid_study: grid sizes must be >= 1");
        ExperimentConfig sub = config;
        sub.delta_grid = {config.fixed_delta};
        sub.baselines = BaselineSelection{};
        EstimatorSpec spec = tmpl;
        spec.config.eb_grid = default_eb_grid(m);
        sub.estimators = {spec};
        SweepResult partial = sweep_delta(sub);
        for (SweepRow& row : partial.rows) {
            row.delta_or_m = m;
            result.rows.push_back(std::move(row));
        }
    }
    detail::sort_rows(result.rows);
    return result;
}

// ---- CSV emission ----
// Header model,estimator,delta,mean_error,std_error,runs; LF endings; floats
// printed with 10 significant digits.

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace detail

inline std::string to_csv(const SweepResult& result) {
    std::string out = "model,estimator,delta,mean_error,std_error,runs\n";
    for (const SweepRow& row : result.rows) {
        out += row.model;
        out += ',';
        out += row.estimator;
        out += ',';
        out += detail::format_double(row.delta_or_m);
        out += ',';
        out += detail::format_double(row.mean_error);
        out += ',';
        out += detail::format_double(row.std_error);
        out += ',';
        out += std::to_string(row.runs);
        out += '\n';
    }
    return out;
}

// ---- JSON experiment configuration ----

namespace detail {

inline void check_keys(const nlohmann::json& obj, const std::vector<std::string>& allowed,
                       const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw DataError("config: unknown key '" + key + "' in " + where);
    }
}

inline BetaPrior prior_from_json(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2)
        throw DataError("config: " + where + " must be [alpha, beta]");
    return BetaPrior{j[0].get<double>(), j[1].get<double>()};
}

inline PositionSource position_source_from_json(const nlohmann::json& j) {
    check_keys(j, {"kind", "values"}, "positions");
    PositionSource src;
    const std::string kind = j.value("kind", std::string("uniform"));
    if (kind == "uniform") {
        src.kind = PositionSource::Kind::UniformRandom;
    } else if (kind == "fixed") {
        src.kind = PositionSource::Kind::Fixed;
        src.values = j.at("values").get<std::vector<double>>();
    } else {
        throw DataError("config: unknown position source kind '" + kind + "'");
    }
    return src;
}

inline TruthSource truth_source_from_json(const nlohmann::json& j) {
    TruthSource truth;
    if (j.contains("file")) {
        check_keys(j, {"file"}, "truth");
        truth.kind = TruthSource::Kind::File;
        truth.file = j.at("file").get<std::string>();
        return truth;
    }
    check_keys(j, {"model", "contexts", "items", "k", "theta_prior", "positions"}, "truth");
    truth.kind = TruthSource::Kind::Generator;
    truth.spec.kind = model_kind_from_string(j.at("model").get<std::string>());
    truth.spec.contexts = j.value("contexts", 1);
    truth.spec.items = j.at("items").get<int>();
    truth.spec.k = j.at("k").get<int>();
    if (j.contains("theta_prior"))
        truth.spec.theta_prior = prior_from_json(j.at("theta_prior"), "theta_prior");
    if (j.contains("positions"))
        truth.spec.positions = position_source_from_json(j.at("positions"));
    return truth;
}

inline LoggingPolicySpec policy_from_json(const nlohmann::json& j) {
    check_keys(j, {"kind", "temperature"}, "policy");
    LoggingPolicySpec policy;
    const std::string kind = j.value("kind", std::string("uniform"));
    if (kind == "uniform") {
        policy.kind = PolicyKind::UniformPermutation;
    } else if (kind == "softmax") {
        policy.kind = PolicyKind::TruthSoftmax;
        policy.temperature = j.value("temperature", 1.0);
    } else {
        throw DataError("config: unknown policy kind '" + kind + "'");
    }
    return policy;
}

inline EstimatorSpec estimator_from_json(const nlohmann::json& j) {
    check_keys(j,
               {"name", "kind", "prior", "position_prior", "union_bound", "prior_source",
                "prior_pooling", "positions", "eb_grid", "oracle"},
               "estimator");
    EstimatorSpec spec;
    if (j.value("oracle", false)) {
        spec.oracle = true;
        spec.name = j.value("name", std::string("oracle"));
        return spec;
    }
    spec.config.kind = bound_kind_from_string(j.at("kind").get<std::string>());
    spec.name = j.value("name", std::string(to_string(spec.config.kind)));
    if (j.contains("prior")) spec.config.prior = prior_from_json(j.at("prior"), "prior");
    if (j.contains("position_prior"))
        spec.config.position_prior = prior_from_json(j.at("position_prior"), "position_prior");
    if (j.contains("union_bound"))
        spec.config.union_bound = union_bound_from_string(j.at("union_bound").get<std::string>());
    if (j.contains("prior_source")) {
        const std::string src = j.at("prior_source").get<std::string>();
        if (src == "fixed")
            spec.config.prior_source = PriorSource::Fixed;
        else if (src == "empirical_bayes")
            spec.config.prior_source = PriorSource::EmpiricalBayes;
        else
            throw DataError("config: unknown prior_source '" + src + "'");
    }
    if (j.contains("prior_pooling")) {
        const std::string pooling = j.at("prior_pooling").get<std::string>();
        if (pooling == "pooled")
            spec.config.prior_pooling = PriorPooling::Pooled;
        else if (pooling == "per_context")
            spec.config.prior_pooling = PriorPooling::PerContext;
        else
            throw DataError("config: unknown prior_pooling '" + pooling + "'");
    }
    if (j.contains("positions")) {
        const std::string mode = j.at("positions").get<std::string>();
        if (mode == "default")
            spec.config.position_handling = PositionHandling::ModelDefault;
        else if (mode == "point")
            spec.config.position_handling = PositionHandling::PointEstimate;
        else if (mode == "lcb")
            spec.config.position_handling = PositionHandling::Lcb;
        else
            throw DataError("config: unknown positions mode '" + mode + "'");
    }
    if (j.contains("eb_grid")) spec.config.eb_grid = j.at("eb_grid").get<std::vector<double>>();
    return spec;
}

inline double clip_value_from_json(const nlohmann::json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
        throw DataError("config: clip values must be numbers or \"inf\"");
    }
    return j.get<double>();
}

}  // namespace detail

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    detail::check_keys(j,
                       {"truth", "policy", "estimator_model", "estimators", "baselines",
                        "delta_grid", "clip_grid", "sample_size", "runs", "seed", "fixed_delta",
                        "threads"},
                       "config");
    ExperimentConfig config;
    if (!j.contains("truth")) throw DataError("config: missing 'truth'");
    config.truth = detail::truth_source_from_json(j.at("truth"));
    if (j.contains("policy")) config.policy = detail::policy_from_json(j.at("policy"));
    if (j.contains("estimator_model"))
        config.estimator_model = model_kind_from_string(j.at("estimator_model").get<std::string>());
    else if (config.truth.kind == TruthSource::Kind::Generator)
        config.estimator_model = config.truth.spec.kind;
    else
        config.estimator_model = read_ground_truth(config.truth.file).kind;
    if (j.contains("estimators"))
        for (const auto& entry : j.at("estimators"))
            config.estimators.push_back(detail::estimator_from_json(entry));
    if (j.contains("baselines")) {
        for (const auto& entry : j.at("baselines")) {
            const std::string name = entry.get<std::string>();
            if (name == "ips")
                config.baselines.ips = true;
            else if (name == "item_position_ips")
                config.baselines.item_position_ips = true;
            else if (name == "pseudoinverse")
                config.baselines.pseudoinverse = true;
            else
                throw DataError("config: unknown baseline '" + name + "'");
        }
    }
    if (j.contains("delta_grid"))
        config.delta_grid = j.at("delta_grid").get<std::vector<double>>();
    if (j.contains("clip_grid")) {
        config.clip_grid.clear();
        for (const auto& entry : j.at("clip_grid"))
            config.clip_grid.push_back(detail::clip_value_from_json(entry));
    }
    config.sample_size = j.value("sample_size", 1000);
    config.runs = j.value("runs", 500);
    config.base_seed = j.value("seed", static_cast<std::uint64_t>(0));
    config.fixed_delta = j.value("fixed_delta", 0.2);
    config.threads = j.value("threads", 0);
    config.validate();
    return config;
}

}  // namespace pessirank
