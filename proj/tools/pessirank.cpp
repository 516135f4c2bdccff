// pessirank: pessimistic off-policy optimization of ranked lists under click
// models. Subcommands: generate-truth, generate-log, fit, optimize, sweep,
// mismatch, prior-study.
//
// Exit codes: 0 success, 1 usage error, 2 data/validation error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pessirank/baselines.hpp"
#include "pessirank/dataset.hpp"
#include "pessirank/estimators.hpp"
#include "pessirank/harness.hpp"
#include "pessirank/optimizer.hpp"

namespace {

using namespace pessirank;

int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("PESSIRANK_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 0;  // harness falls back to hardware concurrency
}

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open config file: " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": invalid JSON: " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write output file: " + path);
    out << content;
    if (!out) throw DataError("write failed: " + path);
}

struct SweepOverrides {
    std::optional<double> delta;
    std::optional<int> runs;
    std::optional<int> sample_size;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> model;
    std::optional<std::string> bound;
    std::optional<std::vector<double>> prior;
    std::optional<std::string> union_bound;
    std::optional<double> clip;
    int threads = 0;
};

void add_override_flags(CLI::App* cmd, SweepOverrides& ov) {
    cmd->add_option("--delta", ov.delta, "Restrict the delta grid to a single value");
    cmd->add_option("--runs", ov.runs, "Number of replicates");
    cmd->add_option("--sample-size", ov.sample_size, "Logged records per replicate");
    cmd->add_option("--seed", ov.seed, "Base seed");
    cmd->add_option("--model", ov.model, "Estimator model kind: cm|dcm|pbm");
    cmd->add_option("--bound", ov.bound,
                    "Replace the estimator list with one of mle|map|hoeffding|bayes");
    cmd->add_option("--prior", ov.prior, "Beta prior: A B")->expected(2);
    cmd->add_option("--union-bound", ov.union_bound, "none|items|full");
    cmd->add_option("--clip", ov.clip, "Restrict the clipping grid to a single value");
    cmd->add_option("--threads", ov.threads, "Worker threads (0 = all cores)");
}

ExperimentConfig apply_overrides(ExperimentConfig config, const SweepOverrides& ov) {
    if (ov.delta) config.delta_grid = {*ov.delta};
    if (ov.clip) config.clip_grid = {*ov.clip};
    if (ov.delta && !ov.clip && config.baselines.any())
        config.clip_grid = {std::numeric_limits<double>::infinity()};
    if (ov.runs) config.runs = *ov.runs;
    if (ov.sample_size) config.sample_size = *ov.sample_size;
    if (ov.seed) config.base_seed = *ov.seed;
    if (ov.model) config.estimator_model = model_kind_from_string(*ov.model);
    if (ov.bound) {
        EstimatorSpec spec;
        spec.config.kind = bound_kind_from_string(*ov.bound);
        spec.name = *ov.bound;
        if (!config.estimators.empty()) {
            spec.config.prior = config.estimators.front().config.prior;
            spec.config.union_bound = config.estimators.front().config.union_bound;
        }
        config.estimators = {spec};
    }
    for (EstimatorSpec& spec : config.estimators) {
        if (ov.prior) spec.config.prior = BetaPrior{(*ov.prior)[0], (*ov.prior)[1]};
        if (ov.union_bound)
            spec.config.union_bound = union_bound_from_string(*ov.union_bound);
    }
    config.threads = resolve_threads(ov.threads);
    config.validate();
    return config;
}

// FittedParams and GroundTruth share the parameter-table file schema.
void write_fitted(const FittedParams& fitted, const std::string& path) {
    GroundTruth as_truth;
    as_truth.kind = fitted.kind;
    as_truth.k = fitted.k;
    as_truth.per_context = fitted.per_context;
    write_ground_truth(as_truth, path);
}

int run(int argc, char** argv) {
    CLI::App app{"Pessimistic off-policy optimization of ranked lists under click models"};
    app.require_subcommand(1);

    // generate-truth
    auto* gen_truth = app.add_subcommand("generate-truth", "Draw synthetic model parameters");
    std::string gt_model = "cm", gt_out, gt_positions_kind = "uniform";
    int gt_contexts = 1, gt_items = 10, gt_k = 3;
    std::uint64_t gt_seed = 0;
    std::vector<double> gt_prior{1.0, 1.0}, gt_positions;
    gen_truth->add_option("--model", gt_model, "cm|dcm|pbm")->required();
    gen_truth->add_option("--contexts", gt_contexts, "Number of contexts");
    gen_truth->add_option("--items", gt_items, "Ground-set size")->required();
    gen_truth->add_option("--k", gt_k, "List length K")->required();
    gen_truth->add_option("--theta-prior", gt_prior, "Beta prior for theta: A B")->expected(2);
    gen_truth->add_option("--positions", gt_positions,
                          "Fixed lambda (dcm) or p (pbm) schedule, K values");
    gen_truth->add_option("--seed", gt_seed, "Seed");
    gen_truth->add_option("--out", gt_out, "Output truth JSON")->required();

    // generate-log
    auto* gen_log = app.add_subcommand("generate-log", "Simulate a logged dataset");
    std::string gl_truth, gl_policy = "uniform", gl_out;
    double gl_temperature = 1.0;
    int gl_n = 1000;
    std::uint64_t gl_seed = 0;
    gen_log->add_option("--truth", gl_truth, "Truth JSON file")->required();
    gen_log->add_option("--policy", gl_policy, "uniform|softmax");
    gen_log->add_option("--temperature", gl_temperature, "Softmax temperature");
    gen_log->add_option("--n", gl_n, "Records per context");
    gen_log->add_option("--seed", gl_seed, "Seed");
    gen_log->add_option("--out", gl_out, "Output JSONL log")->required();

    // fit
    auto* fit = app.add_subcommand("fit", "Fit bounded model parameters from a log");
    std::string ft_log, ft_model = "cm", ft_bound = "hoeffding", ft_union = "full",
                ft_positions = "default", ft_out;
    double ft_delta = 0.05;
    std::vector<double> ft_prior{1.0, 1.0};
    bool ft_eb = false;
    fit->add_option("--log", ft_log, "Input JSONL log")->required();
    fit->add_option("--model", ft_model, "cm|dcm|pbm");
    fit->add_option("--bound", ft_bound, "mle|map|hoeffding|bayes");
    fit->add_option("--delta", ft_delta, "Confidence parameter");
    fit->add_option("--prior", ft_prior, "Beta prior: A B")->expected(2);
    fit->add_option("--union-bound", ft_union, "none|items|full");
    fit->add_option("--positions", ft_positions, "default|point|lcb");
    fit->add_flag("--eb", ft_eb, "Fit the prior by empirical Bayes");
    fit->add_option("--out", ft_out, "Output fitted-parameters JSON")->required();

    // optimize
    auto* optimize = app.add_subcommand("optimize", "Best list per context from a parameter file");
    std::string op_params, op_out;
    int op_k = 0;
    optimize->add_option("--params", op_params, "Parameter JSON (fitted or truth)")->required();
    optimize->add_option("--k", op_k, "List length (default: file's k)");
    optimize->add_option("--out", op_out, "Output JSON")->required();

    // sweep / mismatch / prior-study
    auto* sweep = app.add_subcommand("sweep", "Delta sweep over estimators and baselines");
    std::string sw_config, sw_out;
    SweepOverrides sw_ov;
    sweep->add_option("--config", sw_config, "Experiment config JSON")->required();
    sweep->add_option("--out", sw_out, "Output CSV")->required();
    add_override_flags(sweep, sw_ov);

    auto* mismatch = app.add_subcommand("mismatch", "Sweep with estimator model != truth model");
    std::string mm_config, mm_out;
    SweepOverrides mm_ov;
    mismatch->add_option("--config", mm_config, "Experiment config JSON")->required();
    mismatch->add_option("--out", mm_out, "Output CSV")->required();
    add_override_flags(mismatch, mm_ov);

    auto* prior_study = app.add_subcommand("prior-study", "Empirical-Bayes grid-size study");
    std::string ps_config, ps_out;
    std::vector<int> ps_sizes{1, 2, 5, 10, 20};
    SweepOverrides ps_ov;
    prior_study->add_option("--config", ps_config, "Experiment config JSON")->required();
    prior_study->add_option("--grid-sizes", ps_sizes, "Grid sizes m to evaluate");
    prior_study->add_option("--out", ps_out, "Output CSV")->required();
    add_override_flags(prior_study, ps_ov);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints help or the usage diagnostic
        return code == 0 ? 0 : 1;
    }

    if (gen_truth->parsed()) {
        GroundTruthSpec spec;
        spec.kind = model_kind_from_string(gt_model);
        spec.contexts = gt_contexts;
        spec.items = gt_items;
        spec.k = gt_k;
        spec.theta_prior = BetaPrior{gt_prior[0], gt_prior[1]};
        if (!gt_positions.empty()) {
            spec.positions.kind = PositionSource::Kind::Fixed;
            spec.positions.values = gt_positions;
        }
        RandomEngine rng(mix64(gt_seed));
        write_ground_truth(generate_ground_truth(spec, rng), gt_out);
        return 0;
    }
    if (gen_log->parsed()) {
        const GroundTruth truth = read_ground_truth(gl_truth);
        LoggingPolicySpec policy;
        if (gl_policy == "uniform") {
            policy.kind = PolicyKind::UniformPermutation;
        } else if (gl_policy == "softmax") {
            policy.kind = PolicyKind::TruthSoftmax;
            policy.temperature = gl_temperature;
        } else {
            throw DataError("unknown policy kind: " + gl_policy);
        }
        RandomEngine rng(mix64(gl_seed));
        write_log(generate_log(truth, policy, gl_n, rng), gl_out);
        return 0;
    }
    if (fit->parsed()) {
        const std::vector<LoggedInteraction> log = read_log(ft_log);
        EstimatorConfig config;
        config.kind = bound_kind_from_string(ft_bound);
        config.delta = ft_delta;
        config.prior = BetaPrior{ft_prior[0], ft_prior[1]};
        config.union_bound = union_bound_from_string(ft_union);
        if (ft_eb) config.prior_source = PriorSource::EmpiricalBayes;
        if (ft_positions == "point")
            config.position_handling = PositionHandling::PointEstimate;
        else if (ft_positions == "lcb")
            config.position_handling = PositionHandling::Lcb;
        else if (ft_positions != "default")
            throw DataError("unknown positions mode: " + ft_positions);
        const StatsTable stats = collect_stats(model_kind_from_string(ft_model), log);
        write_fitted(lcb_table(stats, config), ft_out);
        return 0;
    }
    if (optimize->parsed()) {
        const GroundTruth params = read_ground_truth(op_params);
        const int k = op_k > 0 ? op_k : params.k;
        FittedParams fitted{params.kind, params.k, params.per_context};
        const OptimizationResult result = pessimistic_optimize(fitted, k);
        nlohmann::ordered_json doc;
        doc["model"] = to_string(params.kind);
        doc["k"] = k;
        nlohmann::ordered_json lists = nlohmann::ordered_json::object();
        for (const auto& [ctx, list] : result.per_context) {
            nlohmann::ordered_json entry;
            entry["items"] = list.items;
            entry["value"] = result.per_context_value.at(ctx);
            lists[ctx] = std::move(entry);
        }
        doc["lists"] = std::move(lists);
        write_text_file(op_out, doc.dump(2) + "\n");
        return 0;
    }
    if (sweep->parsed()) {
        const ExperimentConfig config =
            apply_overrides(experiment_config_from_json(load_json_file(sw_config)), sw_ov);
        write_text_file(sw_out, to_csv(sweep_delta(config)));
        return 0;
    }
    if (mismatch->parsed()) {
        const ExperimentConfig config =
            apply_overrides(experiment_config_from_json(load_json_file(mm_config)), mm_ov);
        write_text_file(mm_out, to_csv(mismatch_experiment(config)));
        return 0;
    }
    if (prior_study->parsed()) {
        const ExperimentConfig config =
            apply_overrides(experiment_config_from_json(load_json_file(ps_config)), ps_ov);
        write_text_file(ps_out, to_csv(prior_grid_study(config, ps_sizes)));
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
