#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pessirank/harness.hpp"
#include "pessirank/random.hpp"

using namespace pessirank;

namespace {

ExperimentConfig small_cm_config() {
    ExperimentConfig config;
    config.truth.kind = TruthSource::Kind::Generator;
    config.truth.spec.kind = ModelKind::Cm;
    config.truth.spec.contexts = 2;
    config.truth.spec.items = 8;
    config.truth.spec.k = 2;
    config.truth.spec.theta_prior = BetaPrior{1.0, 3.0};
    config.estimator_model = ModelKind::Cm;

    EstimatorSpec mle;
    mle.name = "mle";
    mle.config.kind = BoundKind::Mle;
    EstimatorSpec bayes;
    bayes.name = "bayes";
    bayes.config.kind = BoundKind::BayesLcb;
    bayes.config.prior = BetaPrior{1.0, 3.0};
    bayes.config.union_bound = UnionBoundMode::None;
    config.estimators = {mle, bayes};

    config.baselines.ips = true;
    config.delta_grid = {0.2, 0.6, 1.0};
    config.clip_grid = {1.0, 100.0, std::numeric_limits<double>::infinity()};
    config.sample_size = 200;
    config.runs = 8;
    config.base_seed = 31337;
    config.threads = 1;
    return config;
}

}  // namespace

TEST_CASE("replicates are a pure function of the seed") {
    const ExperimentConfig config = small_cm_config();
    const ReplicateRecord a = run_replicate(config, 5);
    const ReplicateRecord b = run_replicate(config, 5);
    CHECK(a.estimator_errors == b.estimator_errors);
    CHECK(a.baseline_errors == b.baseline_errors);
    const ReplicateRecord c = run_replicate(config, 6);
    CHECK(a.estimator_errors != c.estimator_errors);
}

TEST_CASE("oracle injection reaches zero error") {
    ExperimentConfig config = small_cm_config();
    EstimatorSpec oracle;
    oracle.name = "oracle";
    oracle.oracle = true;
    config.estimators.push_back(oracle);
    const ReplicateRecord record = run_replicate(config, 1);
    for (double err : record.estimator_errors.at("oracle"))
        CHECK(err == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("errors stay within the value range") {
    const ExperimentConfig config = small_cm_config();
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const ReplicateRecord record = run_replicate(config, seed);
        for (const auto& [name, errors] : record.estimator_errors)
            for (double err : errors) {
                CHECK(err >= -1e-12);
                CHECK(err <= 1.0 + 1e-12);
            }
        for (const auto& [name, errors] : record.baseline_errors)
            for (double err : errors) {
                CHECK(err >= -1e-12);
                CHECK(err <= 1.0 + 1e-12);
            }
    }
}

TEST_CASE("all estimators converge with plentiful data") {
    ExperimentConfig config = small_cm_config();
    config.truth.spec.contexts = 1;
    config.baselines = BaselineSelection{};
    config.sample_size = 100000;
    config.delta_grid = {0.5};
    EstimatorSpec hoeffding;
    hoeffding.name = "hoeffding";
    hoeffding.config.kind = BoundKind::HoeffdingLcb;
    config.estimators = {hoeffding};
    const ReplicateRecord record = run_replicate(config, 12);
    CHECK(record.estimator_errors.at("hoeffding")[0] < 0.01);
}

TEST_CASE("sweep aggregation") {
    ExperimentConfig config = small_cm_config();

    SECTION("single run gives zero standard error") {
        config.runs = 1;
        const SweepResult result = sweep_delta(config);
        for (const SweepRow& row : result.rows) {
            CHECK(row.runs == 1);
            CHECK(row.std_error == 0.0);
        }
    }
    SECTION("mle rows ignore delta") {
        const SweepResult result = sweep_delta(config);
        double mle_mean = -1.0;
        for (const SweepRow& row : result.rows) {
            if (row.estimator != "mle") continue;
            if (mle_mean < 0.0)
                mle_mean = row.mean_error;
            else
                CHECK(row.mean_error == Catch::Approx(mle_mean).margin(1e-15));
        }
        CHECK(mle_mean >= 0.0);
    }
    SECTION("rows are sorted by estimator then delta") {
        const SweepResult result = sweep_delta(config);
        for (size_t i = 1; i < result.rows.size(); ++i) {
            const auto& prev = result.rows[i - 1];
            const auto& cur = result.rows[i];
            const bool ordered = prev.estimator < cur.estimator ||
                                 (prev.estimator == cur.estimator &&
                                  prev.delta_or_m <= cur.delta_or_m);
            CHECK(ordered);
        }
    }
}

TEST_CASE("aggregation agrees with an independent streaming method") {
    RandomEngine rng(173);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> xs;
        const int n = 1 + static_cast<int>(rng.uniform_below(200));
        for (int i = 0; i < n; ++i) xs.push_back(rng.next_double() * 10.0 - 5.0);
        const auto agg = pessirank::detail::aggregate(xs);

        // Welford
        double mean = 0.0, m2 = 0.0;
        int count = 0;
        for (double x : xs) {
            ++count;
            const double d1 = x - mean;
            mean += d1 / count;
            m2 += d1 * (x - mean);
        }
        const double std_error =
            count > 1 ? std::sqrt(m2 / (count - 1)) / std::sqrt(static_cast<double>(count)) : 0.0;
        CHECK(std::fabs(agg.mean - mean) < 1e-12);
        CHECK(std::fabs(agg.std_error - std_error) < 1e-12);
    }
}

TEST_CASE("sweep results are identical across thread counts") {
    ExperimentConfig config = small_cm_config();
    config.runs = 12;
    config.threads = 1;
    const SweepResult serial = sweep_delta(config);
    config.threads = 4;
    const SweepResult parallel = sweep_delta(config);
    config.threads = 8;
    const SweepResult wide = sweep_delta(config);
    const std::string csv = to_csv(serial);
    CHECK(csv == to_csv(parallel));
    CHECK(csv == to_csv(wide));
}

TEST_CASE("csv format") {
    ExperimentConfig config = small_cm_config();
    config.runs = 2;
    const std::string csv = to_csv(sweep_delta(config));
    CHECK(csv.rfind("model,estimator,delta,mean_error,std_error,runs\n", 0) == 0);
    CHECK(csv.find("\r") == std::string::npos);
    CHECK(csv.back() == '\n');
}

TEST_CASE("sample size sweep shrinks the error") {
    ExperimentConfig config = small_cm_config();
    config.baselines = BaselineSelection{};
    config.runs = 6;
    config.fixed_delta = 0.5;
    const SweepResult result = sweep_sample_size(config, {60, 20000});
    double small_n = -1.0, large_n = -1.0;
    for (const SweepRow& row : result.rows) {
        if (row.estimator != "bayes") continue;
        if (row.delta_or_m == 60) small_n = row.mean_error;
        if (row.delta_or_m == 20000) large_n = row.mean_error;
    }
    REQUIRE(small_n >= 0.0);
    REQUIRE(large_n >= 0.0);
    CHECK(large_n < 0.02);
    CHECK(large_n <= small_n + 1e-12);
}

TEST_CASE("mismatch runs prefix the estimator model") {
    ExperimentConfig config = small_cm_config();
    config.truth.spec.kind = ModelKind::Pbm;
    config.truth.spec.positions.kind = PositionSource::Kind::Fixed;
    config.truth.spec.positions.values = {0.9, 0.4};
    config.estimator_model = ModelKind::Dcm;
    config.baselines = BaselineSelection{};
    config.runs = 2;
    const SweepResult result = mismatch_experiment(config);
    bool saw_prefixed = false;
    for (const SweepRow& row : result.rows) {
        CHECK(row.model == "pbm");
        if (row.estimator.rfind("dcm:", 0) == 0) saw_prefixed = true;
    }
    CHECK(saw_prefixed);
}

TEST_CASE("prior grid study emits one curve per grid size") {
    ExperimentConfig config = small_cm_config();
    config.baselines = BaselineSelection{};
    config.runs = 2;
    config.fixed_delta = 1.0;
    const SweepResult result = prior_grid_study(config, {1, 2, 5});
    REQUIRE(result.rows.size() == 3);
    for (const SweepRow& row : result.rows) {
        CHECK(row.estimator == "bayes_eb");
        CHECK(row.mean_error >= 0.0);
    }
    CHECK(result.rows[0].delta_or_m == 1);
    CHECK(result.rows[2].delta_or_m == 5);
}

TEST_CASE("experiment config json parsing") {
    nlohmann::json j = {
        {"truth",
         {{"model", "cm"}, {"contexts", 2}, {"items", 6}, {"k", 2}, {"theta_prior", {1, 8}}}},
        {"estimators",
         {{{"name", "mle"}, {"kind", "mle"}},
          {{"name", "bayes"}, {"kind", "bayes"}, {"prior", {1, 8}}, {"union_bound", "none"}}}},
        {"baselines", {"ips", "pseudoinverse"}},
        {"delta_grid", {0.5, 1.0}},
        {"clip_grid", {10, "inf"}},
        {"sample_size", 100},
        {"runs", 3},
        {"seed", 99},
    };
    const ExperimentConfig config = experiment_config_from_json(j);
    CHECK(config.truth.spec.items == 6);
    CHECK(config.estimator_model == ModelKind::Cm);  // defaults to the truth model
    CHECK(config.estimators.size() == 2);
    CHECK(config.estimators[1].config.prior.beta == 8.0);
    CHECK(config.baselines.ips);
    CHECK(config.baselines.pseudoinverse);
    CHECK_FALSE(config.baselines.item_position_ips);
    CHECK(std::isinf(config.clip_grid[1]));
    CHECK(config.base_seed == 99);

    nlohmann::json bad = j;
    bad["bogus_key"] = 1;
    CHECK_THROWS_AS(experiment_config_from_json(bad), DataError);

    nlohmann::json bad_estimator = j;
    bad_estimator["estimators"][0]["kind"] = "unknown";
    CHECK_THROWS_AS(experiment_config_from_json(bad_estimator), std::invalid_argument);
}
