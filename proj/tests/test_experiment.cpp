// SPDX-License-Identifier: MIT
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hte/analysis.hpp"
#include "hte/experiment.hpp"

using namespace hte;
using nlohmann::json;

namespace {

json minimal_config()
{
    return json::parse(R"({
        "schema_version": 1,
        "name": "unit",
        "instance": {"operator": "sine_gordon", "solution": "two_body", "d": 4, "coefficient_seed": 5},
        "train": {"epochs": 4, "residual_batch": 6, "test_points": 50, "eval_every": 2,
                  "network": {"width": 6, "hidden_layers": 2},
                  "estimator": {"kind": "hte", "V": 2}}
    })");
}

std::vector<std::string> issues_of(const json& j)
{
    try {
        experiment_config_from_json(j);
    } catch (const ConfigError& e) {
        return e.issues();
    }
    return {};
}

bool mentions(const std::vector<std::string>& issues, const std::string& needle)
{
    for (const auto& s : issues) {
        if (s.find(needle) != std::string::npos) return true;
    }
    return false;
}

std::filesystem::path fresh_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("hte_test_experiment_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

RunOptions with_workers(int n)
{
    RunOptions o;
    o.workers = n;
    return o;
}

}  // namespace

TEST(Config, MinimalParsesWithDefaults)
{
    const ExperimentConfig c = experiment_config_from_json(minimal_config());
    EXPECT_EQ(c.instance.d, 4);
    EXPECT_EQ(c.instance.coefficient_seed, 5u);
    EXPECT_EQ(c.instance.domain, DomainKind::unit_ball);
    EXPECT_EQ(c.train.epochs, 4);
    EXPECT_EQ(c.train.estimator.V, 2);
    EXPECT_EQ(c.train.lr0, 1e-3);
    EXPECT_EQ(c.repeat, 1);
    EXPECT_FALSE(c.sweep.has_value());
}

TEST(Config, BiharmonicDefaultsToAnnulus)
{
    json j = minimal_config();
    j["instance"] = {{"operator", "biharmonic"}, {"d", 4}};
    j["train"]["estimator"]["distribution"] = "gaussian";
    const ExperimentConfig c = experiment_config_from_json(j);
    EXPECT_EQ(c.instance.solution, ExactSolution::annulus_three_body);
    EXPECT_EQ(c.instance.domain, DomainKind::annulus_1_2);
}

TEST(Config, ZeroVNamesTheField)
{
    json j = minimal_config();
    j["train"]["estimator"]["V"] = 0;
    EXPECT_TRUE(mentions(issues_of(j), "train.estimator.V"));
}

TEST(Config, EveryTypeErrorIsReported)
{
    json j = minimal_config();
    j["train"]["epochs"] = "many";
    j["train"]["network"]["width"] = 2.5;
    j["train"]["seeds"] = {{"params", -1}};
    j["extra"] = true;
    j["train"]["estimator"]["kind"] = "exact";
    const auto issues = issues_of(j);
    EXPECT_TRUE(mentions(issues, "train.epochs: must be an integer"));
    EXPECT_TRUE(mentions(issues, "train.network.width: must be an integer"));
    EXPECT_TRUE(mentions(issues, "train.seeds.params: must be a non-negative integer"));
    EXPECT_TRUE(mentions(issues, "extra: unknown field"));
    EXPECT_TRUE(mentions(issues, "train.estimator.kind: unknown estimator"));
}

TEST(Config, SchemaVersionIsRequiredAndChecked)
{
    json j = minimal_config();
    j.erase("schema_version");
    EXPECT_TRUE(mentions(issues_of(j), "schema_version: is required"));
    j["schema_version"] = 2;
    EXPECT_TRUE(mentions(issues_of(j), "schema_version: unsupported version 2"));
}

TEST(Config, InstancePairingAndDomain)
{
    json j = minimal_config();
    j["instance"]["solution"] = "annulus_three_body";
    EXPECT_TRUE(mentions(issues_of(j), "instance:"));
    j = minimal_config();
    j["instance"]["domain"] = "annulus_1_2";
    EXPECT_TRUE(mentions(issues_of(j), "is posed on unit_ball"));
    j = minimal_config();
    j.erase("instance");
    EXPECT_TRUE(mentions(issues_of(j), "instance: is required"));
}

TEST(Config, SweepRowsAreValidatedIndividually)
{
    json j = minimal_config();
    j["sweep"] = {{"estimator", {"sdgd"}}, {"B", {1, 9}}};
    const auto issues = issues_of(j);
    ASSERT_EQ(issues.size(), 1u);
    EXPECT_NE(issues[0].find("sweep row sdgd_B9: train.estimator.B"), std::string::npos);
}

TEST(Config, GpinnWeightAutoOrNumber)
{
    json j = minimal_config();
    j["train"]["gpinn"] = {{"enabled", true}, {"weight", 0.25}};
    ExperimentConfig c = experiment_config_from_json(j);
    EXPECT_FALSE(c.train.gpinn.auto_weight);
    EXPECT_EQ(c.train.gpinn.weight, 0.25);
    j["train"]["gpinn"]["weight"] = "auto";
    c = experiment_config_from_json(j);
    EXPECT_TRUE(c.train.gpinn.auto_weight);
    j["train"]["gpinn"]["weight"] = "big";
    EXPECT_TRUE(mentions(issues_of(j), "train.gpinn.weight"));
}

TEST(Config, RoundTrip)
{
    json j = minimal_config();
    j["instance"]["diffusion"] = {{"sigma", {{1.0, 0.0, 0.0, 0.0}, {0.5, 1.0, 0.0, 0.0}, {0.0, 0.0, 2.0, 0.0},
                                             {0.0, 0.0, 0.0, 1.0}}}};
    j["sweep"] = {{"estimator", {"hte", "full"}}, {"V", {1, 3}}};
    j["train"]["seeds"] = {{"params", 18446744073709551615ull}};
    const ExperimentConfig c = experiment_config_from_json(j);
    const json once = to_json(c);
    const json twice = to_json(experiment_config_from_json(once));
    EXPECT_EQ(once, twice);
    EXPECT_EQ(c.train.seeds.params, 18446744073709551615ull);
    ASSERT_TRUE(c.instance.sigma.has_value());
    EXPECT_EQ((*c.instance.sigma)(1, 0), 0.5);
}

TEST(Sweep, ExpandsKindsTimesTheirAxis)
{
    json j = minimal_config();
    j["sweep"] = {{"estimator", {"full", "hte", "sdgd"}}, {"V", {1, 5, 16}}, {"B", {2, 4}}};
    const auto rows = expand_rows(experiment_config_from_json(j));
    std::vector<std::string> labels;
    for (const auto& r : rows) labels.push_back(r.label);
    EXPECT_EQ(labels, (std::vector<std::string>{"full", "hte_V1", "hte_V5", "hte_V16", "sdgd_B2", "sdgd_B4"}));
    EXPECT_EQ(rows[2].train.estimator.V, 5);
    EXPECT_EQ(rows[5].train.estimator.B, 4);
}

TEST(Sweep, NoSweepIsOneTrainRow)
{
    const auto rows = expand_rows(experiment_config_from_json(minimal_config()));
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].label, "train");
}

TEST(Seeds, FirstRepeatKeepsConfiguredSeeds)
{
    const TrainSeeds base{11, 12, 13, 14};
    const TrainSeeds r0 = derive_seeds(base, 0);
    EXPECT_EQ(r0.params, 11u);
    EXPECT_EQ(r0.test_points, 14u);
    const TrainSeeds r1 = derive_seeds(base, 1);
    const TrainSeeds r2 = derive_seeds(base, 2);
    EXPECT_NE(r1.params, base.params);
    EXPECT_NE(r1.params, r2.params);
    EXPECT_NE(r1.points, r1.probes);
    EXPECT_EQ(derive_seeds(base, 2).probes, r2.probes);
}

TEST(Statistic, MeanAndSampleStd)
{
    const Statistic s = summarize({1.0, 2.0, 4.0});
    EXPECT_DOUBLE_EQ(s.mean, 7.0 / 3.0);
    EXPECT_DOUBLE_EQ(s.std, std::sqrt(((1 - 7.0 / 3) * (1 - 7.0 / 3) + (2 - 7.0 / 3) * (2 - 7.0 / 3) +
                                       (4 - 7.0 / 3) * (4 - 7.0 / 3)) / 2.0));
    EXPECT_EQ(summarize({3.0}).std, 0.0);
    EXPECT_TRUE(std::isnan(summarize({}).mean));
}

TEST(Run, WritesArtifactsThatRoundTrip)
{
    ExperimentConfig c = experiment_config_from_json(minimal_config());
    c.output_dir = fresh_dir("roundtrip");
    c.save_params = true;
    const ExperimentOutcome out = run_experiment(c);
    ASSERT_TRUE(out.all_succeeded);
    const auto base = c.output_dir / "runs" / "train" / "run_000";
    ASSERT_TRUE(std::filesystem::exists(base.string() + ".json"));
    ASSERT_TRUE(std::filesystem::exists(base.string() + "_loss.csv"));
    ASSERT_TRUE(std::filesystem::exists(base.string() + "_params.json"));

    const json run = read_json_file(base.string() + ".json");
    const RunRecord rec = run_record_from_json(run);
    EXPECT_EQ(to_json(rec), run);
    EXPECT_EQ(rec.report.loss.size(), 4u);
    EXPECT_EQ(rec.report.coefficient_seed, 5u);

    const json summary = read_json_file(c.output_dir / "summary.json");
    EXPECT_EQ(to_json(summary_from_json(summary)), summary);

    const MlpParams params = load_checkpoint(base.string() + "_params.json");
    const PdeInstance inst = make_instance(c.instance);
    Engine test_rng = make_stream(c.train.seeds.test_points, StreamPurpose::test_points);
    const Eigen::MatrixXd test = sample_domain_points(inst.domain, c.train.test_points, test_rng);
    EXPECT_EQ(relative_l2(params, inst, test), rec.report.final_rel_l2);
}

TEST(Run, SameResultsForAnyWorkerCount)
{
    json j = minimal_config();
    j["repeat"] = 2;
    j["sweep"] = {{"V", {1, 3}}};
    ExperimentConfig c = experiment_config_from_json(j);
    c.output_dir = fresh_dir("workers1");
    run_experiment(c, with_workers(1));
    const auto dir1 = c.output_dir;
    c.output_dir = fresh_dir("workers3");
    run_experiment(c, with_workers(3));
    for (const char* label : {"hte_V1", "hte_V3"}) {
        for (const char* run : {"run_000.json", "run_001.json"}) {
            json a = read_json_file(dir1 / "runs" / label / run);
            json b = read_json_file(c.output_dir / "runs" / label / run);
            for (json* x : {&a, &b}) {
                x->erase("wall_seconds");
                x->erase("seconds_per_epoch");
            }
            EXPECT_EQ(a, b) << label << "/" << run;
        }
    }
}

TEST(Run, DivergenceIsRecordedNotThrown)
{
    json j = minimal_config();
    j["train"]["lr0"] = 1e300;
    ExperimentConfig c = experiment_config_from_json(j);
    c.output_dir = fresh_dir("diverge");
    const ExperimentOutcome out = run_experiment(c);
    EXPECT_FALSE(out.all_succeeded);
    ASSERT_EQ(out.summary.rows[0].failures.size(), 1u);
    EXPECT_NE(out.summary.rows[0].failures[0].find("diverged"), std::string::npos);
}

TEST(Run, SubcommandSweepRules)
{
    json j = minimal_config();
    ExperimentConfig plain = experiment_config_from_json(j);
    plain.output_dir = fresh_dir("rules");
    RunOptions require;
    require.require_sweep = true;
    EXPECT_THROW(run_experiment(plain, require), ConfigError);
    j["sweep"] = {{"V", {1}}};
    ExperimentConfig swept = experiment_config_from_json(j);
    swept.output_dir = plain.output_dir;
    RunOptions forbid;
    forbid.forbid_sweep = true;
    EXPECT_THROW(run_experiment(swept, forbid), ConfigError);
}

TEST(LossCsv, HeaderAndRows)
{
    RunReport r;
    r.loss = {0.5, 0.25};
    r.lr = {1e-3, 5e-4};
    EXPECT_EQ(loss_csv(r), "epoch,loss,lr\n0,0.5,0.001\n1,0.25,0.00050000000000000001\n");
}

TEST(MatrixCsv, ParsesAndRejects)
{
    const auto dir = fresh_dir("csv");
    std::filesystem::create_directories(dir);
    write_text_file(dir / "a.csv", "# header comment\n1, 2\n\n3,4.5\n");
    const Eigen::MatrixXd A = read_matrix_csv(dir / "a.csv");
    ASSERT_EQ(A.rows(), 2);
    EXPECT_EQ(A(1, 1), 4.5);
    write_text_file(dir / "b.csv", "1,2\n3\n");
    EXPECT_THROW(read_matrix_csv(dir / "b.csv"), ConfigError);
    write_text_file(dir / "c.csv", "1,x\n");
    EXPECT_THROW(read_matrix_csv(dir / "c.csv"), ConfigError);
    EXPECT_THROW(read_matrix_csv(dir / "missing.csv"), IoError);
}

TEST(Variance, ReportsTheWorkedExamples)
{
    VarianceRequest kxy;
    kxy.matrix = (Eigen::MatrixXd(2, 2) << 0, 10, 10, 0).finished();
    kxy.methods = {{EstimatorKind::hte, ProbeDistribution::rademacher, 1}, {EstimatorKind::sdgd, {}, 1}};
    const json a = variance_report(kxy);
    EXPECT_EQ(a["methods"][0]["closed_form"].get<double>(), 400.0);
    EXPECT_EQ(a["methods"][0]["enumerated"].get<double>(), 400.0);
    EXPECT_EQ(a["methods"][1]["closed_form"].get<double>(), 0.0);

    VarianceRequest sq = kxy;
    sq.matrix = (Eigen::MatrixXd(2, 2) << -20, 0, 0, 20).finished();
    const json b = variance_report(sq);
    EXPECT_EQ(b["methods"][0]["closed_form"].get<double>(), 0.0);
    EXPECT_EQ(b["methods"][1]["closed_form"].get<double>(), 1600.0);
    EXPECT_EQ(b["methods"][1]["enumerated"].get<double>(), 1600.0);
    EXPECT_EQ(b["methods"][1]["unscaled_closed_form"].get<double>(), 400.0);
}

TEST(Variance, BadMethodFieldsAreNamed)
{
    const json j = json::parse(
        R"({"schema_version": 1, "variance": {"matrix": [[1, 0], [0, 1]], "methods": [{"estimator": "sdgd", "B": 3}]}})");
    try {
        variance_request_from_json(j, ".");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_TRUE(mentions(e.issues(), "variance.methods[0].B"));
    }
}

TEST(Estimate, QuadraticTraceAndVariance)
{
    const json j = json::parse(R"({"schema_version": 1, "estimate": {
        "function": {"type": "quadratic", "matrix": [[2, 1], [1, 4]]}, "estimator": "hutchinson", "V": 3, "seed": 9}})");
    const EstimateRequest req = estimate_request_from_json(j);
    const EstimateResult res = run_estimate(req);
    EXPECT_NEAR(res.exact, 6.0, 1e-12);
    // Each Rademacher probe gives 6 +- 2, so the mean of three is 6 + 2k/3 with k odd in [-3, 3].
    const double k = 1.5 * (res.estimate - 6.0);
    EXPECT_NEAR(k, std::round(k), 1e-12);
    EXPECT_EQ(std::abs(static_cast<int>(std::round(k))) % 2, 1);
    EXPECT_LE(std::abs(k), 3.0 + 1e-12);
    ASSERT_TRUE(res.closed_form_variance.has_value());
    EXPECT_NEAR(*res.closed_form_variance, 2.0 * 2.0 * 1.0 / 3.0, 1e-12);
}

TEST(Estimate, BiharmonicOfNorm4)
{
    const json j = json::parse(R"({"schema_version": 1, "estimate": {
        "function": {"type": "norm4", "d": 3}, "point": [0.3, -0.2, 0.1], "estimator": "biharmonic", "V": 20000}})");
    const EstimateResult res = run_estimate(estimate_request_from_json(j));
    EXPECT_NEAR(res.exact, 120.0, 1e-9);
    EXPECT_NEAR(res.estimate, 120.0, 4.0);
}

TEST(Estimate, Validation)
{
    json j = json::parse(R"({"schema_version": 1, "estimate": {
        "function": {"type": "norm4", "d": 3}, "point": [0.3], "estimator": "biharmonic", "distribution": "rademacher"}})");
    try {
        estimate_request_from_json(j);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_TRUE(mentions(e.issues(), "estimate.point"));
        EXPECT_TRUE(mentions(e.issues(), "estimate.distribution"));
    }
}

TEST(SelfCheck, PassesOnACleanBuild)
{
    CheckOptions o;
    o.mlps = 20;
    for (const auto& c : run_self_checks(o)) {
        EXPECT_TRUE(c.passed) << c.name << " max_error " << c.max_error;
        EXPECT_GT(c.cases, 0) << c.name;
    }
}

TEST(ExampleConfigs, AllParseAndValidate)
{
    const std::filesystem::path dir(HTE_CONFIG_DIR);
    int training = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.path().extension() != ".json") continue;
        const json j = read_json_file(e.path());
        if (j.contains("estimate")) {
            EXPECT_NO_THROW(estimate_request_from_json(j)) << e.path();
        } else if (j.contains("variance")) {
            EXPECT_NO_THROW(variance_request_from_json(j, dir)) << e.path();
        } else {
            EXPECT_NO_THROW(expand_rows(load_experiment_config(e.path()))) << e.path();
            ++training;
        }
    }
    EXPECT_GE(training, 4);
}
