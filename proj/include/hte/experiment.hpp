// SPDX-License-Identifier: MIT
/**
 * @file experiment.hpp
 * @brief Experiment configs (schema version 1), run records, sweeps and
 *        the on-disk artifacts of the `hte` tool.
 *
 * Layout of an output directory:
 *   summary.json                      mean/std of the errors per sweep row
 *   runs/<label>/run_NNN.json         one RunRecord per training run
 *   runs/<label>/run_NNN_loss.csv     epoch,loss,lr
 *   runs/<label>/run_NNN_params.json  final parameters (save_params only)
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "hte/problems.hpp"
#include "hte/trainer.hpp"

namespace hte {

inline constexpr int kSchemaVersion = 1;

/// Invalid config; carries one message per offending field ("path: reason").
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> issues);
    [[nodiscard]] const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    std::vector<std::string> issues_;
};

/// Filesystem failure while reading configs or writing artifacts.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct InstanceDescriptor {
    PdeOperator op = PdeOperator::sine_gordon;
    ExactSolution solution = ExactSolution::two_body;
    int d = 2;
    DomainKind domain = DomainKind::unit_ball;
    std::uint64_t coefficient_seed = 0;
    /// Explicit sigma; empty means the identity diffusion.
    std::optional<Eigen::MatrixXd> sigma;
};

PdeInstance make_instance(const InstanceDescriptor& desc);

/// Grid of estimator variants; unset axes keep the base config's value.
/// Rows: one per `full`, one per V for `hte`, one per B for `sdgd`.
struct SweepSpec {
    std::vector<EstimatorKind> kinds;
    std::vector<int> V;
    std::vector<int> B;
};

struct ExperimentConfig {
    int schema_version = kSchemaVersion;
    std::string name = "experiment";
    InstanceDescriptor instance;
    TrainConfig train;
    std::filesystem::path output_dir = "out";
    int repeat = 1;
    int workers = 1;
    bool save_params = false;
    std::optional<SweepSpec> sweep;
};

struct SweepRow {
    std::string label;
    TrainConfig train;
};

/// The rows an experiment runs: the expanded sweep grid, or the base config
/// alone (label "train") without a sweep.
std::vector<SweepRow> expand_rows(const ExperimentConfig& cfg);

/// Seeds of repeat r: r = 0 keeps the configured seeds, r > 0 hashes them.
TrainSeeds derive_seeds(const TrainSeeds& base, int repeat_index);

std::string to_string(EstimatorKind kind);
EstimatorKind estimator_kind_from_string(const std::string& name);
std::string to_string(GpinnMode mode);
GpinnMode gpinn_mode_from_string(const std::string& name);

// JSON forms. The *_from_json readers throw ConfigError listing every
// offending field; unknown keys are rejected.
nlohmann::json to_json(const InstanceDescriptor& d);
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const ExperimentConfig& c);
InstanceDescriptor instance_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Parses and validates against the owning modules (instance pairing,
/// train config); every issue found is reported.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// One training run as stored in runs/<label>/run_NNN.json.
struct RunRecord {
    std::string experiment;
    std::string label;
    int run_index = 0;
    InstanceDescriptor instance;
    RunReport report;
};

nlohmann::json to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);

struct Statistic {
    double mean = 0.0;
    /// Sample standard deviation (n - 1 denominator); 0 for a single value.
    double std = 0.0;
    std::vector<double> values;
};

Statistic summarize(const std::vector<double>& values);

struct SummaryRow {
    std::string label;
    EstimatorConfig estimator;
    std::vector<std::string> run_files;  // relative to the output directory
    Statistic final_rel_l2;
    Statistic best_rel_l2;
    Statistic seconds_per_epoch;
    std::vector<std::string> failures;
};

struct ExperimentSummary {
    std::string name;
    int repeat = 1;
    std::vector<SummaryRow> rows;
};

nlohmann::json to_json(const ExperimentSummary& s);
ExperimentSummary summary_from_json(const nlohmann::json& j);

std::string loss_csv(const RunReport& r);

struct RunOptions {
    std::optional<std::filesystem::path> output_dir;
    std::optional<int> workers;
    /// Reject configs with a sweep block (the `train` subcommand).
    bool forbid_sweep = false;
    /// Reject configs without a sweep block (the `sweep` subcommand).
    bool require_sweep = false;
};

struct ExperimentOutcome {
    ExperimentSummary summary;
    std::filesystem::path output_dir;
    bool all_succeeded = true;
};

/// Runs every (row, repeat) job on up to `workers` threads and writes the
/// artifacts. Training failures are recorded in the summary, not thrown.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace hte
