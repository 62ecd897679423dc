// SPDX-License-Identifier: MIT
// hte: config-driven experiment runner and report emitter.
//
// Exit status: 0 success, 1 self-check failure, 2 invalid config,
// 3 training failure (e.g. divergence), 4 filesystem error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hte/analysis.hpp"
#include "hte/experiment.hpp"

namespace {

namespace fs = std::filesystem;

enum Exit { ok = 0, check_failed = 1, bad_config = 2, run_failed = 3, io_failed = 4 };

struct Flags {
    std::string config;
    std::string out;
    int workers = 0;
};

void emit(const nlohmann::json& report, const Flags& flags, const std::string& file)
{
    const std::string text = report.dump(2) + "\n";
    std::cout << text;
    if (!flags.out.empty()) hte::write_text_file(fs::path(flags.out) / file, text);
}

int run_training(const Flags& flags, bool sweep)
{
    const hte::ExperimentConfig cfg = hte::load_experiment_config(flags.config);
    hte::RunOptions opts;
    if (!flags.out.empty()) opts.output_dir = flags.out;
    if (flags.workers > 0) opts.workers = flags.workers;
    opts.forbid_sweep = !sweep;
    opts.require_sweep = sweep;
    const hte::ExperimentOutcome outcome = hte::run_experiment(cfg, opts);
    for (const auto& row : outcome.summary.rows) {
        for (const auto& f : row.failures) std::cerr << "hte: " << row.label << " " << f << "\n";
        if (row.final_rel_l2.values.empty()) continue;
        std::printf("%-20s runs=%zu final_rel_l2=%.4e +- %.2e  s/epoch=%.4f (CPU wall-clock)\n", row.label.c_str(),
                    row.final_rel_l2.values.size(), row.final_rel_l2.mean, row.final_rel_l2.std,
                    row.seconds_per_epoch.mean);
    }
    std::printf("summary: %s\n", (outcome.output_dir / "summary.json").string().c_str());
    return outcome.all_succeeded ? ok : run_failed;
}

int run_estimate(const Flags& flags)
{
    const hte::EstimateRequest req = hte::estimate_request_from_json(hte::read_json_file(flags.config));
    emit(hte::to_json(req, hte::run_estimate(req)), flags, "estimate.json");
    return ok;
}

int run_variance(const Flags& flags)
{
    const fs::path path(flags.config);
    const hte::VarianceRequest req = hte::variance_request_from_json(hte::read_json_file(path), path.parent_path());
    emit(hte::variance_report(req), flags, "variance_report.json");
    return ok;
}

int run_check(const Flags& flags)
{
    hte::CheckOptions opts;
    if (!flags.config.empty()) opts = hte::check_options_from_json(hte::read_json_file(flags.config));
    const auto checks = hte::run_self_checks(opts);
    const nlohmann::json report = hte::to_json(checks);
    if (!flags.out.empty()) hte::write_text_file(fs::path(flags.out) / "check_report.json", report.dump(2) + "\n");
    for (const auto& c : checks)
        std::printf("%s %-40s cases=%d max_error=%.3e tol=%.1e\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.cases,
                    c.max_error, c.tolerance);
    return report["passed"].get<bool>() ? ok : check_failed;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"High-dimensional PINN training with Hutchinson trace estimation"};
    app.require_subcommand(1);
    Flags flags;

    auto add = [&](const char* name, const char* help, bool config_required) {
        CLI::App* sub = app.add_subcommand(name, help);
        auto* opt = sub->add_option("--config", flags.config, "JSON config file")->check(CLI::ExistingFile);
        if (config_required) opt->required();
        sub->add_option("--out", flags.out, "Output directory (overrides the config)");
        sub->add_option("--workers", flags.workers, "Concurrent runs (overrides the config)")->check(CLI::PositiveNumber);
        return sub;
    };
    CLI::App* train = add("train", "Run one experiment config (repeat runs with derived seeds)", true);
    CLI::App* sweep = add("sweep", "Run the estimator grid of a config's sweep block", true);
    CLI::App* estimate = add("estimate", "One-shot trace, biharmonic or gradient-norm estimate", true);
    CLI::App* variance = add("variance", "Closed-form and enumerated estimator variances of a matrix", true);
    CLI::App* check = add("check", "Self-consistency suite", false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return run_training(flags, false);
        if (sweep->parsed()) return run_training(flags, true);
        if (estimate->parsed()) return run_estimate(flags);
        if (variance->parsed()) return run_variance(flags);
        if (check->parsed()) return run_check(flags);
    } catch (const hte::ConfigError& e) {
        std::cerr << "hte: " << e.what() << "\n";
        return bad_config;
    } catch (const hte::IoError& e) {
        std::cerr << "hte: " << e.what() << "\n";
        return io_failed;
    } catch (const std::exception& e) {
        std::cerr << "hte: " << e.what() << "\n";
        return run_failed;
    }
    return bad_config;
}
