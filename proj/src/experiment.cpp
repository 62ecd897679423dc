// SPDX-License-Identifier: MIT
#include "hte/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <thread>

#include "hte/rng.hpp"
#include "json_reader.hpp"

namespace hte {

using nlohmann::json;

using detail::Issues;
using detail::Reader;

namespace {

constexpr const char* kTimingNote = "CPU wall-clock seconds; not comparable to GPU timings";

std::string join_issues(const std::vector<std::string>& issues)
{
    std::string out = "invalid config";
    for (const auto& s : issues) out += "\n  " + s;
    return out;
}

json matrix_to_json(const Eigen::MatrixXd& m)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

DomainKind natural_domain(ExactSolution s)
{
    return s == ExactSolution::annulus_three_body ? DomainKind::annulus_1_2 : DomainKind::unit_ball;
}

json estimator_to_json(const EstimatorConfig& e)
{
    return {{"kind", to_string(e.kind)},
            {"V", e.V},
            {"unbiased", e.unbiased},
            {"distribution", to_string(e.distribution)},
            {"B", e.B}};
}

void read_estimator(Reader r, EstimatorConfig& e)
{
    r.read_enum("kind", e.kind, estimator_kind_from_string);
    r.read("V", e.V);
    r.read("unbiased", e.unbiased);
    r.read_enum("distribution", e.distribution, probe_distribution_from_string);
    r.read("B", e.B);
    r.finish();
}

void read_train(Reader r, TrainConfig& c)
{
    r.read("epochs", c.epochs);
    r.read("lr0", c.lr0);
    r.read("residual_batch", c.residual_batch);
    r.read("test_points", c.test_points);
    r.read("eval_every", c.eval_every);
    r.read("lambda_b", c.lambda_b);
    r.read("lambda_r", c.lambda_r);
    if (const json* n = r.find("network")) {
        Reader nr(n, r.at("network"), r.issues());
        nr.read("width", c.width);
        nr.read("hidden_layers", c.hidden_layers);
        nr.finish();
    }
    if (const json* e = r.find("estimator")) read_estimator(Reader(e, r.at("estimator"), r.issues()), c.estimator);
    if (const json* g = r.find("gpinn")) {
        Reader gr(g, r.at("gpinn"), r.issues());
        gr.read("enabled", c.gpinn.enabled);
        if (const json* w = gr.find("weight")) {
            if (w->is_string() && w->get<std::string>() == "auto") {
                c.gpinn.auto_weight = true;
            } else if (w->is_number()) {
                c.gpinn.auto_weight = false;
                c.gpinn.weight = w->get<double>();
            } else {
                gr.fail("weight", "must be \"auto\" or a number");
            }
        }
        gr.read_enum("mode", c.gpinn.mode, gpinn_mode_from_string);
        gr.read("probes", c.gpinn.probes);
        gr.finish();
    }
    if (const json* s = r.find("seeds")) {
        Reader sr(s, r.at("seeds"), r.issues());
        sr.read("params", c.seeds.params);
        sr.read("points", c.seeds.points);
        sr.read("probes", c.seeds.probes);
        sr.read("test_points", c.seeds.test_points);
        sr.finish();
    }
    r.finish();
}

json statistic_to_json(const Statistic& s)
{
    json values = json::array();
    for (double v : s.values) values.push_back(v);
    if (s.values.empty()) return {{"mean", nullptr}, {"std", nullptr}, {"values", values}};
    return {{"mean", s.mean}, {"std", s.std}, {"values", values}};
}

Statistic read_statistic(Reader r)
{
    Statistic s;
    r.read("mean", s.mean);
    r.read("std", s.std);
    r.read("values", s.values);
    r.finish();
    return s;
}

std::string row_label(const EstimatorConfig& e)
{
    switch (e.kind) {
    case EstimatorKind::full: return "full";
    case EstimatorKind::hte: return std::string(e.unbiased ? "hte_unbiased_V" : "hte_V") + std::to_string(e.V);
    case EstimatorKind::sdgd: return "sdgd_B" + std::to_string(e.B);
    }
    return "row";
}

std::string run_stem(int r)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "run_%03d", r);
    return buf;
}

}  // namespace

namespace detail {

std::optional<Eigen::MatrixXd> matrix_from_json(const json& j, const std::string& path, Issues& issues)
{
    if (!j.is_array() || j.empty() || !j[0].is_array()) {
        issues.push_back(path + ": must be a non-empty array of rows");
        return std::nullopt;
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            issues.push_back(path + ": rows must all have " + std::to_string(cols) + " entries");
            return std::nullopt;
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            const json& x = row[static_cast<std::size_t>(c)];
            if (!x.is_number()) {
                issues.push_back(path + ": entries must be numbers");
                return std::nullopt;
            }
            m(i, c) = x.get<double>();
        }
    }
    return m;
}

InstanceDescriptor read_instance(Reader r)
{
    InstanceDescriptor d;
    r.read_enum("operator", d.op, pde_operator_from_string);
    r.read_enum("solution", d.solution, exact_solution_from_string);
    if (r.present() && !r.has("solution") && d.op == PdeOperator::biharmonic) d.solution = ExactSolution::annulus_three_body;
    r.require("d");
    r.read("d", d.d);
    d.domain = natural_domain(d.solution);
    r.read_enum("domain", d.domain, domain_kind_from_string);
    r.read("coefficient_seed", d.coefficient_seed);
    if (const json* diff = r.find("diffusion")) {
        if (diff->is_string()) {
            if (diff->get<std::string>() != "identity") r.fail("diffusion", "must be \"identity\" or {\"sigma\": rows}");
        } else {
            Reader dr(diff, r.at("diffusion"), r.issues());
            if (const json* s = dr.find("sigma")) d.sigma = matrix_from_json(*s, dr.at("sigma"), r.issues());
            else dr.require("sigma");
            dr.finish();
        }
    }
    r.finish();
    return d;
}

void check_version(Reader& r)
{
    int version = 0;
    r.require("schema_version");
    r.read("schema_version", version);
    if (r.has("schema_version") && version != kSchemaVersion && r.find("schema_version")->is_number_integer())
        r.fail("schema_version", "unsupported version " + std::to_string(version) + " (expected " +
                                     std::to_string(kSchemaVersion) + ")");
}

}  // namespace detail

using detail::check_version;
using detail::read_instance;

ConfigError::ConfigError(std::vector<std::string> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues))
{
}

std::string to_string(EstimatorKind kind)
{
    switch (kind) {
    case EstimatorKind::full: return "full";
    case EstimatorKind::hte: return "hte";
    case EstimatorKind::sdgd: return "sdgd";
    }
    return "unknown";
}

EstimatorKind estimator_kind_from_string(const std::string& name)
{
    if (name == "full") return EstimatorKind::full;
    if (name == "hte") return EstimatorKind::hte;
    if (name == "sdgd") return EstimatorKind::sdgd;
    throw std::invalid_argument("unknown estimator '" + name + "' (expected full, hte or sdgd)");
}

std::string to_string(GpinnMode mode)
{
    switch (mode) {
    case GpinnMode::exact_loop: return "exact_loop";
    case GpinnMode::probe: return "probe";
    }
    return "unknown";
}

GpinnMode gpinn_mode_from_string(const std::string& name)
{
    if (name == "exact_loop") return GpinnMode::exact_loop;
    if (name == "probe") return GpinnMode::probe;
    throw std::invalid_argument("unknown gPINN mode '" + name + "' (expected exact_loop or probe)");
}

PdeInstance make_instance(const InstanceDescriptor& desc)
{
    if (desc.domain != natural_domain(desc.solution))
        throw ProblemError("solution " + to_string(desc.solution) + " is posed on " +
                           to_string(natural_domain(desc.solution)) + ", not " + to_string(desc.domain));
    return make_instance(desc.op, desc.solution, desc.d, desc.coefficient_seed, desc.sigma);
}

TrainSeeds derive_seeds(const TrainSeeds& base, int repeat_index)
{
    if (repeat_index == 0) return base;
    const auto r = static_cast<std::uint64_t>(repeat_index);
    return {stream_key(base.params, StreamPurpose::misc, r, 1), stream_key(base.points, StreamPurpose::misc, r, 2),
            stream_key(base.probes, StreamPurpose::misc, r, 3), stream_key(base.test_points, StreamPurpose::misc, r, 4)};
}

std::vector<SweepRow> expand_rows(const ExperimentConfig& cfg)
{
    if (!cfg.sweep) return {{"train", cfg.train}};
    const SweepSpec& s = *cfg.sweep;
    const std::vector<EstimatorKind> kinds = s.kinds.empty() ? std::vector{cfg.train.estimator.kind} : s.kinds;
    std::vector<SweepRow> rows;
    for (EstimatorKind kind : kinds) {
        TrainConfig t = cfg.train;
        t.estimator.kind = kind;
        std::vector<int> values;
        if (kind == EstimatorKind::hte) values = s.V.empty() ? std::vector{t.estimator.V} : s.V;
        if (kind == EstimatorKind::sdgd) values = s.B.empty() ? std::vector{t.estimator.B} : s.B;
        if (kind == EstimatorKind::full) values = {0};
        for (int v : values) {
            if (kind == EstimatorKind::hte) t.estimator.V = v;
            if (kind == EstimatorKind::sdgd) t.estimator.B = v;
            rows.push_back({row_label(t.estimator), t});
        }
    }
    return rows;
}

json to_json(const InstanceDescriptor& d)
{
    json j = {{"operator", to_string(d.op)},
              {"solution", to_string(d.solution)},
              {"d", d.d},
              {"domain", to_string(d.domain)},
              {"coefficient_seed", d.coefficient_seed}};
    if (d.sigma) j["diffusion"] = {{"sigma", matrix_to_json(*d.sigma)}};
    else j["diffusion"] = "identity";
    return j;
}

json to_json(const TrainConfig& c)
{
    return {{"epochs", c.epochs},
            {"lr0", c.lr0},
            {"residual_batch", c.residual_batch},
            {"test_points", c.test_points},
            {"eval_every", c.eval_every},
            {"lambda_b", c.lambda_b},
            {"lambda_r", c.lambda_r},
            {"network", {{"width", c.width}, {"hidden_layers", c.hidden_layers}}},
            {"estimator", estimator_to_json(c.estimator)},
            {"gpinn",
             {{"enabled", c.gpinn.enabled},
              {"weight", c.gpinn.auto_weight ? json("auto") : json(c.gpinn.weight)},
              {"mode", to_string(c.gpinn.mode)},
              {"probes", c.gpinn.probes}}},
            {"seeds",
             {{"params", c.seeds.params},
              {"points", c.seeds.points},
              {"probes", c.seeds.probes},
              {"test_points", c.seeds.test_points}}}};
}

json to_json(const ExperimentConfig& c)
{
    json j = {{"schema_version", c.schema_version},
              {"name", c.name},
              {"instance", to_json(c.instance)},
              {"train", to_json(c.train)},
              {"output_dir", c.output_dir.string()},
              {"repeat", c.repeat},
              {"workers", c.workers},
              {"save_params", c.save_params}};
    if (c.sweep) {
        json kinds = json::array();
        for (auto k : c.sweep->kinds) kinds.push_back(to_string(k));
        j["sweep"] = {{"estimator", kinds}, {"V", c.sweep->V}, {"B", c.sweep->B}};
    }
    return j;
}

InstanceDescriptor instance_from_json(const json& j)
{
    Issues issues;
    InstanceDescriptor d = read_instance(Reader(&j, "instance", issues));
    if (!issues.empty()) throw ConfigError(std::move(issues));
    return d;
}

TrainConfig train_config_from_json(const json& j)
{
    Issues issues;
    TrainConfig c;
    read_train(Reader(&j, "train", issues), c);
    if (!issues.empty()) throw ConfigError(std::move(issues));
    return c;
}

ExperimentConfig experiment_config_from_json(const json& j)
{
    Issues issues;
    ExperimentConfig c;
    Reader r(&j, "", issues);
    if (!j.is_object()) throw ConfigError(std::move(issues));
    check_version(r);
    r.read("name", c.name);
    r.require("instance");
    if (const json* inst = r.find("instance")) c.instance = read_instance(Reader(inst, "instance", issues));
    if (const json* t = r.find("train")) read_train(Reader(t, "train", issues), c.train);
    std::string out = c.output_dir.string();
    r.read("output_dir", out);
    c.output_dir = out;
    r.read("repeat", c.repeat);
    r.read("workers", c.workers);
    r.read("save_params", c.save_params);
    if (c.repeat < 1) r.fail("repeat", "must be >= 1");
    if (c.workers < 1) r.fail("workers", "must be >= 1");
    if (const json* s = r.find("sweep")) {
        Reader sr(s, "sweep", issues);
        SweepSpec spec;
        std::vector<std::string> kinds;
        sr.read("estimator", kinds);
        for (std::size_t i = 0; i < kinds.size(); ++i) {
            try {
                spec.kinds.push_back(estimator_kind_from_string(kinds[i]));
            } catch (const std::exception& e) {
                sr.fail("estimator[" + std::to_string(i) + "]", e.what());
            }
        }
        sr.read("V", spec.V);
        sr.read("B", spec.B);
        sr.finish();
        if (spec.kinds.empty() && spec.V.empty() && spec.B.empty()) sr.fail("estimator", "sweep grid is empty");
        c.sweep = std::move(spec);
    }
    r.finish();
    if (!issues.empty()) throw ConfigError(std::move(issues));

    PdeInstance inst;
    try {
        inst = make_instance(c.instance);
    } catch (const std::exception& e) {
        issues.push_back(std::string("instance: ") + e.what());
        throw ConfigError(std::move(issues));
    }
    const auto rows = expand_rows(c);
    for (const auto& row : rows) {
        try {
            validate_train_config(row.train, inst);
        } catch (const TrainError& e) {
            issues.push_back(c.sweep ? "sweep row " + row.label + ": " + e.what() : std::string(e.what()));
        }
    }
    if (!issues.empty()) throw ConfigError(std::move(issues));
    return c;
}

nlohmann::json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError({path.string() + ": not valid JSON (" + e.what() + ")"});
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text)
{
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path)
{
    return experiment_config_from_json(read_json_file(path));
}

json to_json(const RunRecord& rec)
{
    const RunReport& r = rec.report;
    json errors = json::array();
    for (const auto& e : r.errors) errors.push_back({{"epoch", e.epoch}, {"rel_l2", e.rel_l2}});
    return {{"schema_version", kSchemaVersion},
            {"kind", "run_report"},
            {"experiment", rec.experiment},
            {"label", rec.label},
            {"run_index", rec.run_index},
            {"instance", to_json(rec.instance)},
            {"coefficient_seed", r.coefficient_seed},
            {"coefficients", r.coefficients},
            {"config", to_json(r.config)},
            {"loss", r.loss},
            {"lr", r.lr},
            {"penalty", r.penalty},
            {"errors", errors},
            {"final_rel_l2", r.final_rel_l2},
            {"best_rel_l2", r.best_rel_l2},
            {"best_epoch", r.best_epoch},
            {"gpinn_lambda", r.gpinn_lambda},
            {"wall_seconds", r.wall_seconds},
            {"seconds_per_epoch", r.seconds_per_epoch},
            {"parameter_count", r.parameter_count},
            {"timing_note", kTimingNote}};
}

RunRecord run_record_from_json(const json& j)
{
    Issues issues;
    RunRecord rec;
    Reader r(&j, "", issues);
    check_version(r);
    std::string kind;
    r.read("kind", kind);
    if (kind != "run_report") r.fail("kind", "must be \"run_report\"");
    r.read("experiment", rec.experiment);
    r.read("label", rec.label);
    r.read("run_index", rec.run_index);
    if (const json* inst = r.find("instance")) rec.instance = read_instance(Reader(inst, "instance", issues));
    RunReport& rep = rec.report;
    r.read("coefficient_seed", rep.coefficient_seed);
    r.read("coefficients", rep.coefficients);
    if (const json* c = r.find("config")) read_train(Reader(c, "config", issues), rep.config);
    r.read("loss", rep.loss);
    r.read("lr", rep.lr);
    r.read("penalty", rep.penalty);
    if (const json* errs = r.find("errors")) {
        if (!errs->is_array()) {
            r.fail("errors", "must be an array");
        } else {
            for (std::size_t i = 0; i < errs->size(); ++i) {
                Reader er(&(*errs)[i], "errors[" + std::to_string(i) + "]", issues);
                ErrorSample s;
                er.read("epoch", s.epoch);
                er.read("rel_l2", s.rel_l2);
                er.finish();
                rep.errors.push_back(s);
            }
        }
    }
    r.read("final_rel_l2", rep.final_rel_l2);
    r.read("best_rel_l2", rep.best_rel_l2);
    r.read("best_epoch", rep.best_epoch);
    r.read("gpinn_lambda", rep.gpinn_lambda);
    r.read("wall_seconds", rep.wall_seconds);
    r.read("seconds_per_epoch", rep.seconds_per_epoch);
    std::uint64_t count = 0;
    r.read("parameter_count", count);
    rep.parameter_count = static_cast<std::size_t>(count);
    std::string note;
    r.read("timing_note", note);
    r.finish();
    if (!issues.empty()) throw ConfigError(std::move(issues));
    return rec;
}

Statistic summarize(const std::vector<double>& values)
{
    Statistic s;
    s.values = values;
    if (values.empty()) {
        s.mean = s.std = std::numeric_limits<double>::quiet_NaN();
        return s;
    }
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

json to_json(const ExperimentSummary& s)
{
    json rows = json::array();
    for (const auto& row : s.rows) {
        rows.push_back({{"label", row.label},
                        {"estimator", estimator_to_json(row.estimator)},
                        {"run_files", row.run_files},
                        {"final_rel_l2", statistic_to_json(row.final_rel_l2)},
                        {"best_rel_l2", statistic_to_json(row.best_rel_l2)},
                        {"seconds_per_epoch", statistic_to_json(row.seconds_per_epoch)},
                        {"failures", row.failures}});
    }
    return {{"schema_version", kSchemaVersion},
            {"kind", "summary"},
            {"name", s.name},
            {"repeat", s.repeat},
            {"timing_note", kTimingNote},
            {"rows", rows}};
}

ExperimentSummary summary_from_json(const json& j)
{
    Issues issues;
    ExperimentSummary s;
    Reader r(&j, "", issues);
    check_version(r);
    std::string kind;
    r.read("kind", kind);
    if (kind != "summary") r.fail("kind", "must be \"summary\"");
    r.read("name", s.name);
    r.read("repeat", s.repeat);
    std::string note;
    r.read("timing_note", note);
    if (const json* rows = r.find("rows")) {
        if (!rows->is_array()) {
            r.fail("rows", "must be an array");
        } else {
            for (std::size_t i = 0; i < rows->size(); ++i) {
                const std::string path = "rows[" + std::to_string(i) + "]";
                Reader rr(&(*rows)[i], path, issues);
                SummaryRow row;
                rr.read("label", row.label);
                if (const json* e = rr.find("estimator")) read_estimator(Reader(e, rr.at("estimator"), issues), row.estimator);
                rr.read("run_files", row.run_files);
                if (const json* f = rr.find("final_rel_l2")) row.final_rel_l2 = read_statistic(Reader(f, rr.at("final_rel_l2"), issues));
                if (const json* f = rr.find("best_rel_l2")) row.best_rel_l2 = read_statistic(Reader(f, rr.at("best_rel_l2"), issues));
                if (const json* f = rr.find("seconds_per_epoch"))
                    row.seconds_per_epoch = read_statistic(Reader(f, rr.at("seconds_per_epoch"), issues));
                rr.read("failures", row.failures);
                rr.finish();
                s.rows.push_back(std::move(row));
            }
        }
    }
    r.finish();
    if (!issues.empty()) throw ConfigError(std::move(issues));
    return s;
}

std::string loss_csv(const RunReport& r)
{
    std::string out = "epoch,loss,lr\n";
    char buf[96];
    for (std::size_t e = 0; e < r.loss.size(); ++e) {
        const double lr = e < r.lr.size() ? r.lr[e] : std::numeric_limits<double>::quiet_NaN();
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", e, r.loss[e], lr);
        out += buf;
    }
    return out;
}

ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const RunOptions& opts)
{
    if (opts.forbid_sweep && cfg.sweep) throw ConfigError({"sweep: present; use the sweep subcommand"});
    if (opts.require_sweep && !cfg.sweep) throw ConfigError({"sweep: is required by the sweep subcommand"});
    const int workers = opts.workers.value_or(cfg.workers);
    if (workers < 1) throw ConfigError({"workers: must be >= 1"});

    ExperimentOutcome outcome;
    outcome.output_dir = opts.output_dir.value_or(cfg.output_dir);
    std::error_code ec;
    std::filesystem::create_directories(outcome.output_dir, ec);
    if (ec) throw IoError("cannot create output directory " + outcome.output_dir.string() + ": " + ec.message());

    const PdeInstance inst = make_instance(cfg.instance);
    const std::vector<SweepRow> rows = expand_rows(cfg);

    struct Job {
        std::size_t row;
        int repeat;
        std::optional<RunReport> report;
        std::string file;
        std::string failure;
    };
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int r = 0; r < cfg.repeat; ++r) jobs.push_back({i, r, std::nullopt, {}, {}});
    }

    auto run_job = [&](Job& job) {
        const SweepRow& row = rows[job.row];
        TrainConfig tc = row.train;
        tc.seeds = derive_seeds(row.train.seeds, job.repeat);
        const std::filesystem::path rel = std::filesystem::path("runs") / row.label / run_stem(job.repeat);
        try {
            RunRecord rec{cfg.name, row.label, job.repeat, cfg.instance, train(inst, tc)};
            const std::filesystem::path base = outcome.output_dir / rel;
            write_text_file(base.string() + ".json", to_json(rec).dump(2) + "\n");
            write_text_file(base.string() + "_loss.csv", loss_csv(rec.report));
            if (cfg.save_params && rec.report.params) save_checkpoint(base.string() + "_params.json", *rec.report.params);
            rec.report.params.reset();
            job.file = rel.generic_string() + ".json";
            job.report = std::move(rec.report);
        } catch (const std::exception& e) {
            job.failure = run_stem(job.repeat) + ": " + e.what();
        }
    };

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) run_job(jobs[i]);
    };
    const auto threads = std::min<std::size_t>(static_cast<std::size_t>(workers), jobs.size());
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    outcome.summary.name = cfg.name;
    outcome.summary.repeat = cfg.repeat;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        SummaryRow row;
        row.label = rows[i].label;
        row.estimator = rows[i].train.estimator;
        std::vector<double> final_err, best_err, spe;
        for (const Job& job : jobs) {
            if (job.row != i) continue;
            if (job.report) {
                row.run_files.push_back(job.file);
                final_err.push_back(job.report->final_rel_l2);
                best_err.push_back(job.report->best_rel_l2);
                spe.push_back(job.report->seconds_per_epoch);
            } else {
                row.failures.push_back(job.failure);
                outcome.all_succeeded = false;
            }
        }
        row.final_rel_l2 = summarize(final_err);
        row.best_rel_l2 = summarize(best_err);
        row.seconds_per_epoch = summarize(spe);
        outcome.summary.rows.push_back(std::move(row));
    }
    write_text_file(outcome.output_dir / "summary.json", to_json(outcome.summary).dump(2) + "\n");
    return outcome;
}

}  // namespace hte
