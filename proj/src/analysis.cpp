// SPDX-License-Identifier: MIT
#include "hte/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>

#include "hte/contractions.hpp"
#include "hte/problems.hpp"
#include "hte/rng.hpp"
#include "hte/trainer.hpp"
#include "json_reader.hpp"

namespace hte {

using nlohmann::json;
using detail::Issues;
using detail::Reader;

namespace {

std::string to_string(FunctionSpec::Kind k)
{
    switch (k) {
    case FunctionSpec::Kind::quadratic: return "quadratic";
    case FunctionSpec::Kind::norm4: return "norm4";
    case FunctionSpec::Kind::exact_solution: return "exact_solution";
    case FunctionSpec::Kind::mlp: return "mlp";
    }
    return "unknown";
}

FunctionSpec::Kind function_kind_from_string(const std::string& name)
{
    if (name == "quadratic") return FunctionSpec::Kind::quadratic;
    if (name == "norm4") return FunctionSpec::Kind::norm4;
    if (name == "exact_solution") return FunctionSpec::Kind::exact_solution;
    if (name == "mlp") return FunctionSpec::Kind::mlp;
    throw std::invalid_argument("unknown function type '" + name + "' (expected quadratic, norm4, exact_solution or mlp)");
}

std::string to_string(EstimateMethod m)
{
    switch (m) {
    case EstimateMethod::hutchinson: return "hutchinson";
    case EstimateMethod::sdgd: return "sdgd";
    case EstimateMethod::biharmonic: return "biharmonic";
    case EstimateMethod::grad_norm: return "grad_norm";
    }
    return "unknown";
}

EstimateMethod estimate_method_from_string(const std::string& name)
{
    if (name == "hutchinson") return EstimateMethod::hutchinson;
    if (name == "sdgd") return EstimateMethod::sdgd;
    if (name == "biharmonic") return EstimateMethod::biharmonic;
    if (name == "grad_norm") return EstimateMethod::grad_norm;
    throw std::invalid_argument("unknown estimator '" + name + "' (expected hutchinson, sdgd, biharmonic or grad_norm)");
}

/// Jet circuit for a FunctionSpec.
class TestFunction {
public:
    explicit TestFunction(const FunctionSpec& spec) : spec_(&spec)
    {
        switch (spec.kind) {
        case FunctionSpec::Kind::quadratic:
            if (spec.matrix.rows() != spec.d || spec.matrix.cols() != spec.d)
                throw ConfigError({"function.matrix: must be " + std::to_string(spec.d) + " x " + std::to_string(spec.d)});
            break;
        case FunctionSpec::Kind::norm4: break;
        case FunctionSpec::Kind::exact_solution: inst_ = make_instance(spec.instance); break;
        case FunctionSpec::Kind::mlp: {
            if (spec.sizes.size() < 2 || spec.sizes.front() != spec.d || spec.sizes.back() != 1)
                throw ConfigError({"function.sizes: must run from d to 1"});
            Engine rng = make_stream(spec.seed, StreamPurpose::params);
            net_ = init_params(spec.sizes, rng);
            break;
        }
        }
    }

    Jet operator()(std::span<const Jet> x) const
    {
        const int order = x.empty() ? 0 : x[0].order();
        switch (spec_->kind) {
        case FunctionSpec::Kind::quadratic: {
            const Eigen::MatrixXd& A = spec_->matrix;
            Jet total(order);
            for (Eigen::Index i = 0; i < A.rows(); ++i) {
                Jet yi(order);
                for (Eigen::Index j = 0; j < A.cols(); ++j) {
                    if (A(i, j) != 0.0) yi = yi + x[static_cast<std::size_t>(j)] * A(i, j);
                }
                total = total + x[static_cast<std::size_t>(i)] * yi;
            }
            return total * 0.5;
        }
        case FunctionSpec::Kind::norm4: {
            Jet r2(order);
            for (const Jet& xi : x) r2 = r2 + square(xi);
            return square(r2);
        }
        case FunctionSpec::Kind::exact_solution: return exact_solution_jet<double>(*inst_, x);
        case FunctionSpec::Kind::mlp: return mlp_eval_jet(*net_, x);
        }
        throw JetError("unknown function kind");
    }

private:
    const FunctionSpec* spec_;
    std::optional<PdeInstance> inst_;
    std::optional<MlpParams> net_;
};

double squared_gradient_norm(const TestFunction& f, std::span<const double> x)
{
    std::vector<double> e(x.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        e[i] = 1.0;
        const double g = jet_along(f, x, e, 1).derivative(1);
        total += g * g;
        e[i] = 0.0;
    }
    return total;
}

// Central differences of g at 0 for k = 1..4, Richardson-extrapolated and
// taken from the step ladder rung that agrees best with its neighbour.
double central_difference(const std::function<double(double)>& g, int k, double h)
{
    switch (k) {
    case 1: return (g(h) - g(-h)) / (2.0 * h);
    case 2: return (g(h) - 2.0 * g(0.0) + g(-h)) / (h * h);
    case 3: return (g(2.0 * h) - 2.0 * g(h) + 2.0 * g(-h) - g(-2.0 * h)) / (2.0 * h * h * h);
    case 4: return (g(2.0 * h) - 4.0 * g(h) + 6.0 * g(0.0) - 4.0 * g(-h) + g(-2.0 * h)) / (h * h * h * h);
    default: return g(0.0);
    }
}

double finite_difference(const std::function<double(double)>& g, int k)
{
    if (k == 0) return g(0.0);
    constexpr int rungs = 11;
    std::array<double, rungs> est{};
    double h = 1e-4;
    for (int j = 0; j < rungs; ++j, h *= 2.0) {
        const double coarse = central_difference(g, k, h);
        const double fine = central_difference(g, k, h / 2.0);
        est[static_cast<std::size_t>(j)] = (4.0 * fine - coarse) / 3.0;
    }
    std::size_t best = 0;
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j + 1 < rungs; ++j) {
        const double dj = std::abs(est[j + 1] - est[j]);
        if (dj < gap) {
            gap = dj;
            best = j;
        }
    }
    return est[best];
}

template <class Circuit>
std::function<double(double)> along_line(Circuit&& f, std::span<const double> x, std::span<const double> v)
{
    return [&f, x, v](double t) {
        std::vector<double> p(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) p[i] = x[i] + t * v[i];
        const std::vector<double> zero(x.size(), 0.0);
        return jet_along(f, p, zero, 0)[0];
    };
}

double rel_gap(double a, double b, double floor)
{
    return std::abs(a - b) / std::max(std::abs(b), floor);
}

void record(CheckResult& c, double err)
{
    ++c.cases;
    if (std::isnan(err) || std::isnan(c.max_error)) c.max_error = std::numeric_limits<double>::quiet_NaN();
    else c.max_error = std::max(c.max_error, err);
}

void finalize(CheckResult& c) { c.passed = c.cases > 0 && std::isfinite(c.max_error) && c.max_error <= c.tolerance; }

FunctionSpec read_function(Reader r)
{
    FunctionSpec f;
    r.require("type");
    r.read_enum("type", f.kind, function_kind_from_string);
    switch (f.kind) {
    case FunctionSpec::Kind::quadratic:
        r.require("matrix");
        if (const json* m = r.find("matrix")) {
            if (auto A = detail::matrix_from_json(*m, r.at("matrix"), r.issues())) {
                f.matrix = *A;
                f.d = static_cast<int>(A->rows());
                if (A->rows() != A->cols()) r.fail("matrix", "must be square");
            }
        }
        break;
    case FunctionSpec::Kind::norm4:
        r.require("d");
        r.read("d", f.d);
        if (f.d < 1) r.fail("d", "must be >= 1");
        break;
    case FunctionSpec::Kind::exact_solution:
        r.require("instance");
        if (const json* i = r.find("instance")) {
            f.instance = detail::read_instance(Reader(i, r.at("instance"), r.issues()));
            f.d = f.instance.d;
        }
        break;
    case FunctionSpec::Kind::mlp:
        r.require("sizes");
        r.read("sizes", f.sizes);
        r.read("seed", f.seed);
        if (!f.sizes.empty()) f.d = f.sizes.front();
        if (f.sizes.size() < 2 || f.sizes.back() != 1 ||
            std::any_of(f.sizes.begin(), f.sizes.end(), [](int s) { return s < 1; }))
            r.fail("sizes", "must list at least two positive layer sizes ending in 1");
        break;
    }
    r.finish();
    return f;
}

}  // namespace

EstimateRequest estimate_request_from_json(const json& j)
{
    Issues issues;
    Reader top(&j, "", issues);
    detail::check_version(top);
    top.require("estimate");
    EstimateRequest req;
    if (const json* e = top.find("estimate")) {
        Reader r(e, "estimate", issues);
        r.require("function");
        if (const json* f = r.find("function")) req.function = read_function(Reader(f, r.at("function"), issues));
        r.read_enum("estimator", req.method, estimate_method_from_string);
        req.distribution = req.method == EstimateMethod::biharmonic ? ProbeDistribution::gaussian : req.distribution;
        r.read_enum("distribution", req.distribution, probe_distribution_from_string);
        r.read("V", req.V);
        r.read("B", req.B);
        r.read("seed", req.seed);
        r.read("point", req.point);
        if (req.point.empty() && !r.has("point")) req.point.assign(static_cast<std::size_t>(req.function.d), 0.0);
        if (static_cast<int>(req.point.size()) != req.function.d)
            r.fail("point", "must have d = " + std::to_string(req.function.d) + " entries");
        if (req.method == EstimateMethod::sdgd && (req.B < 1 || req.B > req.function.d))
            r.fail("B", "must satisfy 1 <= B <= d = " + std::to_string(req.function.d));
        if (req.method != EstimateMethod::sdgd && req.V < 1) r.fail("V", "must be >= 1, got " + std::to_string(req.V));
        if (req.method == EstimateMethod::biharmonic && req.distribution != ProbeDistribution::gaussian)
            r.fail("distribution", "the biharmonic estimator requires gaussian probes");
        r.finish();
    }
    top.finish();
    if (!issues.empty()) throw ConfigError(std::move(issues));
    return req;
}

EstimateResult run_estimate(const EstimateRequest& req)
{
    const TestFunction f(req.function);
    const std::span<const double> x(req.point);
    const int d = req.function.d;
    EstimateResult res;
    auto order_along = [&](int order) {
        return [&f, x, order](std::span<const double> v) { return jet_along(f, x, v, order).derivative(order); };
    };
    switch (req.method) {
    case EstimateMethod::hutchinson: {
        const ProbeBatch probes = sample_probes(req.distribution, d, req.V, req.seed);
        res.estimate = hutchinson_trace(order_along(2), probes).value;
        res.exact = laplacian(f, x);
        res.batch = req.V;
        break;
    }
    case EstimateMethod::sdgd: {
        auto diag = [&](int i) {
            std::vector<double> e(static_cast<std::size_t>(d), 0.0);
            e[static_cast<std::size_t>(i)] = 1.0;
            return jet_along(f, x, e, 2).derivative(2);
        };
        res.estimate = sdgd_trace(diag, d, req.B, req.seed).value;
        res.exact = laplacian(f, x);
        res.batch = req.B;
        break;
    }
    case EstimateMethod::biharmonic: {
        const ProbeBatch probes = sample_probes(req.distribution, d, req.V, req.seed);
        res.estimate = biharmonic_hte(order_along(4), probes);
        res.exact = biharmonic_by_polarization(f, x);
        res.batch = req.V;
        break;
    }
    case EstimateMethod::grad_norm: {
        const ProbeBatch probes = sample_probes(req.distribution, d, req.V, req.seed);
        res.estimate = grad_norm_hte(order_along(1), probes);
        res.exact = squared_gradient_norm(f, x);
        res.batch = req.V;
        break;
    }
    }
    if (req.method == EstimateMethod::hutchinson || req.method == EstimateMethod::sdgd) {
        const Eigen::MatrixXd H = hessian_by_polarization(f, x);
        res.closed_form_variance =
            req.method == EstimateMethod::sdgd
                ? trace_estimator_variance_closed(H, SdgdVariance{req.B})
                : trace_estimator_variance_closed(H, HteVariance{req.V, req.distribution});
    }
    return res;
}

json to_json(const EstimateRequest& req, const EstimateResult& res)
{
    json j = {{"schema_version", kSchemaVersion},
              {"kind", "estimate"},
              {"function", to_string(req.function.kind)},
              {"d", req.function.d},
              {"point", req.point},
              {"estimator", to_string(req.method)},
              {"batch", res.batch},
              {"seed", req.seed},
              {"estimate", res.estimate},
              {"exact", res.exact},
              {"abs_error", std::abs(res.estimate - res.exact)}};
    if (req.method != EstimateMethod::sdgd) j["distribution"] = to_string(req.distribution);
    if (res.closed_form_variance) {
        j["closed_form_variance"] = *res.closed_form_variance;
        j["standard_error"] = std::sqrt(std::max(0.0, *res.closed_form_variance));
    }
    return j;
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || cell.find_first_not_of(" \t\r", used) != std::string::npos)
                throw ConfigError({path.string() + ":" + std::to_string(line_no) + ": '" + cell + "' is not a number"});
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ConfigError({path.string() + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(rows.front().size()) + " columns, got " + std::to_string(row.size())});
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ConfigError({path.string() + ": no matrix rows"});
    Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            A(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return A;
}

VarianceRequest variance_request_from_json(const json& j, const std::filesystem::path& base_dir)
{
    Issues issues;
    Reader top(&j, "", issues);
    detail::check_version(top);
    top.require("variance");
    VarianceRequest req;
    if (const json* v = top.find("variance")) {
        Reader r(v, "variance", issues);
        std::string csv;
        r.read("matrix_csv", csv);
        if (const json* inline_matrix = r.find("matrix")) {
            if (auto A = detail::matrix_from_json(*inline_matrix, r.at("matrix"), issues)) req.matrix = *A;
            req.source = "inline";
        } else if (!csv.empty()) {
            const std::filesystem::path p = std::filesystem::path(csv).is_absolute() ? std::filesystem::path(csv) : base_dir / csv;
            req.source = p.string();
            try {
                req.matrix = read_matrix_csv(p);
            } catch (const ConfigError& e) {
                for (const auto& s : e.issues()) issues.push_back(r.at("matrix_csv") + ": " + s);
            } catch (const IoError& e) {
                issues.push_back(r.at("matrix_csv") + ": " + e.what());
            }
        } else {
            r.fail("matrix_csv", "is required (or give an inline \"matrix\")");
        }
        if (req.matrix.size() > 0 && req.matrix.rows() != req.matrix.cols()) r.fail("matrix", "must be square");
        const auto d = static_cast<int>(req.matrix.rows());
        if (const json* methods = r.find("methods")) {
            if (!methods->is_array()) {
                r.fail("methods", "must be an array");
            } else {
                for (std::size_t i = 0; i < methods->size(); ++i) {
                    Reader mr(&(*methods)[i], r.at("methods[" + std::to_string(i) + "]"), issues);
                    VarianceMethodSpec m;
                    mr.read_enum("estimator", m.kind, estimator_kind_from_string);
                    mr.read_enum("distribution", m.distribution, probe_distribution_from_string);
                    if (m.kind == EstimatorKind::sdgd) mr.read("B", m.batch);
                    else mr.read("V", m.batch);
                    mr.finish();
                    if (m.kind == EstimatorKind::full) mr.fail("estimator", "must be hte or sdgd");
                    if (m.kind == EstimatorKind::sdgd && d > 0 && (m.batch < 1 || m.batch > d))
                        mr.fail("B", "must satisfy 1 <= B <= d = " + std::to_string(d));
                    if (m.kind == EstimatorKind::hte && m.batch < 1) mr.fail("V", "must be >= 1");
                    req.methods.push_back(m);
                }
            }
        } else {
            req.methods = {{EstimatorKind::hte, ProbeDistribution::rademacher, 1},
                           {EstimatorKind::hte, ProbeDistribution::gaussian, 1},
                           {EstimatorKind::sdgd, ProbeDistribution::coordinate, 1}};
        }
        r.read("monte_carlo_samples", req.monte_carlo_samples);
        if (req.monte_carlo_samples < 2) r.fail("monte_carlo_samples", "must be >= 2");
        r.read("seed", req.seed);
        r.finish();
    }
    top.finish();
    if (!issues.empty()) throw ConfigError(std::move(issues));
    return req;
}

json variance_report(const VarianceRequest& req)
{
    const Eigen::MatrixXd& A = req.matrix;
    if (A.rows() != A.cols() || A.rows() == 0) throw ConfigError({"variance.matrix: must be square and non-empty"});
    const auto d = static_cast<int>(A.rows());
    json methods = json::array();
    for (const auto& m : req.methods) {
        json row;
        row["estimator"] = to_string(m.kind);
        row["batch"] = m.batch;
        double closed = 0.0;
        std::optional<double> enumerated;
        std::string enumeration;
        std::uint64_t outcomes = 0;
        if (m.kind == EstimatorKind::sdgd) {
            closed = trace_estimator_variance_closed(A, SdgdVariance{m.batch});
            const double ratio = static_cast<double>(m.batch) / d;
            row["unscaled_closed_form"] = closed * ratio * ratio;
            if (binomial(d, m.batch) <= 5e6) {
                const auto mom = enumerate_sdgd_moments(A, m.batch);
                enumerated = mom.variance;
                outcomes = mom.outcomes;
                enumeration = "subsets";
            }
        } else {
            row["distribution"] = to_string(m.distribution);
            closed = trace_estimator_variance_closed(A, HteVariance{m.batch, m.distribution});
            switch (m.distribution) {
            case ProbeDistribution::rademacher:
                if (d <= 24) {
                    const auto mom = enumerate_rademacher_moments(A);
                    enumerated = mom.variance / m.batch;
                    outcomes = mom.outcomes;
                    enumeration = "rademacher_signs";
                }
                break;
            case ProbeDistribution::coordinate: {
                const double tr = A.trace();
                double second = 0.0;
                for (int i = 0; i < d; ++i) second += (d * A(i, i)) * (d * A(i, i));
                enumerated = (second / d - tr * tr) / m.batch;
                outcomes = static_cast<std::uint64_t>(d);
                enumeration = "coordinate_indices";
                break;
            }
            case ProbeDistribution::gaussian: {
                const ProbeBatch p = sample_probes(ProbeDistribution::gaussian, d, req.monte_carlo_samples, req.seed);
                std::vector<double> q(static_cast<std::size_t>(p.count));
                double mean = 0.0;
                for (int s = 0; s < p.count; ++s) {
                    const Eigen::Map<const Eigen::VectorXd> v(p.probe(s).data(), d);
                    q[static_cast<std::size_t>(s)] = v.dot(A * v);
                    mean += q[static_cast<std::size_t>(s)];
                }
                mean /= p.count;
                double ss = 0.0;
                for (double x : q) ss += (x - mean) * (x - mean);
                row["monte_carlo"] = {{"samples", p.count}, {"variance", ss / (p.count - 1) / m.batch}, {"mean", mean}};
                break;
            }
            }
        }
        row["closed_form"] = closed;
        if (enumerated) {
            row["enumerated"] = *enumerated;
            row["enumeration"] = enumeration;
            row["outcomes"] = outcomes;
            row["relative_gap"] = rel_gap(closed, *enumerated, 1e-300);
        } else {
            row["enumerated"] = nullptr;
        }
        methods.push_back(std::move(row));
    }
    return {{"schema_version", kSchemaVersion},
            {"kind", "variance_report"},
            {"source", req.source},
            {"d", d},
            {"trace", A.trace()},
            {"symmetric", A == A.transpose()},
            {"methods", methods}};
}

CheckOptions check_options_from_json(const json& j)
{
    Issues issues;
    CheckOptions o;
    Reader top(&j, "", issues);
    detail::check_version(top);
    if (const json* c = top.find("check")) {
        Reader r(c, "check", issues);
        r.read("mlps", o.mlps);
        r.read("points", o.points);
        r.read("seed", o.seed);
        if (o.mlps < 1) r.fail("mlps", "must be >= 1");
        if (o.points < 1) r.fail("points", "must be >= 1");
        r.finish();
    }
    top.finish();
    if (!issues.empty()) throw ConfigError(std::move(issues));
    return o;
}

std::vector<CheckResult> run_self_checks(const CheckOptions& opts)
{
    std::vector<CheckResult> out;
    Engine rng = make_stream(opts.seed, StreamPurpose::misc);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    auto random_uniform = [&](int n) {
        std::vector<double> v(static_cast<std::size_t>(n));
        for (double& x : v) x = uniform(rng);
        return v;
    };
    auto random_normal = [&](int n) {
        std::vector<double> v(static_cast<std::size_t>(n));
        for (double& x : v) x = normal(rng);
        return v;
    };

    {
        CheckResult c{"jet_vs_finite_difference", 0, 0.0, 1e-4, false};
        for (int m = 0; m < opts.mlps; ++m) {
            const int d = 1 + static_cast<int>(rng() % 8);
            const int K = 1 + static_cast<int>(rng() % 4);
            const int w = 4 + static_cast<int>(rng() % 9);
            const MlpParams net = init_params({d, w, w, 1}, rng);
            auto f = [&net](std::span<const Jet> x) { return mlp_eval_jet(net, x); };
            const auto x = random_uniform(d);
            const auto v = random_normal(d);
            const Jet jet = jet_along(f, x, v, K);
            const auto g = along_line(f, x, v);
            for (int k = 1; k <= K; ++k) record(c, rel_gap(jet.derivative(k), finite_difference(g, k), 1.0));
        }
        finalize(c);
        out.push_back(c);
    }

    const std::vector<PdeInstance> instances = {
        make_instance(PdeOperator::sine_gordon, ExactSolution::two_body, 5, opts.seed),
        make_instance(PdeOperator::sine_gordon, ExactSolution::three_body, 5, opts.seed),
        make_instance(PdeOperator::biharmonic, ExactSolution::annulus_three_body, 4, opts.seed)};
    {
        CheckResult c{"exact_solution_residual", 0, 0.0, 1e-9, false};
        for (const auto& inst : instances) {
            const Eigen::MatrixXd pts = sample_domain_points(inst.domain, opts.points, rng);
            for (Eigen::Index p = 0; p < pts.cols(); ++p) {
                const std::span<const double> x(pts.col(p).data(), static_cast<std::size_t>(inst.d));
                const double r = residual_full(inst, ExactSolutionCircuit{&inst}, x).value;
                record(c, std::abs(r) / std::max(1.0, std::abs(forcing_eval(inst, x))));
            }
        }
        finalize(c);
        out.push_back(c);
    }
    {
        CheckResult c{"forcing_vs_finite_difference", 0, 0.0, 1e-6, false};
        for (std::size_t k = 0; k < 2; ++k) {
            const PdeInstance& inst = instances[k];
            const ExactSolutionCircuit u{&inst};
            const Eigen::MatrixXd pts = sample_domain_points(inst.domain, opts.points, rng);
            for (Eigen::Index p = 0; p < pts.cols(); ++p) {
                const std::span<const double> x(pts.col(p).data(), static_cast<std::size_t>(inst.d));
                double lap = 0.0;
                std::vector<double> e(static_cast<std::size_t>(inst.d), 0.0);
                for (std::size_t i = 0; i < e.size(); ++i) {
                    e[i] = 1.0;
                    lap += finite_difference(along_line(u, x, e), 2);
                    e[i] = 0.0;
                }
                const double g_fd = lap + std::sin(along_line(u, x, e)(0.0));
                record(c, rel_gap(forcing_eval(inst, x), g_fd, 1.0));
            }
        }
        finalize(c);
        out.push_back(c);
    }
    {
        CheckResult c{"variance_closed_vs_enumeration", 0, 0.0, 1e-12, false};
        for (int d : {2, 4, 6}) {
            Eigen::MatrixXd A(d, d);
            for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = normal(rng);
            const double closed = trace_estimator_variance_closed(A, HteVariance{1, ProbeDistribution::rademacher});
            record(c, rel_gap(closed, enumerate_rademacher_moments(A).variance, 1e-12));
            for (int B = 1; B <= d; ++B)
                record(c, rel_gap(trace_estimator_variance_closed(A, SdgdVariance{B}),
                                  enumerate_sdgd_moments(A, B).variance, 1e-12));
        }
        finalize(c);
        out.push_back(c);
    }
    {
        CheckResult c{"coordinate_complete_hte_equals_full", 0, 0.0, 1e-10, false};
        const int d = 6;
        const PdeInstance inst = make_instance(PdeOperator::sine_gordon, ExactSolution::two_body, d, opts.seed);
        const MlpParams net = init_params({d, 16, 16, 1}, rng);
        ProbeBatch probes;
        probes.distribution = ProbeDistribution::coordinate;
        probes.d = probes.count = d;
        probes.vectors = std::sqrt(static_cast<double>(d)) * Eigen::MatrixXd::Identity(d, d);
        const Eigen::MatrixXd pts = sample_domain_points(inst.domain, opts.points, rng);
        for (Eigen::Index p = 0; p < pts.cols(); ++p) {
            const std::span<const double> x(pts.col(p).data(), static_cast<std::size_t>(d));
            record(c, rel_gap(residual_hte(inst, net, x, probes).value, residual_full(inst, net, x).value, 1.0));
        }
        finalize(c);
        out.push_back(c);
    }
    return out;
}

json to_json(const std::vector<CheckResult>& checks)
{
    json rows = json::array();
    bool all = true;
    for (const auto& c : checks) {
        all = all && c.passed;
        rows.push_back({{"name", c.name},
                        {"cases", c.cases},
                        {"max_error", c.max_error},
                        {"tolerance", c.tolerance},
                        {"passed", c.passed}});
    }
    return {{"schema_version", kSchemaVersion}, {"kind", "check_report"}, {"passed", all}, {"checks", rows}};
}

}  // namespace hte
