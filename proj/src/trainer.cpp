// SPDX-License-Identifier: MIT
#include "hte/trainer.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include "hte/tape.hpp"

namespace hte {

Eigen::MatrixXd sample_domain_points(const DomainSpec& domain, int n, Engine& rng)
{
    if (n < 1) throw TrainError("sample_domain_points: n must be >= 1, got " + std::to_string(n));
    const int d = domain.dimension;
    if (d < 1) throw TrainError("sample_domain_points: domain dimension must be >= 1");
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    Eigen::MatrixXd X(d, n);
    Eigen::VectorXd g(d);
    for (int j = 0; j < n; ++j) {
        double norm = 0.0;
        do {
            for (int i = 0; i < d; ++i) g(i) = normal(rng);
            norm = g.norm();
        } while (norm == 0.0);
        double r = 0.0;
        if (domain.kind == DomainKind::unit_ball) {
            do r = std::pow(uniform(rng), 1.0 / d);
            while (r >= 1.0);
        } else {
            // r^d uniform on [1, 2^d]: uniform in volume
            const double top = std::pow(2.0, d);
            do r = std::pow(1.0 + uniform(rng) * (top - 1.0), 1.0 / d);
            while (r <= 1.0 || r >= 2.0);
        }
        X.col(j) = g * (r / norm);
    }
    return X;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr)
{
    const std::size_t n = params.size();
    if (grads.size() != n || state.m.size() != n || state.v.size() != n)
        throw TrainError("adam_step: shape mismatch (params " + std::to_string(n) + ", grads " +
                         std::to_string(grads.size()) + ", state " + std::to_string(state.m.size()) + ")");
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(grads[i]))
            throw TrainError("adam_step: non-finite gradient entry at index " + std::to_string(i));
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < n; ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

double linear_decay_lr(double lr0, int epoch, int epochs)
{
    return lr0 * (1.0 - static_cast<double>(epoch) / static_cast<double>(epochs));
}

void validate_train_config(const TrainConfig& cfg, const PdeInstance& inst)
{
    auto fail = [](const std::string& field, const std::string& why) { throw TrainError(field + ": " + why); };
    if (cfg.epochs < 1) fail("train.epochs", "must be >= 1");
    if (!(cfg.lr0 > 0.0) || !std::isfinite(cfg.lr0)) fail("train.lr0", "must be a positive finite number");
    if (cfg.residual_batch < 1) fail("train.residual_batch", "must be >= 1");
    if (cfg.test_points < 1) fail("train.test_points", "must be >= 1");
    if (cfg.width < 1) fail("train.network.width", "must be >= 1");
    if (cfg.hidden_layers < 1) fail("train.network.hidden_layers", "must be >= 1");
    if (cfg.eval_every < 1) fail("train.eval_every", "must be >= 1");
    if (!(cfg.lambda_r > 0.0)) fail("train.lambda_r", "must be positive");
    if (!(cfg.lambda_b >= 0.0)) fail("train.lambda_b", "must be non-negative");
    const EstimatorConfig& e = cfg.estimator;
    switch (e.kind) {
    case EstimatorKind::full: break;
    case EstimatorKind::hte:
        if (e.V < 1) fail("train.estimator.V", "must be >= 1, got " + std::to_string(e.V));
        if (inst.op == PdeOperator::biharmonic && e.distribution != ProbeDistribution::gaussian)
            fail("train.estimator.distribution", "biharmonic HTE requires gaussian probes");
        break;
    case EstimatorKind::sdgd:
        if (e.B < 1 || e.B > inst.d)
            fail("train.estimator.B", "must satisfy 1 <= B <= d = " + std::to_string(inst.d) + ", got " +
                                          std::to_string(e.B));
        if (inst.op != PdeOperator::sine_gordon || !inst.identity_diffusion())
            fail("train.estimator.kind", "sdgd supports sine_gordon with identity diffusion only");
        break;
    }
    if (cfg.gpinn.enabled) {
        if (inst.op != PdeOperator::sine_gordon) fail("train.gpinn.enabled", "gPINN supports sine_gordon only");
        if (!inst.identity_diffusion()) fail("train.gpinn.enabled", "gPINN requires identity diffusion");
        if (e.unbiased && e.kind == EstimatorKind::hte) fail("train.gpinn.enabled", "gPINN combines with the biased loss only");
        if (!cfg.gpinn.auto_weight && !(cfg.gpinn.weight >= 0.0)) fail("train.gpinn.weight", "must be >= 0");
        if (cfg.gpinn.mode == GpinnMode::probe && cfg.gpinn.probes < 1) fail("train.gpinn.probes", "must be >= 1");
    }
}

std::vector<int> network_sizes(const TrainConfig& cfg, int d)
{
    std::vector<int> sizes{d};
    for (int i = 0; i < cfg.hidden_layers; ++i) sizes.push_back(cfg.width);
    sizes.push_back(1);
    return sizes;
}

Eigen::VectorXd model_values(const PdeInstance& inst, const MlpParams& params, const Eigen::MatrixXd& points)
{
    JetBatchMlp engine(params.layout);
    const Eigen::Index n = points.cols();
    Eigen::VectorXd out(n);
    constexpr Eigen::Index chunk = 4096;
    const Eigen::MatrixXd none;
    for (Eigen::Index start = 0; start < n; start += chunk) {
        const Eigen::Index m = std::min(chunk, n - start);
        engine.forward(params.values, 0, points.middleCols(start, m), none, 0);
        out.segment(start, m) = engine.value().transpose();
    }
    std::vector<Jet> x(static_cast<std::size_t>(inst.d), Jet(0));
    for (Eigen::Index j = 0; j < n; ++j) {
        for (int i = 0; i < inst.d; ++i) x[static_cast<std::size_t>(i)] = Jet::constant(0, points(i, j));
        out(j) *= boundary_factor<double>(inst.domain, x)[0];
    }
    return out;
}

Eigen::VectorXd exact_values(const PdeInstance& inst, const Eigen::MatrixXd& points)
{
    Eigen::VectorXd out(points.cols());
    std::vector<Jet> x(static_cast<std::size_t>(inst.d), Jet(0));
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
        for (int i = 0; i < inst.d; ++i) x[static_cast<std::size_t>(i)] = Jet::constant(0, points(i, j));
        out(j) = exact_solution_jet<double>(inst, x)[0];
    }
    return out;
}

double relative_l2(const Eigen::VectorXd& predicted, const Eigen::VectorXd& exact)
{
    if (predicted.size() != exact.size()) throw TrainError("relative_l2: size mismatch");
    const double denom = exact.squaredNorm();
    if (!(denom > 0.0)) throw TrainError("relative_l2: exact solution is zero on the test set");
    return std::sqrt((predicted - exact).squaredNorm() / denom);
}

double relative_l2(const MlpParams& params, const PdeInstance& inst, const Eigen::MatrixXd& test_points)
{
    for (Eigen::Index j = 0; j < test_points.cols(); ++j) {
        std::span<const double> x(test_points.col(j).data(), static_cast<std::size_t>(test_points.rows()));
        if (!inside_domain(inst.domain, x)) throw TrainError("relative_l2: test point outside the domain");
    }
    return relative_l2(model_values(inst, params, test_points), exact_values(inst, test_points));
}

// ----------------------------------------------------------------------------
// Batched residual evaluation
// ----------------------------------------------------------------------------

ResidualBatch::ResidualBatch(const PdeInstance& inst, MlpLayout layout) : inst_(&inst), engine_(std::move(layout)) {}

BatchEvaluation ResidualBatch::evaluate(std::span<const double> theta, const Eigen::MatrixXd& points,
                                        const std::vector<ResidualPlan>& plans, double gpinn_weight,
                                        std::span<double> grad)
{
    const int P = static_cast<int>(points.cols());
    if (P < 1 || static_cast<int>(plans.size()) != P) throw TrainError("ResidualBatch: one plan per point required");
    const int d = inst_->d;
    const int K = plans[0].order;
    const int L = plans[0].lanes();
    Eigen::MatrixXd dirs(d, static_cast<Eigen::Index>(P) * L);
    for (int p = 0; p < P; ++p) {
        const ResidualPlan& plan = plans[static_cast<std::size_t>(p)];
        if (plan.order != K || plan.lanes() != L) throw TrainError("ResidualBatch: plans must share order and lanes");
        dirs.middleCols(static_cast<Eigen::Index>(p) * L, L) = plan.directions;
    }
    engine_.forward(theta, K, points, dirs, L);
    const bool want_grad = !grad.empty();
    Eigen::RowVectorXd value_adj = Eigen::RowVectorXd::Zero(P);
    Eigen::MatrixXd coeff_adj = Eigen::MatrixXd::Zero(K, static_cast<Eigen::Index>(P) * L);

    BatchEvaluation out;
    out.losses.resize(static_cast<std::size_t>(P));
    Tape tape;
    std::vector<BasicJet<Var>> lanes;
    std::vector<std::int32_t> leaves;
    for (int p = 0; p < P; ++p) {
        const ResidualPlan& plan = plans[static_cast<std::size_t>(p)];
        std::span<const double> x(points.col(p).data(), static_cast<std::size_t>(d));
        tape.clear();
        lanes.clear();
        leaves.clear();
        const Var u0 = tape.parameter(engine_.value()(p));
        for (int l = 0; l < L; ++l) {
            const Eigen::Index col = static_cast<Eigen::Index>(p) * L + l;
            BasicJet<Var> net(K);
            net[0] = u0;
            for (int k = 1; k <= K; ++k) {
                net[k] = tape.parameter(engine_.coefficients()(k - 1, col));
                leaves.push_back(net[k].index());
            }
            std::span<const double> dir(dirs.col(col).data(), static_cast<std::size_t>(d));
            lanes.push_back(mul(lift<Var>(boundary_factor_along(inst_->domain, x, dir, K)), net));
        }
        const PointForcing forcing = point_forcing(*inst_, plan, x);
        const ResidualParts<Var> parts = assemble_residual<Var>(plan, lanes, forcing);
        const Var objective = point_objective<Var>(parts, gpinn_weight);
        const double r = parts.residual().value();
        out.losses[static_cast<std::size_t>(p)] = objective.value();
        out.mean_loss += objective.value() / P;
        out.mean_penalty += parts.penalty.value() / P;
        out.mean_squared_residual += r * r / P;
        if (!want_grad || objective.is_constant()) continue;
        const std::vector<double> adj = tape.adjoints(objective.index());
        value_adj(p) = adj[static_cast<std::size_t>(u0.index())] / P;
        std::size_t leaf = 0;
        for (int l = 0; l < L; ++l)
            for (int k = 1; k <= K; ++k)
                coeff_adj(k - 1, static_cast<Eigen::Index>(p) * L + l) =
                    adj[static_cast<std::size_t>(leaves[leaf++])] / P;
    }
    if (want_grad) engine_.backward(theta, value_adj, coeff_adj, grad);
    return out;
}

ResidualPlan make_training_plan(const PdeInstance& inst, const TrainConfig& cfg, int epoch, int point,
                                bool with_gradient)
{
    const auto e = static_cast<std::uint64_t>(epoch);
    const auto p = static_cast<std::uint64_t>(point);
    std::optional<GpinnSpec> gpinn;
    if (with_gradient)
        gpinn = GpinnSpec{cfg.gpinn.mode, cfg.gpinn.probes,
                          stream_key(cfg.seeds.probes, StreamPurpose::gpinn_directions, e, p)};
    const EstimatorConfig& est = cfg.estimator;
    switch (est.kind) {
    case EstimatorKind::full: return make_full_plan(inst, gpinn);
    case EstimatorKind::hte: {
        const ProbeBatch first =
            sample_probes(est.distribution, inst.d, est.V, stream_key(cfg.seeds.probes, StreamPurpose::probes, e, p));
        if (!est.unbiased) return make_hte_plan(inst, first, nullptr, gpinn);
        const ProbeBatch second = sample_probes(est.distribution, inst.d, est.V,
                                                stream_key(cfg.seeds.probes, StreamPurpose::probes_second, e, p));
        return make_hte_plan(inst, first, &second, gpinn);
    }
    case EstimatorKind::sdgd: {
        Engine rng = make_stream(cfg.seeds.probes, StreamPurpose::probes, e, p);
        const std::vector<int> subset = sample_coordinates_without_replacement(inst.d, est.B, rng);
        return make_sdgd_plan(inst, subset, gpinn);
    }
    }
    throw TrainError("unknown estimator kind");
}

namespace {

struct EpochBatch {
    Eigen::MatrixXd points;
    std::vector<ResidualPlan> plans;
};

EpochBatch epoch_batch(const PdeInstance& inst, const TrainConfig& cfg, int epoch, bool with_gradient)
{
    EpochBatch b;
    Engine rng = make_stream(cfg.seeds.points, StreamPurpose::points, static_cast<std::uint64_t>(epoch));
    b.points = sample_domain_points(inst.domain, cfg.residual_batch, rng);
    b.plans.reserve(static_cast<std::size_t>(cfg.residual_batch));
    for (int p = 0; p < cfg.residual_batch; ++p)
        b.plans.push_back(make_training_plan(inst, cfg, epoch, p, with_gradient));
    return b;
}

}  // namespace

RunReport train(const PdeInstance& inst, const TrainConfig& cfg)
{
    validate_train_config(cfg, inst);
    const auto t0 = std::chrono::steady_clock::now();

    Engine param_rng = make_stream(cfg.seeds.params, StreamPurpose::params);
    MlpParams params = init_params(network_sizes(cfg, inst.d), param_rng);
    Engine test_rng = make_stream(cfg.seeds.test_points, StreamPurpose::test_points);
    const Eigen::MatrixXd test_points = sample_domain_points(inst.domain, cfg.test_points, test_rng);
    const Eigen::VectorXd test_exact = exact_values(inst, test_points);

    RunReport report;
    report.config = cfg;
    report.coefficients = inst.coefficients;
    report.coefficient_seed = inst.coefficient_seed;
    report.parameter_count = params.layout.parameter_count();
    report.loss.reserve(static_cast<std::size_t>(cfg.epochs));
    report.lr.reserve(static_cast<std::size_t>(cfg.epochs));

    const bool with_gradient = cfg.gpinn.enabled && (cfg.gpinn.auto_weight || cfg.gpinn.weight != 0.0);
    ResidualBatch batch(inst, params.layout);
    AdamState adam(params.values.size());
    std::vector<double> grad(params.values.size());

    auto record_error = [&](int epoch) {
        const double err = relative_l2(model_values(inst, params, test_points), test_exact);
        if (!std::isfinite(err)) throw TrainingDiverged(epoch, "training diverged at epoch " + std::to_string(epoch) + ": relative L2 error is non-finite");
        report.errors.push_back({epoch, err});
        if (report.errors.size() == 1 || err < report.best_rel_l2) {
            report.best_rel_l2 = err;
            report.best_epoch = epoch;
        }
    };
    record_error(0);

    double lambda = cfg.gpinn.enabled ? cfg.gpinn.weight : 0.0;
    if (with_gradient && cfg.gpinn.auto_weight) {
        const EpochBatch b = epoch_batch(inst, cfg, 0, true);
        const BatchEvaluation init = batch.evaluate(params.values, b.points, b.plans, 0.0, {});
        lambda = init.mean_penalty > 0.0 ? init.mean_squared_residual / init.mean_penalty : 0.0;
    }
    report.gpinn_lambda = lambda;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const EpochBatch b = epoch_batch(inst, cfg, epoch, with_gradient);
        std::fill(grad.begin(), grad.end(), 0.0);
        BatchEvaluation ev;
        try {
            ev = batch.evaluate(params.values, b.points, b.plans, lambda, grad);
        } catch (const std::runtime_error& err) {
            throw TrainingDiverged(epoch, "training diverged at epoch " + std::to_string(epoch) + ": " + err.what());
        }
        if (!std::isfinite(ev.mean_loss))
            throw TrainingDiverged(epoch, "training diverged at epoch " + std::to_string(epoch) + ": mean loss is non-finite");
        if (cfg.lambda_r != 1.0) {
            for (double& g : grad) g *= cfg.lambda_r;
            ev.mean_loss *= cfg.lambda_r;
        }
        const double lr = linear_decay_lr(cfg.lr0, epoch, cfg.epochs);
        try {
            adam_step(params.values, grad, adam, lr);
        } catch (const TrainError& err) {
            throw TrainingDiverged(epoch, "training diverged at epoch " + std::to_string(epoch) + ": " + err.what());
        }
        report.loss.push_back(ev.mean_loss);
        report.lr.push_back(lr);
        if (with_gradient) report.penalty.push_back(ev.mean_penalty);
        if ((epoch + 1) % cfg.eval_every == 0 && epoch + 1 != cfg.epochs) record_error(epoch + 1);
    }
    record_error(cfg.epochs);
    report.final_rel_l2 = report.errors.back().rel_l2;
    const auto t1 = std::chrono::steady_clock::now();
    report.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    report.seconds_per_epoch = report.wall_seconds / cfg.epochs;
    report.params = std::move(params);
    return report;
}

}  // namespace hte
