// SPDX-License-Identifier: MIT
/**
 * @file trainer.hpp
 * @brief Domain sampling, Adam, the training loop and the relative L2 metric.
 *
 * The loop evaluates each epoch's residual points as one batch: the network
 * jets of every lane of every point go through JetBatchMlp, the per-point
 * head (hard-constraint wrap, residual assembly, loss) is recorded on a
 * scalar tape whose leaves are the network output coefficients, and the
 * leaf adjoints are pushed back through the batch.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hte/estimators.hpp"
#include "hte/jet_batch.hpp"
#include "hte/network.hpp"
#include "hte/problems.hpp"
#include "hte/rng.hpp"

namespace hte {

class TrainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by the divergence guard; carries the failing epoch.
class TrainingDiverged : public TrainError {
public:
    TrainingDiverged(int epoch, const std::string& what) : TrainError(what), epoch_(epoch) {}
    [[nodiscard]] int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

/// n points strictly inside the open domain, stored as the columns of a d x n matrix.
Eigen::MatrixXd sample_domain_points(const DomainSpec& domain, int n, Engine& rng);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// Bias-corrected Adam update of `params` in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr);

/// lr0 * (1 - epoch / epochs).
double linear_decay_lr(double lr0, int epoch, int epochs);

enum class EstimatorKind { full, hte, sdgd };

struct EstimatorConfig {
    EstimatorKind kind = EstimatorKind::hte;
    int V = 16;
    bool unbiased = false;
    ProbeDistribution distribution = ProbeDistribution::rademacher;
    int B = 16;
};

struct GpinnConfig {
    bool enabled = false;
    /// Fixed lambda; ignored when auto_weight is set.
    double weight = 0.0;
    /// lambda = mean(r^2) / mean(|grad r|^2) over the first epoch's points at init.
    bool auto_weight = true;
    GpinnMode mode = GpinnMode::exact_loop;
    int probes = 1;
};

struct TrainSeeds {
    std::uint64_t params = 1;
    std::uint64_t points = 2;
    std::uint64_t probes = 3;
    std::uint64_t test_points = 4;
};

struct TrainConfig {
    int epochs = 10000;
    double lr0 = 1e-3;
    int residual_batch = 100;
    EstimatorConfig estimator;
    GpinnConfig gpinn;
    int test_points = 20000;
    int width = 128;
    int hidden_layers = 3;
    /// Relative L2 is measured every `eval_every` epochs and at the end.
    int eval_every = 100;
    TrainSeeds seeds;
    /// Boundary and residual weights; the hard constraint leaves lambda_b unused.
    double lambda_b = 1.0;
    double lambda_r = 1.0;
};

/// Throws TrainError naming the offending field.
void validate_train_config(const TrainConfig& cfg, const PdeInstance& inst);

struct ErrorSample {
    int epoch = 0;
    double rel_l2 = 0.0;
};

struct RunReport {
    std::vector<double> loss;     // mean training loss per epoch
    std::vector<double> lr;       // learning rate used per epoch
    std::vector<double> penalty;  // mean gPINN penalty per epoch (empty without gPINN)
    std::vector<ErrorSample> errors;
    double final_rel_l2 = 0.0;
    double best_rel_l2 = 0.0;
    int best_epoch = 0;
    double gpinn_lambda = 0.0;
    double wall_seconds = 0.0;
    double seconds_per_epoch = 0.0;
    std::size_t parameter_count = 0;
    TrainConfig config;
    std::vector<double> coefficients;
    std::uint64_t coefficient_seed = 0;
    std::optional<MlpParams> params;
};

/// Network layer sizes (d, width, ..., width, 1).
std::vector<int> network_sizes(const TrainConfig& cfg, int d);

/// Hard-constrained model values at the columns of `points`.
Eigen::VectorXd model_values(const PdeInstance& inst, const MlpParams& params, const Eigen::MatrixXd& points);

/// Exact solution at the columns of `points`.
Eigen::VectorXd exact_values(const PdeInstance& inst, const Eigen::MatrixXd& points);

/// sqrt(sum (u - u_exact)^2) / sqrt(sum u_exact^2).
double relative_l2(const MlpParams& params, const PdeInstance& inst, const Eigen::MatrixXd& test_points);
double relative_l2(const Eigen::VectorXd& predicted, const Eigen::VectorXd& exact);

/// Per-point objectives for one batch of points (one plan per point), with
/// optional accumulation of d(mean objective)/d(theta) into `grad`.
struct BatchEvaluation {
    double mean_loss = 0.0;
    double mean_penalty = 0.0;
    double mean_squared_residual = 0.0;
    std::vector<double> losses;
};

class ResidualBatch {
public:
    ResidualBatch(const PdeInstance& inst, MlpLayout layout);

    /// Evaluates the mean objective over the plans (all plans must share
    /// order and lane count); accumulates its gradient when `grad` is non-empty.
    BatchEvaluation evaluate(std::span<const double> theta, const Eigen::MatrixXd& points,
                             const std::vector<ResidualPlan>& plans, double gpinn_weight, std::span<double> grad);

private:
    const PdeInstance* inst_;
    JetBatchMlp engine_;
};

/// Plan for one training point under `cfg`, with the point's probe stream.
ResidualPlan make_training_plan(const PdeInstance& inst, const TrainConfig& cfg, int epoch, int point,
                                bool with_gradient);

RunReport train(const PdeInstance& inst, const TrainConfig& cfg);

}  // namespace hte
