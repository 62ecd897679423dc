// SPDX-License-Identifier: MIT
/**
 * @file analysis.hpp
 * @brief One-shot estimates, variance reports and the self-consistency
 *        suite behind the `estimate`, `variance` and `check` subcommands.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "hte/estimators.hpp"
#include "hte/experiment.hpp"

namespace hte {

/// A test function with jets along arbitrary lines.
///  - quadratic: u(x) = 1/2 x^T A x (Hessian (A + A^T) / 2)
///  - norm4: u(x) = |x|^4
///  - exact_solution: u* of an instance
///  - mlp: a tanh network with Gaussian weights from `seed`
struct FunctionSpec {
    enum class Kind { quadratic, norm4, exact_solution, mlp };
    Kind kind = Kind::norm4;
    int d = 2;
    Eigen::MatrixXd matrix;
    InstanceDescriptor instance;
    std::vector<int> sizes;
    std::uint64_t seed = 1;
};

enum class EstimateMethod { hutchinson, sdgd, biharmonic, grad_norm };

struct EstimateRequest {
    FunctionSpec function;
    std::vector<double> point;
    EstimateMethod method = EstimateMethod::hutchinson;
    ProbeDistribution distribution = ProbeDistribution::rademacher;
    int V = 16;
    int B = 1;
    std::uint64_t seed = 1;
};

struct EstimateResult {
    double estimate = 0.0;
    /// Laplacian, biharmonic or squared gradient norm from coordinate jets.
    double exact = 0.0;
    int batch = 0;
    /// Closed-form variance of the trace estimate from the dense Hessian
    /// (hutchinson and sdgd only).
    std::optional<double> closed_form_variance;
};

/// Reads the "estimate" section of a tool config; throws ConfigError.
EstimateRequest estimate_request_from_json(const nlohmann::json& j);
EstimateResult run_estimate(const EstimateRequest& req);
nlohmann::json to_json(const EstimateRequest& req, const EstimateResult& res);

struct VarianceMethodSpec {
    EstimatorKind kind = EstimatorKind::hte;
    ProbeDistribution distribution = ProbeDistribution::rademacher;
    int batch = 1;
};

struct VarianceRequest {
    Eigen::MatrixXd matrix;
    std::string source;
    std::vector<VarianceMethodSpec> methods;
    /// Monte-Carlo samples for distributions without a finite enumeration.
    int monte_carlo_samples = 100000;
    std::uint64_t seed = 1;
};

/// Numeric CSV, one matrix row per line; blank lines and '#' comments are skipped.
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

/// Reads the "variance" section; `matrix_csv` resolves against `base_dir`.
VarianceRequest variance_request_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

/// Closed form, exhaustive enumeration where finite (Rademacher signs,
/// SDGD subsets, coordinate indices) and a Monte-Carlo check otherwise.
nlohmann::json variance_report(const VarianceRequest& req);

struct CheckOptions {
    int mlps = 50;
    int points = 5;
    std::uint64_t seed = 7;
};

struct CheckResult {
    std::string name;
    int cases = 0;
    double max_error = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

CheckOptions check_options_from_json(const nlohmann::json& j);

/// Jets against finite differences, exact-solution residuals, forcing
/// against finite differences, variance closed forms against enumeration
/// and coordinate-complete HTE against the full residual.
std::vector<CheckResult> run_self_checks(const CheckOptions& opts);
nlohmann::json to_json(const std::vector<CheckResult>& checks);

}  // namespace hte
