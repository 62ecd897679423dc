// SPDX-License-Identifier: MIT
/**
 * @file estimators.hpp
 * @brief Probe sampling and the randomized estimators: Hutchinson trace,
 *        SDGD coordinate sampling, HTE losses, the biharmonic TVP estimator,
 *        the gradient-norm estimator and closed-form estimator variances.
 *
 * Every estimator is pure given an explicit probe batch.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "hte/jet.hpp"
#include "hte/rng.hpp"

namespace hte {

class EstimatorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ProbeDistribution { rademacher, gaussian, coordinate };

std::string to_string(ProbeDistribution d);
ProbeDistribution probe_distribution_from_string(const std::string& name);

/// V probe vectors in R^d, stored as the columns of a d x V matrix.
/// Every distribution satisfies E[v v^T] = I; coordinate probes are
/// sqrt(d) e_i with i uniform (sampled with replacement).
struct ProbeBatch {
    ProbeDistribution distribution = ProbeDistribution::rademacher;
    int d = 0;
    int count = 0;
    Eigen::MatrixXd vectors;
    std::uint64_t rng_seed = 0;

    [[nodiscard]] std::span<const double> probe(int i) const
    {
        return {vectors.data() + static_cast<Eigen::Index>(i) * d, static_cast<std::size_t>(d)};
    }
};

ProbeBatch sample_probes(ProbeDistribution distribution, int d, int count, std::uint64_t seed);

enum class TraceMethod { hutchinson, sdgd, exact };

struct TraceEstimate {
    double value = 0.0;
    TraceMethod method = TraceMethod::exact;
    int batch = 1;
    std::uint64_t seed = 0;
};

using QuadraticOracle = std::function<double(std::span<const double>)>;
using DiagonalOracle = std::function<double(int)>;

/// (1/V) sum_i oracle(v_i) where oracle(v) = v^T A v.
TraceEstimate hutchinson_trace(const QuadraticOracle& hvp_oracle, const ProbeBatch& probes);

/// Uniform size-B index subset drawn without replacement (sorted).
std::vector<int> sample_coordinates_without_replacement(int d, int batch, Engine& rng);

/// (d/B) sum_{i in I} A_ii over a uniform size-B subset I.
TraceEstimate sdgd_trace(const DiagonalOracle& diag_oracle, int d, int batch, std::uint64_t seed);

namespace detail {
template <class T>
void require_finite_scalar(const T& x, const char* what)
{
    using std::isfinite;
    if (!isfinite(value_of(x))) throw EstimatorError(std::string(what) + ": non-finite input");
}
}  // namespace detail

/// 1/2 (trace_estimate + B_theta)^2.
template <class T>
T loss_hte_biased(const T& trace_estimate, const T& b_theta)
{
    detail::require_finite_scalar(trace_estimate, "loss_hte_biased");
    detail::require_finite_scalar(b_theta, "loss_hte_biased");
    const T r = trace_estimate + b_theta;
    return (r * r) * 0.5;
}

/// 1/2 (t1 + B_theta)(t2 + B_theta) with t1, t2 from independent probe sets.
template <class T>
T loss_hte_unbiased(const T& trace_est_1, const T& trace_est_2, const T& b_theta)
{
    detail::require_finite_scalar(trace_est_1, "loss_hte_unbiased");
    detail::require_finite_scalar(trace_est_2, "loss_hte_unbiased");
    detail::require_finite_scalar(b_theta, "loss_hte_unbiased");
    return ((trace_est_1 + b_theta) * (trace_est_2 + b_theta)) * 0.5;
}

/// Rejects two batches drawn from the same stream.
void require_independent(const ProbeBatch& first, const ProbeBatch& second);

double loss_hte_unbiased(const ProbeBatch& first, const ProbeBatch& second, double trace_est_1,
                         double trace_est_2, double b_theta);

using QuarticOracle = std::function<double(std::span<const double>)>;
using LinearOracle = std::function<double(std::span<const double>)>;

/// (1/3)(1/V) sum_i D^4 u[v_i, v_i, v_i, v_i]; Gaussian probes only.
double biharmonic_hte(const QuarticOracle& tvp_oracle, const ProbeBatch& probes);

/// (1/V) sum_i (v_i^T grad u)^2.
double grad_norm_hte(const LinearOracle& jvp_oracle, const ProbeBatch& probes);

struct SdgdVariance {
    int batch = 1;
};
struct HteVariance {
    int batch = 1;
    ProbeDistribution distribution = ProbeDistribution::rademacher;
};
using VarianceMethod = std::variant<SdgdVariance, HteVariance>;

/// Closed-form variance of a trace estimator for a fixed matrix A.
///  - SDGD(B): (d/B)^2 * B * s^2 * (d - B)/(d - 1), s^2 the population
///    variance of diag(A) (sampling without replacement); this equals the
///    mean squared deviation over all C(d, B) subsets.
///  - HTE(V), Rademacher: (1/V) sum_{i != j} (A_ij^2 + A_ij A_ji).
///  - HTE(V), Gaussian: (1/V) sum_{i, j} (A_ij^2 + A_ij A_ji).
///  - HTE(V), coordinate: (1/V)(d sum_i A_ii^2 - Tr(A)^2).
double trace_estimator_variance_closed(const Eigen::MatrixXd& A, const VarianceMethod& method);

/// Mean and variance of v^T A v over all 2^d Rademacher vectors (d <= 24).
struct EnumeratedMoments {
    double mean = 0.0;
    double variance = 0.0;
    std::uint64_t outcomes = 0;
};
EnumeratedMoments enumerate_rademacher_moments(const Eigen::MatrixXd& A);

/// Mean and variance of (d/B) sum_{i in I} A_ii over all size-B subsets.
/// Throws EstimatorError when C(d, B) exceeds `max_subsets`.
EnumeratedMoments enumerate_sdgd_moments(const Eigen::MatrixXd& A, int batch, std::uint64_t max_subsets = 50'000'000);

/// Binomial coefficient as a double (exact below 2^53).
double binomial(int n, int k);

}  // namespace hte
