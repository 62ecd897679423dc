// SPDX-License-Identifier: MIT
#include "hte/estimators.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace hte {

std::string to_string(ProbeDistribution d)
{
    switch (d) {
    case ProbeDistribution::rademacher: return "rademacher";
    case ProbeDistribution::gaussian: return "gaussian";
    case ProbeDistribution::coordinate: return "coordinate";
    }
    return "unknown";
}

ProbeDistribution probe_distribution_from_string(const std::string& name)
{
    if (name == "rademacher") return ProbeDistribution::rademacher;
    if (name == "gaussian") return ProbeDistribution::gaussian;
    if (name == "coordinate") return ProbeDistribution::coordinate;
    throw EstimatorError("unknown probe distribution '" + name + "' (expected rademacher, gaussian or coordinate)");
}

ProbeBatch sample_probes(ProbeDistribution distribution, int d, int count, std::uint64_t seed)
{
    if (d < 1) throw EstimatorError("sample_probes: d must be >= 1, got " + std::to_string(d));
    if (count < 1) throw EstimatorError("sample_probes: V must be >= 1, got " + std::to_string(count));
    ProbeBatch b;
    b.distribution = distribution;
    b.d = d;
    b.count = count;
    b.rng_seed = seed;
    b.vectors = Eigen::MatrixXd::Zero(d, count);
    Engine rng(seed);
    switch (distribution) {
    case ProbeDistribution::rademacher: {
        for (int j = 0; j < count; ++j) {
            // one 64-bit draw covers up to 64 signs
            std::uint64_t bits = 0;
            for (int i = 0; i < d; ++i) {
                if (i % 64 == 0) bits = rng();
                b.vectors(i, j) = (bits & 1ULL) ? 1.0 : -1.0;
                bits >>= 1;
            }
        }
        break;
    }
    case ProbeDistribution::gaussian: {
        std::normal_distribution<double> normal(0.0, 1.0);
        for (int j = 0; j < count; ++j)
            for (int i = 0; i < d; ++i) b.vectors(i, j) = normal(rng);
        break;
    }
    case ProbeDistribution::coordinate: {
        std::uniform_int_distribution<int> pick(0, d - 1);
        const double s = std::sqrt(static_cast<double>(d));
        for (int j = 0; j < count; ++j) b.vectors(pick(rng), j) = s;
        break;
    }
    default: throw EstimatorError("sample_probes: unknown distribution tag");
    }
    return b;
}

TraceEstimate hutchinson_trace(const QuadraticOracle& hvp_oracle, const ProbeBatch& probes)
{
    if (probes.count < 1) throw EstimatorError("hutchinson_trace: empty probe batch");
    double sum = 0.0;
    for (int i = 0; i < probes.count; ++i) {
        const double q = hvp_oracle(probes.probe(i));
        if (!std::isfinite(q)) throw EstimatorError("hutchinson_trace: non-finite oracle output");
        sum += q;
    }
    return {sum / probes.count, TraceMethod::hutchinson, probes.count, probes.rng_seed};
}

std::vector<int> sample_coordinates_without_replacement(int d, int batch, Engine& rng)
{
    if (batch < 1 || batch > d)
        throw EstimatorError("sdgd: batch B must satisfy 1 <= B <= d (B = " + std::to_string(batch) +
                             ", d = " + std::to_string(d) + ")");
    std::vector<int> idx(static_cast<std::size_t>(d));
    std::iota(idx.begin(), idx.end(), 0);
    // partial Fisher-Yates: the first B slots are a uniform subset
    for (int i = 0; i < batch; ++i) {
        std::uniform_int_distribution<int> pick(i, d - 1);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
    }
    idx.resize(static_cast<std::size_t>(batch));
    std::sort(idx.begin(), idx.end());
    return idx;
}

TraceEstimate sdgd_trace(const DiagonalOracle& diag_oracle, int d, int batch, std::uint64_t seed)
{
    Engine rng(seed);
    const std::vector<int> subset = sample_coordinates_without_replacement(d, batch, rng);
    double sum = 0.0;
    for (int i : subset) {
        const double a = diag_oracle(i);
        if (!std::isfinite(a)) throw EstimatorError("sdgd_trace: non-finite oracle output");
        sum += a;
    }
    return {static_cast<double>(d) / batch * sum, TraceMethod::sdgd, batch, seed};
}

void require_independent(const ProbeBatch& first, const ProbeBatch& second)
{
    if (first.rng_seed == second.rng_seed)
        throw EstimatorError("loss_hte_unbiased: both probe batches come from seed " +
                             std::to_string(first.rng_seed) + "; the two sets must be independent");
}

double loss_hte_unbiased(const ProbeBatch& first, const ProbeBatch& second, double trace_est_1, double trace_est_2,
                         double b_theta)
{
    require_independent(first, second);
    return loss_hte_unbiased<double>(trace_est_1, trace_est_2, b_theta);
}

double biharmonic_hte(const QuarticOracle& tvp_oracle, const ProbeBatch& probes)
{
    if (probes.distribution != ProbeDistribution::gaussian)
        throw EstimatorError("biharmonic_hte: requires Gaussian probes (the 1/3 factor is the Gaussian fourth moment), got " +
                             to_string(probes.distribution));
    double sum = 0.0;
    for (int i = 0; i < probes.count; ++i) {
        const double t = tvp_oracle(probes.probe(i));
        if (!std::isfinite(t)) throw EstimatorError("biharmonic_hte: non-finite oracle output");
        sum += t;
    }
    return sum / (3.0 * probes.count);
}

double grad_norm_hte(const LinearOracle& jvp_oracle, const ProbeBatch& probes)
{
    double sum = 0.0;
    for (int i = 0; i < probes.count; ++i) {
        const double g = jvp_oracle(probes.probe(i));
        if (!std::isfinite(g)) throw EstimatorError("grad_norm_hte: non-finite oracle output");
        sum += g * g;
    }
    return sum / probes.count;
}

double binomial(int n, int k)
{
    if (k < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return std::round(r);
}

double trace_estimator_variance_closed(const Eigen::MatrixXd& A, const VarianceMethod& method)
{
    if (A.rows() != A.cols() || A.rows() == 0) throw EstimatorError("variance: matrix must be square and non-empty");
    if (!A.allFinite()) throw EstimatorError("variance: matrix has non-finite entries");
    const auto d = static_cast<int>(A.rows());
    if (const auto* s = std::get_if<SdgdVariance>(&method)) {
        const int B = s->batch;
        if (B < 1 || B > d)
            throw EstimatorError("variance: SDGD batch B must satisfy 1 <= B <= d (B = " + std::to_string(B) + ")");
        if (d == 1) return 0.0;
        const Eigen::VectorXd diag = A.diagonal();
        const double mean = diag.mean();
        const double pop_var = (diag.array() - mean).square().sum() / d;
        const double scale = static_cast<double>(d) / B;
        return scale * scale * B * pop_var * (d - B) / (d - 1.0);
    }
    const auto& h = std::get<HteVariance>(method);
    if (h.batch < 1) throw EstimatorError("variance: HTE batch V must be >= 1");
    double total = 0.0;
    switch (h.distribution) {
    case ProbeDistribution::rademacher:
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                if (i != j) total += A(i, j) * A(i, j) + A(i, j) * A(j, i);
        break;
    case ProbeDistribution::gaussian:
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) total += A(i, j) * A(i, j) + A(i, j) * A(j, i);
        break;
    case ProbeDistribution::coordinate: {
        const double tr = A.trace();
        total = d * A.diagonal().squaredNorm() - tr * tr;
        break;
    }
    }
    return total / h.batch;
}

EnumeratedMoments enumerate_rademacher_moments(const Eigen::MatrixXd& A)
{
    const auto d = static_cast<int>(A.rows());
    if (d < 1 || d > 24 || A.cols() != A.rows())
        throw EstimatorError("enumeration: Rademacher enumeration needs a square matrix with 1 <= d <= 24");
    const std::uint64_t n = 1ULL << d;
    Eigen::VectorXd v(d);
    double sum = 0.0;
    for (std::uint64_t mask = 0; mask < n; ++mask) {
        for (int i = 0; i < d; ++i) v(i) = ((mask >> i) & 1ULL) ? 1.0 : -1.0;
        sum += v.dot(A * v);
    }
    const double mean = sum / static_cast<double>(n);
    // two-pass for the variance keeps cancellation out of the result
    double var = 0.0;
    for (std::uint64_t mask = 0; mask < n; ++mask) {
        for (int i = 0; i < d; ++i) v(i) = ((mask >> i) & 1ULL) ? 1.0 : -1.0;
        const double q = v.dot(A * v) - mean;
        var += q * q;
    }
    return {mean, var / static_cast<double>(n), n};
}

EnumeratedMoments enumerate_sdgd_moments(const Eigen::MatrixXd& A, int batch, std::uint64_t max_subsets)
{
    const auto d = static_cast<int>(A.rows());
    if (batch < 1 || batch > d) throw EstimatorError("enumeration: SDGD batch out of range");
    const double count = binomial(d, batch);
    if (count > static_cast<double>(max_subsets))
        throw EstimatorError("enumeration: C(" + std::to_string(d) + ", " + std::to_string(batch) +
                             ") subsets exceed the enumeration limit");
    const double scale = static_cast<double>(d) / batch;
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(count));
    std::vector<int> idx(static_cast<std::size_t>(batch));
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
        double s = 0.0;
        for (int i : idx) s += A(i, i);
        values.push_back(scale * s);
        int k = batch - 1;
        while (k >= 0 && idx[static_cast<std::size_t>(k)] == d - batch + k) --k;
        if (k < 0) break;
        ++idx[static_cast<std::size_t>(k)];
        for (int m = k + 1; m < batch; ++m) idx[static_cast<std::size_t>(m)] = idx[static_cast<std::size_t>(m - 1)] + 1;
    }
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double var = 0.0;
    for (double x : values) var += (x - mean) * (x - mean);
    return {mean, var / n, static_cast<std::uint64_t>(values.size())};
}

}  // namespace hte
