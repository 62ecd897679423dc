// SPDX-License-Identifier: MIT
#include "hte/problems.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

namespace hte {

std::string to_string(PdeOperator op)
{
    switch (op) {
    case PdeOperator::sine_gordon: return "sine_gordon";
    case PdeOperator::biharmonic: return "biharmonic";
    }
    return "unknown";
}

std::string to_string(ExactSolution s)
{
    switch (s) {
    case ExactSolution::two_body: return "two_body";
    case ExactSolution::three_body: return "three_body";
    case ExactSolution::annulus_three_body: return "annulus_three_body";
    }
    return "unknown";
}

PdeOperator pde_operator_from_string(const std::string& name)
{
    if (name == "sine_gordon") return PdeOperator::sine_gordon;
    if (name == "biharmonic") return PdeOperator::biharmonic;
    throw ProblemError("unknown operator '" + name + "' (expected sine_gordon or biharmonic)");
}

ExactSolution exact_solution_from_string(const std::string& name)
{
    if (name == "two_body") return ExactSolution::two_body;
    if (name == "three_body") return ExactSolution::three_body;
    if (name == "annulus_three_body") return ExactSolution::annulus_three_body;
    throw ProblemError("unknown solution '" + name + "' (expected two_body, three_body or annulus_three_body)");
}

int coefficient_count(ExactSolution s, int d)
{
    switch (s) {
    case ExactSolution::two_body: return d - 1;
    case ExactSolution::three_body:
    case ExactSolution::annulus_three_body: return d - 2;
    }
    return 0;
}

namespace {

void validate_pairing(PdeOperator op, ExactSolution s, int d)
{
    const bool ok = (op == PdeOperator::sine_gordon && s != ExactSolution::annulus_three_body) ||
                    (op == PdeOperator::biharmonic && s == ExactSolution::annulus_three_body);
    if (!ok) throw ProblemError("solution " + to_string(s) + " does not belong to operator " + to_string(op));
    const int need = s == ExactSolution::two_body ? 2 : 3;
    if (d < need)
        throw ProblemError("solution " + to_string(s) + " needs d >= " + std::to_string(need) + ", got " +
                           std::to_string(d));
}

DomainSpec domain_for(ExactSolution s, int d)
{
    return {s == ExactSolution::annulus_three_body ? DomainKind::annulus_1_2 : DomainKind::unit_ball, d};
}

void attach_sigma(PdeInstance& inst, std::optional<Eigen::MatrixXd> sigma)
{
    if (!sigma) return;
    if (sigma->rows() != inst.d || sigma->cols() != inst.d)
        throw ProblemError("diffusion matrix must be " + std::to_string(inst.d) + " x " + std::to_string(inst.d));
    if (!sigma->allFinite()) throw ProblemError("diffusion matrix has non-finite entries");
    if (inst.op == PdeOperator::biharmonic) throw ProblemError("an explicit diffusion matrix applies to sine_gordon only");
    inst.diffusion = (*sigma) * sigma->transpose();
    inst.sigma = std::move(sigma);
}

}  // namespace

PdeInstance make_instance(PdeOperator op, ExactSolution solution, int d, std::uint64_t coefficient_seed,
                          std::optional<Eigen::MatrixXd> sigma)
{
    validate_pairing(op, solution, d);
    Engine rng = make_stream(coefficient_seed, StreamPurpose::coefficients);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> c(static_cast<std::size_t>(coefficient_count(solution, d)));
    for (double& ci : c) ci = normal(rng);
    PdeInstance inst = make_instance_with_coefficients(op, solution, d, std::move(c), std::move(sigma));
    inst.coefficient_seed = coefficient_seed;
    return inst;
}

PdeInstance make_instance_with_coefficients(PdeOperator op, ExactSolution solution, int d,
                                            std::vector<double> coefficients, std::optional<Eigen::MatrixXd> sigma)
{
    validate_pairing(op, solution, d);
    if (static_cast<int>(coefficients.size()) != coefficient_count(solution, d))
        throw ProblemError("solution " + to_string(solution) + " at d = " + std::to_string(d) + " needs " +
                           std::to_string(coefficient_count(solution, d)) + " coefficients, got " +
                           std::to_string(coefficients.size()));
    for (double c : coefficients)
        if (!std::isfinite(c)) throw ProblemError("non-finite solution coefficient");
    PdeInstance inst;
    inst.d = d;
    inst.domain = domain_for(solution, d);
    inst.op = op;
    inst.solution = solution;
    inst.coefficients = std::move(coefficients);
    attach_sigma(inst, std::move(sigma));
    return inst;
}

namespace {

void require_point(const PdeInstance& inst, std::span<const double> x)
{
    if (static_cast<int>(x.size()) != inst.d)
        throw ProblemError("point has dimension " + std::to_string(x.size()) + ", instance has d = " +
                           std::to_string(inst.d));
    double r2 = 0.0;
    for (double xi : x) {
        if (!std::isfinite(xi)) throw ProblemError("point has non-finite coordinates");
        r2 += xi * xi;
    }
    constexpr double slack = 1e-12;
    const bool inside = inst.domain.kind == DomainKind::unit_ball ? r2 <= 1.0 + slack
                                                                  : (r2 >= 1.0 - slack && r2 <= 4.0 + slack);
    if (!inside) throw ProblemError("point lies outside the closed " + to_string(inst.domain.kind) + " domain");
}

// Laplacian of (1 - |x|^2) S(x) through the product rule, where S is a sum of
// terms in 2 or 3 consecutive coordinates; each term only needs jets along its
// own coordinates, so the cost is O(d) instead of O(d^2).
double sine_gordon_forcing_sparse(const PdeInstance& inst, std::span<const double> x)
{
    const int d = inst.d;
    const int width = inst.solution == ExactSolution::two_body ? 2 : 3;
    std::vector<double> grad_s(x.size(), 0.0);
    double s = 0.0;
    double lap_s = 0.0;
    std::array<Jet, 3> local;
    for (int i = 0; i + width <= d; ++i) {
        const double ci = inst.coefficients[static_cast<std::size_t>(i)];
        for (int j = 0; j < width; ++j) {
            for (int k = 0; k < width; ++k)
                local[static_cast<std::size_t>(k)] =
                    Jet::variable(2, x[static_cast<std::size_t>(i + k)], k == j ? 1.0 : 0.0);
            Jet t;
            if (width == 2) {
                const Jet& a = local[0];
                const Jet& b = local[1];
                t = sin(add(add(a, cos(b)), mul(b, cos(a))));
            } else {
                t = exp(mul(mul(local[0], local[1]), local[2]));
            }
            if (j == 0) s += ci * t[0];
            grad_s[static_cast<std::size_t>(i + j)] += ci * t.derivative(1);
            lap_s += ci * t.derivative(2);
        }
    }
    double r2 = 0.0;
    double x_dot_grad = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        r2 += x[k] * x[k];
        x_dot_grad += x[k] * grad_s[k];
    }
    const double b = 1.0 - r2;
    const double u = b * s;
    const double lap_u = -2.0 * d * s - 4.0 * x_dot_grad + b * lap_s;
    return lap_u + std::sin(u);
}

}  // namespace

double forcing_eval(const PdeInstance& inst, std::span<const double> x)
{
    require_point(inst, x);
    if (inst.op == PdeOperator::sine_gordon && inst.identity_diffusion() && inst.domain.kind == DomainKind::unit_ball)
        return sine_gordon_forcing_sparse(inst, x);
    const ExactSolutionCircuit u{&inst};
    return forcing_from_circuit(inst.op, u, x, inst.identity_diffusion() ? nullptr : &inst.diffusion);
}

double forcing_directional_derivative(const PdeInstance& inst, std::span<const double> x, std::span<const double> w)
{
    require_point(inst, x);
    if (inst.op != PdeOperator::sine_gordon || !inst.identity_diffusion())
        throw ProblemError("forcing gradient is available for sine_gordon with identity diffusion only");
    const ExactSolutionCircuit u{&inst};
    double total = 0.0;
    std::vector<double> e(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        e[i] = 1.0;
        total += mixed_third(u, x, e, w);
        e[i] = 0.0;
    }
    const Jet along = jet_along(u, x, w, 1);
    return total + std::cos(along[0]) * along[1];
}

// ----------------------------------------------------------------------------
// Plans
// ----------------------------------------------------------------------------

namespace {

TraceSet uniform_set(int first_lane, int probes, double weight)
{
    return {first_lane, probes, std::vector<double>(static_cast<std::size_t>(probes), weight)};
}

// Appends lanes (D v + v, D v - v) for every column v of `probes`.
void append_bilinear(Eigen::MatrixXd& dirs, Eigen::Index at, const Eigen::MatrixXd& D, const Eigen::MatrixXd& probes)
{
    for (Eigen::Index l = 0; l < probes.cols(); ++l) {
        const Eigen::VectorXd a = D * probes.col(l);
        dirs.col(at + 2 * l) = a + probes.col(l);
        dirs.col(at + 2 * l + 1) = a - probes.col(l);
    }
}

ResidualPlan trace_plan(const PdeInstance& inst, const std::vector<Eigen::MatrixXd>& sets, double weight)
{
    ResidualPlan plan;
    plan.op = inst.op;
    plan.d = inst.d;
    if (inst.op == PdeOperator::biharmonic) {
        plan.stencil = Stencil::quartic;
        plan.order = 4;
    } else {
        plan.stencil = inst.identity_diffusion() ? Stencil::quadratic : Stencil::bilinear;
        plan.order = 2;
    }
    const int per_probe = plan.stencil == Stencil::bilinear ? 2 : 1;
    Eigen::Index total = 0;
    for (const auto& s : sets) total += s.cols() * per_probe;
    plan.directions.resize(inst.d, total);
    Eigen::Index at = 0;
    for (const auto& s : sets) {
        if (per_probe == 2)
            append_bilinear(plan.directions, at, inst.diffusion, s);
        else
            plan.directions.middleCols(at, s.cols()) = s;
        plan.sets.push_back(uniform_set(static_cast<int>(at), static_cast<int>(s.cols()), weight));
        at += s.cols() * per_probe;
    }
    return plan;
}

void attach_gradient(const PdeInstance& inst, ResidualPlan& plan, const GpinnSpec& spec)
{
    if (inst.op != PdeOperator::sine_gordon) throw ProblemError("gpinn: the gradient penalty supports sine_gordon only");
    if (!inst.identity_diffusion()) throw ProblemError("gpinn: requires identity diffusion");
    if (plan.sets.size() != 1) throw ProblemError("gpinn: combine with the biased loss only");
    Eigen::MatrixXd W;
    double scale = 1.0;
    if (spec.mode == GpinnMode::exact_loop) {
        W = Eigen::MatrixXd::Identity(inst.d, inst.d);
    } else {
        if (spec.probe_count < 1) throw ProblemError("gpinn: probe count W must be >= 1");
        W = sample_probes(ProbeDistribution::rademacher, inst.d, spec.probe_count, spec.probe_seed).vectors;
        scale = 1.0 / spec.probe_count;
    }
    const TraceSet& set = plan.sets[0];
    const Eigen::Index M = W.cols();
    const Eigen::Index base = plan.directions.cols();
    Eigen::MatrixXd dirs(inst.d, base + M + 2 * M * set.probes);
    dirs.leftCols(base) = plan.directions;
    dirs.middleCols(base, M) = W;
    const Eigen::Index pairs = base + M;
    for (Eigen::Index m = 0; m < M; ++m) {
        for (int l = 0; l < set.probes; ++l) {
            const Eigen::Index col = pairs + 2 * (m * set.probes + l);
            const auto u = plan.directions.col(set.first_lane + l);
            dirs.col(col) = u + W.col(m);
            dirs.col(col + 1) = u - W.col(m);
        }
    }
    plan.directions = std::move(dirs);
    plan.gradient_directions = std::move(W);
    plan.gradient = GradientBlock{static_cast<int>(base), static_cast<int>(M), static_cast<int>(pairs), scale};
    plan.order = 3;
}

}  // namespace

ResidualPlan make_full_plan(const PdeInstance& inst, const std::optional<GpinnSpec>& gpinn)
{
    const int d = inst.d;
    if (inst.op == PdeOperator::biharmonic) {
        if (gpinn) throw ProblemError("gpinn: the gradient penalty supports sine_gordon only");
        ResidualPlan plan;
        plan.op = inst.op;
        plan.d = d;
        plan.stencil = Stencil::biharmonic_exact;
        plan.order = 4;
        plan.directions = Eigen::MatrixXd::Zero(d, d + d * (d - 1));
        for (int i = 0; i < d; ++i) plan.directions(i, i) = 1.0;
        Eigen::Index lane = d;
        for (int i = 0; i < d; ++i) {
            for (int j = i + 1; j < d; ++j) {
                plan.directions(i, lane) = 1.0;
                plan.directions(j, lane) = 1.0;
                plan.directions(i, lane + 1) = 1.0;
                plan.directions(j, lane + 1) = -1.0;
                lane += 2;
            }
        }
        plan.sets.push_back(uniform_set(0, d, 1.0));
        return plan;
    }
    ResidualPlan plan = trace_plan(inst, {Eigen::MatrixXd::Identity(d, d)}, 1.0);
    if (gpinn) attach_gradient(inst, plan, *gpinn);
    return plan;
}

ResidualPlan make_hte_plan(const PdeInstance& inst, const ProbeBatch& probes, const ProbeBatch* second,
                           const std::optional<GpinnSpec>& gpinn)
{
    auto check = [&](const ProbeBatch& b) {
        if (b.d != inst.d || b.vectors.rows() != inst.d)
            throw ProblemError("probes have dimension " + std::to_string(b.d) + ", instance has d = " +
                               std::to_string(inst.d));
        if (b.count < 1 || b.vectors.cols() != b.count) throw ProblemError("probe batch is empty or malformed");
        if (inst.op == PdeOperator::biharmonic && b.distribution != ProbeDistribution::gaussian)
            throw ProblemError("biharmonic HTE requires Gaussian probes, got " + to_string(b.distribution));
    };
    check(probes);
    std::vector<Eigen::MatrixXd> sets{probes.vectors};
    if (second) {
        check(*second);
        require_independent(probes, *second);
        if (second->count != probes.count) throw ProblemError("unbiased loss: both probe sets must have the same size");
        sets.push_back(second->vectors);
    }
    ResidualPlan plan = trace_plan(inst, sets, 1.0 / probes.count);
    if (gpinn) attach_gradient(inst, plan, *gpinn);
    return plan;
}

ResidualPlan make_sdgd_plan(const PdeInstance& inst, std::span<const int> subset, const std::optional<GpinnSpec>& gpinn)
{
    const int d = inst.d;
    const int B = static_cast<int>(subset.size());
    if (inst.op != PdeOperator::sine_gordon || !inst.identity_diffusion())
        throw ProblemError("sdgd: supported for sine_gordon with identity diffusion only");
    if (B < 1 || B > d)
        throw ProblemError("sdgd: batch B must satisfy 1 <= B <= d (B = " + std::to_string(B) + ", d = " +
                           std::to_string(d) + ")");
    std::vector<int> sorted(subset.begin(), subset.end());
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() < 0 || sorted.back() >= d || std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ProblemError("sdgd: subset must hold distinct indices in [0, d)");
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(d, B);
    for (int l = 0; l < B; ++l) E(subset[static_cast<std::size_t>(l)], l) = 1.0;
    ResidualPlan plan = trace_plan(inst, {E}, static_cast<double>(d) / B);
    if (gpinn) attach_gradient(inst, plan, *gpinn);
    return plan;
}

PointForcing point_forcing(const PdeInstance& inst, const ResidualPlan& plan, std::span<const double> x)
{
    PointForcing f;
    f.g = forcing_eval(inst, x);
    if (plan.gradient) {
        f.gradient.reserve(static_cast<std::size_t>(plan.gradient->count));
        for (Eigen::Index m = 0; m < plan.gradient_directions.cols(); ++m) {
            std::span<const double> w(plan.gradient_directions.data() + m * plan.d, static_cast<std::size_t>(plan.d));
            f.gradient.push_back(forcing_directional_derivative(inst, x, w));
        }
    }
    return f;
}

namespace {

WrappedMlpCircuit wrapped(const PdeInstance& inst, const MlpParams& params)
{
    if (params.layout.input_dim() != inst.d)
        throw ProblemError("network input width " + std::to_string(params.layout.input_dim()) +
                           " does not match d = " + std::to_string(inst.d));
    return {&inst.domain, &params};
}

}  // namespace

ResidualValue residual_full(const PdeInstance& inst, const MlpParams& params, std::span<const double> x)
{
    return residual_full(inst, wrapped(inst, params), x);
}

ResidualValue residual_hte(const PdeInstance& inst, const MlpParams& params, std::span<const double> x,
                           const ProbeBatch& probes)
{
    return residual_hte(inst, wrapped(inst, params), x, probes);
}

double gpinn_penalty(const PdeInstance& inst, const MlpParams& params, std::span<const double> x,
                     const ProbeBatch& probes, const GpinnSpec& mode)
{
    return gpinn_penalty(inst, wrapped(inst, params), x, probes, mode);
}

}  // namespace hte
