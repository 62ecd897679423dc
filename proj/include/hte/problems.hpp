// SPDX-License-Identifier: MIT
/**
 * @file problems.hpp
 * @brief PDE instances (Sine-Gordon with two- and three-body solutions, and
 *        the biharmonic annulus problem), their forcing terms, and the
 *        residual machinery shared by the reference evaluator and the
 *        trainer.
 *
 * A residual evaluation at a point is described by a ResidualPlan: the set
 * of directions ("lanes") along which the wrapped model is expanded, and
 * how their jets combine into the operator estimate, the first-order part
 * B_theta and, for gPINN, the input gradient of the residual. The same
 * templated assembly runs on doubles (reference path) and on tape
 * variables (training path), so both paths share one definition of every
 * estimator.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "hte/contractions.hpp"
#include "hte/estimators.hpp"
#include "hte/jet.hpp"
#include "hte/network.hpp"

namespace hte {

class ProblemError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class PdeOperator { sine_gordon, biharmonic };

/// two_body:  (1 - |x|^2) sum_{i<d-1} c_i sin(x_i + cos x_{i+1} + x_{i+1} cos x_i)
/// three_body: (1 - |x|^2) sum_{i<d-2} c_i exp(x_i x_{i+1} x_{i+2})
/// annulus_three_body: (1 - |x|^2)(4 - |x|^2) sum_{i<d-2} c_i exp(x_i x_{i+1} x_{i+2})
enum class ExactSolution { two_body, three_body, annulus_three_body };

std::string to_string(PdeOperator op);
std::string to_string(ExactSolution s);
PdeOperator pde_operator_from_string(const std::string& name);
ExactSolution exact_solution_from_string(const std::string& name);

struct PdeInstance {
    int d = 0;
    DomainSpec domain;
    PdeOperator op = PdeOperator::sine_gordon;
    ExactSolution solution = ExactSolution::two_body;
    std::vector<double> coefficients;
    std::uint64_t coefficient_seed = 0;
    /// Explicit diffusion matrix sigma; empty means identity.
    std::optional<Eigen::MatrixXd> sigma;
    /// sigma sigma^T, cached when sigma is set.
    Eigen::MatrixXd diffusion;

    [[nodiscard]] bool identity_diffusion() const noexcept { return !sigma.has_value(); }
};

/// Number of interaction coefficients the solution formula expects.
int coefficient_count(ExactSolution s, int d);

/// Builds an instance with c_i ~ N(0, 1) drawn from `coefficient_seed`.
PdeInstance make_instance(PdeOperator op, ExactSolution solution, int d, std::uint64_t coefficient_seed,
                          std::optional<Eigen::MatrixXd> sigma = std::nullopt);

/// Builds an instance with explicit coefficients (validated for length).
PdeInstance make_instance_with_coefficients(PdeOperator op, ExactSolution solution, int d,
                                            std::vector<double> coefficients,
                                            std::optional<Eigen::MatrixXd> sigma = std::nullopt);

template <class T>
BasicJet<T> exact_solution_jet(const PdeInstance& inst, std::span<const BasicJet<T>> x)
{
    const int d = inst.d;
    if (static_cast<int>(x.size()) != d)
        throw ProblemError("exact_solution_jet: expected " + std::to_string(d) + " input jets");
    const int K = x[0].order();
    BasicJet<T> sum(K);
    // Terms whose inputs are constant along the line only touch c_0.
    auto constant = [&](int first, int count) {
        if constexpr (std::is_same_v<T, double>) {
            for (int i = first; i < first + count; ++i)
                for (int k = 1; k <= K; ++k)
                    if (x[static_cast<std::size_t>(i)][k] != 0.0) return false;
            return true;
        } else {
            return false;
        }
    };
    auto v = [&](int i) { return x[static_cast<std::size_t>(i)][0]; };
    switch (inst.solution) {
    case ExactSolution::two_body: {
        if (d < 2) throw ProblemError("two-body solution needs d >= 2");
        for (int i = 0; i + 1 < d; ++i) {
            const double ci = inst.coefficients[static_cast<std::size_t>(i)];
            if (constant(i, 2)) {
                using std::cos;
                using std::sin;
                sum[0] = sum[0] + sin(v(i) + cos(v(i + 1)) + v(i + 1) * cos(v(i))) * ci;
                continue;
            }
            const auto& a = x[static_cast<std::size_t>(i)];
            const auto& b = x[static_cast<std::size_t>(i) + 1];
            const BasicJet<T> arg = add(add(a, cos(b)), mul(b, cos(a)));
            sum = add(sum, scale(sin(arg), ci));
        }
        break;
    }
    case ExactSolution::three_body:
    case ExactSolution::annulus_three_body: {
        if (d < 3) throw ProblemError("three-body solution needs d >= 3");
        for (int i = 0; i + 2 < d; ++i) {
            const double ci = inst.coefficients[static_cast<std::size_t>(i)];
            if (constant(i, 3)) {
                using std::exp;
                sum[0] = sum[0] + exp(v(i) * v(i + 1) * v(i + 2)) * ci;
                continue;
            }
            const auto& a = x[static_cast<std::size_t>(i)];
            const auto& b = x[static_cast<std::size_t>(i) + 1];
            const auto& c = x[static_cast<std::size_t>(i) + 2];
            sum = add(sum, scale(exp(mul(mul(a, b), c)), ci));
        }
        break;
    }
    }
    return mul(boundary_factor<T>(inst.domain, x), sum);
}

/// The exact solution as a jet circuit.
struct ExactSolutionCircuit {
    const PdeInstance* instance;
    Jet operator()(std::span<const Jet> x) const { return exact_solution_jet<double>(*instance, x); }
};

/// The hard-constrained network (boundary factor times u_theta) as a circuit.
struct WrappedMlpCircuit {
    const DomainSpec* domain;
    const MlpParams* params;
    Jet operator()(std::span<const Jet> x) const
    {
        return hard_constraint_wrap<double>(*domain, x, mlp_eval_jet(*params, x));
    }
};

// ----------------------------------------------------------------------------
// Exact operators on circuits (used for forcing and as test oracles)
// ----------------------------------------------------------------------------

/// sum_i d^2 f / dx_i^2 from d coordinate jets.
template <class Circuit>
double laplacian(Circuit&& f, std::span<const double> x)
{
    std::vector<double> e(x.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        e[i] = 1.0;
        total += jet_along(f, x, e, 2).derivative(2);
        e[i] = 0.0;
    }
    return total;
}

/// Tr(D H) = sum_k (D e_k)^T H e_k via d bilinear HVPs.
template <class Circuit>
double diffusion_trace(Circuit&& f, std::span<const double> x, const Eigen::MatrixXd& D)
{
    const auto d = static_cast<Eigen::Index>(x.size());
    std::vector<double> e(x.size(), 0.0);
    std::vector<double> col(x.size());
    double total = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) {
        for (Eigen::Index i = 0; i < d; ++i) col[static_cast<std::size_t>(i)] = D(i, k);
        e[static_cast<std::size_t>(k)] = 1.0;
        total += bilinear_hvp(f, x, col, e);
        e[static_cast<std::size_t>(k)] = 0.0;
    }
    return total;
}

/// Dense Hessian from polarized HVPs (small d only; test and report use).
template <class Circuit>
Eigen::MatrixXd hessian_by_polarization(Circuit&& f, std::span<const double> x)
{
    const auto d = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd H(d, d);
    std::vector<double> ei(x.size(), 0.0);
    std::vector<double> ej(x.size(), 0.0);
    for (Eigen::Index i = 0; i < d; ++i) {
        ei[static_cast<std::size_t>(i)] = 1.0;
        H(i, i) = jet_along(f, x, ei, 2).derivative(2);
        for (Eigen::Index j = i + 1; j < d; ++j) {
            ej[static_cast<std::size_t>(j)] = 1.0;
            H(i, j) = H(j, i) = bilinear_hvp(f, x, ei, ej);
            ej[static_cast<std::size_t>(j)] = 0.0;
        }
        ei[static_cast<std::size_t>(i)] = 0.0;
    }
    return H;
}

/// g(x): Tr(sigma sigma^T Hess u) + sin(u) for Sine-Gordon, Delta^2 u for
/// the biharmonic operator, computed from the circuit's own jets.
template <class Circuit>
double forcing_from_circuit(PdeOperator op, Circuit&& u, std::span<const double> x,
                            const Eigen::MatrixXd* diffusion = nullptr)
{
    switch (op) {
    case PdeOperator::sine_gordon: {
        const double trace = diffusion ? diffusion_trace(u, x, *diffusion) : laplacian(u, x);
        const std::vector<double> zero(x.size(), 0.0);
        return trace + std::sin(jet_along(u, x, zero, 0)[0]);
    }
    case PdeOperator::biharmonic: return biharmonic_by_polarization(u, x);
    }
    throw ProblemError("forcing: unknown operator");
}

double forcing_eval(const PdeInstance& inst, std::span<const double> x);

/// Directional derivative of g along w (Sine-Gordon, identity diffusion):
/// sum_i D^3 u[e_i, e_i, w] + cos(u) D u[w].
double forcing_directional_derivative(const PdeInstance& inst, std::span<const double> x, std::span<const double> w);

// ----------------------------------------------------------------------------
// Residual plans
// ----------------------------------------------------------------------------

enum class Stencil {
    /// lane estimate D^2 U[u, u]; trace = sum_l weight_l * estimate_l
    quadratic,
    /// lanes in pairs (a + v, a - v) with a = sigma sigma^T v;
    /// estimate = [Q(a + v) - Q(a - v)] / 4
    bilinear,
    /// lane estimate D^4 U[v, v, v, v] / 3 (Gaussian probes)
    quartic,
    /// d coordinate lanes, then (e_i + e_j, e_i - e_j) for i < j
    biharmonic_exact,
};

struct TraceSet {
    int first_lane = 0;
    int probes = 0;  // number of probe terms (lane pairs count once)
    std::vector<double> weights;
};

struct GradientBlock {
    /// lanes [first_direction_lane, first_direction_lane + count) hold w_m;
    /// then for each m and each trace probe l: lanes (u_l + w_m, u_l - w_m).
    int first_direction_lane = 0;
    int count = 0;
    int first_pair_lane = 0;
    double penalty_scale = 1.0;
};

struct ResidualPlan {
    PdeOperator op = PdeOperator::sine_gordon;
    Stencil stencil = Stencil::quadratic;
    int order = 2;
    int d = 0;
    Eigen::MatrixXd directions;  // d x lanes
    std::vector<TraceSet> sets;   // one set, or two for the unbiased loss
    std::optional<GradientBlock> gradient;
    Eigen::MatrixXd gradient_directions;  // d x count (the w_m)

    [[nodiscard]] int lanes() const noexcept { return static_cast<int>(directions.cols()); }
};

enum class GpinnMode { exact_loop, probe };

struct GpinnSpec {
    GpinnMode mode = GpinnMode::exact_loop;
    int probe_count = 1;          // W for GpinnMode::probe
    std::uint64_t probe_seed = 0;
};

/// Exact operator: d coordinate lanes (Sine-Gordon), d bilinear pairs (non-identity
/// diffusion) or the O(d^2) polarized biharmonic stencil.
ResidualPlan make_full_plan(const PdeInstance& inst, const std::optional<GpinnSpec>& gpinn = std::nullopt);

/// HTE estimate from a probe batch; `second` adds the independent set for the
/// unbiased loss. Biharmonic instances require Gaussian probes.
ResidualPlan make_hte_plan(const PdeInstance& inst, const ProbeBatch& probes, const ProbeBatch* second = nullptr,
                           const std::optional<GpinnSpec>& gpinn = std::nullopt);

/// SDGD estimate over a coordinate subset, scaled by d/B.
ResidualPlan make_sdgd_plan(const PdeInstance& inst, std::span<const int> subset,
                            const std::optional<GpinnSpec>& gpinn = std::nullopt);

/// Forcing data a plan needs at one point.
struct PointForcing {
    double g = 0.0;
    std::vector<double> gradient;  // d g along each gradient direction
};

PointForcing point_forcing(const PdeInstance& inst, const ResidualPlan& plan, std::span<const double> x);

template <class T>
struct ResidualParts {
    T trace1 = T(0.0);
    T trace2 = T(0.0);
    bool two_sets = false;
    T b_theta = T(0.0);
    T value = T(0.0);  // u at the point
    std::vector<T> gradient;  // d r / d w_m
    T penalty = T(0.0);
    bool has_penalty = false;

    [[nodiscard]] T residual() const { return trace1 + b_theta; }
};

/// Combines the wrapped-model lane jets of one point into residual parts.
template <class T>
ResidualParts<T> assemble_residual(const ResidualPlan& plan, std::span<const BasicJet<T>> lanes,
                                   const PointForcing& forcing)
{
    using std::cos;
    using std::sin;
    if (static_cast<int>(lanes.size()) != plan.lanes())
        throw ProblemError("assemble_residual: plan has " + std::to_string(plan.lanes()) + " lanes, got " +
                           std::to_string(lanes.size()));
    ResidualParts<T> parts;
    parts.value = lanes[0][0];
    auto D = [&](int lane, int k) { return lanes[static_cast<std::size_t>(lane)].derivative(k); };

    auto trace_of = [&](const TraceSet& set) {
        T acc = T(0.0);
        switch (plan.stencil) {
        case Stencil::quadratic:
            for (int l = 0; l < set.probes; ++l)
                acc = acc + D(set.first_lane + l, 2) * set.weights[static_cast<std::size_t>(l)];
            break;
        case Stencil::bilinear:
            for (int l = 0; l < set.probes; ++l) {
                const int lp = set.first_lane + 2 * l;
                acc = acc + (D(lp, 2) - D(lp + 1, 2)) * (0.25 * set.weights[static_cast<std::size_t>(l)]);
            }
            break;
        case Stencil::quartic:
            for (int l = 0; l < set.probes; ++l)
                acc = acc + D(set.first_lane + l, 4) * (set.weights[static_cast<std::size_t>(l)] / 3.0);
            break;
        case Stencil::biharmonic_exact: {
            const int d = plan.d;
            for (int i = 0; i < d; ++i) acc = acc + D(i, 4);
            int lane = d;
            for (int i = 0; i < d; ++i) {
                for (int j = i + 1; j < d; ++j) {
                    // 2 * [T(e_i+e_j) + T(e_i-e_j) - 2T(e_i) - 2T(e_j)] / 12
                    acc = acc + (D(lane, 4) + D(lane + 1, 4) - D(i, 4) * 2.0 - D(j, 4) * 2.0) * (1.0 / 6.0);
                    lane += 2;
                }
            }
            break;
        }
        }
        return acc;
    };

    parts.trace1 = trace_of(plan.sets.at(0));
    if (plan.sets.size() > 1) {
        parts.trace2 = trace_of(plan.sets[1]);
        parts.two_sets = true;
    }
    switch (plan.op) {
    case PdeOperator::sine_gordon: parts.b_theta = sin(parts.value) - forcing.g; break;
    case PdeOperator::biharmonic: parts.b_theta = T(0.0) - forcing.g; break;
    }

    if (plan.gradient) {
        const GradientBlock& gb = *plan.gradient;
        const TraceSet& set = plan.sets.at(0);
        const T cos_u = cos(parts.value);
        parts.gradient.reserve(static_cast<std::size_t>(gb.count));
        T penalty = T(0.0);
        for (int m = 0; m < gb.count; ++m) {
            const int wl = gb.first_direction_lane + m;
            const T cw = D(wl, 3);
            T comp = T(0.0);
            for (int l = 0; l < set.probes; ++l) {
                const int pl = gb.first_pair_lane + 2 * (m * set.probes + l);
                // D^3 U[u, u, w] = [C(u + w) - C(u - w) - 2 C(w)] / 6
                comp = comp + (D(pl, 3) - D(pl + 1, 3) - cw * 2.0) * (set.weights[static_cast<std::size_t>(l)] / 6.0);
            }
            comp = comp + cos_u * D(wl, 1) - forcing.gradient.at(static_cast<std::size_t>(m));
            penalty = penalty + comp * comp;
            parts.gradient.push_back(comp);
        }
        parts.penalty = penalty * gb.penalty_scale;
        parts.has_penalty = true;
    }
    return parts;
}

/// Per-point objective: biased or unbiased HTE loss plus
/// (lambda / 2) * penalty when the plan carries a gradient block.
template <class T>
T point_objective(const ResidualParts<T>& parts, double gpinn_weight)
{
    T loss = parts.two_sets ? loss_hte_unbiased<T>(parts.trace1, parts.trace2, parts.b_theta)
                            : loss_hte_biased<T>(parts.trace1, parts.b_theta);
    if (parts.has_penalty && gpinn_weight != 0.0) loss = loss + parts.penalty * (0.5 * gpinn_weight);
    return loss;
}

/// Lane jets of a circuit at x for every direction of the plan.
template <class Circuit>
std::vector<Jet> evaluate_lanes(Circuit&& f, const ResidualPlan& plan, std::span<const double> x)
{
    std::vector<Jet> out;
    out.reserve(static_cast<std::size_t>(plan.lanes()));
    for (int l = 0; l < plan.lanes(); ++l) {
        std::span<const double> dir(plan.directions.data() + static_cast<Eigen::Index>(l) * plan.d,
                                    static_cast<std::size_t>(plan.d));
        out.push_back(jet_along(f, x, dir, plan.order));
    }
    return out;
}

struct ResidualValue {
    double value = 0.0;
    enum class Method { full, hte, sdgd } method = Method::full;
    int batch = 0;
    std::vector<double> point;
};

/// Exact-operator residual of an arbitrary model circuit (e.g. the exact
/// solution itself, for self-consistency checks).
template <class Circuit>
    requires(!std::is_same_v<std::remove_cvref_t<Circuit>, MlpParams>)
ResidualValue residual_full(const PdeInstance& inst, Circuit&& model, std::span<const double> x)
{
    const ResidualPlan plan = make_full_plan(inst);
    const auto lanes = evaluate_lanes(model, plan, x);
    const auto parts = assemble_residual<double>(plan, lanes, point_forcing(inst, plan, x));
    const double r = parts.residual();
    if (!std::isfinite(r)) throw ProblemError("residual_full: non-finite residual");
    return {r, ResidualValue::Method::full, inst.d, {x.begin(), x.end()}};
}

template <class Circuit>
    requires(!std::is_same_v<std::remove_cvref_t<Circuit>, MlpParams>)
ResidualValue residual_hte(const PdeInstance& inst, Circuit&& model, std::span<const double> x, const ProbeBatch& probes)
{
    const ResidualPlan plan = make_hte_plan(inst, probes);
    const auto lanes = evaluate_lanes(model, plan, x);
    const auto parts = assemble_residual<double>(plan, lanes, point_forcing(inst, plan, x));
    const double r = parts.residual();
    if (!std::isfinite(r)) throw ProblemError("residual_hte: non-finite residual");
    return {r, ResidualValue::Method::hte, probes.count, {x.begin(), x.end()}};
}

template <class Circuit>
    requires(!std::is_same_v<std::remove_cvref_t<Circuit>, MlpParams>)
ResidualValue residual_sdgd(const PdeInstance& inst, Circuit&& model, std::span<const double> x,
                            std::span<const int> subset)
{
    const ResidualPlan plan = make_sdgd_plan(inst, subset);
    const auto lanes = evaluate_lanes(model, plan, x);
    const auto parts = assemble_residual<double>(plan, lanes, point_forcing(inst, plan, x));
    return {parts.residual(), ResidualValue::Method::sdgd, static_cast<int>(subset.size()), {x.begin(), x.end()}};
}

/// ||grad_x r_hat||^2 (exact_loop) or its probe estimate (1/W) sum_w (w^T grad r_hat)^2,
/// with r_hat the HTE residual for `probes`.
template <class Circuit>
    requires(!std::is_same_v<std::remove_cvref_t<Circuit>, MlpParams>)
double gpinn_penalty(const PdeInstance& inst, Circuit&& model, std::span<const double> x, const ProbeBatch& probes,
                     const GpinnSpec& mode)
{
    const ResidualPlan plan = make_hte_plan(inst, probes, nullptr, mode);
    const auto lanes = evaluate_lanes(model, plan, x);
    const auto parts = assemble_residual<double>(plan, lanes, point_forcing(inst, plan, x));
    return parts.penalty;
}

ResidualValue residual_full(const PdeInstance& inst, const MlpParams& params, std::span<const double> x);
ResidualValue residual_hte(const PdeInstance& inst, const MlpParams& params, std::span<const double> x,
                           const ProbeBatch& probes);
double gpinn_penalty(const PdeInstance& inst, const MlpParams& params, std::span<const double> x,
                     const ProbeBatch& probes, const GpinnSpec& mode);

}  // namespace hte
