// SPDX-License-Identifier: MIT
/**
 * @file network.hpp
 * @brief tanh multilayer perceptron evaluated over jets, plus the
 *        hard-constraint boundary factors.
 *
 * Parameters live in one flat vector. Layer l owns a column-major weight
 * block of shape (sizes[l+1], sizes[l]) followed by its bias.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hte/jet.hpp"
#include "hte/rng.hpp"

namespace hte {

class NetworkError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MlpLayout {
public:
    MlpLayout() = default;
    explicit MlpLayout(std::vector<int> sizes);

    [[nodiscard]] const std::vector<int>& sizes() const noexcept { return sizes_; }
    [[nodiscard]] int layers() const noexcept { return static_cast<int>(sizes_.size()) - 1; }
    [[nodiscard]] int input_dim() const noexcept { return sizes_.front(); }
    [[nodiscard]] int rows(int layer) const { return sizes_.at(static_cast<std::size_t>(layer) + 1); }
    [[nodiscard]] int cols(int layer) const { return sizes_.at(static_cast<std::size_t>(layer)); }
    [[nodiscard]] std::size_t weight_offset(int layer) const { return weight_offset_.at(static_cast<std::size_t>(layer)); }
    [[nodiscard]] std::size_t bias_offset(int layer) const { return bias_offset_.at(static_cast<std::size_t>(layer)); }
    [[nodiscard]] std::size_t parameter_count() const noexcept { return count_; }
    /// Number of weight and bias tensors (two per layer).
    [[nodiscard]] int tensor_count() const noexcept { return 2 * layers(); }

    bool operator==(const MlpLayout& other) const { return sizes_ == other.sizes_; }

private:
    std::vector<int> sizes_;
    std::vector<std::size_t> weight_offset_;
    std::vector<std::size_t> bias_offset_;
    std::size_t count_ = 0;
};

struct MlpParams {
    MlpLayout layout;
    std::vector<double> values;

    using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
    using MatrixMap = Eigen::Map<Eigen::MatrixXd>;
    using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
    using VectorMap = Eigen::Map<Eigen::VectorXd>;

    [[nodiscard]] ConstMatrixMap weight(int l) const
    {
        return ConstMatrixMap(values.data() + layout.weight_offset(l), layout.rows(l), layout.cols(l));
    }
    MatrixMap weight(int l) { return MatrixMap(values.data() + layout.weight_offset(l), layout.rows(l), layout.cols(l)); }
    [[nodiscard]] ConstVectorMap bias(int l) const
    {
        return ConstVectorMap(values.data() + layout.bias_offset(l), layout.rows(l));
    }
    VectorMap bias(int l) { return VectorMap(values.data() + layout.bias_offset(l), layout.rows(l)); }
};

/// Weights ~ N(0, 1/fan_in), biases zero. Deterministic in the engine state.
MlpParams init_params(const std::vector<int>& layer_sizes, Engine& rng);

/// Evaluates u_theta on input jets. `theta` is the flat parameter vector in
/// the layout's order; hidden layers use tanh, the output layer is linear.
template <class T>
BasicJet<T> mlp_eval_jet(const MlpLayout& layout, std::span<const T> theta, std::span<const BasicJet<T>> inputs)
{
    if (theta.size() != layout.parameter_count())
        throw NetworkError("mlp_eval_jet: expected " + std::to_string(layout.parameter_count()) +
                           " parameters, got " + std::to_string(theta.size()));
    if (inputs.size() != static_cast<std::size_t>(layout.input_dim()))
        throw NetworkError("mlp_eval_jet: expected " + std::to_string(layout.input_dim()) + " input jets, got " +
                           std::to_string(inputs.size()));
    const int order = inputs.empty() ? 0 : inputs[0].order();
    for (const auto& j : inputs) {
        if (j.order() != order) throw JetError("mlp_eval_jet: input jets have mixed orders");
    }
    std::vector<BasicJet<T>> act(inputs.begin(), inputs.end());
    std::vector<BasicJet<T>> next;
    for (int l = 0; l < layout.layers(); ++l) {
        const int rows = layout.rows(l);
        const int cols = layout.cols(l);
        const T* w = theta.data() + layout.weight_offset(l);
        const T* b = theta.data() + layout.bias_offset(l);
        next.assign(static_cast<std::size_t>(rows), BasicJet<T>(order));
        for (int r = 0; r < rows; ++r) {
            BasicJet<T> z = BasicJet<T>::constant(order, b[r]);
            for (int c = 0; c < cols; ++c) {
                const T& wrc = w[static_cast<std::size_t>(c) * rows + r];
                const BasicJet<T>& a = act[static_cast<std::size_t>(c)];
                for (int k = 0; k <= order; ++k) z[k] = z[k] + wrc * a[k];
            }
            next[static_cast<std::size_t>(r)] = (l + 1 < layout.layers()) ? tanh(z) : z;
        }
        act.swap(next);
    }
    return act.front();
}

inline Jet mlp_eval_jet(const MlpParams& params, std::span<const Jet> inputs)
{
    return mlp_eval_jet<double>(params.layout, params.values, inputs);
}

enum class DomainKind { unit_ball, annulus_1_2 };

struct DomainSpec {
    DomainKind kind = DomainKind::unit_ball;
    int dimension = 1;
};

/// Jet of the boundary factor: 1 - |x|^2 (unit ball) or
/// (1 - |x|^2)(4 - |x|^2) (annulus 1 < |x| < 2).
template <class T>
BasicJet<T> boundary_factor(const DomainSpec& domain, std::span<const BasicJet<T>> inputs)
{
    if (inputs.empty()) throw NetworkError("boundary_factor: no input jets");
    BasicJet<T> r2(inputs[0].order());
    for (const auto& xi : inputs) r2 = add(r2, square(xi));
    const BasicJet<T> inner = shift(-r2, 1.0);
    switch (domain.kind) {
    case DomainKind::unit_ball: return inner;
    case DomainKind::annulus_1_2: return mul(inner, shift(-r2, 4.0));
    }
    throw NetworkError("boundary_factor: unknown domain kind");
}

template <class T>
BasicJet<T> hard_constraint_wrap(const DomainSpec& domain, std::span<const BasicJet<T>> inputs,
                                 const BasicJet<T>& net_output)
{
    return mul(boundary_factor<T>(domain, inputs), net_output);
}

/// Factor jet for the line x + t v, evaluated on plain doubles.
Jet boundary_factor_along(const DomainSpec& domain, std::span<const double> x, std::span<const double> v, int order);

bool inside_domain(const DomainSpec& domain, std::span<const double> x);

std::string to_string(DomainKind kind);
DomainKind domain_kind_from_string(const std::string& name);

/// JSON checkpoint; see README for the schema.
void save_checkpoint(const std::filesystem::path& path, const MlpParams& params);
MlpParams load_checkpoint(const std::filesystem::path& path);

}  // namespace hte
