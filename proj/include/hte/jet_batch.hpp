// SPDX-License-Identifier: MIT
/**
 * @file jet_batch.hpp
 * @brief Batched jet propagation through the MLP with a hand-written
 *        reverse sweep, used by the trainer.
 *
 * A batch holds P points, each with L lanes (directions). All lanes of a
 * point share the value coefficient c_0, so c_0 is stored once per point
 * (width x P) while c_1..c_K are stored per lane (width x P*L). Lane l of
 * point p is column p*L + l.
 *
 * The tanh layer uses the composition formula
 *   y = sum_n p_n (z - z_0)^n,  p_n = tanh^{(n)}(z_0) / n!
 * truncated at order K, whose partials are simple polynomials in the
 * coefficients. The result agrees with mlp_eval_jet to rounding.
 */
#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "hte/network.hpp"

namespace hte {

/// Taylor coefficients p_n = tanh^{(n)}(z)/n! for n = 0..5, from y = tanh(z).
std::array<double, 6> tanh_taylor_coefficients(double y) noexcept;

class JetBatchMlp {
public:
    explicit JetBatchMlp(MlpLayout layout);

    /// `points` is d x P (the value coefficients of the inputs), `directions`
    /// is d x (P*L) (first-order input coefficients; higher ones are zero).
    void forward(std::span<const double> theta, int order, const Eigen::Ref<const Eigen::MatrixXd>& points,
                 const Eigen::Ref<const Eigen::MatrixXd>& directions, int lanes_per_point);

    [[nodiscard]] int order() const noexcept { return order_; }
    [[nodiscard]] int points() const noexcept { return points_; }
    [[nodiscard]] int lanes_per_point() const noexcept { return lanes_; }

    /// Output c_0 per point (length P).
    [[nodiscard]] const Eigen::RowVectorXd& value() const noexcept { return out_value_; }
    /// Output c_k per lane, row k-1 (K x P*L).
    [[nodiscard]] const Eigen::MatrixXd& coefficients() const noexcept { return out_coeffs_; }

    /// Accumulates d(loss)/d(theta) into `grad` given the adjoints of the
    /// outputs: `value_adjoint` (length P) and `coeff_adjoint` (K x P*L).
    void backward(std::span<const double> theta, const Eigen::Ref<const Eigen::RowVectorXd>& value_adjoint,
                  const Eigen::Ref<const Eigen::MatrixXd>& coeff_adjoint, std::span<double> grad);

private:
    struct LayerCache {
        // Inputs to this layer: a[0] is width_in x P, a[k] is width_in x P*L.
        std::vector<Eigen::MatrixXd> input;
        // Pre-activation coefficients z[1..K] (width x P*L); z[0] unused.
        std::vector<Eigen::MatrixXd> pre;
        // Taylor coefficients of tanh at z_0 per point: taylor[n] for n = 1..K+1 (width x P).
        std::vector<Eigen::MatrixXd> taylor;
    };

    MlpLayout layout_;
    int order_ = 0;
    int points_ = 0;
    int lanes_ = 0;
    std::vector<LayerCache> cache_;
    Eigen::RowVectorXd out_value_;
    Eigen::MatrixXd out_coeffs_;
};

}  // namespace hte
