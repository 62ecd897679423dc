// SPDX-License-Identifier: MIT
#include "hte/jet_batch.hpp"

#include <cmath>
#include <string>

namespace hte {

std::array<double, 6> tanh_taylor_coefficients(double y) noexcept
{
    const double y2 = y * y;
    const double s = 1.0 - y2;
    // Derivatives of tanh expressed through y = tanh(z).
    const double d1 = s;
    const double d2 = -2.0 * y * s;
    const double d3 = s * (6.0 * y2 - 2.0);
    const double d4 = s * (16.0 * y - 24.0 * y2 * y);
    const double d5 = s * (16.0 - 120.0 * y2 + 120.0 * y2 * y2);
    return {y, d1, d2 / 2.0, d3 / 6.0, d4 / 24.0, d5 / 120.0};
}

namespace {

using Mat = Eigen::MatrixXd;

// Composition y_k = sum_n p_n (z - z0)^n |_k for k = 1..K, one lane column
// at a time with the per-point Taylor factors p_n.
template <int K>
void compose_forward_fixed(int L, const std::vector<Mat>& z, const std::vector<Mat>& tp, std::vector<Mat>& y)
{
    const Eigen::Index width = z[1].rows();
    const Eigen::Index cols = z[1].cols();
    for (int k = 1; k <= K; ++k) y[static_cast<std::size_t>(k)].resize(width, cols);
    auto col = [](const Mat& m, Eigen::Index c) { return m.data() + c * m.rows(); };
    auto mcol = [](Mat& m, Eigen::Index c) { return m.data() + c * m.rows(); };
    for (Eigen::Index c = 0; c < cols; ++c) {
        const Eigen::Index p = c / L;
        const double* p1 = col(tp[1], p);
        const double* p2 = K >= 2 ? col(tp[2], p) : nullptr;
        const double* p3 = K >= 3 ? col(tp[3], p) : nullptr;
        const double* p4 = K >= 4 ? col(tp[4], p) : nullptr;
        const double* z1 = col(z[1], c);
        const double* z2 = K >= 2 ? col(z[2], c) : nullptr;
        const double* z3 = K >= 3 ? col(z[3], c) : nullptr;
        const double* z4 = K >= 4 ? col(z[4], c) : nullptr;
        double* y1 = mcol(y[1], c);
        double* y2 = K >= 2 ? mcol(y[2], c) : nullptr;
        double* y3 = K >= 3 ? mcol(y[3], c) : nullptr;
        double* y4 = K >= 4 ? mcol(y[4], c) : nullptr;
        for (Eigen::Index i = 0; i < width; ++i) {
            const double a = z1[i];
            y1[i] = p1[i] * a;
            if constexpr (K >= 2) y2[i] = p1[i] * z2[i] + p2[i] * a * a;
            if constexpr (K >= 3) y3[i] = p1[i] * z3[i] + 2.0 * p2[i] * a * z2[i] + p3[i] * a * a * a;
            if constexpr (K >= 4)
                y4[i] = p1[i] * z4[i] + p2[i] * (2.0 * a * z3[i] + z2[i] * z2[i]) + 3.0 * p3[i] * a * a * z2[i] +
                        p4[i] * (a * a) * (a * a);
        }
    }
}

void compose_forward(int K, int L, const std::vector<Mat>& z, const std::vector<Mat>& tp, std::vector<Mat>& y)
{
    switch (K) {
    case 1: compose_forward_fixed<1>(L, z, tp, y); break;
    case 2: compose_forward_fixed<2>(L, z, tp, y); break;
    case 3: compose_forward_fixed<3>(L, z, tp, y); break;
    case 4: compose_forward_fixed<4>(L, z, tp, y); break;
    default: break;
    }
}

// Reverse of compose_forward: adjoints of z_1..z_K per lane, and the lane
// contributions to the adjoint of z_0 summed per point into `z0bar`.
template <int K>
void compose_backward_fixed(int L, const std::vector<Mat>& z, const std::vector<Mat>& tp, const std::vector<Mat>& ybar,
                            std::vector<Mat>& zbar, Mat& z0bar)
{
    const Eigen::Index width = z[1].rows();
    const Eigen::Index cols = z[1].cols();
    for (int k = 1; k <= K; ++k) zbar[static_cast<std::size_t>(k)].resize(width, cols);
    auto col = [](const Mat& m, Eigen::Index c) { return m.data() + c * m.rows(); };
    auto mcol = [](Mat& m, Eigen::Index c) { return m.data() + c * m.rows(); };
    for (Eigen::Index c = 0; c < cols; ++c) {
        const Eigen::Index p = c / L;
        const double* p1 = col(tp[1], p);
        const double* p2 = col(tp[2], p);
        const double* p3 = K >= 2 ? col(tp[3], p) : nullptr;
        const double* p4 = K >= 3 ? col(tp[4], p) : nullptr;
        const double* p5 = K >= 4 ? col(tp[5], p) : nullptr;
        const double* z1 = col(z[1], c);
        const double* z2 = K >= 2 ? col(z[2], c) : nullptr;
        const double* z3 = K >= 3 ? col(z[3], c) : nullptr;
        const double* z4 = K >= 4 ? col(z[4], c) : nullptr;
        const double* b1 = col(ybar[1], c);
        const double* b2 = K >= 2 ? col(ybar[2], c) : nullptr;
        const double* b3 = K >= 3 ? col(ybar[3], c) : nullptr;
        const double* b4 = K >= 4 ? col(ybar[4], c) : nullptr;
        double* o1 = mcol(zbar[1], c);
        double* o2 = K >= 2 ? mcol(zbar[2], c) : nullptr;
        double* o3 = K >= 3 ? mcol(zbar[3], c) : nullptr;
        double* o4 = K >= 4 ? mcol(zbar[4], c) : nullptr;
        double* acc = mcol(z0bar, p);
        for (Eigen::Index i = 0; i < width; ++i) {
            const double a = z1[i];
            // q_n = d p_n / d z0 = (n + 1) p_{n+1}
            const double q1 = 2.0 * p2[i];
            double g1 = b1[i] * p1[i];
            double g0 = b1[i] * q1 * a;
            if constexpr (K >= 2) {
                const double q2 = 3.0 * p3[i];
                g1 += b2[i] * 2.0 * p2[i] * a;
                g0 += b2[i] * (q1 * z2[i] + q2 * a * a);
                double g2 = b2[i] * p1[i];
                if constexpr (K >= 3) {
                    const double q3 = 4.0 * p4[i];
                    g1 += b3[i] * (2.0 * p2[i] * z2[i] + 3.0 * p3[i] * a * a);
                    g0 += b3[i] * (q1 * z3[i] + 2.0 * q2 * a * z2[i] + q3 * a * a * a);
                    g2 += b3[i] * 2.0 * p2[i] * a;
                    double g3 = b3[i] * p1[i];
                    if constexpr (K >= 4) {
                        const double q4 = 5.0 * p5[i];
                        g1 += b4[i] * (2.0 * p2[i] * z3[i] + 6.0 * p3[i] * a * z2[i] + 4.0 * p4[i] * a * a * a);
                        g0 += b4[i] * (q1 * z4[i] + q2 * (2.0 * a * z3[i] + z2[i] * z2[i]) +
                                       3.0 * q3 * a * a * z2[i] + q4 * (a * a) * (a * a));
                        g2 += b4[i] * (2.0 * p2[i] * z2[i] + 3.0 * p3[i] * a * a);
                        g3 += b4[i] * 2.0 * p2[i] * a;
                        o4[i] = b4[i] * p1[i];
                    }
                    o3[i] = g3;
                }
                o2[i] = g2;
            }
            o1[i] = g1;
            acc[i] += g0;
        }
    }
}

void compose_backward(int K, int L, const std::vector<Mat>& z, const std::vector<Mat>& tp, const std::vector<Mat>& ybar,
                      std::vector<Mat>& zbar, Mat& z0bar)
{
    switch (K) {
    case 1: compose_backward_fixed<1>(L, z, tp, ybar, zbar, z0bar); break;
    case 2: compose_backward_fixed<2>(L, z, tp, ybar, zbar, z0bar); break;
    case 3: compose_backward_fixed<3>(L, z, tp, ybar, zbar, z0bar); break;
    case 4: compose_backward_fixed<4>(L, z, tp, ybar, zbar, z0bar); break;
    default: break;
    }
}

}  // namespace

JetBatchMlp::JetBatchMlp(MlpLayout layout) : layout_(std::move(layout)) {}

void JetBatchMlp::forward(std::span<const double> theta, int order, const Eigen::Ref<const Eigen::MatrixXd>& points,
                          const Eigen::Ref<const Eigen::MatrixXd>& directions, int lanes_per_point)
{
    if (theta.size() != layout_.parameter_count()) throw NetworkError("JetBatchMlp: parameter count mismatch");
    if (order < 0 || order > kMaxJetOrder) throw JetError("JetBatchMlp: unsupported order " + std::to_string(order));
    if (points.rows() != layout_.input_dim()) throw NetworkError("JetBatchMlp: point dimension mismatch");
    const int P = static_cast<int>(points.cols());
    const int L = order == 0 ? 0 : lanes_per_point;
    if (order > 0 && (directions.rows() != points.rows() || directions.cols() != static_cast<Eigen::Index>(P) * L))
        throw NetworkError("JetBatchMlp: directions must be d x (points * lanes)");
    order_ = order;
    points_ = P;
    lanes_ = L;
    const int K = order;
    const int layers = layout_.layers();
    cache_.resize(static_cast<std::size_t>(layers));

    std::vector<Mat> act(static_cast<std::size_t>(K) + 1);
    act[0] = points;
    if (K >= 1) act[1] = directions;
    // act[k] for k >= 2 stays empty: structurally zero at the input layer.

    for (int l = 0; l < layers; ++l) {
        LayerCache& c = cache_[static_cast<std::size_t>(l)];
        // Owned copies keep the kernels' alignment, and so the rounding, independent of the caller's buffer.
        const Mat W = MlpParams::ConstMatrixMap(theta.data() + layout_.weight_offset(l), layout_.rows(l), layout_.cols(l));
        const Eigen::VectorXd b = MlpParams::ConstVectorMap(theta.data() + layout_.bias_offset(l), layout_.rows(l));
        c.input = std::move(act);
        const Eigen::Index width = W.rows();
        const Eigen::Index lanes_total = static_cast<Eigen::Index>(P) * L;

        Mat z0 = W * c.input[0];
        z0.colwise() += b;
        std::vector<Mat> z(static_cast<std::size_t>(K) + 1);
        for (int k = 1; k <= K; ++k) {
            const Mat& a = c.input[static_cast<std::size_t>(k)];
            if (a.size() == 0)
                z[static_cast<std::size_t>(k)] = Mat::Zero(width, lanes_total);
            else
                z[static_cast<std::size_t>(k)].noalias() = W * a;
        }

        if (l + 1 == layers) {
            out_value_ = z0.row(0);
            out_coeffs_.resize(K, lanes_total);
            for (int k = 1; k <= K; ++k) out_coeffs_.row(k - 1) = z[static_cast<std::size_t>(k)].row(0);
            c.pre.clear();
            c.taylor.clear();
            break;
        }

        Mat y0 = z0.array().tanh().matrix();
        std::vector<Mat> taylor_point(static_cast<std::size_t>(K) + 2);
        for (int n = 1; n <= K + 1; ++n) taylor_point[static_cast<std::size_t>(n)].resize(width, P);
        for (Eigen::Index j = 0; j < P; ++j) {
            for (Eigen::Index i = 0; i < width; ++i) {
                const auto t = tanh_taylor_coefficients(y0(i, j));
                for (int n = 1; n <= K + 1; ++n) taylor_point[static_cast<std::size_t>(n)](i, j) = t[static_cast<std::size_t>(n)];
            }
        }
        act.assign(static_cast<std::size_t>(K) + 1, Mat());
        act[0] = std::move(y0);
        compose_forward(K, L, z, taylor_point, act);
        c.taylor = std::move(taylor_point);
        c.pre = std::move(z);
    }
}

void JetBatchMlp::backward(std::span<const double> theta, const Eigen::Ref<const Eigen::RowVectorXd>& value_adjoint,
                           const Eigen::Ref<const Eigen::MatrixXd>& coeff_adjoint, std::span<double> grad)
{
    if (grad.size() != layout_.parameter_count()) throw NetworkError("JetBatchMlp: gradient size mismatch");
    const int K = order_;
    const int P = points_;
    const int L = lanes_;
    if (value_adjoint.size() != P || coeff_adjoint.rows() != K ||
        (K > 0 && coeff_adjoint.cols() != static_cast<Eigen::Index>(P) * L))
        throw NetworkError("JetBatchMlp: adjoint shapes do not match the last forward pass");
    const int layers = layout_.layers();

    // Adjoints of the current layer's pre-activation coefficients.
    std::vector<Mat> zbar(static_cast<std::size_t>(K) + 1);
    zbar[0] = value_adjoint;
    for (int k = 1; k <= K; ++k) zbar[static_cast<std::size_t>(k)] = coeff_adjoint.row(k - 1);

    for (int l = layers - 1; l >= 0; --l) {
        LayerCache& c = cache_[static_cast<std::size_t>(l)];
        const Mat W = MlpParams::ConstMatrixMap(theta.data() + layout_.weight_offset(l), layout_.rows(l), layout_.cols(l));
        MlpParams::MatrixMap Wbar(grad.data() + layout_.weight_offset(l), layout_.rows(l), layout_.cols(l));
        MlpParams::VectorMap bbar(grad.data() + layout_.bias_offset(l), layout_.rows(l));

        Mat wbar = zbar[0] * c.input[0].transpose();
        for (int k = 1; k <= K; ++k) {
            const Mat& a = c.input[static_cast<std::size_t>(k)];
            if (a.size() != 0) wbar.noalias() += zbar[static_cast<std::size_t>(k)] * a.transpose();
        }
        Wbar += wbar;
        const Eigen::VectorXd bsum = zbar[0].rowwise().sum();
        bbar += bsum;
        if (l == 0) break;

        // Adjoints of this layer's inputs = previous layer's tanh outputs.
        std::vector<Mat> ybar(static_cast<std::size_t>(K) + 1);
        for (int k = 0; k <= K; ++k) ybar[static_cast<std::size_t>(k)].noalias() = W.transpose() * zbar[static_cast<std::size_t>(k)];

        const LayerCache& prev = cache_[static_cast<std::size_t>(l - 1)];
        std::vector<Mat> next(static_cast<std::size_t>(K) + 1);
        next[0] = (ybar[0].array() * prev.taylor[1].array()).matrix();
        compose_backward(K, L, prev.pre, prev.taylor, ybar, next, next[0]);
        zbar = std::move(next);
    }
}

}  // namespace hte
