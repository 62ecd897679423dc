// SPDX-License-Identifier: MIT
#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/LU>

#include "hte/contractions.hpp"
#include "hte/jet.hpp"
#include "hte/network.hpp"
#include "hte/tape.hpp"
#include "oracles.hpp"

using namespace hte;

namespace {

Jet make(std::initializer_list<double> c) { return Jet(static_cast<int>(c.size()) - 1, c); }

void expect_coeffs(const Jet& j, std::initializer_list<double> want, double tol)
{
    ASSERT_EQ(j.size(), want.size());
    int k = 0;
    for (double w : want) {
        EXPECT_NEAR(j[k], w, tol) << "c_" << k;
        ++k;
    }
}

// Scalar test functions written over jets.
struct SumSquares {
    Jet operator()(std::span<const Jet> x) const
    {
        Jet s(x[0].order());
        for (const Jet& xi : x) s = s + square(xi);
        return s;
    }
};

struct NormFourth {
    Jet operator()(std::span<const Jet> x) const
    {
        const Jet s = SumSquares{}(x);
        return square(s);
    }
};

}  // namespace

TEST(JetPrimitive, MulOfOnePlusTSquared)
{
    expect_coeffs(mul(make({1, 1}), make({1, 1})), {1, 2}, 0.0);
}

TEST(JetPrimitive, TanhOfIdentityMatchesRichardsonFd)
{
    const Jet t = tanh(make({0, 1, 0, 0, 0}));
    expect_coeffs(t, {0, 1, 0, -1.0 / 3.0, 0}, 1e-15);
    const oracle::LineFn g = [](double s) { return std::tanh(s); };
    for (int k = 1; k <= 4; ++k) {
        const double fd = oracle::richardson(g, k, oracle::default_step(k));
        EXPECT_NEAR(t.derivative(k), fd, 1e-6) << "k = " << k;
    }
}

TEST(JetPrimitive, ExpOfZero)
{
    expect_coeffs(exp(make({0, 0, 0, 0, 0})), {1, 0, 0, 0, 0}, 0.0);
}

TEST(JetPrimitive, EveryUnaryKindMatchesFdOnAGenericLine)
{
    // a(t) = 0.3 + 0.7 t - 0.2 t^2 + 0.1 t^3 + 0.05 t^4
    const Jet a = make({0.3, 0.7, -0.2, 0.1, 0.05});
    auto line = [](double t) { return 0.3 + 0.7 * t - 0.2 * t * t + 0.1 * t * t * t + 0.05 * t * t * t * t; };
    struct Case {
        JetOp op;
        double (*f)(double);
    };
    const std::array<Case, 5> cases{{{JetOp::tanh, [](double x) { return std::tanh(x); }},
                                     {JetOp::sin, [](double x) { return std::sin(x); }},
                                     {JetOp::cos, [](double x) { return std::cos(x); }},
                                     {JetOp::exp, [](double x) { return std::exp(x); }},
                                     {JetOp::square, [](double x) { return x * x; }}}};
    const std::array<Jet, 1> ops{a};
    for (const Case& c : cases) {
        const Jet j = jet_primitive<double>(c.op, ops);
        const oracle::LineFn g = [&](double t) { return c.f(line(t)); };
        for (int k = 0; k <= 4; ++k)
            EXPECT_LT(oracle::rel_err(j.derivative(k), oracle::richardson(g, k, oracle::default_step(std::max(k, 1)))), 1e-6)
                << "op " << static_cast<int>(c.op) << " k " << k;
    }
}

TEST(JetPrimitive, BinaryAndScaleKinds)
{
    const Jet a = make({1, 2, 3});
    const Jet b = make({-1, 0.5, 4});
    const std::array<Jet, 2> ab{a, b};
    expect_coeffs(jet_primitive<double>(JetOp::add, ab), {0, 2.5, 7}, 0.0);
    expect_coeffs(jet_primitive<double>(JetOp::sub, ab), {2, 1.5, -1}, 0.0);
    // (1 + 2t + 3t^2)(-1 + 0.5t + 4t^2) = -1 - 1.5t + (4 + 1 - 3)t^2
    expect_coeffs(jet_primitive<double>(JetOp::mul, ab), {-1, -1.5, 2}, 1e-15);
    const std::array<Jet, 1> one{a};
    expect_coeffs(jet_primitive<double>(JetOp::scale, one, -2.0), {-2, -4, -6}, 0.0);
}

TEST(JetPrimitive, SinCosPairSatisfiesPythagoras)
{
    const Jet a = make({0.4, -1.3, 0.2, 0.7, -0.1});
    const SinCos<double> sc = sincos(a);
    const Jet one = square(sc.sin) + square(sc.cos);
    expect_coeffs(one, {1, 0, 0, 0, 0}, 1e-14);
}

TEST(JetPrimitive, OrderMismatchThrows)
{
    EXPECT_THROW(mul(make({1, 1}), make({1, 1, 1})), JetError);
    const std::array<Jet, 2> ab{make({1}), make({1, 2})};
    EXPECT_THROW(jet_primitive<double>(JetOp::add, ab), JetError);
}

TEST(JetPrimitive, OverflowIsReportedAsNonFinite)
{
    EXPECT_THROW(exp(make({800.0, 1.0})), JetError);
    const double big = std::numeric_limits<double>::max();
    EXPECT_THROW(mul(make({big, big}), make({big, 1.0})), JetError);
}

TEST(JetPrimitive, OrderAboveFourRejected)
{
    EXPECT_THROW(Jet(5), JetError);
    const std::vector<double> x{0.0};
    EXPECT_THROW(directional_derivatives(SumSquares{}, x, x, 5), JetError);
}

TEST(DirectionalDerivatives, SumOfSquaresAlongOnes)
{
    const std::vector<double> x{0, 0};
    const std::vector<double> v{1, 1};
    const auto d = directional_derivatives(SumSquares{}, x, v, 2);
    ASSERT_EQ(d.size(), 3u);
    EXPECT_DOUBLE_EQ(d[0], 0.0);
    EXPECT_DOUBLE_EQ(d[1], 0.0);
    EXPECT_DOUBLE_EQ(d[2], 4.0);
}

TEST(DirectionalDerivatives, KxyGivesTwoK)
{
    const double k = 10.0;
    auto f = [k](std::span<const Jet> x) { return mul(x[0], x[1]) * k; };
    const std::vector<double> x{0.3, -1.7};
    const std::vector<double> v{1, 1};
    EXPECT_DOUBLE_EQ(directional_derivatives(f, x, v, 2)[2], 2.0 * k);
}

TEST(DirectionalDerivatives, RandomMlpMatchesRichardsonFd)
{
    Engine rng = make_stream(11, StreamPurpose::misc);
    const MlpParams params = init_params({5, 12, 12, 12, 1}, rng);
    auto net = [&](std::span<const Jet> x) { return mlp_eval_jet(params, x); };
    const auto scalar = oracle::scalar_of(net);
    for (int trial = 0; trial < 5; ++trial) {
        const auto x = oracle::random_vector(rng, 5, 0.5);
        auto v = oracle::random_vector(rng, 5);
        const double n = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
        for (double& vi : v) vi /= n;
        const auto d = directional_derivatives(net, x, v, 4);
        EXPECT_DOUBLE_EQ(d[0], scalar(x));
        for (int k = 1; k <= 4; ++k)
            EXPECT_LT(oracle::rel_err(d[static_cast<std::size_t>(k)], oracle::fd_directional(scalar, x, v, k), 1e-2), 1e-5)
                << "trial " << trial << " k " << k;
    }
}

TEST(DirectionalDerivatives, PolynomialsBelowOrderAreExact)
{
    // f = x0^3 x1 - 2 x1^2 + x0: along v the quartic line polynomial has known coefficients
    auto f = [](std::span<const Jet> x) {
        return mul(mul(square(x[0]), x[0]), x[1]) - square(x[1]) * 2.0 + x[0];
    };
    const std::vector<double> x{0.5, -2.0};
    const std::vector<double> v{1.5, 0.25};
    auto exact = [&](double t) {
        const double a = x[0] + t * v[0];
        const double b = x[1] + t * v[1];
        return a * a * a * b - 2.0 * b * b + a;
    };
    // c_k by exact expansion on a rational grid: fit through 5 samples (degree 4 interpolation is exact)
    const Jet j = jet_along(f, x, v, 4);
    const std::array<double, 5> ts{-2, -1, 0, 1, 2};
    Eigen::Matrix<double, 5, 5> M;
    Eigen::Matrix<double, 5, 1> y;
    for (int r = 0; r < 5; ++r) {
        for (int c = 0; c < 5; ++c) M(r, c) = std::pow(ts[static_cast<std::size_t>(r)], c);
        y(r) = exact(ts[static_cast<std::size_t>(r)]);
    }
    const Eigen::Matrix<double, 5, 1> coeff = M.fullPivLu().solve(y);
    for (int k = 0; k <= 4; ++k) EXPECT_NEAR(j[k], coeff(k), 1e-12) << "c_" << k;
}

TEST(Polarization, BilinearHvpOfProduct)
{
    auto f = [](std::span<const Jet> x) { return mul(x[0], x[1]); };
    const std::vector<double> x{0.7, 0.2};
    EXPECT_NEAR(polarized_contraction(f, x, BilinearHvp{{1, 0}, {0, 1}}), 1.0, 1e-14);
}

TEST(Polarization, MixedThirdOfSquareTimesLinear)
{
    auto f = [](std::span<const Jet> x) { return mul(square(x[0]), x[1]); };
    const std::vector<double> x{-0.4, 1.1};
    EXPECT_NEAR(polarized_contraction(f, x, MixedThird{{1, 0}, {0, 1}}), 2.0, 1e-13);
}

TEST(Polarization, MixedFourthOfNormFourth)
{
    // d^2/dx1^2 |x|^4 = 4|x|^2 + 8 x1^2; d^2/dx2^2 of that = 8
    const std::vector<double> x{0.3, -0.8, 1.2};
    EXPECT_NEAR(polarized_contraction(NormFourth{}, x, MixedFourthIIJJ{0, 1}), 8.0, 1e-12);
    // d^4/dx1^4 |x|^4 = 24
    EXPECT_NEAR(mixed_fourth_iijj(NormFourth{}, x, 2, 2), 24.0, 1e-12);
}

TEST(Polarization, IndexOutOfRange)
{
    const std::vector<double> x{0.0, 0.0};
    EXPECT_THROW(mixed_fourth_iijj(NormFourth{}, x, 0, 2), std::out_of_range);
}

TEST(Polarization, BilinearOnEqualDirectionsEqualsQuadratic)
{
    Engine rng = make_stream(12, StreamPurpose::misc);
    const MlpParams params = init_params({4, 8, 8, 1}, rng);
    auto net = [&](std::span<const Jet> x) { return mlp_eval_jet(params, x); };
    const auto x = oracle::random_vector(rng, 4, 0.5);
    const auto v = oracle::random_vector(rng, 4);
    EXPECT_NEAR(bilinear_hvp(net, x, v, v), directional_derivatives(net, x, v, 2)[2], 1e-13);
}

TEST(Polarization, BiharmonicOfNormFourthIsEightDTimesDPlusTwo)
{
    for (int d = 1; d <= 5; ++d) {
        Engine rng = make_stream(13, StreamPurpose::misc, static_cast<std::uint64_t>(d));
        const auto x = oracle::random_vector(rng, static_cast<std::size_t>(d));
        EXPECT_NEAR(biharmonic_by_polarization(NormFourth{}, x), 8.0 * d * (d + 2), 1e-10) << "d = " << d;
    }
}

TEST(Polarization, MixedThirdMatchesFdOnMlp)
{
    Engine rng = make_stream(14, StreamPurpose::misc);
    const MlpParams params = init_params({3, 10, 10, 1}, rng);
    auto net = [&](std::span<const Jet> x) { return mlp_eval_jet(params, x); };
    const auto scalar = oracle::scalar_of(net);
    const auto x = oracle::random_vector(rng, 3, 0.5);
    const auto v = oracle::random_vector(rng, 3);
    const auto w = oracle::random_vector(rng, 3);
    // D^3 f[v, v, w] = d/ds of D^2 f(x + s w)[v, v] at s = 0
    const oracle::LineFn g = [&](double s) {
        std::vector<double> p(3);
        for (int i = 0; i < 3; ++i) p[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] + s * w[static_cast<std::size_t>(i)];
        return directional_derivatives(net, p, v, 2)[2];
    };
    EXPECT_LT(oracle::rel_err(mixed_third(net, x, v, w), oracle::richardson(g, 1, 1e-3), 1e-2), 1e-7);
}

// ----------------------------------------------------------------------------
// Tape
// ----------------------------------------------------------------------------

TEST(ReverseGrad, Product)
{
    Tape tape;
    const Var a = tape.parameter(3.0);
    const Var b = tape.parameter(4.0);
    const auto g = reverse_grad(tape, a * b);
    ASSERT_EQ(g.size(), 2u);
    EXPECT_DOUBLE_EQ(g[0], 4.0);
    EXPECT_DOUBLE_EQ(g[1], 3.0);
}

TEST(ReverseGrad, TanhAtZero)
{
    Tape tape;
    const Var t = tape.parameter(0.0);
    EXPECT_DOUBLE_EQ(reverse_grad(tape, tanh(t))[0], 1.0);
}

TEST(ReverseGrad, ConstantsNeverReachTheTape)
{
    Tape tape;
    const Var a = tape.parameter(2.0);
    const Var c = Var(5.0) * Var(3.0) + 1.0;
    EXPECT_TRUE(c.is_constant());
    const Var y = a * c;
    EXPECT_EQ(tape.size(), 2u);
    EXPECT_DOUBLE_EQ(reverse_grad(tape, y)[0], 16.0);
}

TEST(ReverseGrad, CycleDetected)
{
    Tape tape;
    const Var a = tape.parameter(1.0);
    TapeNode bad;
    bad.op = TapeOp::add;
    bad.arity = 2;
    bad.parents = {a.index(), 2};  // refers to itself
    bad.partials = {1.0, 1.0};
    const auto idx = tape.push_node(bad);
    EXPECT_THROW(reverse_grad(tape, idx), TapeError);
}

TEST(ReverseGrad, OutputNotScalarNode)
{
    Tape tape;
    (void)tape.parameter(1.0);
    EXPECT_THROW(reverse_grad(tape, Var(2.0)), TapeError);
    EXPECT_THROW(reverse_grad(tape, 7), TapeError);
}

TEST(ReverseGrad, NonFiniteLocalPartialRejected)
{
    Tape tape;
    const Var a = tape.parameter(1.0);
    const std::array<std::int32_t, 1> parents{a.index()};
    const std::array<double, 1> partials{std::numeric_limits<double>::infinity()};
    EXPECT_THROW((void)tape.record(TapeOp::scale, 1.0, parents, partials), TapeError);
}

TEST(ReverseGrad, LinearInTheOutput)
{
    Tape tape;
    const Var a = tape.parameter(0.3);
    const Var b = tape.parameter(-1.2);
    const Var l1 = sin(a * b) + exp(a);
    const Var l2 = tanh(b) * a - cos(b);
    const double s = 2.5;
    const auto g1 = reverse_grad(tape, l1);
    const auto g2 = reverse_grad(tape, l2);
    const auto g = reverse_grad(tape, l1 * s + l2);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(g[i], s * g1[i] + g2[i], 1e-14);
}

TEST(ReverseGrad, EveryOpMatchesFd)
{
    auto f = [](std::span<const double> t) {
        Tape tape;
        const Var a = tape.parameter(t[0]);
        const Var b = tape.parameter(t[1]);
        const Var y = sin(a) * cos(b) + tanh(a - b) * exp(b * 0.5) - (-a) + 3.0 - b;
        return std::pair{value_of(y), reverse_grad(tape, y)};
    };
    const std::vector<double> t{0.4, -0.9};
    const auto [v, g] = f(t);
    (void)v;
    const auto fd = oracle::fd_gradient([&](std::span<const double> p) { return f(p).first; }, t, 1e-5);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(g[i], fd[i], 1e-9);
}

TEST(ReverseGrad, MixingTapesThrows)
{
    Tape t1;
    Tape t2;
    const Var a = t1.parameter(1.0);
    const Var b = t2.parameter(1.0);
    EXPECT_THROW((void)(a + b), TapeError);
}
