// SPDX-License-Identifier: MIT
/**
 * @file jet.hpp
 * @brief Truncated Taylor polynomials ("jets") along a line x + t*v.
 *
 * A jet of order K carries the coefficients c_0..c_K of t -> f(x + t*v)
 * about t = 0, so that k! * c_k is the k-th directional derivative
 * D^k f(x)[v, ..., v]. Primitives propagate these coefficients with the
 * usual power-series recurrences; no derivative tensor is ever formed.
 *
 * The scalar type is a template parameter so that the same circuits can be
 * evaluated on plain doubles or on recorded tape variables (see tape.hpp).
 */
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>

namespace hte {

inline constexpr int kMaxJetOrder = 4;

class JetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline double value_of(double x) noexcept { return x; }

constexpr double factorial(int k) noexcept
{
    double r = 1.0;
    for (int i = 2; i <= k; ++i) r *= i;
    return r;
}

template <class T>
class BasicJet {
public:
    using scalar_type = T;

    BasicJet() { coeffs_.fill(T(0.0)); }

    explicit BasicJet(int order) : order_(checked_order(order)) { coeffs_.fill(T(0.0)); }

    BasicJet(int order, std::initializer_list<T> coeffs) : BasicJet(order)
    {
        if (coeffs.size() != static_cast<std::size_t>(order + 1))
            throw JetError("jet: expected " + std::to_string(order + 1) + " coefficients, got " +
                           std::to_string(coeffs.size()));
        std::size_t k = 0;
        for (const T& c : coeffs) coeffs_[k++] = c;
    }

    /// The jet of a constant function.
    static BasicJet constant(int order, T value)
    {
        BasicJet j(order);
        j.coeffs_[0] = value;
        return j;
    }

    /// The jet of the coordinate map t -> point + t * direction.
    static BasicJet variable(int order, T point, T direction)
    {
        BasicJet j(order);
        j.coeffs_[0] = point;
        if (order >= 1) j.coeffs_[1] = direction;
        return j;
    }

    [[nodiscard]] int order() const noexcept { return order_; }
    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(order_) + 1; }

    T& operator[](int k) { return coeffs_[static_cast<std::size_t>(k)]; }
    const T& operator[](int k) const { return coeffs_[static_cast<std::size_t>(k)]; }

    [[nodiscard]] std::span<const T> coeffs() const noexcept { return {coeffs_.data(), size()}; }

    /// k! * c_k, the k-th directional derivative.
    [[nodiscard]] T derivative(int k) const { return coeffs_[static_cast<std::size_t>(k)] * factorial(k); }

private:
    static int checked_order(int order)
    {
        if (order < 0 || order > kMaxJetOrder)
            throw JetError("jet: order " + std::to_string(order) + " outside [0, " +
                           std::to_string(kMaxJetOrder) + "]");
        return order;
    }

    int order_ = 0;
    std::array<T, kMaxJetOrder + 1> coeffs_{};
};

using Jet = BasicJet<double>;

enum class JetOp { add, sub, mul, scale, tanh, sin, cos, exp, square };

namespace detail {

template <class T>
void require_same_order(const BasicJet<T>& a, const BasicJet<T>& b, const char* op)
{
    if (a.order() != b.order())
        throw JetError(std::string("jet ") + op + ": order mismatch (" + std::to_string(a.order()) +
                       " vs " + std::to_string(b.order()) + ")");
}

template <class T>
const BasicJet<T>& require_finite(const BasicJet<T>& j, const char* op)
{
    using std::isfinite;
    for (int k = 0; k <= j.order(); ++k) {
        if (!isfinite(value_of(j[k])))
            throw JetError(std::string("jet ") + op + ": non-finite coefficient c_" + std::to_string(k));
    }
    return j;
}

}  // namespace detail

template <class T>
BasicJet<T> add(const BasicJet<T>& a, const BasicJet<T>& b)
{
    detail::require_same_order(a, b, "add");
    BasicJet<T> r(a.order());
    for (int k = 0; k <= a.order(); ++k) r[k] = a[k] + b[k];
    detail::require_finite(r, "add");
    return r;
}

template <class T>
BasicJet<T> sub(const BasicJet<T>& a, const BasicJet<T>& b)
{
    detail::require_same_order(a, b, "sub");
    BasicJet<T> r(a.order());
    for (int k = 0; k <= a.order(); ++k) r[k] = a[k] - b[k];
    detail::require_finite(r, "sub");
    return r;
}

/// Cauchy product truncated at the common order.
template <class T>
BasicJet<T> mul(const BasicJet<T>& a, const BasicJet<T>& b)
{
    detail::require_same_order(a, b, "mul");
    BasicJet<T> r(a.order());
    for (int k = 0; k <= a.order(); ++k) {
        T acc = a[0] * b[k];
        for (int j = 1; j <= k; ++j) acc = acc + a[j] * b[k - j];
        r[k] = acc;
    }
    detail::require_finite(r, "mul");
    return r;
}

template <class T, class S>
BasicJet<T> scale(const BasicJet<T>& a, const S& s)
{
    BasicJet<T> r(a.order());
    for (int k = 0; k <= a.order(); ++k) r[k] = a[k] * s;
    detail::require_finite(r, "scale");
    return r;
}

template <class T>
BasicJet<T> square(const BasicJet<T>& a)
{
    BasicJet<T> r(a.order());
    for (int k = 0; k <= a.order(); ++k) {
        // symmetric Cauchy sum: 2 * sum_{j < k-j} a_j a_{k-j} + a_{k/2}^2
        T acc = T(0.0);
        for (int j = 0; 2 * j < k; ++j) acc = acc + a[j] * a[k - j];
        acc = acc * 2.0;
        if (k % 2 == 0) acc = acc + a[k / 2] * a[k / 2];
        r[k] = acc;
    }
    detail::require_finite(r, "square");
    return r;
}

template <class T>
BasicJet<T> exp(const BasicJet<T>& a)
{
    using std::exp;
    BasicJet<T> r(a.order());
    r[0] = exp(a[0]);
    // y' = a' y  =>  k y_k = sum_{j=1}^k j a_j y_{k-j}
    for (int k = 1; k <= a.order(); ++k) {
        T acc = a[1] * r[k - 1];
        for (int j = 2; j <= k; ++j) acc = acc + a[j] * r[k - j] * static_cast<double>(j);
        r[k] = acc * (1.0 / k);
    }
    detail::require_finite(r, "exp");
    return r;
}

template <class T>
struct SinCos {
    BasicJet<T> sin;
    BasicJet<T> cos;
};

/// sin and cos are propagated as a coupled pair: s' = a' c, c' = -a' s.
template <class T>
SinCos<T> sincos(const BasicJet<T>& a)
{
    using std::cos;
    using std::sin;
    SinCos<T> r{BasicJet<T>(a.order()), BasicJet<T>(a.order())};
    r.sin[0] = sin(a[0]);
    r.cos[0] = cos(a[0]);
    for (int k = 1; k <= a.order(); ++k) {
        T s = a[1] * r.cos[k - 1];
        T c = a[1] * r.sin[k - 1];
        for (int j = 2; j <= k; ++j) {
            s = s + a[j] * r.cos[k - j] * static_cast<double>(j);
            c = c + a[j] * r.sin[k - j] * static_cast<double>(j);
        }
        r.sin[k] = s * (1.0 / k);
        r.cos[k] = c * (-1.0 / k);
    }
    detail::require_finite(r.sin, "sin");
    detail::require_finite(r.cos, "cos");
    return r;
}

template <class T>
BasicJet<T> sin(const BasicJet<T>& a)
{
    return sincos(a).sin;
}

template <class T>
BasicJet<T> cos(const BasicJet<T>& a)
{
    return sincos(a).cos;
}

/// tanh via y' = (1 - y^2) a'. The series s = 1 - y^2 is built alongside y.
template <class T>
BasicJet<T> tanh(const BasicJet<T>& a)
{
    using std::tanh;
    const int K = a.order();
    BasicJet<T> y(K);
    BasicJet<T> s(K);
    y[0] = tanh(a[0]);
    s[0] = 1.0 - y[0] * y[0];
    for (int k = 1; k <= K; ++k) {
        T acc = a[1] * s[k - 1];
        for (int j = 2; j <= k; ++j) acc = acc + a[j] * s[k - j] * static_cast<double>(j);
        y[k] = acc * (1.0 / k);
        T sq = y[0] * y[k];
        for (int i = 1; i <= k; ++i) sq = sq + y[i] * y[k - i];
        s[k] = -sq;
    }
    detail::require_finite(y, "tanh");
    return y;
}

template <class T>
BasicJet<T> operator+(const BasicJet<T>& a, const BasicJet<T>& b) { return add(a, b); }
template <class T>
BasicJet<T> operator-(const BasicJet<T>& a, const BasicJet<T>& b) { return sub(a, b); }
template <class T>
BasicJet<T> operator*(const BasicJet<T>& a, const BasicJet<T>& b) { return mul(a, b); }
template <class T>
BasicJet<T> operator*(const BasicJet<T>& a, double s) { return scale(a, s); }
template <class T>
BasicJet<T> operator*(double s, const BasicJet<T>& a) { return scale(a, s); }
template <class T>
BasicJet<T> operator-(const BasicJet<T>& a) { return scale(a, -1.0); }

/// Adds a constant to the value coefficient only.
template <class T, class S>
BasicJet<T> shift(const BasicJet<T>& a, const S& c)
{
    BasicJet<T> r = a;
    r[0] = r[0] + c;
    detail::require_finite(r, "shift");
    return r;
}

/// Converts a jet of constants into a jet over another scalar type.
template <class T>
BasicJet<T> lift(const Jet& a)
{
    BasicJet<T> r(a.order());
    for (int k = 0; k <= a.order(); ++k) r[k] = T(a[k]);
    return r;
}

/// Dispatches a primitive by kind. Unary kinds read operands[0]; `scale`
/// multiplies operands[0] by `factor`.
template <class T>
BasicJet<T> jet_primitive(JetOp kind, std::span<const BasicJet<T>> operands, double factor = 1.0)
{
    auto need = [&](std::size_t n) {
        if (operands.size() != n)
            throw JetError("jet_primitive: expected " + std::to_string(n) + " operand(s), got " +
                           std::to_string(operands.size()));
    };
    switch (kind) {
    case JetOp::add: need(2); return add(operands[0], operands[1]);
    case JetOp::sub: need(2); return sub(operands[0], operands[1]);
    case JetOp::mul: need(2); return mul(operands[0], operands[1]);
    case JetOp::scale: need(1); return scale(operands[0], factor);
    case JetOp::tanh: need(1); return tanh(operands[0]);
    case JetOp::sin: need(1); return sin(operands[0]);
    case JetOp::cos: need(1); return cos(operands[0]);
    case JetOp::exp: need(1); return exp(operands[0]);
    case JetOp::square: need(1); return square(operands[0]);
    }
    throw JetError("jet_primitive: unknown kind");
}

}  // namespace hte
