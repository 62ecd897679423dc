// SPDX-License-Identifier: MIT
/**
 * @file contractions.hpp
 * @brief Directional derivative contractions of scalar jet circuits.
 *
 * A circuit is any callable `Jet(std::span<const Jet>)` built from jet
 * primitives. Same-direction contractions D^k f[v^k] are read straight off
 * one jet; mixed contractions are recovered with polarization identities so
 * that only same-direction jets are ever propagated.
 */
#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hte/jet.hpp"

namespace hte {

/// Input jets for the line `x + t * v`.
inline std::vector<Jet> line_jets(std::span<const double> x, std::span<const double> v, int order)
{
    if (x.size() != v.size())
        throw JetError("line_jets: point has " + std::to_string(x.size()) + " entries, direction " +
                       std::to_string(v.size()));
    std::vector<Jet> in;
    in.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) in.push_back(Jet::variable(order, x[i], v[i]));
    return in;
}

template <class Circuit>
Jet jet_along(Circuit&& f, std::span<const double> x, std::span<const double> v, int order)
{
    const std::vector<Jet> in = line_jets(x, v, order);
    Jet out = f(std::span<const Jet>(in));
    if (out.order() != order) throw JetError("circuit returned a jet of the wrong order");
    return out;
}

/// Entry k is D^k f(x)[v, ..., v] = k! c_k, for k = 0..order.
template <class Circuit>
std::vector<double> directional_derivatives(Circuit&& f, std::span<const double> x, std::span<const double> v,
                                            int order)
{
    if (order < 0 || order > kMaxJetOrder)
        throw JetError("directional_derivatives: order " + std::to_string(order) + " not supported");
    const Jet out = jet_along(f, x, v, order);
    std::vector<double> d(static_cast<std::size_t>(order) + 1);
    for (int k = 0; k <= order; ++k) d[static_cast<std::size_t>(k)] = out.derivative(k);
    return d;
}

namespace detail {

inline std::vector<double> combine(std::span<const double> a, std::span<const double> b, double sb)
{
    if (a.size() != b.size()) throw JetError("polarization: direction sizes differ");
    std::vector<double> r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + sb * b[i];
    return r;
}

template <class Circuit>
double same_direction(Circuit&& f, std::span<const double> x, std::span<const double> a, int k)
{
    return jet_along(f, x, a, k).derivative(k);
}

inline std::vector<double> unit(std::size_t d, std::size_t i)
{
    std::vector<double> e(d, 0.0);
    e[i] = 1.0;
    return e;
}

}  // namespace detail

/// w^T H v = [Q(w + v) - Q(w - v)] / 4 with Q(a) = a^T H a.
template <class Circuit>
double bilinear_hvp(Circuit&& f, std::span<const double> x, std::span<const double> w, std::span<const double> v)
{
    const double qp = detail::same_direction(f, x, detail::combine(w, v, 1.0), 2);
    const double qm = detail::same_direction(f, x, detail::combine(w, v, -1.0), 2);
    return 0.25 * (qp - qm);
}

/// D^3 f[v, v, w] = [C(v + w) - C(v - w) - 2 C(w)] / 6 with C(a) = D^3 f[a, a, a].
template <class Circuit>
double mixed_third(Circuit&& f, std::span<const double> x, std::span<const double> v, std::span<const double> w)
{
    const double cp = detail::same_direction(f, x, detail::combine(v, w, 1.0), 3);
    const double cm = detail::same_direction(f, x, detail::combine(v, w, -1.0), 3);
    const double cw = detail::same_direction(f, x, w, 3);
    return (cp - cm - 2.0 * cw) / 6.0;
}

/// d^4 f / dx_i^2 dx_j^2 (0-based indices). For i == j this is the single
/// coordinate jet D^4 f[e_i^4].
template <class Circuit>
double mixed_fourth_iijj(Circuit&& f, std::span<const double> x, std::size_t i, std::size_t j)
{
    const std::size_t d = x.size();
    if (i >= d || j >= d)
        throw std::out_of_range("mixed_fourth_iijj: index (" + std::to_string(i) + ", " + std::to_string(j) +
                                ") outside dimension " + std::to_string(d));
    const std::vector<double> ei = detail::unit(d, i);
    if (i == j) return detail::same_direction(f, x, ei, 4);
    const std::vector<double> ej = detail::unit(d, j);
    const double tp = detail::same_direction(f, x, detail::combine(ei, ej, 1.0), 4);
    const double tm = detail::same_direction(f, x, detail::combine(ei, ej, -1.0), 4);
    const double ti = detail::same_direction(f, x, ei, 4);
    const double tj = detail::same_direction(f, x, ej, 4);
    return (tp + tm - 2.0 * ti - 2.0 * tj) / 12.0;
}

struct BilinearHvp {
    std::vector<double> w;
    std::vector<double> v;
};
struct MixedThird {
    std::vector<double> v;
    std::vector<double> w;
};
struct MixedFourthIIJJ {
    std::size_t i = 0;
    std::size_t j = 0;
};
using Polarization = std::variant<BilinearHvp, MixedThird, MixedFourthIIJJ>;

template <class Circuit>
double polarized_contraction(Circuit&& f, std::span<const double> x, const Polarization& mode)
{
    struct Visitor {
        Circuit& f;
        std::span<const double> x;
        double operator()(const BilinearHvp& m) const { return bilinear_hvp(f, x, m.w, m.v); }
        double operator()(const MixedThird& m) const { return mixed_third(f, x, m.v, m.w); }
        double operator()(const MixedFourthIIJJ& m) const { return mixed_fourth_iijj(f, x, m.i, m.j); }
    };
    return std::visit(Visitor{f, x}, mode);
}

/// Sum over all ordered pairs of d^4 f / dx_i^2 dx_j^2, i.e. the biharmonic.
/// Uses d diagonal jets plus two jets per unordered off-diagonal pair.
template <class Circuit>
double biharmonic_by_polarization(Circuit&& f, std::span<const double> x)
{
    const std::size_t d = x.size();
    std::vector<double> diag(d);
    for (std::size_t i = 0; i < d; ++i) diag[i] = detail::same_direction(f, x, detail::unit(d, i), 4);
    double total = 0.0;
    for (std::size_t i = 0; i < d; ++i) total += diag[i];
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            const auto ei = detail::unit(d, i);
            const auto ej = detail::unit(d, j);
            const double tp = detail::same_direction(f, x, detail::combine(ei, ej, 1.0), 4);
            const double tm = detail::same_direction(f, x, detail::combine(ei, ej, -1.0), 4);
            total += 2.0 * (tp + tm - 2.0 * diag[i] - 2.0 * diag[j]) / 12.0;
        }
    }
    return total;
}

}  // namespace hte
