// SPDX-License-Identifier: MIT
/**
 * @file tape.hpp
 * @brief Scalar reverse-mode tape.
 *
 * Every arithmetic operation on a non-constant Var appends one node holding
 * its value, up to two parent indices and the local partial derivative with
 * respect to each parent. Constants never touch the tape. A reverse sweep in
 * tape order yields the gradient with respect to every parameter leaf.
 *
 * A Tape is not thread-safe; each concurrent evaluation owns its own.
 */
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace hte {

class TapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class TapeOp : std::uint8_t { parameter, add, sub, mul, neg, scale, offset, sin, cos, tanh, exp };

struct TapeNode {
    TapeOp op = TapeOp::parameter;
    std::uint8_t arity = 0;
    std::array<std::int32_t, 2> parents{-1, -1};
    std::array<double, 2> partials{0.0, 0.0};
    double value = 0.0;
};

class Var;

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Registers a new parameter leaf.
    Var parameter(double value);

    /// Appends a node after checking that its parents already exist.
    std::int32_t record(TapeOp op, double value, std::span<const std::int32_t> parents,
                        std::span<const double> partials);

    /// Appends a node verbatim. Used to load externally built graphs; the
    /// topological order is validated only by the reverse sweep.
    std::int32_t push_node(const TapeNode& node);

    /// Tags an existing node as a parameter leaf (it must have no parents).
    void mark_parameter(std::int32_t index);

    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
    [[nodiscard]] std::size_t parameter_count() const noexcept { return parameters_.size(); }
    [[nodiscard]] const TapeNode& node(std::int32_t i) const { return nodes_.at(static_cast<std::size_t>(i)); }
    [[nodiscard]] std::span<const std::int32_t> parameters() const noexcept { return parameters_; }

    /// Adjoint of every node with respect to `output` (seeded with 1).
    [[nodiscard]] std::vector<double> adjoints(std::int32_t output) const;

    void clear() noexcept
    {
        nodes_.clear();
        parameters_.clear();
    }

    void reserve(std::size_t n) { nodes_.reserve(n); }

private:
    std::vector<TapeNode> nodes_;
    std::vector<std::int32_t> parameters_;
};

/// A scalar that is either a constant or a handle to a tape node.
class Var {
public:
    Var() = default;
    Var(double constant) : value_(constant) {}  // NOLINT(google-explicit-constructor)
    Var(Tape* tape, std::int32_t index, double value) : tape_(tape), index_(index), value_(value) {}

    [[nodiscard]] double value() const noexcept { return value_; }
    [[nodiscard]] bool is_constant() const noexcept { return tape_ == nullptr; }
    [[nodiscard]] Tape* tape() const noexcept { return tape_; }
    [[nodiscard]] std::int32_t index() const noexcept { return index_; }

private:
    Tape* tape_ = nullptr;
    std::int32_t index_ = -1;
    double value_ = 0.0;
};

inline double value_of(const Var& v) noexcept { return v.value(); }

/// d output / d leaf for every parameter leaf, in registration order.
/// Throws TapeError if output is a constant, out of range, or if a node
/// refers to a parent that does not precede it.
std::vector<double> reverse_grad(const Tape& tape, const Var& output);
std::vector<double> reverse_grad(const Tape& tape, std::int32_t output_index);

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator*(const Var& a, double s);
Var operator*(double s, const Var& a);
Var operator+(const Var& a, double c);
Var operator+(double c, const Var& a);
Var operator-(const Var& a, double c);
Var operator-(double c, const Var& a);
inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }

Var sin(const Var& a);
Var cos(const Var& a);
Var tanh(const Var& a);
Var exp(const Var& a);

}  // namespace hte
