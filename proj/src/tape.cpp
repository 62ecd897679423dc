// SPDX-License-Identifier: MIT
#include "hte/tape.hpp"

#include <cmath>
#include <string>

namespace hte {

Var Tape::parameter(double value)
{
    TapeNode n;
    n.op = TapeOp::parameter;
    n.value = value;
    nodes_.push_back(n);
    const auto index = static_cast<std::int32_t>(nodes_.size() - 1);
    parameters_.push_back(index);
    return Var(this, index, value);
}

std::int32_t Tape::record(TapeOp op, double value, std::span<const std::int32_t> parents,
                          std::span<const double> partials)
{
    if (parents.size() != partials.size() || parents.size() > 2)
        throw TapeError("tape: a node takes at most two parents, one partial each");
    TapeNode n;
    n.op = op;
    n.value = value;
    n.arity = static_cast<std::uint8_t>(parents.size());
    const auto next = static_cast<std::int32_t>(nodes_.size());
    for (std::size_t i = 0; i < parents.size(); ++i) {
        if (parents[i] < 0 || parents[i] >= next) throw TapeError("tape: parent does not precede node");
        if (!std::isfinite(partials[i])) throw TapeError("tape: non-finite local partial");
        n.parents[i] = parents[i];
        n.partials[i] = partials[i];
    }
    nodes_.push_back(n);
    return next;
}

std::int32_t Tape::push_node(const TapeNode& node)
{
    nodes_.push_back(node);
    return static_cast<std::int32_t>(nodes_.size() - 1);
}

void Tape::mark_parameter(std::int32_t index)
{
    const TapeNode& n = node(index);
    if (n.arity != 0) throw TapeError("tape: only leaves can be parameters");
    parameters_.push_back(index);
}

std::vector<double> Tape::adjoints(std::int32_t output) const
{
    if (output < 0 || static_cast<std::size_t>(output) >= nodes_.size())
        throw TapeError("tape: output index " + std::to_string(output) + " is not a scalar node on this tape");
    for (std::size_t i = 0; i <= static_cast<std::size_t>(output); ++i) {
        const TapeNode& n = nodes_[i];
        for (int p = 0; p < n.arity; ++p) {
            if (n.parents[p] < 0 || static_cast<std::size_t>(n.parents[p]) >= i)
                throw TapeError("tape: cycle detected at node " + std::to_string(i));
            if (!std::isfinite(n.partials[p]))
                throw TapeError("tape: non-finite local partial at node " + std::to_string(i));
        }
    }
    std::vector<double> adj(static_cast<std::size_t>(output) + 1, 0.0);
    adj[static_cast<std::size_t>(output)] = 1.0;
    for (std::int32_t i = output; i >= 0; --i) {
        const double a = adj[static_cast<std::size_t>(i)];
        if (a == 0.0) continue;
        const TapeNode& n = nodes_[static_cast<std::size_t>(i)];
        for (int p = 0; p < n.arity; ++p) adj[static_cast<std::size_t>(n.parents[p])] += a * n.partials[p];
    }
    return adj;
}

std::vector<double> reverse_grad(const Tape& tape, std::int32_t output_index)
{
    const std::vector<double> adj = tape.adjoints(output_index);
    std::vector<double> grad;
    grad.reserve(tape.parameter_count());
    for (std::int32_t leaf : tape.parameters())
        grad.push_back(static_cast<std::size_t>(leaf) < adj.size() ? adj[static_cast<std::size_t>(leaf)] : 0.0);
    return grad;
}

std::vector<double> reverse_grad(const Tape& tape, const Var& output)
{
    if (output.is_constant()) throw TapeError("tape: output is a constant, not a recorded scalar");
    if (output.tape() != &tape) throw TapeError("tape: output was recorded on a different tape");
    return reverse_grad(tape, output.index());
}

namespace {

Var unary(const Var& a, TapeOp op, double value, double partial)
{
    if (a.is_constant()) return Var(value);
    const std::int32_t parent = a.index();
    const std::int32_t idx = a.tape()->record(op, value, {&parent, 1}, {&partial, 1});
    return Var(a.tape(), idx, value);
}

Var binary(const Var& a, const Var& b, TapeOp op, double value, double da, double db)
{
    if (a.is_constant() && b.is_constant()) return Var(value);
    if (a.is_constant()) return unary(b, op, value, db);
    if (b.is_constant()) return unary(a, op, value, da);
    if (a.tape() != b.tape()) throw TapeError("tape: operands recorded on different tapes");
    const std::int32_t parents[2] = {a.index(), b.index()};
    const double partials[2] = {da, db};
    const std::int32_t idx = a.tape()->record(op, value, parents, partials);
    return Var(a.tape(), idx, value);
}

}  // namespace

Var operator+(const Var& a, const Var& b) { return binary(a, b, TapeOp::add, a.value() + b.value(), 1.0, 1.0); }
Var operator-(const Var& a, const Var& b) { return binary(a, b, TapeOp::sub, a.value() - b.value(), 1.0, -1.0); }
Var operator*(const Var& a, const Var& b)
{
    return binary(a, b, TapeOp::mul, a.value() * b.value(), b.value(), a.value());
}
Var operator-(const Var& a) { return unary(a, TapeOp::neg, -a.value(), -1.0); }
Var operator*(const Var& a, double s) { return unary(a, TapeOp::scale, a.value() * s, s); }
Var operator*(double s, const Var& a) { return a * s; }
Var operator+(const Var& a, double c) { return unary(a, TapeOp::offset, a.value() + c, 1.0); }
Var operator+(double c, const Var& a) { return a + c; }
Var operator-(const Var& a, double c) { return unary(a, TapeOp::offset, a.value() - c, 1.0); }
Var operator-(double c, const Var& a) { return unary(a, TapeOp::offset, c - a.value(), -1.0); }

Var sin(const Var& a) { return unary(a, TapeOp::sin, std::sin(a.value()), std::cos(a.value())); }
Var cos(const Var& a) { return unary(a, TapeOp::cos, std::cos(a.value()), -std::sin(a.value())); }
Var tanh(const Var& a)
{
    const double y = std::tanh(a.value());
    return unary(a, TapeOp::tanh, y, 1.0 - y * y);
}
Var exp(const Var& a)
{
    const double y = std::exp(a.value());
    return unary(a, TapeOp::exp, y, y);
}

}  // namespace hte
