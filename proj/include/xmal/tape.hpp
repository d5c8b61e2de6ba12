#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "xmal/tensor.hpp"

namespace xmal::ad {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    std::size_t index = 0;

    const Tensor& value() const;
    const Tensor& grad() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
};

/// Reverse-mode record of one forward pass.
///
/// Nodes are appended in evaluation order, so the append order is a topological
/// order and `backward` simply walks it in reverse. Every node owns its value and
/// (after `backward`) its gradient accumulator.
class Tape {
public:
    using Backprop = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Records a value that gradients do not flow into.
    Var constant(Tensor value);
    /// Records a differentiable leaf (a parameter or an input under test).
    Var leaf(Tensor value);

    /// Appends an interior node. `backprop` reads this node's gradient and
    /// accumulates into its inputs' gradients.
    Var record(Tensor value, std::vector<std::size_t> inputs, Backprop backprop);

    const Tensor& value(std::size_t i) const { return nodes_[i].value; }
    const Tensor& grad(std::size_t i) const { return nodes_[i].grad; }
    /// Gradient accumulator of node `i`; only meaningful during backward.
    Tensor& grad_mut(std::size_t i) { return nodes_[i].grad; }
    bool requires_grad(std::size_t i) const { return nodes_[i].requires_grad; }

    /// Zeroes every accumulator, seeds d(loss)/d(loss) = 1 and propagates in
    /// strict reverse recording order. Rejects non-scalar losses.
    void backward(Var loss);

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::vector<std::size_t> inputs;
        Backprop backprop;
        bool requires_grad = false;
    };
    std::vector<Node> nodes_;
};

// Differentiable primitives. Each records one node on the operands' tape.

Var matmul(Var a, Var b);
/// Elementwise sum; `b` may also be a 1xM row broadcast over the rows of `a`.
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise (Hadamard) product of equal-shaped operands.
Var hadamard(Var a, Var b);
Var scale(Var a, double factor);
Var relu(Var a);
Var sigmoid(Var a);
/// Natural log with inputs floored at `floor` (values below are clamped and
/// receive zero gradient).
Var log(Var a, double floor = 1e-12);
/// Each row divided by (its Euclidean norm + eps).
Var row_l2_normalize(Var a, double eps = 1e-12);
Var row_softmax(Var a);
/// Numerically stable log(row_softmax(a)).
Var row_log_softmax(Var a);
Var sum(Var a);
Var mean(Var a);
Var transpose(Var a);
/// Elementwise (a - b)^2.
Var squared_difference(Var a, Var b);

}  // namespace xmal::ad
