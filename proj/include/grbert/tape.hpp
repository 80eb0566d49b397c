#pragma once

#include <functional>
#include <vector>

#include "grbert/tensor.hpp"

namespace grbert {

// Handle into a Tape node.
struct Value {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode automatic differentiation over Tensor-valued primitives.
//
// A Tape records one forward computation; nodes are appended in evaluation
// order, so the record is topologically sorted by construction and backward()
// visits each node exactly once, in reverse creation order. One tape belongs
// to one training step and is never shared.
//
// Gradients are accumulated with a fixed row-major, left-to-right summation
// order, which makes backward() deterministic: identical tapes produce
// bit-identical gradients.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaf node; participates in gradients iff t.requires_grad().
    Value leaf(Tensor t);
    // Leaf node that never receives gradients.
    Value constant(Tensor t);
    Value constant_scalar(double v) { return constant(Tensor::scalar(v)); }

    const Tensor& value(Value v) const { return node(v.id).value; }
    // Gradient of the last backward() target w.r.t. this node.
    const Tensor& grad(Value v) const;
    bool requires_grad(Value v) const { return node(v.id).needs_grad; }
    std::size_t size() const { return nodes_.size(); }

    // Reverse pass from a scalar loss node.
    void backward(Value loss);

    // ---- primitive operations -------------------------------------------
    Value add(Value a, Value b);                 // same shape
    Value sub(Value a, Value b);                 // same shape
    Value mul(Value a, Value b);                 // elementwise, same shape
    Value scale(Value a, double s);
    Value add_bias(Value a, Value bias);         // [n,m] + [m], row broadcast
    Value matmul(Value a, Value b);              // [n,k] x [k,m]
    Value matmul_nt(Value a, Value b);           // [n,k] x [m,k]^T -> [n,m]
    Value rows_select(Value a, std::vector<std::size_t> idx);  // gather rows
    Value row(Value a, std::size_t i);           // [n,m] -> [m]
    Value col_slice(Value a, std::size_t c0, std::size_t c1);  // [n, c1-c0)
    Value concat_cols(const std::vector<Value>& parts);
    Value layer_norm(Value x, Value gain, Value bias, double eps);
    Value gelu(Value x);                         // exact erf form
    // Row-wise softmax over unmasked columns; masked columns output 0.
    Value softmax_rows(Value x, std::vector<bool> col_keep);
    Value mean_rows(Value x, std::vector<bool> row_keep);      // [n,m] -> [m]
    // Mean cross entropy over rows of logits against integer targets.
    Value cross_entropy_mean(Value logits, std::vector<std::size_t> targets);
    Value cosine(Value a, Value b);              // rank-1 pair -> scalar
    Value stack_scalars(const std::vector<Value>& xs);         // -> [k]
    Value pick(Value v, std::size_t i);          // [k] -> scalar
    Value log_sum_exp(Value v);                  // [k] -> scalar
    Value sum(Value a);                          // -> scalar
    Value dot(Value a, Value b);                 // rank-1 pair -> scalar

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool needs_grad = false;
        bool grad_ready = false;
        std::function<void(Tape&)> back;  // accumulates into parent grads
    };

    Node& node(int id) { return nodes_.at(static_cast<std::size_t>(id)); }
    const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }

    Value push(Tensor value, bool needs, std::function<void(Tape&)> back);
    Tensor& grad_buf(int id);  // lazily allocated zero tensor

    std::vector<Node> nodes_;
};

}  // namespace grbert
