#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gc/tensor.hpp"

namespace gc {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    const Tensor& value() const;
    const std::vector<int>& shape() const;
};

// Define-by-run computation graph: building a node evaluates it eagerly, so
// construction order is a topological order and backward() is a single
// reverse sweep. A tape must be used from one thread at a time; independent
// tapes may run concurrently and may share (read-only) leaf tensors.
//
// Leaves reference caller-owned tensors, which must outlive the tape.
// backward() accumulates into Tensor::grad of every reachable leaf whose
// requires_grad is set; callers zero grads between steps.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Constant leaf (never receives a gradient).
    Var input(const Tensor& t, std::string name = {});
    // Differentiable leaf; t.requires_grad must be true.
    Var param(Tensor& t, std::string name = {});
    // Owned constant (for literals built on the fly).
    Var constant(Tensor t);
    Var scalar(double v) { return constant(Tensor::scalar(v)); }

    // Reverse sweep from a scalar loss node. May be called once per tape.
    void backward(Var loss);
    bool backward_done() const;

    // Gradient buffer of any node (available after backward; empty shape
    // tensor if the node did not participate).
    Tensor grad_of(Var v) const;

    int size() const;
    const Tensor& value(int id) const;

    // Internal state; reserved for the op implementations.
    struct Impl;
    Impl* impl_;
};

// ---- operations -----------------------------------------------------------
// All ops validate shapes and throw NumericError naming the node on
// mismatch. Elementwise binary ops accept equal shapes or scalar-with-tensor
// (either side); no other implicit broadcasting.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var divide(Var a, Var b);

// [m,k] x [k,n] -> [m,n]
Var matmul(Var a, Var b);
// Add a length-n row vector to every row of [m,n].
Var add_rows(Var a, Var row);
// AdaIN-style affine modulation: x [m,n] * scale [n] + shift [n], per row.
Var modulate(Var x, Var scale, Var shift);

// Concatenate along axis 0 (any rank, equal trailing dims) or axis 1 (2-d).
Var concat(const std::vector<Var>& parts, int axis);
// Rows of a [m,n] matrix selected by index (repeats allowed); gradient
// scatter-adds.
Var gather_rows(Var a, std::vector<int> idx);
// Inverse layout of gather_rows: place row r of `a` at row idx[r] of an
// [out_rows, n] zero matrix. Duplicate targets accumulate.
Var scatter_rows(Var a, std::vector<int> idx, int out_rows);
// [n] -> [rows, n] by repetition.
Var repeat_row(Var v, int rows);

// Column-wise max over axis 0: [m,n] -> [n]. Ties route the gradient to the
// lowest row index.
Var reduce_max0(Var a);
// Mean / sum over all elements -> [1].
Var reduce_mean(Var a);
Var reduce_sum(Var a);

Var leaky_relu(Var a);  // slope 0.2
Var tanh_op(Var a);
Var logistic(Var a);
Var sqrt_op(Var a);  // derivative 1/(2 sqrt(x)); inputs must be > 0
Var abs_op(Var a);   // derivative sign(x), 0 at 0

// Same-size view with a new shape.
Var reshape(Var a, std::vector<int> shape);
Var transpose(Var a);  // 2-d

// 3x3 convolution, stride 1, zero padding 1. input [Cin,H,W],
// weight [Cout,Cin,3,3], bias [Cout] -> [Cout,H,W].
Var conv3x3(Var input, Var weight, Var bias);

}  // namespace gc
