#pragma once

#include <vector>

#include "clash/tape.hpp"
#include "clash/tensor.hpp"

// Differentiable primitives. Every function evaluates eagerly, records a
// backward closure on the tape, and returns a tensor tied to it. Inputs
// with node == -1 are constants and receive no gradient. Accumulation
// orders inside each primitive are fixed, so results are deterministic.
namespace clash::ad {

// Elementwise with numpy-style right-aligned broadcasting (dims equal or 1).
Tensor add(Tape& tp, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tp, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tp, const Tensor& a, const Tensor& b);

Tensor add_scalar(Tape& tp, const Tensor& a, double c);
Tensor mul_scalar(Tape& tp, const Tensor& a, double c);

// Unary maps.
Tensor leaky_relu(Tape& tp, const Tensor& x, double slope);
inline Tensor relu(Tape& tp, const Tensor& x) { return leaky_relu(tp, x, 0.0); }
Tensor sigmoid(Tape& tp, const Tensor& x);
Tensor log_op(Tape& tp, const Tensor& x);        // requires x > 0
Tensor sqrt_op(Tape& tp, const Tensor& x);       // requires x >= 0
Tensor clamp_min(Tape& tp, const Tensor& x, double floor);  // grad iff x > floor
Tensor reciprocal(Tape& tp, const Tensor& x);    // requires x != 0

// x^k with a differentiable scalar exponent k (shape (1,)); x must be
// strictly positive — callers clamp first (NumericError otherwise).
Tensor pow_ts(Tape& tp, const Tensor& x, const Tensor& k);

// softmax / log-softmax along `axis`.
Tensor softmax(Tape& tp, const Tensor& x, int axis);
Tensor log_softmax(Tape& tp, const Tensor& x, int axis);

// (M,K)@(K,N), one optional transpose flag, or the batched rank-3 form
// (G,M,K)@(G,K,N). ta and tb must not both be set.
Tensor matmul(Tape& tp, const Tensor& a, const Tensor& b, bool ta = false,
              bool tb = false);

// Stride-1 zero-"same"-padded 3-D convolution. x is (B,Cin,T,H,W), w is
// (Cout,Cin/groups,kt,kh,kw) with odd kernel dims; dilation applies to all
// three dims and the padding grows to keep (T,H,W) fixed.
Tensor conv3d(Tape& tp, const Tensor& x, const Tensor& w, int groups = 1,
              int dilation = 1);

// 3^3 stride-1 same-padded pooling over (T,H,W); averages count only
// in-bounds elements; max ties break to the lowest input linear index.
Tensor avgpool3d(Tape& tp, const Tensor& x);
Tensor maxpool3d(Tape& tp, const Tensor& x);

// (1,2,2)-window stride-(1,2,2) max pool; requires even H and W.
Tensor maxpool_spatial2(Tape& tp, const Tensor& x);

// Reductions over an axis subset, keeping reduced dims as size 1.
// reduce_max ties break to the lowest input linear index.
Tensor reduce_mean(Tape& tp, const Tensor& x, const std::vector<int>& axes);
Tensor reduce_sum(Tape& tp, const Tensor& x, const std::vector<int>& axes);
Tensor reduce_max(Tape& tp, const Tensor& x, const std::vector<int>& axes);

// Shape plumbing.
Tensor reshape(Tape& tp, const Tensor& x, Shape s);
Tensor slice(Tape& tp, const Tensor& x, int axis, std::int64_t start,
             std::int64_t len);
Tensor concat(Tape& tp, const std::vector<Tensor>& parts, int axis);

}  // namespace clash::ad
