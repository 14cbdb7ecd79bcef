#pragma once

#include "stdown/ad/graph.hpp"

namespace stdown::ad {

enum class Pad2d { same, none };
enum class Pad1d { causal, none };

// 2-D convolution, x: H x W x Cin, kernel: kh x kw x Cin x Cout (kh, kw
// odd), optional bias: Cout. padding=same zero-pads to preserve H x W;
// padding=none shrinks by the effective kernel size d*(k-1)+1.
Value conv2d(const Value& x, const Value& kernel, const Value& bias, int dil_h, int dil_w,
             Pad2d pad);

// Temporal convolution along the first axis, x: T x P x C (or T x C),
// kernel: kt x Cin x Cout. causal prepends d*(kt-1) zeros so the output
// at t sees only inputs <= t; none shortens T.
Value conv1d_time(const Value& x, const Value& kernel, const Value& bias, int dilation, Pad1d pad);

// y[..., co] = b[co] + sum_ci x[..., ci] * w[ci, co]
Value pointwise_linear(const Value& x, const Value& w, const Value& b);

Value gelu(const Value& x);      // tanh approximation
Value sigmoid(const Value& x);
Value global_avg_pool(const Value& x);             // H x W x C -> C
Value mul_channels(const Value& x, const Value& s);  // x (H x W x C) * s[C]

Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value div(const Value& a, const Value& b);
Value scale(const Value& x, double c);
Value add_scalar(const Value& x, double c);
Value reduce_sum(const Value& x);   // -> scalar
Value reduce_mean(const Value& x);  // -> scalar
Value sqrt_eps(const Value& x);     // sqrt(x + 1e-12), elementwise
Value reshape(const Value& x, Shape shape);
Value broadcast_to(const Value& s, Shape shape);  // scalar -> filled tensor

// scalar gelu used by both the op kernel and tests
double gelu_scalar(double x);

}  // namespace stdown::ad
