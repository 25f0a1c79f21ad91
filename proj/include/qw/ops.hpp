#pragma once

#include <cstddef>
#include <vector>

#include "qw/tensor.hpp"

// Differentiable primitives. Elementwise binary ops require identical shapes;
// the only broadcast is scalar-with-tensor through the *_scalar helpers.

namespace qw {

inline constexpr double kLogSigmaMin = -10.0;
inline constexpr double kLogSigmaMax = 3.0;

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// a * s where s holds a single element.
Var mul_scalar(Var a, Var s);
/// a / s where s holds a single element.
Var div_scalar(Var a, Var s);

/// [m,k] x [k,n] -> [m,n]
Var matmul(Var a, Var b);
/// 3x3 convolution with zero "same" padding.
/// x: [Ci,H,W], w: [Co,Ci,3,3], b: [Co] -> [Co,H,W]
Var conv2d(Var x, Var w, Var b);

Var relu(Var a);
/// Tanh-approximated GELU.
Var gelu(Var a);
Var softmax(Var a, std::size_t axis);
Var log(Var a);
Var exp(Var a);
Var sqrt(Var a);
Var square(Var a);
/// Clamp into [lo, hi]; the gradient is zero where the clamp is active.
Var clamp(Var a, double lo, double hi);
Var cumsum(Var a, std::size_t axis);

Var sum(Var a);
Var mean(Var a);

/// Concatenate along axis 0.
Var concat(const std::vector<Var>& parts);
/// Rows [begin, end) along axis 0.
Var slice(Var a, std::size_t begin, std::size_t end);
Var reshape(Var a, Shape shape);

/// x: [C,H,W], scale/shift: [C] -> x * scale[c] + shift[c]
Var scale_shift(Var x, Var scale, Var shift);

/// mu + exp(clamp(log_sigma)) * noise; noise is supplied by the caller.
Var gaussian_sample(Var mu, Var log_sigma, const Tensor& noise);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(Var a, double s) { return scale(a, s); }
inline Var operator*(double s, Var a) { return scale(a, s); }

}  // namespace qw
