#pragma once

#include <cstddef>
#include <span>

#include "csats/tape.hpp"
#include "csats/tensor.hpp"

/// Differentiable tensor operations. Each records a backward rule on the active tape when any
/// input requires a gradient.
namespace csats::ops {

/// Batched matrix product over the trailing two axes. Leading axes broadcast numpy-style
/// (aligned from the right, extent 1 stretches); no other broadcasting is performed.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// Swaps the last two axes.
template <typename T>
Tensor<T> transpose_last2(const Tensor<T>& x);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

/// Inserts a new axis of extent `copies` at position `axis`, repeating the input along it.
template <typename T>
Tensor<T> repeat_axis(const Tensor<T>& x, std::size_t axis, std::size_t copies);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
/// Elementwise product of equal shapes.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
/// Multiplication by a compile-time-free constant (no gradient to the constant).
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);
/// Multiplication by a one-element tensor, with gradient flowing to that scalar.
template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& x, const Tensor<T>& s);

/// |x|, backward sign(x) with subgradient 0 at exactly 0.
template <typename T>
Tensor<T> abs(const Tensor<T>& x);
template <typename T>
Tensor<T> relu(const Tensor<T>& x);

/// Sum of all elements, shape {}.
template <typename T>
Tensor<T> sum(const Tensor<T>& x);
/// Sum along `axis`; the axis is removed.
template <typename T>
Tensor<T> reduce_sum_axis(const Tensor<T>& x, std::size_t axis);
/// Mean along `axis`; the axis is removed. Zero extent raises DomainError.
template <typename T>
Tensor<T> reduce_mean_axis(const Tensor<T>& x, std::size_t axis);

/// Max-shifted softmax along `axis`.
template <typename T>
Tensor<T> softmax_axis(const Tensor<T>& x, std::size_t axis);

/// Stride-1 convolution with zero padding that preserves T.
/// x: [N, C_in, T], kernel: [C_out, C_in, k], bias: [C_out] -> [N, C_out, T].
/// pad_left = floor((k-1)/2), pad_right = ceil((k-1)/2).
template <typename T>
Tensor<T> conv1d_same(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias);

/// Toggles the NaN/Inf check applied to every op output (on by default).
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

}  // namespace csats::ops
