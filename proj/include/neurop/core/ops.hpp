#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "neurop/core/tape.hpp"

namespace neurop {

enum class Elementwise { add, sub, mul, scale, gelu, relu };

/// Binary ops take equal shapes, or a single-element operand broadcast
/// against the other. `scale` multiplies `a` by `factor`; unary ops ignore `b`.
Var elementwise(Elementwise op, const Var& a, const std::optional<Var>& b = std::nullopt, double factor = 1.0);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var gelu(const Var& a);
Var relu(const Var& a);
/// Natural logarithm; inputs must be positive.
Var log(const Var& a);

double gelu(double x) noexcept;
double gelu_derivative(double x) noexcept;

/// (m×k)·(k×n).
Var matmul(const Var& a, const Var& b);

/// Batched product over a leading batch axis: (B×m×k)·(B×k×n), with optional
/// transposition of either operand's trailing two axes.
Var bmm(const Var& a, const Var& b, bool transpose_a = false, bool transpose_b = false);

/// Swap the trailing two axes.
Var transpose_last2(const Var& a);

Var reshape(const Var& a, Shape shape);

/// Repeat `a` along a new leading axis of length `count`.
Var broadcast_batch(const Var& a, std::size_t count);

/// sum or mean over axes (all when empty). max/min are not differentiable
/// and are only available on plain tensors, see reduce().
Var sum(const Var& a, std::span<const std::size_t> axes = {});
Var mean(const Var& a, std::span<const std::size_t> axes = {});

/// Max-stabilized softmax along `axis`.
Var softmax(const Var& a, std::size_t axis);
Tensor softmax(const Tensor& a, std::size_t axis);

/// Pointwise channel map for fields laid out as (batch, channels, ...):
/// out[b,o,s] = sum_i weight[o,i]·x[b,i,s] + bias[o].
Var channel_linear(const Var& x, const Var& weight, const std::optional<Var>& bias);

/// Affine map on the trailing feature axis of token arrays (..., d_in):
/// out = x·weight + bias with weight (d_in×d_out).
Var token_linear(const Var& x, const Var& weight, const std::optional<Var>& bias);

/// Concatenate along the channel axis of (batch, channels, ...) arrays.
Var concat_channels(const Var& a, const Var& b);

}  // namespace neurop
