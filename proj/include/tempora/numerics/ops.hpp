#pragma once

// Differentiable primitives over tape-recorded tensors. Shape errors throw
// std::invalid_argument naming the operation and the offending shapes.

#include <cstddef>
#include <span>
#include <vector>

#include "tempora/numerics/tape.hpp"

namespace tempora::numerics {

enum class Activation { Identity, Sigmoid, Tanh, Relu, Exp, Log, Square };

Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation a);

// a[..., k] x b[k, n] -> [..., n]; leading axes of a are flattened.
Var matmul(Var a, Var b);

// Causal 1-D convolution over the time axis. x is [T, c_in] or
// [B, T, c_in]; kernel is [w, c_in, c_out]; bias is [c_out].
// out[t] = bias + sum_{j<w} x[t-j] * kernel[j], with x[t<0] = 0.
Var conv1d_causal(Var x, Var kernel, Var bias);

Var elementwise(Var x, Activation kind);
inline Var sigmoid(Var x) { return elementwise(x, Activation::Sigmoid); }
inline Var tanh(Var x) { return elementwise(x, Activation::Tanh); }
inline Var relu(Var x) { return elementwise(x, Activation::Relu); }
inline Var exp(Var x) { return elementwise(x, Activation::Exp); }
inline Var log(Var x) { return elementwise(x, Activation::Log); }
inline Var square(Var x) { return elementwise(x, Activation::Square); }

Var softmax_lastdim(Var x);
Var log_softmax_lastdim(Var x);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double c);
// x[..., n] + row[n]
Var add_row(Var x, Var row);
// row[n] -> [rows, n]
Var broadcast_rows(Var row, std::size_t rows);

Var concat_lastdim(std::span<const Var> parts);
Var slice_lastdim(Var x, std::size_t begin, std::size_t end);

// Time-axis helpers for [B, T, C] tensors.
Var concat_time(std::span<const Var> parts);
Var slice_time(Var x, std::size_t begin, std::size_t end);
// [B, T, C] -> [B, C] at one time index.
Var at_time(Var x, std::size_t t);
// list of [B, C] -> [B, T, C]
Var stack_time(std::span<const Var> steps);

Var reshape(Var x, Shape shape);

// keys[B, n, d] . q[B, d] -> [B, n]
Var row_dot(Var keys, Var q);
// sum_j w[B, j] * values[B, j, :] -> [B, d]
Var weighted_pool(Var weights, Var values);

// x[..., n] -> x[..., indices]
Var gather_lastdim(Var x, std::vector<std::size_t> indices);
// table[V, E] -> [len(indices), E]
Var gather_rows(Var table, std::vector<std::size_t> indices);
// x[B, K] -> [B] picking x[b, index[b]]
Var select_per_row(Var x, std::vector<std::size_t> index);

Var sum(Var x);
Var mean(Var x);
inline Var sum_squares(Var x) { return sum(square(x)); }

// Recency kernel w(dt) = exp(-dt / tau) + bump * [dt mod period == 0]
// for each entry of deltas; tau and bump are scalars.
Var time_kernel(Var tau, Var bump, std::vector<double> deltas, std::size_t period);

// Same value, no gradient path.
Var stop_gradient(Var x);

} // namespace tempora::numerics
