#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "densecap/nn/tape.hpp"

namespace densecap::nn {

// Elementwise, same shape.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, Scalar s);
Var neg(Var a);
Var one_minus(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

// W[m,n] x[n] -> [m]
Var matvec(Var w, Var x);
// W[m,n] x[n] + b[m]
Var linear(Var w, Var b, Var x);
// A[s,n] W[m,n]^T -> [s,m]
Var matmul_nt(Var a, Var w);
// A[s,d]^T v[s] -> [d]
Var mat_t_vec(Var a, Var v);
// M[s,m] + v[m] broadcast over rows.
Var add_rows(Var m, Var v);

Var concat(const std::vector<Var>& parts);
Var slice(Var x, std::size_t offset, std::size_t length);
// Row `i` of a rank-2 tensor as a vector.
Var row(Var m, std::size_t i);
// Rows of an embedding table; throws std::out_of_range on a bad id.
Var embed(Var table, std::size_t id);
Var stack_rows(const std::vector<Var>& rows);

Var sum(Var x);
Var dot(Var a, Var b);
Var pick(Var x, std::size_t i);

// Rank-1, max-subtracted.
Var softmax(Var x);
Var log_softmax(Var x);
// Normalises only over entries with allowed[i] != 0; disallowed entries get
// -inf and receive no gradient.
Var log_softmax(Var x, std::span<const unsigned char> allowed);

// sum_i w_i * [softplus(l_i) - t_i * l_i], the logit form of
// -w_i [t_i log s(l_i) + (1 - t_i) log(1 - s(l_i))]. Targets may be soft.
Var bce_with_logits(Var logits, const Tensor& targets, const Tensor& weights);
// -log softmax(logits)[target]
Var cross_entropy(Var logits, std::size_t target);

// Softmax over the last axis of a rank-1 or rank-2 tensor; `axis` must be
// the last axis (0 for vectors, 1 for matrices).
Tensor softmax_values(const Tensor& x, std::size_t axis);

}  // namespace densecap::nn
