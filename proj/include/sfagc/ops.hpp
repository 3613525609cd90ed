#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sfagc/tensor.hpp"

// Differentiable primitives. Every op records itself on the inputs' tape when
// at least one input is tracked and is a plain value computation otherwise.
// Matrices are rank-2 row-major; most ops also accept rank-1 tensors, which
// behave as a single row.

namespace sfagc::ops {

inline constexpr double kDefaultLeakySlope = 0.2;

/// a[m×k] · b[k×n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// x[m×in] · w[out×in]ᵀ, i.e. w applied to every row of x.
Tensor linear(const Tensor& x, const Tensor& w);

// Elementwise binary ops. b must have a's shape, a's trailing extents, or a
// single element; it is broadcast over a's leading dimension.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double factor);
Tensor leaky_relu(const Tensor& a, double slope = kDefaultLeakySlope);
Tensor abs(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

/// Sum of all elements, shape [1].
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// exp((x - max x)/temperature), normalized over all elements of x.
Tensor softmax(const Tensor& x, double temperature = 1.0);
/// Softmax over consecutive groups of `group` elements of a flat view of x.
Tensor group_softmax(const Tensor& x, std::size_t group, double temperature = 1.0);

/// Concatenation along axis 0 (rows) or axis 1 (columns).
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

/// Rows of x at `index` (repeats allowed).
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);

enum class Reduce { Sum, Mean, Max };
/// Reduces consecutive blocks of `group` rows: [n·group × d] -> [n × d].
Tensor group_reduce(const Tensor& x, std::size_t group, Reduce how);
/// Channel-wise reduction over all rows: [m × d] -> [1 × d].
Tensor reduce_rows(const Tensor& x, Reduce how);

/// Row i of x multiplied by s[i]; s has one element per row of x.
Tensor scale_rows(const Tensor& x, const Tensor& s);
/// Per-row dot product, [m × d] · [m × d] -> [m × 1].
Tensor row_dot(const Tensor& a, const Tensor& b);
/// Per-row cosine similarity, [m × 1]. Rows where either norm is below
/// `eps` yield 0 with zero gradient.
Tensor row_cosine(const Tensor& a, const Tensor& b, double eps = 1e-12);

/// −log softmax(logits)[label] for a single row of logits.
Tensor cross_entropy(const Tensor& logits, std::size_t label);
/// Mean per-row cross entropy of logits[m × K] against m labels.
Tensor cross_entropy_rows(const Tensor& logits, std::span<const std::size_t> labels);

}  // namespace sfagc::ops
