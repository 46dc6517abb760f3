#pragma once

#include <cstdint>
#include <vector>

#include "pmdm/tensor.hpp"

// Differentiable tensor operations. Each op validates shapes, computes the
// forward value through the kernel layer and, when gradients are enabled and
// some input requires them, records a tape node for pmdm::backward().
//
// Binary ops broadcast numpy-style (shapes aligned on trailing axes, extents
// equal or 1). matmul broadcasts the leading (batch) axes the same way.

namespace pmdm::ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // hadamard
Tensor neg(const Tensor& x);

// a * x + b with scalar constants; the workhorse for (1 - r), 1/sqrt(d_k)
// scaling and similar constant affine maps.
Tensor affine_const(const Tensor& x, double a, double b);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose_last2(const Tensor& x);

Tensor sigmoid(const Tensor& x);
Tensor tanh_op(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor abs_op(const Tensor& x);

// Softmax over the last axis, stabilized by max subtraction. Rejects
// non-finite inputs, naming the offending slice.
Tensor softmax_last(const Tensor& x);

Tensor sum_all(const Tensor& x);   // -> rank-0
Tensor mean_all(const Tensor& x);  // -> rank-0
Tensor sum_last(const Tensor& x);  // drops the last axis

// x > 0 ? x^(-1/2) : 0, with gradient 0 on the masked entries (degree
// normalization with isolated rows).
Tensor rsqrt_mask(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor unsqueeze(const Tensor& x, std::size_t axis);

// Materialized broadcast of x to `shape` (prepended axes and size-1 axes may
// grow). Gradient sums back over the broadcast axes.
Tensor expand(const Tensor& x, const Shape& shape);

Tensor concat(std::size_t axis, const std::vector<Tensor>& parts);
Tensor stack(std::size_t axis, const std::vector<Tensor>& parts);

// Removes `axis` by picking one index along it (inverse of stack).
Tensor select(const Tensor& x, std::size_t axis, std::size_t index);

// out[i] = table[indices[i]], gradient scattered back into the table rows.
Tensor gather_rows(const Tensor& table, const std::vector<std::int64_t>& indices);

// x: [B, N, K], theta: [N, K, F] -> [B, N, F]; row i of every batch is mapped
// by its own K x F matrix.
Tensor nodewise_linear(const Tensor& x, const Tensor& theta);

// Convenience: x @ w + bias (bias broadcast over leading axes).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

}  // namespace pmdm::ops
