#pragma once

#include <cstddef>
#include <cstdint>

// Low-level dense kernels. Every function exists twice: a plain serial
// reference implementation and an OpenMP one that parallelizes only across
// independent output elements (per-element accumulation order is fixed), so
// the two backends produce bit-identical results for any thread count.
// Reductions are defined over fixed 4096-element chunks for the same reason.

namespace pmdm::kernels {

enum class Backend { serial, openmp };

Backend active_backend();
void set_backend(Backend b);
bool openmp_available();
int max_threads();

enum class BinaryKind { add, sub, mul };
enum class UnaryKind { neg, sigmoid, tanh_fn, relu, abs_fn, exp_fn };

// Batched row-major matmul: out_t = op(A_t) * op(B_t) for t in [0, batch).
// a_offsets/b_offsets give the start of each batch block (repeat an offset to
// broadcast). Logical product is (m x k) * (k x n); trans_a means block A_t is
// stored k-major (i.e. physically k rows of m), likewise trans_b.
struct MatmulSpec {
  std::size_t batch = 1;
  std::size_t m = 0, k = 0, n = 0;
  const std::size_t* a_offsets = nullptr;
  const std::size_t* b_offsets = nullptr;
  bool trans_a = false;
  bool trans_b = false;
  bool accumulate = false;  // += into out instead of overwrite
};
void matmul(const double* a, const double* b, double* out, const MatmulSpec& spec);

// Elementwise binary op with stride-described broadcasting (stride 0 on
// broadcast axes). shape/rank describe the output.
void broadcast_binary(BinaryKind kind, const double* a, const double* b,
                      double* out, const std::size_t* shape,
                      const std::size_t* a_strides, const std::size_t* b_strides,
                      std::size_t rank);

void unary(UnaryKind kind, const double* x, double* out, std::size_t n);

// gx += gy * f'(.). `ref` is the forward output for sigmoid/tanh (derivative
// from y) and the forward input for relu/abs.
void unary_backward(UnaryKind kind, const double* ref, const double* gy,
                    double* gx, std::size_t n);

void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t width);
// gx += softmax backward, given forward output y.
void softmax_backward_rows(const double* y, const double* gy, double* gx,
                           std::size_t rows, std::size_t width);

double sum_all(const double* x, std::size_t n);

// Reduce x (shape x_shape) into out (same rank, extents equal or 1),
// accumulating. Inverse of a broadcast.
void sum_to(const double* x, double* out, const std::size_t* x_shape,
            const std::size_t* out_shape, std::size_t rank);

void gather_rows(const double* table, const std::int64_t* idx, double* out,
                 std::size_t count, std::size_t width);
// Serial in both backends: duplicate indices must accumulate in list order.
void scatter_add_rows(double* table, const std::int64_t* idx, const double* g,
                      std::size_t count, std::size_t width);

// out[b,i,f] = sum_k x[b,i,k] * theta[i,k,f] (per-row weight matrices).
void nodewise_linear(const double* x, const double* theta, double* out,
                     std::size_t batch, std::size_t nodes, std::size_t in_w,
                     std::size_t out_w);
// Accumulates gx and gtheta; either may be null to skip.
void nodewise_linear_backward(const double* x, const double* theta,
                              const double* gy, double* gx, double* gtheta,
                              std::size_t batch, std::size_t nodes,
                              std::size_t in_w, std::size_t out_w);

void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale_inplace(double alpha, double* x, std::size_t n);

// One Adam step on a flat parameter block; bias1/bias2 are the 1-beta^t
// correction denominators for the current step.
void adam_update(double* p, const double* g, double* m, double* v,
                 std::size_t n, double lr, double beta1, double beta2,
                 double eps, double bias1, double bias2);

}  // namespace pmdm::kernels
