#pragma once

#include "pmdm/kernels.hpp"

// Internal: per-backend entry points. Signatures mirror pmdm/kernels.hpp.

namespace pmdm::kernels::detail {

constexpr std::size_t kSumChunk = 4096;  // fixed reduction chunk, both backends

#define PMDM_KERNEL_SET(suffix)                                                \
  void matmul_##suffix(const double* a, const double* b, double* out,          \
                       const MatmulSpec& spec);                                \
  void broadcast_binary_##suffix(BinaryKind kind, const double* a,             \
                                 const double* b, double* out,                 \
                                 const std::size_t* shape,                     \
                                 const std::size_t* a_strides,                 \
                                 const std::size_t* b_strides,                 \
                                 std::size_t rank);                            \
  void unary_##suffix(UnaryKind kind, const double* x, double* out,            \
                      std::size_t n);                                          \
  void unary_backward_##suffix(UnaryKind kind, const double* ref,              \
                               const double* gy, double* gx, std::size_t n);   \
  void softmax_rows_##suffix(const double* x, double* y, std::size_t rows,     \
                             std::size_t width);                               \
  void softmax_backward_rows_##suffix(const double* y, const double* gy,       \
                                      double* gx, std::size_t rows,            \
                                      std::size_t width);                      \
  double sum_all_##suffix(const double* x, std::size_t n);                     \
  void sum_to_##suffix(const double* x, double* out,                           \
                       const std::size_t* x_shape,                             \
                       const std::size_t* out_shape, std::size_t rank);        \
  void gather_rows_##suffix(const double* table, const std::int64_t* idx,      \
                            double* out, std::size_t count, std::size_t width);\
  void nodewise_linear_##suffix(const double* x, const double* theta,          \
                                double* out, std::size_t batch,                \
                                std::size_t nodes, std::size_t in_w,           \
                                std::size_t out_w);                            \
  void nodewise_linear_backward_##suffix(                                      \
      const double* x, const double* theta, const double* gy, double* gx,      \
      double* gtheta, std::size_t batch, std::size_t nodes, std::size_t in_w,  \
      std::size_t out_w);                                                      \
  void axpy_##suffix(double alpha, const double* x, double* y, std::size_t n); \
  void scale_inplace_##suffix(double alpha, double* x, std::size_t n);         \
  void adam_update_##suffix(double* p, const double* g, double* m, double* v,  \
                            std::size_t n, double lr, double beta1,            \
                            double beta2, double eps, double bias1,            \
                            double bias2);

PMDM_KERNEL_SET(serial)
PMDM_KERNEL_SET(omp)

#undef PMDM_KERNEL_SET

}  // namespace pmdm::kernels::detail
