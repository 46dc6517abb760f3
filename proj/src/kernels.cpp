#include "pmdm/kernels.hpp"

#include <atomic>

#include "kernels_detail.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pmdm::kernels {

namespace {
std::atomic<Backend> g_backend{
#ifdef _OPENMP
    Backend::openmp
#else
    Backend::serial
#endif
};
}  // namespace

Backend active_backend() { return g_backend.load(std::memory_order_relaxed); }

void set_backend(Backend b) {
#ifndef _OPENMP
  b = Backend::serial;
#endif
  g_backend.store(b, std::memory_order_relaxed);
}

bool openmp_available() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

#define PMDM_DISPATCH(fn, ...)                      \
  do {                                              \
    if (active_backend() == Backend::openmp)        \
      return detail::fn##_omp(__VA_ARGS__);         \
    return detail::fn##_serial(__VA_ARGS__);        \
  } while (0)

void matmul(const double* a, const double* b, double* out,
            const MatmulSpec& spec) {
  PMDM_DISPATCH(matmul, a, b, out, spec);
}

void broadcast_binary(BinaryKind kind, const double* a, const double* b,
                      double* out, const std::size_t* shape,
                      const std::size_t* a_strides, const std::size_t* b_strides,
                      std::size_t rank) {
  PMDM_DISPATCH(broadcast_binary, kind, a, b, out, shape, a_strides, b_strides,
                rank);
}

void unary(UnaryKind kind, const double* x, double* out, std::size_t n) {
  PMDM_DISPATCH(unary, kind, x, out, n);
}

void unary_backward(UnaryKind kind, const double* ref, const double* gy,
                    double* gx, std::size_t n) {
  PMDM_DISPATCH(unary_backward, kind, ref, gy, gx, n);
}

void softmax_rows(const double* x, double* y, std::size_t rows,
                  std::size_t width) {
  PMDM_DISPATCH(softmax_rows, x, y, rows, width);
}

void softmax_backward_rows(const double* y, const double* gy, double* gx,
                           std::size_t rows, std::size_t width) {
  PMDM_DISPATCH(softmax_backward_rows, y, gy, gx, rows, width);
}

double sum_all(const double* x, std::size_t n) {
  if (active_backend() == Backend::openmp) return detail::sum_all_omp(x, n);
  return detail::sum_all_serial(x, n);
}

void sum_to(const double* x, double* out, const std::size_t* x_shape,
            const std::size_t* out_shape, std::size_t rank) {
  PMDM_DISPATCH(sum_to, x, out, x_shape, out_shape, rank);
}

void gather_rows(const double* table, const std::int64_t* idx, double* out,
                 std::size_t count, std::size_t width) {
  PMDM_DISPATCH(gather_rows, table, idx, out, count, width);
}

void scatter_add_rows(double* table, const std::int64_t* idx, const double* g,
                      std::size_t count, std::size_t width) {
  // Duplicate indices make this a data race under threads; row counts are
  // small, so it stays serial in both backends.
  for (std::size_t i = 0; i < count; ++i) {
    double* row = table + static_cast<std::size_t>(idx[i]) * width;
    const double* grow = g + i * width;
    for (std::size_t j = 0; j < width; ++j) row[j] += grow[j];
  }
}

void nodewise_linear(const double* x, const double* theta, double* out,
                     std::size_t batch, std::size_t nodes, std::size_t in_w,
                     std::size_t out_w) {
  PMDM_DISPATCH(nodewise_linear, x, theta, out, batch, nodes, in_w, out_w);
}

void nodewise_linear_backward(const double* x, const double* theta,
                              const double* gy, double* gx, double* gtheta,
                              std::size_t batch, std::size_t nodes,
                              std::size_t in_w, std::size_t out_w) {
  PMDM_DISPATCH(nodewise_linear_backward, x, theta, gy, gx, gtheta, batch,
                nodes, in_w, out_w);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  PMDM_DISPATCH(axpy, alpha, x, y, n);
}

void scale_inplace(double alpha, double* x, std::size_t n) {
  PMDM_DISPATCH(scale_inplace, alpha, x, n);
}

void adam_update(double* p, const double* g, double* m, double* v,
                 std::size_t n, double lr, double beta1, double beta2,
                 double eps, double bias1, double bias2) {
  PMDM_DISPATCH(adam_update, p, g, m, v, n, lr, beta1, beta2, eps, bias1,
                bias2);
}

#undef PMDM_DISPATCH

}  // namespace pmdm::kernels
