#include <cmath>
#include <cstring>
#include <algorithm>
#include <vector>

#include "kernels_detail.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

// OpenMP backend. Parallel loops run over independent output elements only;
// every per-element accumulation keeps the serial order, so results are
// bit-identical to kernels_serial.cpp for any thread count. Tiny workloads
// stay on the calling thread: forking a team costs more than the loop.

namespace pmdm::kernels::detail {

namespace {
constexpr std::size_t kParallelCutoff = 16384;  // elements or MACs
}

namespace {

inline double apply_binary(BinaryKind kind, double a, double b) {
  switch (kind) {
    case BinaryKind::add: return a + b;
    case BinaryKind::sub: return a - b;
    case BinaryKind::mul: return a * b;
  }
  return 0.0;
}

inline double apply_unary(UnaryKind kind, double x) {
  switch (kind) {
    case UnaryKind::neg: return -x;
    case UnaryKind::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case UnaryKind::tanh_fn: return std::tanh(x);
    case UnaryKind::relu: return x > 0.0 ? x : 0.0;
    case UnaryKind::abs_fn: return std::fabs(x);
    case UnaryKind::exp_fn: return std::exp(x);
  }
  return 0.0;
}

inline double unary_grad(UnaryKind kind, double ref) {
  switch (kind) {
    case UnaryKind::neg: return -1.0;
    case UnaryKind::sigmoid: return ref * (1.0 - ref);
    case UnaryKind::tanh_fn: return 1.0 - ref * ref;
    case UnaryKind::relu: return ref > 0.0 ? 1.0 : 0.0;
    case UnaryKind::abs_fn: return ref > 0.0 ? 1.0 : (ref < 0.0 ? -1.0 : 0.0);
    case UnaryKind::exp_fn: return std::exp(ref);
  }
  return 0.0;
}

inline void matmul_row(const double* a, const double* b, double* orow,
                       std::size_t i, std::size_t m, std::size_t k,
                       std::size_t n, bool trans_a, bool trans_b,
                       bool accumulate) {
  if (!accumulate) std::memset(orow, 0, n * sizeof(double));
  if (!trans_b) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = trans_a ? a[kk * m + i] : a[i * k + kk];
      const double* brow = b + kk * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = orow[j];
      const double* brow = b + j * k;
      if (!trans_a) {
        const double* arow = a + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
      } else {
        for (std::size_t kk = 0; kk < k; ++kk) acc += a[kk * m + i] * brow[kk];
      }
      orow[j] = acc;
    }
  }
}

}  // namespace

void matmul_omp(const double* a, const double* b, double* out,
                const MatmulSpec& s) {
  const std::int64_t total = static_cast<std::int64_t>(s.batch * s.m);
  const bool par = s.batch * s.m * s.k * s.n > kParallelCutoff;
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t r = 0; r < total; ++r) {
    const std::size_t t = static_cast<std::size_t>(r) / s.m;
    const std::size_t i = static_cast<std::size_t>(r) % s.m;
    matmul_row(a + s.a_offsets[t], b + s.b_offsets[t],
               out + (t * s.m + i) * s.n, i, s.m, s.k, s.n, s.trans_a,
               s.trans_b, s.accumulate);
  }
}

void broadcast_binary_omp(BinaryKind kind, const double* a, const double* b,
                          double* out, const std::size_t* shape,
                          const std::size_t* a_strides,
                          const std::size_t* b_strides, std::size_t rank) {
  std::size_t n = 1;
  for (std::size_t d = 0; d < rank; ++d) n *= shape[d];
#pragma omp parallel for schedule(static) if (n > kParallelCutoff)
  for (std::int64_t flat = 0; flat < static_cast<std::int64_t>(n); ++flat) {
    std::size_t rem = static_cast<std::size_t>(flat), ao = 0, bo = 0;
    for (std::size_t d = rank; d-- > 0;) {
      const std::size_t id = rem % shape[d];
      rem /= shape[d];
      ao += id * a_strides[d];
      bo += id * b_strides[d];
    }
    out[flat] = apply_binary(kind, a[ao], b[bo]);
  }
}

void unary_omp(UnaryKind kind, const double* x, double* out, std::size_t n) {
#pragma omp parallel for schedule(static) if (n > kParallelCutoff)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
    out[i] = apply_unary(kind, x[i]);
}

void unary_backward_omp(UnaryKind kind, const double* ref, const double* gy,
                        double* gx, std::size_t n) {
#pragma omp parallel for schedule(static) if (n > kParallelCutoff)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
    gx[i] += gy[i] * unary_grad(kind, ref[i]);
}

void softmax_rows_omp(const double* x, double* y, std::size_t rows,
                      std::size_t width) {
#pragma omp parallel for schedule(static) if (rows * width > kParallelCutoff)
  for (std::int64_t r = 0; r < static_cast<std::int64_t>(rows); ++r) {
    const double* xr = x + r * width;
    double* yr = y + r * width;
    double mx = xr[0];
    for (std::size_t i = 1; i < width; ++i) mx = std::max(mx, xr[i]);
    double denom = 0.0;
    for (std::size_t i = 0; i < width; ++i) {
      yr[i] = std::exp(xr[i] - mx);
      denom += yr[i];
    }
    for (std::size_t i = 0; i < width; ++i) yr[i] /= denom;
  }
}

void softmax_backward_rows_omp(const double* y, const double* gy, double* gx,
                               std::size_t rows, std::size_t width) {
#pragma omp parallel for schedule(static) if (rows * width > kParallelCutoff)
  for (std::int64_t r = 0; r < static_cast<std::int64_t>(rows); ++r) {
    const double* yr = y + r * width;
    const double* gr = gy + r * width;
    double dot = 0.0;
    for (std::size_t i = 0; i < width; ++i) dot += yr[i] * gr[i];
    double* xr = gx + r * width;
    for (std::size_t i = 0; i < width; ++i) xr[i] += yr[i] * (gr[i] - dot);
  }
}

double sum_all_omp(const double* x, std::size_t n) {
  const std::size_t chunks = (n + kSumChunk - 1) / kSumChunk;
  std::vector<double> parts(chunks);
#pragma omp parallel for schedule(static) if (chunks > 1)
  for (std::int64_t c = 0; c < static_cast<std::int64_t>(chunks); ++c) {
    const std::size_t lo = static_cast<std::size_t>(c) * kSumChunk;
    const std::size_t hi = std::min(n, lo + kSumChunk);
    double part = 0.0;
    for (std::size_t i = lo; i < hi; ++i) part += x[i];
    parts[c] = part;
  }
  double total = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) total += parts[c];
  return total;
}

void sum_to_omp(const double* x, double* out, const std::size_t* x_shape,
                const std::size_t* out_shape, std::size_t rank) {
  std::size_t n_out = 1, n_red = 1;
  for (std::size_t d = 0; d < rank; ++d) {
    n_out *= out_shape[d];
    if (out_shape[d] == 1 && x_shape[d] > 1) n_red *= x_shape[d];
  }
  std::size_t x_strides[16];
  std::size_t acc = 1;
  for (std::size_t d = rank; d-- > 0;) {
    x_strides[d] = acc;
    acc *= x_shape[d];
  }
#pragma omp parallel for schedule(static) if (n_out * n_red > kParallelCutoff)
  for (std::int64_t flat = 0; flat < static_cast<std::int64_t>(n_out); ++flat) {
    std::size_t rem = static_cast<std::size_t>(flat), base = 0;
    for (std::size_t d = rank; d-- > 0;) {
      base += (rem % out_shape[d]) * x_strides[d];
      rem /= out_shape[d];
    }
    double s = 0.0;
    for (std::size_t r = 0; r < n_red; ++r) {
      std::size_t rr = r, off = base;
      for (std::size_t d = rank; d-- > 0;) {
        if (out_shape[d] == 1 && x_shape[d] > 1) {
          off += (rr % x_shape[d]) * x_strides[d];
          rr /= x_shape[d];
        }
      }
      s += x[off];
    }
    out[flat] += s;
  }
}

void gather_rows_omp(const double* table, const std::int64_t* idx, double* out,
                     std::size_t count, std::size_t width) {
#pragma omp parallel for schedule(static) if (count * width > kParallelCutoff)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(count); ++i)
    std::memcpy(out + i * width,
                table + static_cast<std::size_t>(idx[i]) * width,
                width * sizeof(double));
}

void nodewise_linear_omp(const double* x, const double* theta, double* out,
                         std::size_t batch, std::size_t nodes,
                         std::size_t in_w, std::size_t out_w) {
  const std::int64_t total = static_cast<std::int64_t>(batch * nodes);
  const bool par = batch * nodes * in_w * out_w > kParallelCutoff;
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t r = 0; r < total; ++r) {
    const std::size_t i = static_cast<std::size_t>(r) % nodes;
    const double* xr = x + r * in_w;
    const double* th = theta + i * in_w * out_w;
    double* orow = out + r * out_w;
    std::memset(orow, 0, out_w * sizeof(double));
    for (std::size_t kk = 0; kk < in_w; ++kk) {
      const double xv = xr[kk];
      const double* trow = th + kk * out_w;
      for (std::size_t f = 0; f < out_w; ++f) orow[f] += xv * trow[f];
    }
  }
}

void nodewise_linear_backward_omp(const double* x, const double* theta,
                                  const double* gy, double* gx, double* gtheta,
                                  std::size_t batch, std::size_t nodes,
                                  std::size_t in_w, std::size_t out_w) {
  if (gx) {
    const std::int64_t total = static_cast<std::int64_t>(batch * nodes);
    const bool par = batch * nodes * in_w * out_w > kParallelCutoff;
#pragma omp parallel for schedule(static) if (par)
    for (std::int64_t r = 0; r < total; ++r) {
      const std::size_t i = static_cast<std::size_t>(r) % nodes;
      const double* grow = gy + r * out_w;
      const double* th = theta + i * in_w * out_w;
      double* xrow = gx + r * in_w;
      for (std::size_t kk = 0; kk < in_w; ++kk) {
        double acc = 0.0;
        const double* trow = th + kk * out_w;
        for (std::size_t f = 0; f < out_w; ++f) acc += grow[f] * trow[f];
        xrow[kk] += acc;
      }
    }
  }
  if (gtheta) {
    // Parallel over nodes; the batch sum per theta entry stays serial.
    const bool par = batch * nodes * in_w * out_w > kParallelCutoff;
#pragma omp parallel for schedule(static) if (par)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(nodes); ++i) {
      double* th = gtheta + i * in_w * out_w;
      for (std::size_t b = 0; b < batch; ++b) {
        const double* xr = x + (b * nodes + static_cast<std::size_t>(i)) * in_w;
        const double* grow =
            gy + (b * nodes + static_cast<std::size_t>(i)) * out_w;
        for (std::size_t kk = 0; kk < in_w; ++kk) {
          const double xv = xr[kk];
          double* trow = th + kk * out_w;
          for (std::size_t f = 0; f < out_w; ++f) trow[f] += xv * grow[f];
        }
      }
    }
  }
}

void axpy_omp(double alpha, const double* x, double* y, std::size_t n) {
#pragma omp parallel for schedule(static) if (n > kParallelCutoff)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
    y[i] += alpha * x[i];
}

void scale_inplace_omp(double alpha, double* x, std::size_t n) {
#pragma omp parallel for schedule(static) if (n > kParallelCutoff)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) x[i] *= alpha;
}

void adam_update_omp(double* p, const double* g, double* m, double* v,
                     std::size_t n, double lr, double beta1, double beta2,
                     double eps, double bias1, double bias2) {
#pragma omp parallel for schedule(static) if (n > kParallelCutoff)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = m[i] / bias1;
    const double vhat = v[i] / bias2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace pmdm::kernels::detail
