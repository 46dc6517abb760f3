#include <cmath>
#include <cstring>
#include <algorithm>

#include "kernels_detail.hpp"

// Reference backend: straight loops, no threading. The OpenMP backend must
// match these results bit for bit.

namespace pmdm::kernels::detail {

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
    case UnaryKind::sigmoid: return ref * (1.0 - ref);        // ref = y
    case UnaryKind::tanh_fn: return 1.0 - ref * ref;          // ref = y
    case UnaryKind::relu: return ref > 0.0 ? 1.0 : 0.0;       // ref = x
    case UnaryKind::abs_fn: return ref > 0.0 ? 1.0 : (ref < 0.0 ? -1.0 : 0.0);
    case UnaryKind::exp_fn: return std::exp(ref);             // ref = x
  }
  return 0.0;
}

inline void matmul_block(const double* a, const double* b, double* out,
                         std::size_t m, std::size_t k, std::size_t n,
                         bool trans_a, bool trans_b, bool accumulate) {
  if (!accumulate) std::memset(out, 0, m * n * sizeof(double));
  // Accumulation over the contraction axis is ascending for every output
  // element in all four layout variants.
  if (!trans_a && !trans_b) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double av = a[i * k + kk];
        const double* brow = b + kk * n;
        double* orow = out + i * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
  } else if (!trans_a && trans_b) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double acc = out[i * n + j];
        const double* arow = a + i * k;
        const double* brow = b + j * k;
        for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
        out[i * n + j] = acc;
      }
  } else if (trans_a && !trans_b) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double av = a[kk * m + i];
        const double* brow = b + kk * n;
        double* orow = out + i * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double acc = out[i * n + j];
        for (std::size_t kk = 0; kk < k; ++kk)
          acc += a[kk * m + i] * b[j * k + kk];
        out[i * n + j] = acc;
      }
  }
}

}  // namespace

void matmul_serial(const double* a, const double* b, double* out,
                   const MatmulSpec& s) {
  for (std::size_t t = 0; t < s.batch; ++t) {
    matmul_block(a + s.a_offsets[t], b + s.b_offsets[t], out + t * s.m * s.n,
                 s.m, s.k, s.n, s.trans_a, s.trans_b, s.accumulate);
  }
}

void broadcast_binary_serial(BinaryKind kind, const double* a, const double* b,
                             double* out, const std::size_t* shape,
                             const std::size_t* a_strides,
                             const std::size_t* b_strides, std::size_t rank) {
  std::size_t n = 1;
  for (std::size_t d = 0; d < rank; ++d) n *= shape[d];
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t rem = flat, ao = 0, bo = 0;
    for (std::size_t d = rank; d-- > 0;) {
      const std::size_t id = rem % shape[d];
      rem /= shape[d];
      ao += id * a_strides[d];
      bo += id * b_strides[d];
    }
    out[flat] = apply_binary(kind, a[ao], b[bo]);
  }
}

void unary_serial(UnaryKind kind, const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = apply_unary(kind, x[i]);
}

void unary_backward_serial(UnaryKind kind, const double* ref, const double* gy,
                           double* gx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) gx[i] += gy[i] * unary_grad(kind, ref[i]);
}

void softmax_rows_serial(const double* x, double* y, std::size_t rows,
                         std::size_t width) {
  for (std::size_t r = 0; r < rows; ++r) {
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

void softmax_backward_rows_serial(const double* y, const double* gy, double* gx,
                                  std::size_t rows, std::size_t width) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* yr = y + r * width;
    const double* gr = gy + r * width;
    double dot = 0.0;
    for (std::size_t i = 0; i < width; ++i) dot += yr[i] * gr[i];
    double* xr = gx + r * width;
    for (std::size_t i = 0; i < width; ++i) xr[i] += yr[i] * (gr[i] - dot);
  }
}

double sum_all_serial(const double* x, std::size_t n) {
  // Fixed chunking; see kernels.hpp.
  const std::size_t chunks = (n + kSumChunk - 1) / kSumChunk;
  double total = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t lo = c * kSumChunk;
    const std::size_t hi = std::min(n, lo + kSumChunk);
    double part = 0.0;
    for (std::size_t i = lo; i < hi; ++i) part += x[i];
    total += part;
  }
  return total;
}

void sum_to_serial(const double* x, double* out, const std::size_t* x_shape,
                   const std::size_t* out_shape, std::size_t rank) {
  std::size_t n_out = 1, n_red = 1;
  for (std::size_t d = 0; d < rank; ++d) {
    n_out *= out_shape[d];
    if (out_shape[d] == 1 && x_shape[d] > 1) n_red *= x_shape[d];
  }
  // Per output element, walk the reduced axes in ascending index order.
  std::size_t x_strides[16];
  std::size_t acc = 1;
  for (std::size_t d = rank; d-- > 0;) {
    x_strides[d] = acc;
    acc *= x_shape[d];
  }
  for (std::size_t flat = 0; flat < n_out; ++flat) {
    std::size_t rem = flat, base = 0;
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

void gather_rows_serial(const double* table, const std::int64_t* idx,
                        double* out, std::size_t count, std::size_t width) {
  for (std::size_t i = 0; i < count; ++i)
    std::memcpy(out + i * width, table + static_cast<std::size_t>(idx[i]) * width,
                width * sizeof(double));
}

void nodewise_linear_serial(const double* x, const double* theta, double* out,
                            std::size_t batch, std::size_t nodes,
                            std::size_t in_w, std::size_t out_w) {
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < nodes; ++i) {
      const double* xr = x + (b * nodes + i) * in_w;
      const double* th = theta + i * in_w * out_w;
      double* orow = out + (b * nodes + i) * out_w;
      std::memset(orow, 0, out_w * sizeof(double));
      for (std::size_t kk = 0; kk < in_w; ++kk) {
        const double xv = xr[kk];
        const double* trow = th + kk * out_w;
        for (std::size_t f = 0; f < out_w; ++f) orow[f] += xv * trow[f];
      }
    }
}

void nodewise_linear_backward_serial(const double* x, const double* theta,
                                     const double* gy, double* gx,
                                     double* gtheta, std::size_t batch,
                                     std::size_t nodes, std::size_t in_w,
                                     std::size_t out_w) {
  if (gx) {
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < nodes; ++i) {
        const double* grow = gy + (b * nodes + i) * out_w;
        const double* th = theta + i * in_w * out_w;
        double* xrow = gx + (b * nodes + i) * in_w;
        for (std::size_t kk = 0; kk < in_w; ++kk) {
          double acc = 0.0;
          const double* trow = th + kk * out_w;
          for (std::size_t f = 0; f < out_w; ++f) acc += grow[f] * trow[f];
          xrow[kk] += acc;
        }
      }
  }
  if (gtheta) {
    // Batch accumulation stays ascending in b for every theta entry.
    for (std::size_t i = 0; i < nodes; ++i) {
      double* th = gtheta + i * in_w * out_w;
      for (std::size_t b = 0; b < batch; ++b) {
        const double* xr = x + (b * nodes + i) * in_w;
        const double* grow = gy + (b * nodes + i) * out_w;
        for (std::size_t kk = 0; kk < in_w; ++kk) {
          const double xv = xr[kk];
          double* trow = th + kk * out_w;
          for (std::size_t f = 0; f < out_w; ++f) trow[f] += xv * grow[f];
        }
      }
    }
  }
}

void axpy_serial(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_inplace_serial(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void adam_update_serial(double* p, const double* g, double* m, double* v,
                        std::size_t n, double lr, double beta1, double beta2,
                        double eps, double bias1, double bias2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = m[i] / bias1;
    const double vhat = v[i] / bias2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace pmdm::kernels::detail
