#include "pmdm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "pmdm/kernels.hpp"

namespace pmdm::ops {

namespace {

namespace krn = pmdm::kernels;

bool needs_grad(const Tensor& t) { return t.requires_grad() || t.node(); }

bool record(std::initializer_list<const Tensor*> parents) {
  if (!grad_enabled()) return false;
  for (const Tensor* p : parents)
    if (needs_grad(*p)) return true;
  return false;
}

void attach(Tensor& out, std::vector<Tensor> parents,
            std::function<void(const Tensor&)> backward) {
  out.set_requires_grad(true);
  auto node = std::make_shared<GraphNode>();
  node->parents = std::move(parents);
  node->backward = std::move(backward);
  out.set_node(std::move(node));
}

Shape pad_shape(const Shape& s, std::size_t rank) {
  Shape out(rank, 1);
  std::copy(s.begin(), s.end(), out.begin() + (rank - s.size()));
  return out;
}

Shape broadcast_shape(const Shape& a, const Shape& b, const char* what) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape pa = pad_shape(a, rank), pb = pad_shape(b, rank), out(rank);
  for (std::size_t d = 0; d < rank; ++d) {
    if (pa[d] == pb[d] || pa[d] == 1 || pb[d] == 1) {
      out[d] = std::max(pa[d], pb[d]);
    } else {
      throw std::invalid_argument(std::string(what) + ": shapes " +
                                  shape_str(a) + " and " + shape_str(b) +
                                  " do not broadcast");
    }
  }
  return out;
}

std::vector<std::size_t> broadcast_strides(const Shape& padded,
                                           const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t acc = 1;
  for (std::size_t d = out.size(); d-- > 0;) {
    strides[d] = (padded[d] == 1 && out[d] != 1) ? 0 : acc;
    acc *= padded[d];
  }
  return strides;
}

// Accumulate gy (shaped like `out_shape`) into target's grad, reducing over
// broadcast axes.
void reduce_into_grad(Tensor& target, const std::vector<double>& gy,
                      const Shape& out_shape) {
  const Shape padded = pad_shape(target.shape(), out_shape.size());
  if (padded == out_shape) {
    krn::axpy(1.0, gy.data(), target.grad().data(), gy.size());
    return;
  }
  krn::sum_to(gy.data(), target.grad().data(), out_shape.data(), padded.data(),
              out_shape.size());
}

Tensor binary_op(krn::BinaryKind kind, const Tensor& a, const Tensor& b,
                 const char* what) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape(), what);
  Tensor out = Tensor::zeros(out_shape);
  const Shape pa = pad_shape(a.shape(), out_shape.size());
  const Shape pb = pad_shape(b.shape(), out_shape.size());
  const auto sa = broadcast_strides(pa, out_shape);
  const auto sb = broadcast_strides(pb, out_shape);
  if (out_shape.empty()) {
    double r = 0.0;
    switch (kind) {
      case krn::BinaryKind::add: r = a.values()[0] + b.values()[0]; break;
      case krn::BinaryKind::sub: r = a.values()[0] - b.values()[0]; break;
      case krn::BinaryKind::mul: r = a.values()[0] * b.values()[0]; break;
    }
    out.mutable_values()[0] = r;
  } else {
    krn::broadcast_binary(kind, a.data(), b.data(), out.mutable_values().data(),
                          out_shape.data(), sa.data(), sb.data(),
                          out_shape.size());
  }

  if (record({&a, &b})) {
    Tensor ta = a, tb = b;
    attach(out, {a, b}, [kind, ta, tb, out_shape](const Tensor& o) mutable {
      const std::vector<double>& gy = *o.grad_if_present();
      switch (kind) {
        case krn::BinaryKind::add:
          if (needs_grad(ta)) reduce_into_grad(ta, gy, out_shape);
          if (needs_grad(tb)) reduce_into_grad(tb, gy, out_shape);
          break;
        case krn::BinaryKind::sub: {
          if (needs_grad(ta)) reduce_into_grad(ta, gy, out_shape);
          if (needs_grad(tb)) {
            std::vector<double> ng(gy.size());
            krn::unary(krn::UnaryKind::neg, gy.data(), ng.data(), gy.size());
            reduce_into_grad(tb, ng, out_shape);
          }
          break;
        }
        case krn::BinaryKind::mul: {
          const std::size_t rank = out_shape.size();
          auto side = [&](Tensor& dst, const Tensor& other) {
            std::vector<double> prod(gy.size());
            if (rank == 0) {
              prod[0] = gy[0] * other.values()[0];
            } else {
              const Shape po = pad_shape(other.shape(), rank);
              const auto so = broadcast_strides(po, out_shape);
              std::vector<std::size_t> unit(rank, 0);
              std::size_t acc = 1;
              for (std::size_t d = rank; d-- > 0;) {
                unit[d] = acc;
                acc *= out_shape[d];
              }
              krn::broadcast_binary(krn::BinaryKind::mul, gy.data(),
                                    other.data(), prod.data(),
                                    out_shape.data(), unit.data(), so.data(),
                                    rank);
            }
            reduce_into_grad(dst, prod, out_shape);
          };
          if (needs_grad(ta)) side(ta, tb);
          if (needs_grad(tb)) side(tb, ta);
          break;
        }
      }
    });
  }
  return out;
}

Tensor unary_op(krn::UnaryKind kind, const Tensor& x, bool ref_is_output) {
  Tensor out = Tensor::zeros(x.shape());
  krn::unary(kind, x.data(), out.mutable_values().data(), x.size());
  if (record({&x})) {
    Tensor tx = x;
    attach(out, {x}, [kind, tx, ref_is_output](const Tensor& o) mutable {
      const std::vector<double>& gy = *o.grad_if_present();
      const double* ref = ref_is_output ? o.data() : tx.data();
      krn::unary_backward(kind, ref, gy.data(), tx.grad().data(), gy.size());
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(krn::BinaryKind::add, a, b, "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(krn::BinaryKind::sub, a, b, "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(krn::BinaryKind::mul, a, b, "mul");
}

Tensor neg(const Tensor& x) {
  return unary_op(krn::UnaryKind::neg, x, false);
}

Tensor affine_const(const Tensor& x, double a, double b) {
  Tensor out = Tensor::zeros(x.shape());
  const std::vector<double>& xv = x.values();
  std::vector<double>& ov = out.mutable_values();
  for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = a * xv[i] + b;
  if (record({&x})) {
    Tensor tx = x;
    attach(out, {x}, [a, tx](const Tensor& o) mutable {
      const std::vector<double>& gy = *o.grad_if_present();
      krn::axpy(a, gy.data(), tx.grad().data(), gy.size());
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(krn::UnaryKind::sigmoid, x, true);
}

Tensor tanh_op(const Tensor& x) {
  return unary_op(krn::UnaryKind::tanh_fn, x, true);
}

Tensor relu(const Tensor& x) {
  return unary_op(krn::UnaryKind::relu, x, false);
}

Tensor abs_op(const Tensor& x) {
  return unary_op(krn::UnaryKind::abs_fn, x, false);
}

namespace {

struct MatmulPlan {
  Shape out_shape;
  std::size_t batch = 1, m = 0, k = 0, n = 0;
  std::vector<std::size_t> a_off, b_off;
  bool a_broadcast = false, b_broadcast = false;
  Shape lead;  // leading (batch) extents of the output
};

MatmulPlan plan_matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2)
    throw std::invalid_argument("matmul: operands must have rank >= 2, got " +
                                shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  MatmulPlan p;
  p.m = sa[sa.size() - 2];
  p.k = sa[sa.size() - 1];
  const std::size_t kb = sb[sb.size() - 2];
  p.n = sb[sb.size() - 1];
  if (p.k != kb)
    throw std::invalid_argument("matmul: inner extents differ, " +
                                shape_str(sa) + " x " + shape_str(sb));
  const Shape la(sa.begin(), sa.end() - 2), lb(sb.begin(), sb.end() - 2);
  p.lead = broadcast_shape(la, lb, "matmul");
  p.out_shape = p.lead;
  p.out_shape.push_back(p.m);
  p.out_shape.push_back(p.n);
  p.batch = numel(p.lead);

  const Shape pa = pad_shape(la, p.lead.size());
  const Shape pb = pad_shape(lb, p.lead.size());
  p.a_broadcast = pa != p.lead;
  p.b_broadcast = pb != p.lead;
  auto stra = broadcast_strides(pa, p.lead);
  auto strb = broadcast_strides(pb, p.lead);
  p.a_off.resize(p.batch);
  p.b_off.resize(p.batch);
  const std::size_t a_block = p.m * p.k, b_block = p.k * p.n;
  for (std::size_t t = 0; t < p.batch; ++t) {
    std::size_t rem = t, ao = 0, bo = 0;
    for (std::size_t d = p.lead.size(); d-- > 0;) {
      const std::size_t id = rem % p.lead[d];
      rem /= p.lead[d];
      ao += id * stra[d];
      bo += id * strb[d];
    }
    p.a_off[t] = ao * a_block;
    p.b_off[t] = bo * b_block;
  }
  return p;
}

std::vector<std::size_t> dense_offsets(std::size_t batch, std::size_t block) {
  std::vector<std::size_t> off(batch);
  for (std::size_t t = 0; t < batch; ++t) off[t] = t * block;
  return off;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  MatmulPlan p = plan_matmul(a, b);
  Tensor out = Tensor::zeros(p.out_shape);
  krn::MatmulSpec spec;
  spec.batch = p.batch;
  spec.m = p.m;
  spec.k = p.k;
  spec.n = p.n;
  spec.a_offsets = p.a_off.data();
  spec.b_offsets = p.b_off.data();
  krn::matmul(a.data(), b.data(), out.mutable_values().data(), spec);

  if (record({&a, &b})) {
    Tensor ta = a, tb = b;
    attach(out, {a, b}, [p = std::move(p), ta, tb](const Tensor& o) mutable {
      const double* gy = o.grad_if_present()->data();
      const auto gy_off = dense_offsets(p.batch, p.m * p.n);
      if (needs_grad(ta)) {
        // ga = gy * b^T
        krn::MatmulSpec s;
        s.batch = p.batch;
        s.m = p.m;
        s.k = p.n;
        s.n = p.k;
        s.a_offsets = gy_off.data();
        s.b_offsets = p.b_off.data();
        s.trans_b = true;
        if (!p.a_broadcast) {
          s.accumulate = true;
          // Blocks are disjoint, so accumulating in place is race-free.
          std::vector<std::size_t> dst = p.a_off;
          // grad blocks laid out like the forward operand
          // (a_off already gives them)
          krn::MatmulSpec sd = s;
          // kernel writes at t*m*n; remap by computing into a temp when
          // offsets are not dense
          bool dense = true;
          for (std::size_t t = 0; t < p.batch; ++t)
            if (dst[t] != t * p.m * p.k) { dense = false; break; }
          if (dense) {
            krn::matmul(gy, tb.data(), ta.grad().data(), sd);
          } else {
            std::vector<double> tmp(p.batch * p.m * p.k, 0.0);
            sd.accumulate = false;
            krn::matmul(gy, tb.data(), tmp.data(), sd);
            for (std::size_t t = 0; t < p.batch; ++t)
              krn::axpy(1.0, tmp.data() + t * p.m * p.k,
                        ta.grad().data() + dst[t], p.m * p.k);
          }
        } else {
          Shape full = p.lead;
          full.push_back(p.m);
          full.push_back(p.k);
          std::vector<double> tmp(numel(full), 0.0);
          krn::matmul(gy, tb.data(), tmp.data(), s);
          const Shape padded = pad_shape(ta.shape(), full.size());
          krn::sum_to(tmp.data(), ta.grad().data(), full.data(), padded.data(),
                      full.size());
        }
      }
      if (needs_grad(tb)) {
        // gb = a^T * gy
        krn::MatmulSpec s;
        s.batch = p.batch;
        s.m = p.k;
        s.k = p.m;
        s.n = p.n;
        s.a_offsets = p.a_off.data();
        s.b_offsets = gy_off.data();
        s.trans_a = true;
        if (!p.b_broadcast) {
          bool dense = true;
          for (std::size_t t = 0; t < p.batch; ++t)
            if (p.b_off[t] != t * p.k * p.n) { dense = false; break; }
          if (dense) {
            s.accumulate = true;
            krn::matmul(ta.data(), gy, tb.grad().data(), s);
          } else {
            std::vector<double> tmp(p.batch * p.k * p.n, 0.0);
            krn::matmul(ta.data(), gy, tmp.data(), s);
            for (std::size_t t = 0; t < p.batch; ++t)
              krn::axpy(1.0, tmp.data() + t * p.k * p.n,
                        tb.grad().data() + p.b_off[t], p.k * p.n);
          }
        } else {
          Shape full = p.lead;
          full.push_back(p.k);
          full.push_back(p.n);
          std::vector<double> tmp(numel(full), 0.0);
          krn::matmul(ta.data(), gy, tmp.data(), s);
          const Shape padded = pad_shape(tb.shape(), full.size());
          krn::sum_to(tmp.data(), tb.grad().data(), full.data(), padded.data(),
                      full.size());
        }
      }
    });
  }
  return out;
}

namespace {

void transpose_copy(const double* x, double* y, std::size_t batch,
                    std::size_t rows, std::size_t cols) {
  for (std::size_t t = 0; t < batch; ++t) {
    const double* xb = x + t * rows * cols;
    double* yb = y + t * rows * cols;
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) yb[j * rows + i] = xb[i * cols + j];
  }
}

}  // namespace

Tensor transpose_last2(const Tensor& x) {
  if (x.rank() < 2)
    throw std::invalid_argument("transpose_last2: rank >= 2 required, got " +
                                shape_str(x.shape()));
  Shape out_shape = x.shape();
  std::swap(out_shape[out_shape.size() - 1], out_shape[out_shape.size() - 2]);
  const std::size_t rows = x.shape()[x.rank() - 2];
  const std::size_t cols = x.shape()[x.rank() - 1];
  const std::size_t batch = x.size() / (rows * cols);
  Tensor out = Tensor::zeros(out_shape);
  transpose_copy(x.data(), out.mutable_values().data(), batch, rows, cols);
  if (record({&x})) {
    Tensor tx = x;
    attach(out, {x}, [tx, batch, rows, cols](const Tensor& o) mutable {
      const std::vector<double>& gy = *o.grad_if_present();
      std::vector<double> tmp(gy.size());
      transpose_copy(gy.data(), tmp.data(), batch, cols, rows);
      krn::axpy(1.0, tmp.data(), tx.grad().data(), tmp.size());
    });
  }
  return out;
}

Tensor softmax_last(const Tensor& x) {
  if (x.rank() < 1 || x.shape().back() < 1)
    throw std::invalid_argument("softmax_last: last axis must be non-empty");
  const std::size_t width = x.shape().back();
  const std::size_t rows = x.size() / width;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x.values()[i]))
      throw std::runtime_error("softmax_last: non-finite input in slice " +
                               std::to_string(i / width));
  }
  Tensor out = Tensor::zeros(x.shape());
  krn::softmax_rows(x.data(), out.mutable_values().data(), rows, width);
  if (record({&x})) {
    Tensor tx = x;
    attach(out, {x}, [tx, rows, width](const Tensor& o) mutable {
      krn::softmax_backward_rows(o.data(), o.grad_if_present()->data(),
                                 tx.grad().data(), rows, width);
    });
  }
  return out;
}

Tensor sum_all(const Tensor& x) {
  Tensor out = Tensor::scalar(krn::sum_all(x.data(), x.size()));
  if (record({&x})) {
    Tensor tx = x;
    attach(out, {x}, [tx](const Tensor& o) mutable {
      const double g = (*o.grad_if_present())[0];
      std::vector<double>& gx = tx.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
  }
  return out;
}

Tensor mean_all(const Tensor& x) {
  if (x.size() == 0) throw std::invalid_argument("mean_all: empty tensor");
  return affine_const(sum_all(x), 1.0 / static_cast<double>(x.size()), 0.0);
}

Tensor sum_last(const Tensor& x) {
  if (x.rank() < 1) throw std::invalid_argument("sum_last: rank-0 input");
  const std::size_t width = x.shape().back();
  const std::size_t rows = x.size() / width;
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  Tensor out = Tensor::zeros(out_shape);
  std::vector<double>& ov = out.mutable_values();
  const double* xv = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < width; ++i) s += xv[r * width + i];
    ov[r] = s;
  }
  if (record({&x})) {
    Tensor tx = x;
    attach(out, {x}, [tx, rows, width](const Tensor& o) mutable {
      const double* gy = o.grad_if_present()->data();
      std::vector<double>& gx = tx.grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < width; ++i) gx[r * width + i] += gy[r];
    });
  }
  return out;
}

Tensor rsqrt_mask(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  const std::vector<double>& xv = x.values();
  std::vector<double>& ov = out.mutable_values();
  for (std::size_t i = 0; i < xv.size(); ++i)
    ov[i] = xv[i] > 0.0 ? 1.0 / std::sqrt(xv[i]) : 0.0;
  if (record({&x})) {
    Tensor tx = x;
    attach(out, {x}, [tx](const Tensor& o) mutable {
      const std::vector<double>& gy = *o.grad_if_present();
      const std::vector<double>& xv = tx.values();
      std::vector<double>& gx = tx.grad();
      for (std::size_t i = 0; i < xv.size(); ++i) {
        if (xv[i] > 0.0)
          gx[i] += gy[i] * (-0.5) * std::pow(xv[i], -1.5);
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size())
    throw std::invalid_argument("reshape: cannot view " +
                                shape_str(x.shape()) + " as " +
                                shape_str(shape));
  Tensor out = Tensor::from_values(std::move(shape), x.values());
  if (record({&x})) {
    Tensor tx = x;
    attach(out, {x}, [tx](const Tensor& o) mutable {
      krn::axpy(1.0, o.grad_if_present()->data(), tx.grad().data(),
                tx.size());
    });
  }
  return out;
}

Tensor unsqueeze(const Tensor& x, std::size_t axis) {
  if (axis > x.rank()) throw std::invalid_argument("unsqueeze: axis out of range");
  Shape s = x.shape();
  s.insert(s.begin() + static_cast<std::ptrdiff_t>(axis), 1);
  return reshape(x, std::move(s));
}

Tensor expand(const Tensor& x, const Shape& shape) {
  const Shape padded = pad_shape(x.shape(), shape.size());
  for (std::size_t d = 0; d < shape.size(); ++d) {
    if (padded[d] != shape[d] && padded[d] != 1)
      throw std::invalid_argument("expand: " + shape_str(x.shape()) +
                                  " does not broadcast to " + shape_str(shape));
  }
  Tensor out = Tensor::zeros(shape);
  const auto sx = broadcast_strides(padded, shape);
  std::vector<double>& ov = out.mutable_values();
  const double* xv = x.data();
  const std::size_t n = out.size();
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t rem = flat, xo = 0;
    for (std::size_t d = shape.size(); d-- > 0;) {
      xo += (rem % shape[d]) * sx[d];
      rem /= shape[d];
    }
    ov[flat] = xv[xo];
  }
  if (record({&x})) {
    Tensor tx = x;
    Shape out_shape = shape;
    attach(out, {x}, [tx, out_shape, padded](const Tensor& o) mutable {
      krn::sum_to(o.grad_if_present()->data(), tx.grad().data(),
                  out_shape.data(), padded.data(), out_shape.size());
    });
  }
  return out;
}

Tensor concat(std::size_t axis, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size())
    throw std::invalid_argument("concat: axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != first.size())
      throw std::invalid_argument("concat: rank mismatch");
    for (std::size_t d = 0; d < first.size(); ++d) {
      if (d != axis && p.shape()[d] != first[d])
        throw std::invalid_argument("concat: extent mismatch on axis " +
                                    std::to_string(d) + ": " +
                                    shape_str(p.shape()) + " vs " +
                                    shape_str(first));
    }
    out_shape[axis] += p.shape()[axis];
  }

  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= out_shape[d];
  for (std::size_t d = axis + 1; d < out_shape.size(); ++d)
    inner *= out_shape[d];

  Tensor out = Tensor::zeros(out_shape);
  std::vector<double>& ov = out.mutable_values();
  const std::size_t out_row = out_shape[axis] * inner;
  std::size_t col = 0;
  for (const Tensor& p : parts) {
    const std::size_t block = p.shape()[axis] * inner;
    const double* pv = p.data();
    for (std::size_t r = 0; r < outer; ++r)
      std::memcpy(ov.data() + r * out_row + col, pv + r * block,
                  block * sizeof(double));
    col += block;
  }

  bool any = false;
  for (const Tensor& p : parts) any = any || needs_grad(p);
  if (grad_enabled() && any) {
    std::vector<Tensor> parents(parts);
    attach(out, parents,
           [parents, outer, inner, out_row, axis](const Tensor& o) mutable {
             const double* gy = o.grad_if_present()->data();
             std::size_t col = 0;
             for (Tensor& p : parents) {
               const std::size_t block = p.shape()[axis] * inner;
               if (needs_grad(p)) {
                 std::vector<double>& gp = p.grad();
                 for (std::size_t r = 0; r < outer; ++r) {
                   const double* src = gy + r * out_row + col;
                   double* dst = gp.data() + r * block;
                   for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                 }
               }
               col += block;
             }
           });
  }
  return out;
}

Tensor stack(std::size_t axis, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("stack: no inputs");
  std::vector<Tensor> lifted;
  lifted.reserve(parts.size());
  for (const Tensor& p : parts) lifted.push_back(unsqueeze(p, axis));
  return concat(axis, lifted);
}

Tensor select(const Tensor& x, std::size_t axis, std::size_t index) {
  if (axis >= x.rank())
    throw std::invalid_argument("select: axis out of range");
  if (index >= x.shape()[axis])
    throw std::out_of_range("select: index " + std::to_string(index) +
                            " out of axis extent " +
                            std::to_string(x.shape()[axis]));
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::size_t outer = 1, inner = 1;
  const std::size_t extent = x.shape()[axis];
  for (std::size_t d = 0; d < axis; ++d) outer *= x.shape()[d];
  for (std::size_t d = axis + 1; d < x.rank(); ++d) inner *= x.shape()[d];

  Tensor out = Tensor::zeros(out_shape);
  std::vector<double>& ov = out.mutable_values();
  const double* xv = x.data();
  for (std::size_t r = 0; r < outer; ++r)
    std::memcpy(ov.data() + r * inner,
                xv + (r * extent + index) * inner, inner * sizeof(double));

  if (record({&x})) {
    Tensor tx = x;
    attach(out, {x}, [tx, outer, inner, extent, index](const Tensor& o) mutable {
      const double* gy = o.grad_if_present()->data();
      std::vector<double>& gx = tx.grad();
      for (std::size_t r = 0; r < outer; ++r) {
        double* dst = gx.data() + (r * extent + index) * inner;
        const double* src = gy + r * inner;
        for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
      }
    });
  }
  return out;
}

Tensor gather_rows(const Tensor& table,
                   const std::vector<std::int64_t>& indices) {
  if (table.rank() != 2)
    throw std::invalid_argument("gather_rows: table must be rank 2, got " +
                                shape_str(table.shape()));
  const std::size_t rows = table.extent(0), width = table.extent(1);
  for (std::int64_t i : indices) {
    if (i < 0 || static_cast<std::size_t>(i) >= rows)
      throw std::out_of_range("gather_rows: index " + std::to_string(i) +
                              " out of [0, " + std::to_string(rows) + ")");
  }
  Tensor out = Tensor::zeros({indices.size(), width});
  krn::gather_rows(table.data(), indices.data(), out.mutable_values().data(),
                   indices.size(), width);
  if (record({&table})) {
    Tensor tt = table;
    std::vector<std::int64_t> idx = indices;
    attach(out, {table}, [tt, idx = std::move(idx), width](const Tensor& o) mutable {
      krn::scatter_add_rows(tt.grad().data(), idx.data(),
                            o.grad_if_present()->data(), idx.size(), width);
    });
  }
  return out;
}

Tensor nodewise_linear(const Tensor& x, const Tensor& theta) {
  if (x.rank() != 3 || theta.rank() != 3)
    throw std::invalid_argument("nodewise_linear: expected x [B,N,K], theta "
                                "[N,K,F], got " + shape_str(x.shape()) +
                                " and " + shape_str(theta.shape()));
  const std::size_t batch = x.extent(0), nodes = x.extent(1),
                    in_w = x.extent(2);
  if (theta.extent(0) != nodes || theta.extent(1) != in_w)
    throw std::invalid_argument("nodewise_linear: theta " +
                                shape_str(theta.shape()) +
                                " inconsistent with x " + shape_str(x.shape()));
  const std::size_t out_w = theta.extent(2);
  Tensor out = Tensor::zeros({batch, nodes, out_w});
  krn::nodewise_linear(x.data(), theta.data(), out.mutable_values().data(),
                       batch, nodes, in_w, out_w);
  if (record({&x, &theta})) {
    Tensor tx = x, tt = theta;
    attach(out, {x, theta},
           [tx, tt, batch, nodes, in_w, out_w](const Tensor& o) mutable {
             double* gx = needs_grad(tx) ? tx.grad().data() : nullptr;
             double* gt = needs_grad(tt) ? tt.grad().data() : nullptr;
             krn::nodewise_linear_backward(tx.data(), tt.data(),
                                           o.grad_if_present()->data(), gx, gt,
                                           batch, nodes, in_w, out_w);
           });
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  return add(matmul(x, w), bias);
}

}  // namespace pmdm::ops
