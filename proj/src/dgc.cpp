#include "pmdm/dgc.hpp"

#include <stdexcept>

namespace pmdm {

using ops::add;
using ops::affine_const;
using ops::concat;
using ops::linear;
using ops::matmul;
using ops::mul;
using ops::nodewise_linear;
using ops::relu;
using ops::reshape;
using ops::rsqrt_mask;
using ops::sigmoid;
using ops::sum_last;
using ops::tanh_op;
using ops::transpose_last2;
using ops::unsqueeze;

DgcParams DgcParams::create(ParamStore& store, const std::string& prefix,
                            std::size_t nodes, std::size_t in_width,
                            std::size_t p, std::size_t d,
                            std::size_t out_width) {
  DgcParams params;
  params.query_w = store.create_fan_in(prefix + "query.w", {in_width, p},
                                       in_width);
  params.query_b = store.create_fan_in(prefix + "query.b", {p}, in_width);
  params.napl = NaplParams::create(store, prefix, nodes, d, in_width,
                                   out_width);
  return params;
}

Tensor dgc_forward(const Tensor& x, const Tensor& time_embed,
                   const DgcParams& params, DgcTrace* trace) {
  const bool batched = x.rank() == 3;
  if (x.rank() != 2 && x.rank() != 3)
    throw std::invalid_argument("dgc_forward: x must be [N, F_x] or "
                                "[B, N, F_x], got " + shape_str(x.shape()));
  Tensor xb = batched ? x : unsqueeze(x, 0);
  Tensor tb = time_embed.rank() == 1 ? unsqueeze(time_embed, 0) : time_embed;
  if (xb.extent(2) != params.in_width())
    throw std::invalid_argument("dgc_forward: input width " +
                                std::to_string(xb.extent(2)) +
                                " != query width " +
                                std::to_string(params.in_width()));
  if (tb.shape().back() != params.query_w.extent(1))
    throw std::invalid_argument("dgc_forward: time embedding width " +
                                std::to_string(tb.shape().back()) +
                                " != p = " +
                                std::to_string(params.query_w.extent(1)));
  if (params.napl.nodes() != xb.extent(1))
    throw std::invalid_argument("dgc_forward: x has " +
                                std::to_string(xb.extent(1)) +
                                " nodes but node embeddings have " +
                                std::to_string(params.napl.nodes()));

  Tensor signal = linear(xb, params.query_w, params.query_b);  // [B, N, p]
  Tensor conditioned = mul(signal, unsqueeze(tb, 1));          // E^d_t
  Tensor adjacency = relu(matmul(conditioned, transpose_last2(conditioned)));
  if (trace) trace->adjacency = adjacency;
  Tensor inv_sqrt_deg = rsqrt_mask(sum_last(adjacency));  // [B, N]
  Tensor normalized = mul(mul(adjacency, unsqueeze(inv_sqrt_deg, 2)),
                          unsqueeze(inv_sqrt_deg, 1));
  Tensor aggregated = add(xb, matmul(normalized, xb));  // (I + A_hat) x
  Tensor out = params.napl.shared
                   ? matmul(aggregated, params.napl.shared_theta)
                   : nodewise_linear(aggregated, napl_theta(params.napl));
  if (!batched) {
    const Shape s = out.shape();
    out = reshape(out, {s[1], s[2]});
    if (trace) {
      const Shape as = trace->adjacency.shape();
      trace->adjacency = reshape(trace->adjacency, {as[1], as[2]});
    }
  }
  return out;
}

DgcCell DgcCell::create(ParamStore& store, const std::string& prefix,
                        std::size_t nodes, std::size_t input_width,
                        std::size_t hidden_width, std::size_t p, std::size_t d,
                        bool gate_bias) {
  DgcCell cell;
  cell.input_width = input_width;
  cell.hidden_width = hidden_width;
  const std::size_t gate_in = input_width + hidden_width;
  cell.reset = DgcParams::create(store, prefix + "r.", nodes, gate_in, p, d,
                                 hidden_width);
  cell.update = DgcParams::create(store, prefix + "u.", nodes, gate_in, p, d,
                                  hidden_width);
  cell.candidate = DgcParams::create(store, prefix + "h.", nodes, gate_in, p,
                                     d, hidden_width);
  cell.has_gate_bias = gate_bias;
  if (gate_bias) {
    cell.bias_r = store.create_zeros(prefix + "r.bias", {hidden_width});
    cell.bias_u = store.create_zeros(prefix + "u.bias", {hidden_width});
    cell.bias_h = store.create_zeros(prefix + "h.bias", {hidden_width});
  }
  return cell;
}

Tensor dgc_cell_step(const Tensor& x, const Tensor& h_prev,
                     const Tensor& time_embed, const DgcCell& cell) {
  const std::size_t feature_axis = x.rank() - 1;
  auto gate = [&](const DgcParams& params, const Tensor& input,
                  const Tensor& bias) {
    Tensor out = dgc_forward(input, time_embed, params);
    if (cell.has_gate_bias) out = add(out, bias);
    return out;
  };
  Tensor joined = concat(feature_axis, {x, h_prev});
  Tensor r = sigmoid(gate(cell.reset, joined, cell.bias_r));
  Tensor u = sigmoid(gate(cell.update, joined, cell.bias_u));
  Tensor gated = concat(feature_axis, {x, mul(u, h_prev)});
  Tensor h = tanh_op(gate(cell.candidate, gated, cell.bias_h));
  return add(mul(r, h_prev), mul(affine_const(r, -1.0, 1.0), h));
}

}  // namespace pmdm
