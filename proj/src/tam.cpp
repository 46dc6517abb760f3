#include "pmdm/tam.hpp"

#include <cmath>
#include <stdexcept>

namespace pmdm {

using ops::affine_const;
using ops::concat;
using ops::expand;
using ops::linear;
using ops::matmul;
using ops::reshape;
using ops::softmax_last;
using ops::transpose_last2;
using ops::unsqueeze;

TamParams TamParams::create(ParamStore& store, const std::string& prefix,
                            std::size_t hidden_width, std::size_t p) {
  TamParams params;
  const std::size_t in_w = hidden_width + p;
  params.w_query = store.create_fan_in(prefix + "wq", {in_w, hidden_width}, in_w);
  params.w_key = store.create_fan_in(prefix + "wk", {in_w, hidden_width}, in_w);
  params.w_value = store.create_fan_in(prefix + "wv", {in_w, hidden_width}, in_w);
  params.fusion_w = store.create_fan_in(
      prefix + "fusion.w", {2 * hidden_width, hidden_width}, 2 * hidden_width);
  params.fusion_b = store.create_fan_in(prefix + "fusion.b", {hidden_width},
                                        2 * hidden_width);
  return params;
}

Tensor transfer_attention(const Tensor& h_n, const Tensor& t_hist,
                          const Tensor& t_future, const TamParams& params,
                          TamTrace* trace) {
  const bool batched = h_n.rank() == 3;
  if (h_n.rank() != 2 && h_n.rank() != 3)
    throw std::invalid_argument("transfer_attention: H_n must be [N, D] or "
                                "[B, N, D], got " + shape_str(h_n.shape()));
  Tensor h = batched ? h_n : unsqueeze(h_n, 0);
  Tensor th = t_hist.rank() == 1 ? unsqueeze(t_hist, 0) : t_hist;
  Tensor tf = t_future.rank() == 2 ? unsqueeze(t_future, 0) : t_future;
  if (th.rank() != 2 || tf.rank() != 3)
    throw std::invalid_argument("transfer_attention: time embeddings must be "
                                "[p] / [m, p] (optionally batched)");

  const std::size_t batch = h.extent(0), nodes = h.extent(1),
                    hidden = h.extent(2);
  const std::size_t horizon = tf.extent(1), p = tf.extent(2);
  if (horizon < 1)
    throw std::invalid_argument("transfer_attention: m must be >= 1");
  if (th.extent(1) != p)
    throw std::invalid_argument("transfer_attention: historical embedding "
                                "width " + std::to_string(th.extent(1)) +
                                " != future embedding width " +
                                std::to_string(p));
  if (params.w_query.extent(0) != hidden + p)
    throw std::invalid_argument(
        "transfer_attention: projection input width " +
        std::to_string(params.w_query.extent(0)) + " != D + p = " +
        std::to_string(hidden + p));
  const std::size_t dk = params.key_width();

  // Q: every future step paired with every node's hidden state.
  Tensor h_rep = expand(unsqueeze(h, 1), {batch, horizon, nodes, hidden});
  Tensor tf_rep = expand(unsqueeze(tf, 2), {batch, horizon, nodes, p});
  Tensor query = matmul(concat(3, {h_rep, tf_rep}), params.w_query);

  // K, V: the historical state keyed by its own time embedding.
  Tensor th_rep = expand(unsqueeze(th, 1), {batch, nodes, p});
  Tensor keyed = concat(2, {h, th_rep});  // [B, N, D+p]
  Tensor key = matmul(keyed, params.w_key);
  Tensor value = matmul(keyed, params.w_value);

  Tensor key_t = unsqueeze(transpose_last2(key), 1);      // [B, 1, dk, N]
  Tensor scores = affine_const(matmul(query, key_t),
                               1.0 / std::sqrt(static_cast<double>(dk)), 0.0);
  Tensor weights = softmax_last(scores);  // rows over key nodes
  if (trace) {
    trace->scores = scores;
    trace->weights = weights;
  }
  Tensor out = matmul(weights, unsqueeze(value, 1));  // [B, m, N, dk]
  if (!batched) out = reshape(out, {horizon, nodes, dk});
  return out;
}

Tensor fuse(const Tensor& h_n, const Tensor& h_ta, const TamParams& params) {
  const bool batched = h_n.rank() == 3;
  Tensor h = batched ? h_n : unsqueeze(h_n, 0);
  Tensor ta = h_ta.rank() == 3 ? unsqueeze(h_ta, 0) : h_ta;
  if (h.rank() != 3 || ta.rank() != 4)
    throw std::invalid_argument("fuse: expected H_n [B, N, D] and H_TA "
                                "[B, m, N, D], got " + shape_str(h_n.shape()) +
                                " and " + shape_str(h_ta.shape()));
  const std::size_t batch = h.extent(0), nodes = h.extent(1),
                    hidden = h.extent(2);
  const std::size_t horizon = ta.extent(1);
  if (ta.extent(0) != batch || ta.extent(2) != nodes || ta.extent(3) != hidden)
    throw std::invalid_argument("fuse: H_TA " + shape_str(h_ta.shape()) +
                                " inconsistent with H_n " +
                                shape_str(h_n.shape()));
  Tensor h_rep = expand(unsqueeze(h, 1), {batch, horizon, nodes, hidden});
  Tensor out = linear(concat(3, {h_rep, ta}), params.fusion_w, params.fusion_b);
  if (!batched) out = reshape(out, {horizon, nodes, hidden});
  return out;
}

}  // namespace pmdm
