#include "pmdm/dmn.hpp"

#include <cmath>
#include <stdexcept>

namespace pmdm {

using ops::add;
using ops::concat;
using ops::linear;
using ops::matmul;
using ops::mul;
using ops::nodewise_linear;
using ops::reshape;
using ops::softmax_last;
using ops::transpose_last2;
using ops::unsqueeze;

MemoryBank MemoryBank::create(ParamStore& store, const std::string& prefix,
                              std::size_t in_width, std::size_t p,
                              std::size_t m, std::size_t out_width,
                              bool project) {
  if (m < 1 || p < 1)
    throw std::invalid_argument("MemoryBank: M and p must be >= 1");
  MemoryBank bank;
  bank.patterns = store.create_uniform(
      prefix + "P", {m, p}, 0.5 / std::sqrt(static_cast<double>(p)));
  bank.query_w = store.create_fan_in(prefix + "query.w", {in_width, p},
                                     in_width);
  bank.query_b = store.create_fan_in(prefix + "query.b", {p}, in_width);
  bank.project = project;
  if (project) {
    bank.proj_w = store.create_fan_in(prefix + "proj.w", {p, out_width}, p);
    bank.proj_b = store.create_fan_in(prefix + "proj.b", {out_width}, p);
  }
  return bank;
}

NaplParams NaplParams::create(ParamStore& store, const std::string& prefix,
                              std::size_t nodes, std::size_t d,
                              std::size_t in_width, std::size_t out_width,
                              bool shared) {
  NaplParams napl;
  napl.shared = shared;
  if (shared) {
    napl.node_embed = Tensor::zeros({nodes, 1});
    napl.shared_theta = store.create_fan_in(prefix + "theta",
                                            {in_width, out_width}, in_width);
  } else {
    napl.node_embed = store.create_uniform(
        prefix + "E", {nodes, d}, 0.5 / std::sqrt(static_cast<double>(d)));
    napl.weight_pool = store.create_fan_in(
        prefix + "W", {d, in_width, out_width}, in_width);
  }
  return napl;
}

Tensor conditioned_memory(const MemoryBank& bank, const Tensor& time_embed) {
  const std::size_t p = bank.width();
  if (time_embed.shape().back() != p)
    throw std::invalid_argument(
        "conditioned_memory: time embedding width " +
        std::to_string(time_embed.shape().back()) + " != memory width " +
        std::to_string(p));
  if (time_embed.rank() == 1) return mul(bank.patterns, time_embed);
  if (time_embed.rank() == 2)  // [B, p] -> [B, 1, p] against [M, p]
    return mul(bank.patterns, unsqueeze(time_embed, 1));
  throw std::invalid_argument("conditioned_memory: time embedding must be "
                              "[p] or [B, p], got " +
                              shape_str(time_embed.shape()));
}

Tensor napl_theta(const NaplParams& napl) {
  if (napl.shared)
    throw std::logic_error("napl_theta: parameters use a shared theta");
  const std::size_t d = napl.weight_pool.extent(0);
  const std::size_t fin = napl.weight_pool.extent(1);
  const std::size_t fout = napl.weight_pool.extent(2);
  Tensor flat = reshape(napl.weight_pool, {d, fin * fout});
  Tensor theta = matmul(napl.node_embed, flat);  // [N, fin*fout]
  return reshape(theta, {napl.nodes(), fin, fout});
}

Tensor dmn_forward(const Tensor& x, const Tensor& time_embed,
                   const MemoryBank& bank, const NaplParams& napl,
                   DmnTrace* trace) {
  const bool batched = x.rank() == 3;
  if (x.rank() != 2 && x.rank() != 3)
    throw std::invalid_argument("dmn_forward: x must be [N, F_x] or "
                                "[B, N, F_x], got " + shape_str(x.shape()));
  Tensor xb = batched ? x : unsqueeze(x, 0);
  Tensor tb = time_embed;
  if (tb.rank() == 1) tb = unsqueeze(tb, 0);
  if (tb.rank() != 2)
    throw std::invalid_argument("dmn_forward: time embedding must be [p] or "
                                "[B, p], got " + shape_str(time_embed.shape()));

  const std::size_t nodes = xb.extent(1);
  if (xb.extent(2) != bank.in_width())
    throw std::invalid_argument(
        "dmn_forward (query): input width " + std::to_string(xb.extent(2)) +
        " != query width " + std::to_string(bank.in_width()));
  if (napl.nodes() != nodes)
    throw std::invalid_argument(
        "dmn_forward (output): x has " + std::to_string(nodes) +
        " nodes but node embeddings have " + std::to_string(napl.nodes()));
  const std::size_t read_w = bank.read_width();
  if (napl.in_width() != read_w + bank.in_width())
    throw std::invalid_argument(
        "dmn_forward (output): theta input width " +
        std::to_string(napl.in_width()) + " != readout width " +
        std::to_string(read_w) + " + input width " +
        std::to_string(bank.in_width()));

  // Dynamic signal extracted from the traffic condition.
  Tensor query = linear(xb, bank.query_w, bank.query_b);  // [B, N, p]
  Tensor memory = conditioned_memory(bank, tb);           // [B, M, p]
  // Similarity of each node's signal against the conditioned patterns.
  Tensor scores = matmul(query, transpose_last2(memory));  // [B, N, M]
  Tensor weights = softmax_last(scores);
  if (trace) trace->weights = weights;
  Tensor features =
      bank.project ? linear(memory, bank.proj_w, bank.proj_b) : memory;
  Tensor readout = matmul(weights, features);  // [B, N, read_w]
  Tensor joined = concat(2, {readout, xb});    // [B, N, read_w + F_x]
  Tensor out = napl.shared ? matmul(joined, napl.shared_theta)
                           : nodewise_linear(joined, napl_theta(napl));
  if (!batched) {
    Shape s = out.shape();
    out = reshape(out, {s[1], s[2]});
    if (trace) {
      const Shape ws = trace->weights.shape();
      trace->weights = reshape(trace->weights, {ws[1], ws[2]});
    }
  }
  return out;
}

}  // namespace pmdm
