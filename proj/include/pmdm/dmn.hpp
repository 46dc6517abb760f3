#pragma once

#include <string>

#include "pmdm/ops.hpp"
#include "pmdm/param_store.hpp"
#include "pmdm/tensor.hpp"

namespace pmdm {

// Learnable memory of M traffic patterns plus the query/readout transforms.
// `project` selects the readout: a learnable p -> F_out transform of the
// conditioned memory (the default), or the raw conditioned rows themselves
// (readout width p, kept for ablation).
struct MemoryBank {
  Tensor patterns;  // P [M, p]
  Tensor query_w;   // [F_x, p]
  Tensor query_b;   // [p]
  Tensor proj_w;    // [p, F_out], unused when !project
  Tensor proj_b;    // [F_out], unused when !project
  bool project = true;

  std::size_t slots() const { return patterns.extent(0); }
  std::size_t width() const { return patterns.extent(1); }
  std::size_t in_width() const { return query_w.extent(0); }
  std::size_t read_width() const {
    return project ? proj_w.extent(1) : width();
  }

  static MemoryBank create(ParamStore& store, const std::string& prefix,
                           std::size_t in_width, std::size_t p, std::size_t m,
                           std::size_t out_width, bool project = true);
};

// Node-adaptive parameter factorization: per-node output transforms
// theta[i] = E[i] . W from a shared low-rank pool. `shared` collapses all
// nodes onto one matrix (the W/O NAPL ablation).
struct NaplParams {
  Tensor node_embed;   // E [N, d]
  Tensor weight_pool;  // W [d, F_in, F_out]
  bool shared = false;
  Tensor shared_theta;  // [F_in, F_out] when shared

  std::size_t nodes() const { return node_embed.extent(0); }
  std::size_t in_width() const {
    return shared ? shared_theta.extent(0) : weight_pool.extent(1);
  }
  std::size_t out_width() const {
    return shared ? shared_theta.extent(1) : weight_pool.extent(2);
  }

  static NaplParams create(ParamStore& store, const std::string& prefix,
                           std::size_t nodes, std::size_t d,
                           std::size_t in_width, std::size_t out_width,
                           bool shared = false);
};

// Optional insight into a DMN evaluation.
struct DmnTrace {
  Tensor weights;  // similarity weights, [B, N, M]
};

// P_t = P (.) T_t, T_t broadcast across the M rows. T_t may be [p] or [B, p];
// result is [M, p] or [B, M, p].
Tensor conditioned_memory(const MemoryBank& bank, const Tensor& time_embed);

// theta[i] = sum_k E[i,k] W[k]  -> [N, F_in, F_out].
Tensor napl_theta(const NaplParams& napl);

// Full pattern-matching read: query the conditioned memory, take the
// softmax-weighted pattern features, concatenate with the input and apply the
// per-node transform. x may be [N, F_x] or [B, N, F_x]; the result keeps the
// rank of x with last width F_out.
Tensor dmn_forward(const Tensor& x, const Tensor& time_embed,
                   const MemoryBank& bank, const NaplParams& napl,
                   DmnTrace* trace = nullptr);

}  // namespace pmdm
