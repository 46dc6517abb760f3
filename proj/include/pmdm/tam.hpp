#pragma once

#include <string>

#include "pmdm/ops.hpp"
#include "pmdm/param_store.hpp"

namespace pmdm {

// Transfer attention: projects the encoder's final state, keyed by the
// historical time embedding and queried by each future step's embedding, into
// m target-aligned hidden states. Single head, d_k = D; each future step's
// query at one node attends over all nodes' key states.
struct TamParams {
  Tensor w_query;   // [(D+p), d_k]
  Tensor w_key;     // [(D+p), d_k]
  Tensor w_value;   // [(D+p), d_k]
  Tensor fusion_w;  // [2D, D]
  Tensor fusion_b;  // [D]

  std::size_t key_width() const { return w_query.extent(1); }

  static TamParams create(ParamStore& store, const std::string& prefix,
                          std::size_t hidden_width, std::size_t p);
};

struct TamTrace {
  Tensor scores;   // [B, m, N, N] pre-softmax
  Tensor weights;  // [B, m, N, N] rows over the key-node axis
};

// h_n [N,D] or [B,N,D]; t_hist [p] or [B,p]; t_future [m,p] or [B,m,p];
// result [m,N,D] or [B,m,N,D].
Tensor transfer_attention(const Tensor& h_n, const Tensor& t_hist,
                          const Tensor& t_future, const TamParams& params,
                          TamTrace* trace = nullptr);

// Residual fusion of the encoder state with each transferred state:
// out[q] = fusion(concat(h_n, h_ta[q])).
Tensor fuse(const Tensor& h_n, const Tensor& h_ta, const TamParams& params);

}  // namespace pmdm
