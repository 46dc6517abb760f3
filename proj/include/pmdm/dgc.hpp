#pragma once

#include <string>

#include "pmdm/dmn.hpp"

namespace pmdm {

// Dynamic graph convolution, the quadratic-cost alternative to the DMN: a
// dense adjacency relu(E E^T) is built from the time-conditioned query
// signal, symmetrically normalized and used to aggregate before the per-node
// transform.
struct DgcParams {
  Tensor query_w;  // [F_x, p]
  Tensor query_b;  // [p]
  NaplParams napl;  // theta over width F_x -> F_out

  std::size_t in_width() const { return query_w.extent(0); }

  static DgcParams create(ParamStore& store, const std::string& prefix,
                          std::size_t nodes, std::size_t in_width,
                          std::size_t p, std::size_t d, std::size_t out_width);
};

struct DgcTrace {
  Tensor adjacency;  // [B, N, N] after relu, pre-normalization
};

// x [N, F_x] or [B, N, F_x]; T_t [p] or [B, p]. Rows with zero degree
// propagate through the identity term only.
Tensor dgc_forward(const Tensor& x, const Tensor& time_embed,
                   const DgcParams& params, DgcTrace* trace = nullptr);

// GRU cell with DGC gate transforms; used by the complexity benchmark.
struct DgcCell {
  DgcParams reset, update, candidate;
  Tensor bias_r, bias_u, bias_h;  // optional per-gate bias
  bool has_gate_bias = false;
  std::size_t input_width = 0;
  std::size_t hidden_width = 0;

  static DgcCell create(ParamStore& store, const std::string& prefix,
                        std::size_t nodes, std::size_t input_width,
                        std::size_t hidden_width, std::size_t p, std::size_t d,
                        bool gate_bias = true);
};

Tensor dgc_cell_step(const Tensor& x, const Tensor& h_prev,
                     const Tensor& time_embed, const DgcCell& cell);

}  // namespace pmdm
