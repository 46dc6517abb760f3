#pragma once

#include <string>
#include <vector>

#include "pmdm/dmn.hpp"

namespace pmdm {

// One gate transform inside the DPMGRU: a dynamic-memory read by default, or
// a plain affine map when the DMN is ablated away. An optional additive bias
// of the output width can be enabled on top of either.
struct GateTransform {
  bool use_dmn = true;
  MemoryBank bank;
  NaplParams napl;
  Tensor affine_w;  // [F_x, F_out] when !use_dmn
  Tensor affine_b;  // [F_out] when !use_dmn
  Tensor gate_bias;
  bool has_gate_bias = false;

  Tensor apply(const Tensor& x, const Tensor& time_embed,
               DmnTrace* trace = nullptr) const;
};

struct DpmgruOptions {
  bool use_dmn = true;        // false: W/O DMN, affine gates
  bool napl_shared = false;   // true: W/O NAPL, one theta for all nodes
  bool gate_bias = true;
  bool project_patterns = true;
};

// GRU cell whose three transforms are DMN instances. As published, r mixes
// the previous state into the output directly while u gates the state fed to
// the candidate.
struct DpmgruCell {
  GateTransform reset;      // r
  GateTransform update;     // u
  GateTransform candidate;  // h
  std::size_t input_width = 0;
  std::size_t hidden_width = 0;

  static DpmgruCell create(ParamStore& store, const std::string& prefix,
                           std::size_t nodes, std::size_t input_width,
                           std::size_t hidden_width, std::size_t p,
                           std::size_t m, std::size_t d,
                           const DpmgruOptions& opts = {});
};

// One step: x [B,N,C_in] (or [N,C_in]), previous hidden [B,N,D], time
// embedding [B,p] (or [p]) -> new hidden of H_prev's shape.
Tensor cell_step(const Tensor& x, const Tensor& h_prev,
                 const Tensor& time_embed, const DpmgruCell& cell);

// Sequential encoder: returns all hidden states H_1..H_n (back() is H_n).
std::vector<Tensor> encode(const std::vector<Tensor>& x_steps,
                           const std::vector<Tensor>& t_steps,
                           const Tensor& h0, const DpmgruCell& cell);

}  // namespace pmdm
