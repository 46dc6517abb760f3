#include "pmdm/dpmgru.hpp"

#include <stdexcept>

namespace pmdm {

using ops::add;
using ops::affine_const;
using ops::concat;
using ops::linear;
using ops::mul;
using ops::sigmoid;
using ops::tanh_op;

Tensor GateTransform::apply(const Tensor& x, const Tensor& time_embed,
                            DmnTrace* trace) const {
  Tensor out = use_dmn ? dmn_forward(x, time_embed, bank, napl, trace)
                       : linear(x, affine_w, affine_b);
  if (has_gate_bias) out = add(out, gate_bias);
  return out;
}

DpmgruCell DpmgruCell::create(ParamStore& store, const std::string& prefix,
                              std::size_t nodes, std::size_t input_width,
                              std::size_t hidden_width, std::size_t p,
                              std::size_t m, std::size_t d,
                              const DpmgruOptions& opts) {
  DpmgruCell cell;
  cell.input_width = input_width;
  cell.hidden_width = hidden_width;
  const std::size_t gate_in = input_width + hidden_width;
  auto make_gate = [&](const std::string& name) {
    GateTransform gate;
    gate.use_dmn = opts.use_dmn;
    const std::string base = prefix + name + ".";
    if (opts.use_dmn) {
      gate.bank = MemoryBank::create(store, base, gate_in, p, m, hidden_width,
                                     opts.project_patterns);
      const std::size_t read_w = opts.project_patterns ? hidden_width : p;
      gate.napl = NaplParams::create(store, base, nodes, d, read_w + gate_in,
                                     hidden_width, opts.napl_shared);
    } else {
      gate.affine_w = store.create_fan_in(base + "w", {gate_in, hidden_width},
                                          gate_in);
      gate.affine_b = store.create_fan_in(base + "b", {hidden_width}, gate_in);
    }
    gate.has_gate_bias = opts.gate_bias;
    if (opts.gate_bias)
      gate.gate_bias = store.create_zeros(base + "bias", {hidden_width});
    return gate;
  };
  cell.reset = make_gate("r");
  cell.update = make_gate("u");
  cell.candidate = make_gate("h");
  return cell;
}

namespace {

Tensor gate_apply(const GateTransform& gate, const char* gate_name,
                  const Tensor& x, const Tensor& time_embed) {
  try {
    return gate.apply(x, time_embed);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string(gate_name) + " gate: " + e.what());
  }
}

}  // namespace

Tensor cell_step(const Tensor& x, const Tensor& h_prev,
                 const Tensor& time_embed, const DpmgruCell& cell) {
  if (x.rank() != h_prev.rank())
    throw std::invalid_argument("cell_step: input rank " +
                                std::to_string(x.rank()) +
                                " != hidden rank " +
                                std::to_string(h_prev.rank()));
  if (x.shape().back() != cell.input_width)
    throw std::invalid_argument("cell_step: input width " +
                                std::to_string(x.shape().back()) +
                                " != cell input width " +
                                std::to_string(cell.input_width));
  if (h_prev.shape().back() != cell.hidden_width)
    throw std::invalid_argument("cell_step: hidden width " +
                                std::to_string(h_prev.shape().back()) +
                                " != cell hidden width " +
                                std::to_string(cell.hidden_width));

  const std::size_t feature_axis = x.rank() - 1;
  Tensor joined = concat(feature_axis, {x, h_prev});
  Tensor r = sigmoid(gate_apply(cell.reset, "reset", joined, time_embed));
  Tensor u = sigmoid(gate_apply(cell.update, "update", joined, time_embed));
  Tensor gated = concat(feature_axis, {x, mul(u, h_prev)});
  Tensor h = tanh_op(gate_apply(cell.candidate, "candidate", gated, time_embed));
  // H_t = r (.) H_prev + (1 - r) (.) h
  return add(mul(r, h_prev), mul(affine_const(r, -1.0, 1.0), h));
}

std::vector<Tensor> encode(const std::vector<Tensor>& x_steps,
                           const std::vector<Tensor>& t_steps,
                           const Tensor& h0, const DpmgruCell& cell) {
  if (x_steps.empty())
    throw std::invalid_argument("encode: need at least one step");
  if (x_steps.size() != t_steps.size())
    throw std::invalid_argument("encode: " + std::to_string(x_steps.size()) +
                                " input steps but " +
                                std::to_string(t_steps.size()) +
                                " time embeddings");
  std::vector<Tensor> hidden;
  hidden.reserve(x_steps.size());
  Tensor h = h0;
  for (std::size_t t = 0; t < x_steps.size(); ++t) {
    h = cell_step(x_steps[t], h, t_steps[t], cell);
    hidden.push_back(h);
  }
  return hidden;
}

}  // namespace pmdm
