#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "pmdm/dgc.hpp"
#include "pmdm/dpmgru.hpp"
#include "pmdm/tam.hpp"
#include "pmdm/tensor.hpp"

// Shared helpers for the unit suites: random tensors, relative comparison and
// a central finite-difference gradient check that treats the model under test
// as a black box.

namespace testutil {

inline pmdm::Tensor random_tensor(pmdm::Shape shape, std::mt19937_64& rng,
                                  double lo = -1.0, double hi = 1.0,
                                  bool requires_grad = false) {
  std::uniform_real_distribution<double> dist(lo, hi);
  pmdm::Tensor t = pmdm::Tensor::zeros(std::move(shape), requires_grad);
  for (double& v : t.mutable_values()) v = dist(rng);
  return t;
}

inline double rel_err(double got, double want) {
  const double denom = std::max({std::fabs(got), std::fabs(want), 1e-8});
  return std::fabs(got - want) / denom;
}

inline double max_abs_diff(const std::vector<double>& a,
                           const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

// Central finite differences of `loss_fn` w.r.t. the values of `param`,
// compared against the analytic gradient already stored in param.grad().
// Returns the worst relative error over all entries.
template <typename LossFn>
double finite_diff_worst_rel_err(pmdm::Tensor param, LossFn&& loss_fn,
                                 double step = 1e-5) {
  const std::vector<double>* analytic = param.grad_if_present();
  std::vector<double> grad = analytic ? *analytic
                                      : std::vector<double>(param.size(), 0.0);
  double worst = 0.0;
  std::vector<double>& values = param.mutable_values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + step;
    const double up = loss_fn();
    values[i] = saved - step;
    const double down = loss_fn();
    values[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::fabs(numeric), std::fabs(grad[i]),
                                   1e-6});
    worst = std::max(worst, std::fabs(numeric - grad[i]) / denom);
  }
  return worst;
}

// ---- bridges from library parameter structs to the loop oracles ----

inline oracle::DmnOracleParams extract_dmn(const pmdm::MemoryBank& bank,
                                           const pmdm::NaplParams& napl) {
  oracle::DmnOracleParams q;
  q.N = napl.nodes();
  q.fx = bank.in_width();
  q.p = bank.width();
  q.M = bank.slots();
  q.fo = napl.out_width();
  q.project = bank.project;
  q.P = bank.patterns.values();
  q.wq = bank.query_w.values();
  q.bq = bank.query_b.values();
  if (bank.project) {
    q.wp = bank.proj_w.values();
    q.bp = bank.proj_b.values();
  }
  q.shared = napl.shared;
  if (napl.shared) {
    q.shared_theta = napl.shared_theta.values();
    q.d = 0;
  } else {
    q.E = napl.node_embed.values();
    q.W = napl.weight_pool.values();
    q.d = napl.node_embed.extent(1);
  }
  return q;
}

inline oracle::CellOracleParams extract_cell(const pmdm::DpmgruCell& cell) {
  oracle::CellOracleParams out;
  out.r = extract_dmn(cell.reset.bank, cell.reset.napl);
  out.u = extract_dmn(cell.update.bank, cell.update.napl);
  out.h = extract_dmn(cell.candidate.bank, cell.candidate.napl);
  if (cell.reset.has_gate_bias) {
    out.bias_r = cell.reset.gate_bias.values();
    out.bias_u = cell.update.gate_bias.values();
    out.bias_h = cell.candidate.gate_bias.values();
  }
  return out;
}

inline oracle::TamOracleParams extract_tam(const pmdm::TamParams& params,
                                           std::size_t nodes,
                                           std::size_t horizon) {
  oracle::TamOracleParams q;
  q.N = nodes;
  q.D = params.key_width();
  q.p = params.w_query.extent(0) - q.D;
  q.m = horizon;
  q.wq = params.w_query.values();
  q.wk = params.w_key.values();
  q.wv = params.w_value.values();
  q.fusion_w = params.fusion_w.values();
  q.fusion_b = params.fusion_b.values();
  return q;
}

inline oracle::DgcOracleParams extract_dgc(const pmdm::DgcParams& params) {
  oracle::DgcOracleParams q;
  q.N = params.napl.nodes();
  q.fx = params.in_width();
  q.p = params.query_w.extent(1);
  q.fo = params.napl.out_width();
  q.d = params.napl.node_embed.extent(1);
  q.wq = params.query_w.values();
  q.bq = params.query_b.values();
  q.E = params.napl.node_embed.values();
  q.W = params.napl.weight_pool.values();
  return q;
}

}  // namespace testutil
