#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pmdm {

// Exact multiply-add accounting for the two cell kinds, kept as closed-form
// polynomials in the node count N so the linear-vs-quadratic claim is
// assertable symbolically.
//
// Tally conventions (exact integers, applied identically to both kinds):
//   - length-L dot product           = L
//   - bias / residual add            = 1 per element
//   - activation evaluation          = 1 per element
//   - softmax row of width M         = 5*M (compare, subtract, exp,
//                                      accumulate, divide)
//   - masked inverse square root     = 2 per element

enum class CellKind { dmn, dgc };

std::string to_string(CellKind kind);
CellKind cell_kind_from_string(const std::string& text);

struct FlopPoly {
  std::int64_t c0 = 0;  // constant
  std::int64_t c1 = 0;  // per node
  std::int64_t c2 = 0;  // per node pair

  std::int64_t eval(std::size_t nodes) const;
  std::string expr() const;
};

// Widths of one gate transform inside the cell.
struct FlopDims {
  std::size_t in_width = 33;    // F_x, gate input width (channels + hidden)
  std::size_t out_width = 32;   // F_out = hidden width D
  std::size_t p = 20;           // time/memory embedding width
  std::size_t slots = 10;       // M
  std::size_t embed_d = 10;     // d
  bool gate_bias = true;
  bool project = true;  // learnable p -> F_out readout in the DMN
};

// One DMN gate: c0 is the memory conditioning + pattern projection (shared
// across nodes), c1 the per-node query/match/readout/transform work.
FlopPoly dmn_gate_poly(const FlopDims& dims);
// One DGC gate: adjacency construction, normalization and aggregation pay a
// per-pair cost, so c2 > 0.
FlopPoly dgc_gate_poly(const FlopDims& dims);

// Full cell step: three gates plus the GRU elementwise mixing (8 per hidden
// element).
FlopPoly cell_poly(CellKind kind, const FlopDims& dims);

// Strictly per-node tally of one dmn_forward call (bank preparation
// excluded): count(2N) / count(N) == 2 exactly.
std::int64_t dmn_forward_flops(std::size_t nodes, const FlopDims& dims);

struct FlopReport {
  CellKind kind = CellKind::dmn;
  std::size_t nodes = 0;
  std::int64_t flops = 0;  // cell_poly(kind).eval(nodes)
  std::string expr;
  FlopPoly poly;
};

FlopReport flop_count(CellKind kind, std::size_t nodes, const FlopDims& dims);

struct BenchRow {
  CellKind kind = CellKind::dmn;
  std::size_t nodes = 0;
  std::int64_t flops = 0;
  double median_seconds = 0.0;  // 0 when timing was skipped
  std::size_t trials = 0;
};

// Seeded random forward+backward cell steps per (size, kind); reports the
// exact FLOP count and, unless flops_only, the median wall time of `trials`
// runs. Trials run sequentially.
std::vector<BenchRow> bench_scaling(const std::vector<std::size_t>& sizes,
                                    const std::vector<CellKind>& kinds,
                                    const FlopDims& dims, std::size_t trials,
                                    bool flops_only, std::uint64_t seed);

std::string bench_csv(const std::vector<BenchRow>& rows);
std::string bench_table(const std::vector<BenchRow>& rows);

}  // namespace pmdm
