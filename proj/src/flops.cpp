#include "pmdm/flops.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>

#include "pmdm/dgc.hpp"
#include "pmdm/dpmgru.hpp"

namespace pmdm {

std::string to_string(CellKind kind) {
  return kind == CellKind::dmn ? "dmn" : "dgc";
}

CellKind cell_kind_from_string(const std::string& text) {
  if (text == "dmn") return CellKind::dmn;
  if (text == "dgc") return CellKind::dgc;
  throw std::invalid_argument("cell kind must be 'dmn' or 'dgc', got '" +
                              text + "'");
}

std::int64_t FlopPoly::eval(std::size_t nodes) const {
  const auto n = static_cast<std::int64_t>(nodes);
  return c0 + c1 * n + c2 * n * n;
}

std::string FlopPoly::expr() const {
  std::ostringstream os;
  bool first = true;
  auto term = [&](std::int64_t c, const char* suffix) {
    if (c == 0) return;
    if (!first) os << " + ";
    os << c << suffix;
    first = false;
  };
  term(c2, "*N^2");
  term(c1, "*N");
  term(c0, "");
  if (first) os << "0";
  return os.str();
}

namespace {

std::int64_t i64(std::size_t v) { return static_cast<std::int64_t>(v); }

}  // namespace

FlopPoly dmn_gate_poly(const FlopDims& dims) {
  const std::int64_t fx = i64(dims.in_width), fout = i64(dims.out_width),
                     p = i64(dims.p), m = i64(dims.slots),
                     d = i64(dims.embed_d);
  const std::int64_t read_w = dims.project ? fout : p;
  const std::int64_t fin = read_w + fx;
  FlopPoly poly;
  poly.c0 = m * p;                                  // P (.) T_t
  if (dims.project) poly.c0 += m * fout * (p + 1);  // pattern projection
  poly.c1 = p * (fx + 1)    // query MLP
            + m * p         // similarity scores
            + 5 * m         // softmax row
            + m * read_w    // weighted readout
            + d * fin * fout  // per-node theta from E . W
            + fin * fout;     // (h || x) theta
  if (dims.gate_bias) poly.c1 += fout;
  return poly;
}

FlopPoly dgc_gate_poly(const FlopDims& dims) {
  const std::int64_t fx = i64(dims.in_width), fout = i64(dims.out_width),
                     p = i64(dims.p), d = i64(dims.embed_d);
  FlopPoly poly;
  poly.c1 = p * (fx + 1)  // query MLP
            + p           // E^d_t = F (.) T_t
            + 2           // masked rsqrt of the degree
            + fx          // identity term of (I + A_hat) x
            + d * fx * fout  // per-node theta
            + fx * fout;     // x theta
  if (dims.gate_bias) poly.c1 += fout;
  poly.c2 = p      // adjacency E E^T
            + 1    // relu
            + 1    // degree accumulation
            + 2    // two diagonal scalings
            + fx;  // aggregation A_hat x
  return poly;
}

FlopPoly cell_poly(CellKind kind, const FlopDims& dims) {
  FlopPoly gate =
      kind == CellKind::dmn ? dmn_gate_poly(dims) : dgc_gate_poly(dims);
  FlopPoly cell;
  cell.c0 = 3 * gate.c0;
  cell.c1 = 3 * gate.c1 + 8 * i64(dims.out_width);  // GRU mixing
  cell.c2 = 3 * gate.c2;
  return cell;
}

std::int64_t dmn_forward_flops(std::size_t nodes, const FlopDims& dims) {
  return dmn_gate_poly(dims).c1 * i64(nodes);
}

FlopReport flop_count(CellKind kind, std::size_t nodes, const FlopDims& dims) {
  FlopReport report;
  report.kind = kind;
  report.nodes = nodes;
  report.poly = cell_poly(kind, dims);
  report.flops = report.poly.eval(nodes);
  report.expr = report.poly.expr();
  return report;
}

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.mutable_values()) v = dist(rng);
  return t;
}

double run_trial_dmn(const DpmgruCell& cell, const Tensor& x, const Tensor& h,
                     const Tensor& t_embed, ParamStore& store) {
  const auto t0 = std::chrono::steady_clock::now();
  store.zero_grads();
  Tensor out = cell_step(x, h, t_embed, cell);
  backward(ops::sum_all(out));
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

double run_trial_dgc(const DgcCell& cell, const Tensor& x, const Tensor& h,
                     const Tensor& t_embed, ParamStore& store) {
  const auto t0 = std::chrono::steady_clock::now();
  store.zero_grads();
  Tensor out = dgc_cell_step(x, h, t_embed, cell);
  backward(ops::sum_all(out));
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

std::vector<BenchRow> bench_scaling(const std::vector<std::size_t>& sizes,
                                    const std::vector<CellKind>& kinds,
                                    const FlopDims& dims, std::size_t trials,
                                    bool flops_only, std::uint64_t seed) {
  if (sizes.size() < 2)
    throw std::invalid_argument("bench_scaling: need at least 2 sizes");
  if (dims.in_width <= dims.out_width)
    throw std::invalid_argument(
        "bench_scaling: gate input width must exceed the hidden width");
  if (!flops_only && trials < 5)
    throw std::invalid_argument("bench_scaling: need at least 5 timed trials");
  const std::size_t channels = dims.in_width - dims.out_width;

  std::vector<BenchRow> rows;
  for (std::size_t nodes : sizes) {
    for (CellKind kind : kinds) {
      BenchRow row;
      row.kind = kind;
      row.nodes = nodes;
      row.flops = flop_count(kind, nodes, dims).flops;
      if (!flops_only) {
        std::mt19937_64 rng(seed ^ (nodes * 1315423911ULL) ^
                            static_cast<std::uint64_t>(kind));
        ParamStore store(seed);
        Tensor x = random_tensor({1, nodes, channels}, rng);
        Tensor h = random_tensor({1, nodes, dims.out_width}, rng);
        Tensor t_embed = random_tensor({1, dims.p}, rng);
        std::vector<double> times;
        times.reserve(trials);
        if (kind == CellKind::dmn) {
          DpmgruOptions opts;
          opts.gate_bias = dims.gate_bias;
          opts.project_patterns = dims.project;
          DpmgruCell cell = DpmgruCell::create(store, "bench.", nodes,
                                               channels, dims.out_width,
                                               dims.p, dims.slots,
                                               dims.embed_d, opts);
          for (std::size_t trial = 0; trial < trials; ++trial)
            times.push_back(run_trial_dmn(cell, x, h, t_embed, store));
        } else {
          DgcCell cell = DgcCell::create(store, "bench.", nodes, channels,
                                         dims.out_width, dims.p, dims.embed_d,
                                         dims.gate_bias);
          for (std::size_t trial = 0; trial < trials; ++trial)
            times.push_back(run_trial_dgc(cell, x, h, t_embed, store));
        }
        std::sort(times.begin(), times.end());
        row.median_seconds = times[times.size() / 2];
        row.trials = trials;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "N,kind,flops,median_seconds,trials\n";
  char buf[128];
  for (const BenchRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%zu,%s,%lld,%.9f,%zu\n", r.nodes,
                  to_string(r.kind).c_str(), static_cast<long long>(r.flops),
                  r.median_seconds, r.trials);
    os << buf;
  }
  return os.str();
}

std::string bench_table(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "      N  kind            flops   median_s  trials\n";
  char buf[128];
  for (const BenchRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%7zu  %-4s  %15lld  %9.6f  %6zu\n",
                  r.nodes, to_string(r.kind).c_str(),
                  static_cast<long long>(r.flops), r.median_seconds, r.trials);
    os << buf;
  }
  return os.str();
}

}  // namespace pmdm
