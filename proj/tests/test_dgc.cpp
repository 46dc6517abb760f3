#include <random>

#include "doctest.h"
#include "pmdm/dgc.hpp"
#include "pmdm/flops.hpp"
#include "test_support.hpp"

using namespace pmdm;
using testutil::extract_dgc;
using testutil::finite_diff_worst_rel_err;
using testutil::max_abs_diff;
using testutil::random_tensor;

namespace {

DgcParams identity_signal_params(ParamStore& store, std::size_t n) {
  // query(x) = x with p = F_x = N, so one-hot inputs give orthogonal rows.
  DgcParams params = DgcParams::create(store, "dgc.", n, n, n, 2, 3);
  auto& w = params.query_w.mutable_values();
  std::fill(w.begin(), w.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) w[i * n + i] = 1.0;
  std::fill(params.query_b.mutable_values().begin(),
            params.query_b.mutable_values().end(), 0.0);
  return params;
}

}  // namespace

TEST_CASE("orthogonal one-hot signals give A = I and H = 2 x theta") {
  ParamStore store(111);
  const std::size_t n = 4;
  DgcParams params = identity_signal_params(store, n);
  Tensor x = Tensor::zeros({n, n});
  for (std::size_t i = 0; i < n; ++i) x.mutable_values()[i * n + i] = 1.0;
  Tensor ones = Tensor::full({n}, 1.0);

  DgcTrace trace;
  Tensor out = dgc_forward(x, ones, params, &trace);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      CHECK(trace.adjacency.values()[i * n + j] == (i == j ? 1.0 : 0.0));

  Tensor theta = napl_theta(params.napl);
  Tensor direct = ops::nodewise_linear(ops::unsqueeze(x, 0), theta);
  for (std::size_t i = 0; i < out.size(); ++i)
    CHECK(out.values()[i] ==
          doctest::Approx(2.0 * direct.values()[i]).epsilon(1e-12));
}

TEST_CASE("zero signal gives the null graph and identity propagation") {
  ParamStore store(112);
  DgcParams params = DgcParams::create(store, "dgc.", 3, 2, 4, 2, 3);
  std::fill(params.query_w.mutable_values().begin(),
            params.query_w.mutable_values().end(), 0.0);
  std::fill(params.query_b.mutable_values().begin(),
            params.query_b.mutable_values().end(), 0.0);
  std::mt19937_64 rng(112);
  Tensor x = random_tensor({3, 2}, rng);
  Tensor t = random_tensor({4}, rng);
  DgcTrace trace;
  Tensor out = dgc_forward(x, t, params, &trace);
  for (double a : trace.adjacency.values()) CHECK(a == 0.0);

  Tensor direct = ops::nodewise_linear(ops::unsqueeze(x, 0),
                                       napl_theta(params.napl));
  CHECK(max_abs_diff(out.values(), direct.values()) < 1e-15);
}

TEST_CASE("dgc matches the loop oracle on random instances") {
  std::mt19937_64 rng(113);
  for (int trial = 0; trial < 100; ++trial) {
    ParamStore store(800 + trial);
    DgcParams params = DgcParams::create(store, "dgc.", 3, 2, 3, 2, 2);
    Tensor x = random_tensor({3, 2}, rng);
    Tensor t = random_tensor({3}, rng);
    Tensor got = dgc_forward(x, t, params);
    const auto want = oracle::dgc_forward(extract_dgc(params), x.values(),
                                          t.values());
    CHECK(max_abs_diff(got.values(), want) < 1e-12);
  }
}

TEST_CASE("adjacency is exactly symmetric") {
  std::mt19937_64 rng(114);
  for (int trial = 0; trial < 20; ++trial) {
    ParamStore store(900 + trial);
    DgcParams params = DgcParams::create(store, "dgc.", 5, 3, 4, 2, 3);
    Tensor x = random_tensor({5, 3}, rng, -2.0, 2.0);
    Tensor t = random_tensor({4}, rng);
    DgcTrace trace;
    dgc_forward(x, t, params, &trace);
    const auto& a = trace.adjacency.values();
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j)
        CHECK(a[i * 5 + j] == a[j * 5 + i]);  // bitwise
  }
}

TEST_CASE("dgc gradients pass finite differences") {
  ParamStore store(115);
  DgcParams params = DgcParams::create(store, "dgc.", 3, 2, 3, 2, 2);
  std::mt19937_64 rng(115);
  Tensor x = random_tensor({3, 2}, rng);
  Tensor t = random_tensor({3}, rng);
  Tensor probe = random_tensor({3, 2}, rng);
  auto loss_value = [&] {
    NoGradGuard guard;
    return ops::sum_all(ops::mul(dgc_forward(x, t, params), probe)).item();
  };
  store.zero_grads();
  backward(ops::sum_all(ops::mul(dgc_forward(x, t, params), probe)));
  for (const auto& name : store.names()) {
    INFO(name);
    CHECK(finite_diff_worst_rel_err(store.get(name), loss_value) < 1e-4);
  }
}

TEST_CASE("dgc cell step composes the oracle gates") {
  ParamStore store(116);
  DgcCell cell = DgcCell::create(store, "cell.", 2, 2, 3, 3, 2, true);
  std::mt19937_64 rng(116);
  Tensor x = random_tensor({2, 2}, rng);
  Tensor h0 = random_tensor({2, 3}, rng);
  Tensor t = random_tensor({3}, rng);
  Tensor got = dgc_cell_step(x, h0, t, cell);

  // Straight-line transcription of the gate arithmetic.
  oracle::Vec joined(2 * 5);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t c = 0; c < 2; ++c) joined[i * 5 + c] = x.values()[i * 2 + c];
    for (std::size_t c = 0; c < 3; ++c)
      joined[i * 5 + 2 + c] = h0.values()[i * 3 + c];
  }
  oracle::Vec r = oracle::dgc_forward(extract_dgc(cell.reset), joined,
                                      t.values());
  oracle::Vec u = oracle::dgc_forward(extract_dgc(cell.update), joined,
                                      t.values());
  for (std::size_t i = 0; i < 6; ++i) {
    r[i] = 1.0 / (1.0 + std::exp(-(r[i] + cell.bias_r.values()[i % 3])));
    u[i] = 1.0 / (1.0 + std::exp(-(u[i] + cell.bias_u.values()[i % 3])));
  }
  oracle::Vec gated(2 * 5);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t c = 0; c < 2; ++c) gated[i * 5 + c] = x.values()[i * 2 + c];
    for (std::size_t c = 0; c < 3; ++c)
      gated[i * 5 + 2 + c] = u[i * 3 + c] * h0.values()[i * 3 + c];
  }
  oracle::Vec hc = oracle::dgc_forward(extract_dgc(cell.candidate), gated,
                                       t.values());
  oracle::Vec want(6);
  for (std::size_t i = 0; i < 6; ++i) {
    const double cand = std::tanh(hc[i] + cell.bias_h.values()[i % 3]);
    want[i] = r[i] * h0.values()[i] + (1.0 - r[i]) * cand;
  }
  CHECK(max_abs_diff(got.values(), want) < 1e-12);
}

// ---- FLOP accounting ----

TEST_CASE("dmn count is affine in N, dgc has a positive quadratic term") {
  FlopDims dims;  // defaults: F_x 33, D 32, p 20, M 10, d 10
  const FlopPoly dmn = cell_poly(CellKind::dmn, dims);
  const FlopPoly dgc = cell_poly(CellKind::dgc, dims);
  CHECK(dmn.c2 == 0);
  CHECK(dmn.c1 > 0);
  CHECK(dmn.c0 > 0);
  CHECK(dgc.c2 > 0);

  // dmn_forward alone is strictly per-node: count(2N)/count(N) == 2 exactly.
  for (std::size_t n : {1ul, 10ul, 250ul, 883ul})
    CHECK(dmn_forward_flops(2 * n, dims) == 2 * dmn_forward_flops(n, dims));
}

TEST_CASE("flop ratios at the benchmark dimensions") {
  FlopDims dims;
  const double dmn_ratio =
      static_cast<double>(flop_count(CellKind::dmn, 2000, dims).flops) /
      static_cast<double>(flop_count(CellKind::dmn, 250, dims).flops);
  CHECK(dmn_ratio > 7.9);
  CHECK(dmn_ratio < 8.1);
  const double dgc_ratio =
      static_cast<double>(flop_count(CellKind::dgc, 2000, dims).flops) /
      static_cast<double>(flop_count(CellKind::dgc, 250, dims).flops);
  CHECK(dgc_ratio >= 30.0);

  // count(2N)/count(N) -> 4 for the quadratic kind as N grows.
  const double big =
      static_cast<double>(flop_count(CellKind::dgc, 200000, dims).flops) /
      static_cast<double>(flop_count(CellKind::dgc, 100000, dims).flops);
  CHECK(big == doctest::Approx(4.0).epsilon(1e-2));

  // Larger node counts separate the kinds further (PEMSD7 vs PEMSD8 scale).
  auto kind_ratio = [&](std::size_t n) {
    return static_cast<double>(flop_count(CellKind::dgc, n, dims).flops) /
           static_cast<double>(flop_count(CellKind::dmn, n, dims).flops);
  };
  CHECK(kind_ratio(883) > kind_ratio(170));
}

TEST_CASE("bench rows carry exact flop counts and all (size, kind) pairs") {
  FlopDims dims;
  const auto rows = bench_scaling({8, 16, 32}, {CellKind::dmn, CellKind::dgc},
                                  dims, 5, /*flops_only=*/true, 1);
  CHECK(rows.size() == 6);
  for (const auto& row : rows) {
    CHECK(row.flops == flop_count(row.kind, row.nodes, dims).flops);
    CHECK(row.trials == 0);
    CHECK(row.median_seconds == 0.0);
  }
  CHECK_THROWS_AS(bench_scaling({8}, {CellKind::dmn}, dims, 5, true, 1),
                  std::invalid_argument);

  const std::string csv = bench_csv(rows);
  CHECK(csv.find("N,kind,flops,median_seconds,trials") == 0);
}

TEST_CASE("timed bench runs (tiny sizes) produce medians of 5 trials") {
  FlopDims dims;
  dims.out_width = 4;
  dims.in_width = 5;
  dims.p = 3;
  dims.slots = 2;
  dims.embed_d = 2;
  const auto rows = bench_scaling({2, 4}, {CellKind::dmn, CellKind::dgc}, dims,
                                  5, /*flops_only=*/false, 2);
  CHECK(rows.size() == 4);
  for (const auto& row : rows) {
    CHECK(row.trials == 5);
    CHECK(row.median_seconds > 0.0);
  }
}

TEST_CASE("dmn flops over the benchmark sizes fit a line almost perfectly") {
  FlopDims dims;
  const std::vector<std::size_t> sizes{250, 500, 1000, 2000};
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<double> xs, ys;
  for (std::size_t n : sizes) {
    const double x = static_cast<double>(n);
    const double y =
        static_cast<double>(flop_count(CellKind::dmn, n, dims).flops);
    xs.push_back(x);
    ys.push_back(y);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = 4.0 * sxx - sx * sx;
  const double slope = (4.0 * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / 4.0;
  double ss_res = 0, ss_tot = 0;
  const double mean_y = sy / 4.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double fit = slope * xs[i] + intercept;
    ss_res += (ys[i] - fit) * (ys[i] - fit);
    ss_tot += (ys[i] - mean_y) * (ys[i] - mean_y);
  }
  const double r2 = 1.0 - ss_res / ss_tot;
  CHECK(r2 > 0.9999);

  // The cell-level count tends to the doubling ratio as N grows and is
  // already within 1% of it at a few hundred nodes.
  auto ratio = [&](std::size_t n) {
    return static_cast<double>(flop_count(CellKind::dmn, 2 * n, dims).flops) /
           static_cast<double>(flop_count(CellKind::dmn, n, dims).flops);
  };
  CHECK(std::fabs(ratio(200) - 2.0) < 0.01);
  CHECK(std::fabs(ratio(2000) - 2.0) < 0.001);
}

TEST_CASE("expression strings render the polynomial") {
  FlopDims dims;
  const FlopReport r = flop_count(CellKind::dgc, 100, dims);
  CHECK(r.expr.find("N^2") != std::string::npos);
  CHECK(r.flops == r.poly.eval(100));
  const FlopReport lin = flop_count(CellKind::dmn, 100, dims);
  CHECK(lin.expr.find("N^2") == std::string::npos);
  CHECK(lin.expr.find("*N") != std::string::npos);
}
