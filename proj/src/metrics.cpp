#include "pmdm/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "pmdm/ops.hpp"

namespace pmdm {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(what) + ": shapes " +
                                shape_str(a.shape()) + " and " +
                                shape_str(b.shape()) + " differ");
}

std::string cell(const std::optional<double>& v) {
  if (!v) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", *v);
  return buf;
}

std::string cell(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

PointwiseMetrics pointwise_metrics(const Tensor& prediction,
                                   const Tensor& truth,
                                   double mape_threshold) {
  check_same_shape(prediction, truth, "pointwise_metrics");
  const std::vector<double>& p = prediction.values();
  const std::vector<double>& t = truth.values();
  const std::size_t n = p.size();
  if (n == 0) throw std::invalid_argument("pointwise_metrics: empty input");

  double abs_sum = 0.0, sq_sum = 0.0, ape_sum = 0.0;
  std::size_t ape_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = p[i] - t[i];
    abs_sum += std::fabs(diff);
    sq_sum += diff * diff;
    if (std::fabs(t[i]) >= mape_threshold) {
      ape_sum += std::fabs(diff) / std::fabs(t[i]);
      ++ape_count;
    }
  }
  PointwiseMetrics out;
  out.mae = abs_sum / static_cast<double>(n);
  out.rmse = std::sqrt(sq_sum / static_cast<double>(n));
  if (ape_count > 0) out.mape = ape_sum / static_cast<double>(ape_count);
  return out;
}

std::optional<double> corr(const Tensor& prediction, const Tensor& truth,
                           std::size_t node_axis) {
  check_same_shape(prediction, truth, "corr");
  if (node_axis >= prediction.rank())
    throw std::invalid_argument("corr: node_axis out of range");
  const Shape& shape = prediction.shape();
  const std::size_t nodes = shape[node_axis];
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < node_axis; ++d) outer *= shape[d];
  for (std::size_t d = node_axis + 1; d < shape.size(); ++d) inner *= shape[d];
  const std::size_t per_node = outer * inner;
  if (per_node < 2)
    throw std::invalid_argument("corr: need at least 2 points per node");

  const double* p = prediction.data();
  const double* t = truth.data();
  double total = 0.0;
  std::size_t used = 0;
  std::vector<double> pn(per_node), tn(per_node);
  for (std::size_t node = 0; node < nodes; ++node) {
    std::size_t at = 0;
    for (std::size_t o = 0; o < outer; ++o) {
      const std::size_t base = (o * nodes + node) * inner;
      for (std::size_t i = 0; i < inner; ++i, ++at) {
        pn[at] = p[base + i];
        tn[at] = t[base + i];
      }
    }
    double pm = 0.0, tm = 0.0;
    for (std::size_t i = 0; i < per_node; ++i) {
      pm += pn[i];
      tm += tn[i];
    }
    pm /= static_cast<double>(per_node);
    tm /= static_cast<double>(per_node);
    double cov = 0.0, pv = 0.0, tv = 0.0;
    for (std::size_t i = 0; i < per_node; ++i) {
      const double dp = pn[i] - pm, dt = tn[i] - tm;
      cov += dp * dt;
      pv += dp * dp;
      tv += dt * dt;
    }
    if (pv == 0.0 || tv == 0.0) continue;  // zero-variance node
    total += cov / std::sqrt(pv * tv);
    ++used;
  }
  if (used == 0) return std::nullopt;
  return total / static_cast<double>(used);
}

EvalReport evaluate_forecasts(const Tensor& predictions, const Tensor& truth) {
  check_same_shape(predictions, truth, "evaluate_forecasts");
  if (predictions.rank() != 4)
    throw std::invalid_argument("evaluate_forecasts: expected [S, m, N, C], "
                                "got " + shape_str(predictions.shape()));
  EvalReport report;
  const PointwiseMetrics overall = pointwise_metrics(predictions, truth);
  report.mae = overall.mae;
  report.rmse = overall.rmse;
  report.mape = overall.mape;
  report.corr = corr(predictions, truth, 2);

  const std::size_t horizon = predictions.extent(1);
  NoGradGuard guard;
  for (std::size_t q = 0; q < horizon; ++q) {
    Tensor pq = ops::select(predictions, 1, q);
    Tensor tq = ops::select(truth, 1, q);
    const PointwiseMetrics h = pointwise_metrics(pq, tq);
    report.horizon_mae.push_back(h.mae);
    report.horizon_rmse.push_back(h.rmse);
    report.horizon_mape.push_back(h.mape);
    report.horizon_corr.push_back(corr(pq, tq, 1));
  }
  return report;
}

std::string eval_report_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "horizon,mae,rmse,mape,corr\n";
  os << "overall," << cell(report.mae) << ',' << cell(report.rmse) << ','
     << cell(report.mape) << ',' << cell(report.corr) << '\n';
  for (std::size_t q = 0; q < report.horizon_mae.size(); ++q) {
    os << (q + 1) << ',' << cell(report.horizon_mae[q]) << ','
       << cell(report.horizon_rmse[q]) << ',' << cell(report.horizon_mape[q])
       << ',' << cell(report.horizon_corr[q]) << '\n';
  }
  return os.str();
}

std::string eval_report_table(const EvalReport& report) {
  std::ostringstream os;
  auto line = [&](const std::string& label, double mae, double rmse,
                  const std::optional<double>& mape,
                  const std::optional<double>& c) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-8s  %10.4f  %10.4f  %10s  %10s\n",
                  label.c_str(), mae, rmse,
                  mape ? cell(mape).c_str() : "undefined",
                  c ? cell(c).c_str() : "undefined");
    os << buf;
  };
  os << "horizon          mae        rmse        mape        corr\n";
  line("overall", report.mae, report.rmse, report.mape, report.corr);
  for (std::size_t q = 0; q < report.horizon_mae.size(); ++q)
    line(std::to_string(q + 1), report.horizon_mae[q], report.horizon_rmse[q],
         report.horizon_mape[q], report.horizon_corr[q]);
  return os.str();
}

}  // namespace pmdm
