#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pmdm/tensor.hpp"

namespace pmdm {

// Pointwise error metrics. MAPE masks entries whose true magnitude falls
// below `mape_threshold` and reports nullopt when everything is masked, never
// zero.
struct PointwiseMetrics {
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> mape;
};

inline constexpr double kMapeThreshold = 1e-3;

PointwiseMetrics pointwise_metrics(const Tensor& prediction,
                                   const Tensor& truth,
                                   double mape_threshold = kMapeThreshold);

// Per-node Pearson correlation over the flattened horizon, averaged over
// nodes; zero-variance nodes are skipped (nullopt when all are).
// Tensors carry the node count on `node_axis`.
std::optional<double> corr(const Tensor& prediction, const Tensor& truth,
                           std::size_t node_axis);

// Overall metrics plus a per-horizon breakdown (index q = forecast step q).
struct EvalReport {
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> mape;
  std::optional<double> corr;
  std::vector<double> horizon_mae;
  std::vector<double> horizon_rmse;
  std::vector<std::optional<double>> horizon_mape;
  std::vector<std::optional<double>> horizon_corr;
};

// predictions/truth: [S, m, N, C] (S evaluation samples).
EvalReport evaluate_forecasts(const Tensor& predictions, const Tensor& truth);

std::string eval_report_csv(const EvalReport& report);
std::string eval_report_table(const EvalReport& report);

}  // namespace pmdm
