#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pmdm/dataset.hpp"
#include "pmdm/metrics.hpp"
#include "pmdm/model.hpp"

namespace pmdm {

// Per-channel affine normalization fitted on the training span only.
class Normalizer {
 public:
  Normalizer() = default;
  // Fits on series steps [0, train_end_step); rejects channels with zero
  // spread.
  Normalizer(const TrafficSeries& series, std::size_t train_end_step);

  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& stddev() const { return std_; }

  // Channel-wise (x - mean) / std; shape [..., C]. Pure value transform.
  Tensor normalize(const Tensor& x) const;
  // Differentiable inverse, applied to model outputs before the loss.
  Tensor denormalize(const Tensor& x) const;

 private:
  std::vector<double> mean_, std_;
};

// Mean absolute deviation over all elements; the training loss.
Tensor mae_loss(const Tensor& prediction, const Tensor& truth);

// Inverse-sigmoid decay eps = c / (c + exp(iter / c)).
double scheduled_sampling_eps(std::uint64_t iter, double c);

struct TrainConfig {
  double lr = 0.03;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 100;
  std::size_t patience = 15;
  double ss_decay = 2000.0;  // c in the decay schedule
  double grad_clip = 0.0;    // global-norm clip; 0 disables
  std::uint64_t seed = 1;
  // Optional per-epoch stop: return true to end training after this epoch.
  std::function<bool(std::size_t epoch, double train_mae)> stop_condition;
  bool verbose = false;
};

struct EpochRow {
  std::size_t epoch = 0;
  double train_mae = 0.0;
  double val_mae = 0.0;
  double val_rmse = 0.0;
  double epsilon = 0.0;
  double wall_seconds = 0.0;
};

struct TrainState {
  std::size_t epoch = 0;
  std::uint64_t iteration = 0;  // optimizer steps taken, drives the schedule
  double best_val_mae = 0.0;
  std::size_t patience_count = 0;
  std::uint64_t seed = 0;
  std::uint64_t eps_queries = 0;  // times the schedule was evaluated
};

struct FitResult {
  std::vector<EpochRow> history;
  TrainState state;
  double best_val_mae = 0.0;
  bool stopped_early = false;
};

// Raised when a training batch produces a non-finite loss.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Full training loop: normalize, forward (with scheduled sampling in
// recursive mode), MAE on denormalized values, Adam, per-epoch validation and
// early stopping; restores the best-validation parameters before returning.
FitResult fit(PmDmNet& model, const TrafficSeries& series,
              const SplitWindows& splits, const TrainConfig& config,
              const Normalizer& normalizer);

// Convenience: normalizer fitted from the split itself.
Normalizer fit_normalizer(const TrafficSeries& series,
                          const SplitWindows& splits);

// Forward over a window set in inference mode; returns predictions and truth
// as [S, m, N, C] on the raw scale.
struct ForecastSet {
  Tensor predictions;
  Tensor truth;
};
ForecastSet predict_windows(const PmDmNet& model, const TrafficSeries& series,
                            const WindowSet& windows,
                            const Normalizer& normalizer,
                            std::size_t batch_size = 64);

std::string history_csv(const std::vector<EpochRow>& rows);

}  // namespace pmdm
