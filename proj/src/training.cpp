#include "pmdm/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "pmdm/ops.hpp"

namespace pmdm {

Normalizer::Normalizer(const TrafficSeries& series,
                       std::size_t train_end_step) {
  if (train_end_step < 2 || train_end_step > series.steps())
    throw std::invalid_argument("Normalizer: bad training span " +
                                std::to_string(train_end_step));
  const std::size_t N = series.nodes(), C = series.channels();
  const std::size_t count = train_end_step * N;
  mean_.assign(C, 0.0);
  std_.assign(C, 0.0);
  const double* v = series.data.data();
  for (std::size_t t = 0; t < train_end_step; ++t)
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t c = 0; c < C; ++c) mean_[c] += v[(t * N + i) * C + c];
  for (std::size_t c = 0; c < C; ++c) mean_[c] /= static_cast<double>(count);
  for (std::size_t t = 0; t < train_end_step; ++t)
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t c = 0; c < C; ++c) {
        const double d = v[(t * N + i) * C + c] - mean_[c];
        std_[c] += d * d;
      }
  for (std::size_t c = 0; c < C; ++c) {
    std_[c] = std::sqrt(std_[c] / static_cast<double>(count));
    if (std_[c] <= 0.0)
      throw std::invalid_argument("Normalizer: channel " + std::to_string(c) +
                                  " has zero spread on the training split");
  }
}

namespace {

void check_channels(const Tensor& x, std::size_t c, const char* what) {
  if (x.rank() < 1 || x.shape().back() != c)
    throw std::invalid_argument(std::string(what) + ": last axis must be " +
                                std::to_string(c) + ", got " +
                                shape_str(x.shape()));
}

}  // namespace

Tensor Normalizer::normalize(const Tensor& x) const {
  check_channels(x, mean_.size(), "normalize");
  Tensor out = Tensor::zeros(x.shape());
  const std::size_t c = mean_.size();
  const std::vector<double>& xv = x.values();
  std::vector<double>& ov = out.mutable_values();
  for (std::size_t i = 0; i < xv.size(); ++i)
    ov[i] = (xv[i] - mean_[i % c]) / std_[i % c];
  return out;
}

Tensor Normalizer::denormalize(const Tensor& x) const {
  check_channels(x, mean_.size(), "denormalize");
  const std::size_t c = mean_.size();
  Tensor scale = Tensor::from_values({c}, std_);
  Tensor shift = Tensor::from_values({c}, mean_);
  return ops::add(ops::mul(x, scale), shift);
}

Tensor mae_loss(const Tensor& prediction, const Tensor& truth) {
  if (prediction.shape() != truth.shape())
    throw std::invalid_argument("mae_loss: shapes " +
                                shape_str(prediction.shape()) + " and " +
                                shape_str(truth.shape()) + " differ");
  return ops::mean_all(ops::abs_op(ops::sub(prediction, truth)));
}

double scheduled_sampling_eps(std::uint64_t iter, double c) {
  if (c <= 0.0)
    throw std::invalid_argument("scheduled_sampling_eps: c must be > 0");
  const double e = std::exp(static_cast<double>(iter) / c);
  return c / (c + e);
}

Normalizer fit_normalizer(const TrafficSeries& series,
                          const SplitWindows& splits) {
  const std::size_t train_end = splits.train.starts.back() +
                                splits.train.history + splits.train.horizon;
  return Normalizer(series, train_end);
}

namespace {

double grad_global_norm(const std::map<std::string, Tensor>& grads) {
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (double v : g.values()) sq += v * v;
  return std::sqrt(sq);
}

void scale_grads(std::map<std::string, Tensor>& grads, double factor) {
  for (auto& [name, g] : grads)
    for (double& v : g.mutable_values()) v *= factor;
}

}  // namespace

ForecastSet predict_windows(const PmDmNet& model, const TrafficSeries& series,
                            const WindowSet& windows,
                            const Normalizer& normalizer,
                            std::size_t batch_size) {
  if (windows.size() == 0)
    throw std::invalid_argument("predict_windows: empty window set");
  NoGradGuard guard;
  const auto batches =
      epoch_batches(windows.size(), batch_size, /*shuffle=*/false, 0, 0);
  std::vector<Tensor> preds, truths;
  for (const auto& ids : batches) {
    Batch batch = assemble_batch(series, windows, ids);
    Tensor y = model.forward(normalizer.normalize(batch.x), batch.time);
    preds.push_back(normalizer.denormalize(y));
    truths.push_back(batch.y);
  }
  ForecastSet out;
  out.predictions = ops::concat(0, preds);
  out.truth = ops::concat(0, truths);
  return out;
}

FitResult fit(PmDmNet& model, const TrafficSeries& series,
              const SplitWindows& splits, const TrainConfig& config,
              const Normalizer& normalizer) {
  if (splits.train.size() == 0 || splits.val.size() == 0)
    throw std::invalid_argument("fit: train and val splits must be non-empty");
  const bool recursive = model.config().mode == PredictionMode::recursive;

  FitResult result;
  result.state.seed = config.seed;
  result.state.best_val_mae = std::numeric_limits<double>::infinity();
  std::mt19937_64 sampling_rng(config.seed ^ 0x5eed5eedULL);
  std::vector<std::vector<double>> best = model.params().snapshot_values();

  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    result.state.epoch = epoch;
    const auto batches = epoch_batches(splits.train.size(), config.batch_size,
                                       /*shuffle=*/true, config.seed, epoch);
    double epoch_abs = 0.0;
    std::size_t epoch_count = 0;
    double last_eps = 0.0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      Batch batch = assemble_batch(series, splits.train, batches[bi]);
      ForwardOptions opts;
      Tensor teacher;
      if (recursive) {
        // Teacher signal enters on the model's normalized scale.
        teacher = normalizer.normalize(batch.y);
        opts.teacher = &teacher;
        ++result.state.eps_queries;
        last_eps = scheduled_sampling_eps(result.state.iteration,
                                          config.ss_decay);
        opts.eps = last_eps;
        opts.rng = &sampling_rng;
      }
      Tensor prediction = model.forward(normalizer.normalize(batch.x),
                                        batch.time, opts);
      Tensor loss = mae_loss(normalizer.denormalize(prediction), batch.y);
      const double loss_value = loss.item();
      if (!std::isfinite(loss_value))
        throw NumericError("fit: non-finite loss in epoch " +
                           std::to_string(epoch) + ", batch " +
                           std::to_string(bi));
      epoch_abs += loss_value * static_cast<double>(batch.x.extent(0));
      epoch_count += batch.x.extent(0);

      model.params().zero_grads();
      backward(loss);
      auto grads = model.params().gradients();
      if (config.grad_clip > 0.0) {
        const double norm = grad_global_norm(grads);
        if (norm > config.grad_clip)
          scale_grads(grads, config.grad_clip / norm);
      }
      model.params().adam_step(grads, config.lr);
      ++result.state.iteration;
    }

    const ForecastSet val = predict_windows(model, series, splits.val,
                                            normalizer, config.batch_size);
    const PointwiseMetrics vm = pointwise_metrics(val.predictions, val.truth);

    EpochRow row;
    row.epoch = epoch;
    row.train_mae = epoch_abs / static_cast<double>(epoch_count);
    row.val_mae = vm.mae;
    row.val_rmse = vm.rmse;
    row.epsilon = recursive ? last_eps : 0.0;
    row.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    result.history.push_back(row);
    if (config.verbose)
      std::fprintf(stderr,
                   "epoch %zu  train_mae %.6f  val_mae %.6f  eps %.4f\n",
                   epoch, row.train_mae, row.val_mae, row.epsilon);

    if (vm.mae < result.state.best_val_mae) {
      result.state.best_val_mae = vm.mae;
      result.state.patience_count = 0;
      best = model.params().snapshot_values();
    } else {
      ++result.state.patience_count;
      if (result.state.patience_count >= config.patience) {
        result.stopped_early = true;
        break;
      }
    }
    if (config.stop_condition && config.stop_condition(epoch, row.train_mae))
      break;
  }

  model.params().restore_values(best);
  result.best_val_mae = result.state.best_val_mae;
  return result;
}

std::string history_csv(const std::vector<EpochRow>& rows) {
  std::ostringstream os;
  os << "epoch,train_mae,val_mae,val_rmse,epsilon,wall_seconds\n";
  char buf[192];
  for (const EpochRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g,%.9g,%.6f\n", r.epoch,
                  r.train_mae, r.val_mae, r.val_rmse, r.epsilon,
                  r.wall_seconds);
    os << buf;
  }
  return os.str();
}

}  // namespace pmdm
