#include "pmdm/model.hpp"

#include <stdexcept>

namespace pmdm {

using ops::linear;
using ops::reshape;
using ops::select;
using ops::stack;

std::string to_string(PredictionMode mode) {
  return mode == PredictionMode::parallel ? "parallel" : "recursive";
}

PredictionMode mode_from_string(const std::string& text) {
  if (text == "parallel") return PredictionMode::parallel;
  if (text == "recursive") return PredictionMode::recursive;
  throw std::invalid_argument("mode must be 'parallel' or 'recursive', got '" +
                              text + "'");
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0)
      throw std::invalid_argument(std::string("ModelConfig: ") + name +
                                  " must be positive");
  };
  positive(history, "history");
  positive(horizon, "horizon");
  positive(nodes, "nodes");
  positive(channels, "channels");
  positive(hidden, "hidden");
  positive(embed_p, "embed_p");
  positive(embed_d, "embed_d");
  positive(memory_slots, "memory_slots");
  positive(layers, "layers");
  if (interval_minutes <= 0 || 1440 % interval_minutes != 0)
    throw std::invalid_argument(
        "ModelConfig: interval_minutes must divide 1440");
  const int flags = int(no_decoder) + int(no_tam) + int(no_dmn) + int(no_napl);
  if (flags > 1)
    throw std::invalid_argument(
        "ModelConfig: ablation flags are mutually exclusive");
  if (no_tam && mode != PredictionMode::parallel)
    throw std::invalid_argument(
        "ModelConfig: no_tam applies to parallel mode only");
}

PmDmNet::PmDmNet(const ModelConfig& config, std::uint64_t seed)
    : config_(config), store_(seed), calendar_(config.interval_minutes) {
  config_.validate();
  pools_ = TimeEmbeddingPools::create(store_, calendar_.slots_per_day(),
                                      config_.embed_p, "time.");
  DpmgruOptions opts;
  opts.use_dmn = !config_.no_dmn;
  opts.napl_shared = config_.no_napl;
  opts.gate_bias = config_.gate_bias;
  opts.project_patterns = config_.project_patterns;
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::size_t in_w = l == 0 ? config_.channels : config_.hidden;
    encoder_.push_back(DpmgruCell::create(
        store_, "encoder.l" + std::to_string(l) + ".", config_.nodes, in_w,
        config_.hidden, config_.embed_p, config_.memory_slots, config_.embed_d,
        opts));
  }
  if (config_.no_decoder) {
    head_w_ = store_.create_fan_in(
        "head.w", {config_.hidden, config_.horizon * config_.channels},
        config_.hidden);
    head_b_ = store_.create_fan_in(
        "head.b", {config_.horizon * config_.channels}, config_.hidden);
    return;
  }
  decoder_ = DpmgruCell::create(store_, "decoder.", config_.nodes,
                                config_.channels, config_.hidden,
                                config_.embed_p, config_.memory_slots,
                                config_.embed_d, opts);
  if (config_.mode == PredictionMode::parallel && !config_.no_tam)
    tam_ = TamParams::create(store_, "tam.", config_.hidden, config_.embed_p);
  head_w_ = store_.create_fan_in("head.w", {config_.hidden, config_.channels},
                                 config_.hidden);
  head_b_ = store_.create_fan_in("head.b", {config_.channels}, config_.hidden);
}

void PmDmNet::check_input(const Tensor& x, const TimeIndices& t) const {
  if (x.rank() != 4)
    throw std::invalid_argument("forward: x must be [B, n, N, C], got " +
                                shape_str(x.shape()));
  if (x.extent(1) != config_.history || x.extent(2) != config_.nodes ||
      x.extent(3) != config_.channels)
    throw std::invalid_argument(
        "forward: x " + shape_str(x.shape()) + " inconsistent with config (n=" +
        std::to_string(config_.history) + ", N=" +
        std::to_string(config_.nodes) + ", C=" +
        std::to_string(config_.channels) + ")");
  const std::size_t steps = config_.history + config_.horizon;
  if (t.batch != x.extent(0) || t.steps != steps ||
      t.day.size() != t.batch * steps || t.week.size() != t.batch * steps)
    throw std::invalid_argument("forward: time indices inconsistent with x");
}

std::vector<Tensor> PmDmNet::step_embeddings(const TimeIndices& t) const {
  std::vector<Tensor> embeds;
  embeds.reserve(t.steps);
  for (std::size_t s = 0; s < t.steps; ++s) {
    std::vector<std::int64_t> day(t.batch), week(t.batch);
    for (std::size_t b = 0; b < t.batch; ++b) {
      day[b] = t.day[b * t.steps + s];
      week[b] = t.week[b * t.steps + s];
    }
    embeds.push_back(time_embedding_rows(pools_, day, week));  // [B, p]
  }
  return embeds;
}

Tensor PmDmNet::encode_history(const Tensor& x,
                               const std::vector<Tensor>& t_embeds,
                               std::size_t batch) const {
  std::vector<Tensor> steps;
  steps.reserve(config_.history);
  for (std::size_t s = 0; s < config_.history; ++s)
    steps.push_back(select(x, 1, s));  // [B, N, C]
  std::vector<Tensor> hist(t_embeds.begin(),
                           t_embeds.begin() +
                               static_cast<std::ptrdiff_t>(config_.history));
  Tensor h;
  for (std::size_t l = 0; l < encoder_.size(); ++l) {
    Tensor h0 = Tensor::zeros({batch, config_.nodes, config_.hidden});
    std::vector<Tensor> traj = encode(steps, hist, h0, encoder_[l]);
    h = traj.back();
    steps = std::move(traj);
  }
  return h;  // H_n of the top layer
}

Tensor PmDmNet::head(const Tensor& hidden) const {
  return linear(hidden, head_w_, head_b_);
}

Tensor PmDmNet::direct_head(const Tensor& h_n, std::size_t batch) const {
  // [B, N, m*C] -> m slices stacked as [B, m, N, C].
  Tensor flat = head(h_n);
  Tensor grid = reshape(flat, {batch, config_.nodes, config_.horizon,
                               config_.channels});
  std::vector<Tensor> per_step;
  per_step.reserve(config_.horizon);
  for (std::size_t q = 0; q < config_.horizon; ++q)
    per_step.push_back(select(grid, 2, q));
  return stack(1, per_step);
}

Tensor PmDmNet::decode_parallel(const Tensor& h_n,
                                const std::vector<Tensor>& t_embeds,
                                std::size_t batch) const {
  const std::size_t n = config_.history, m = config_.horizon;
  Tensor h_out;  // [B, m, N, D]
  if (config_.no_tam) {
    h_out = ops::expand(ops::unsqueeze(h_n, 1),
                        {batch, m, config_.nodes, config_.hidden});
  } else {
    std::vector<Tensor> future(t_embeds.begin() + static_cast<std::ptrdiff_t>(n),
                               t_embeds.end());
    Tensor t_future = stack(1, future);           // [B, m, p]
    Tensor h_ta = transfer_attention(h_n, t_embeds[n - 1], t_future, tam_);
    h_out = fuse(h_n, h_ta, tam_);
  }
  Tensor zeros_in = Tensor::zeros({batch, config_.nodes, config_.channels});
  std::vector<Tensor> outputs;
  outputs.reserve(m);
  for (std::size_t q = 0; q < m; ++q) {
    Tensor h_q = cell_step(zeros_in, select(h_out, 1, q), t_embeds[n + q],
                           decoder_);
    outputs.push_back(head(h_q));
  }
  return stack(1, outputs);
}

Tensor PmDmNet::decode_recursive(const Tensor& h_n,
                                 const std::vector<Tensor>& t_embeds,
                                 std::size_t batch,
                                 const ForwardOptions& opts) const {
  const std::size_t n = config_.history, m = config_.horizon;
  if (opts.teacher) {
    const Shape want{batch, m, config_.nodes, config_.channels};
    if (opts.teacher->shape() != want)
      throw std::invalid_argument("forward: teacher shape " +
                                  shape_str(opts.teacher->shape()) +
                                  ", expected " + shape_str(want));
    if (opts.eps < 0.0 || opts.eps > 1.0)
      throw std::invalid_argument("forward: eps must lie in [0, 1]");
    if (opts.eps > 0.0 && !opts.rng)
      throw std::invalid_argument("forward: rng required for eps > 0");
  }
  if (opts.teacher_used) opts.teacher_used->assign(m, 0);

  Tensor h = h_n;
  Tensor y_in = Tensor::zeros({batch, config_.nodes, config_.channels});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Tensor> outputs;
  outputs.reserve(m);
  for (std::size_t q = 0; q < m; ++q) {
    h = cell_step(y_in, h, t_embeds[n + q], decoder_);
    Tensor y_q = head(h);
    outputs.push_back(y_q);
    bool use_truth = false;
    if (opts.teacher) {
      const double mu = opts.rng ? unit(*opts.rng) : 1.0;
      use_truth = mu < opts.eps;
    }
    y_in = use_truth ? select(*opts.teacher, 1, q) : y_q;
    if (opts.teacher_used && q + 1 < m)
      (*opts.teacher_used)[q + 1] = use_truth ? 1 : 0;
  }
  return stack(1, outputs);
}

Tensor PmDmNet::forward(const Tensor& x, const TimeIndices& t,
                        const ForwardOptions& opts) const {
  check_input(x, t);
  const std::size_t batch = x.extent(0);
  const std::vector<Tensor> t_embeds = step_embeddings(t);
  Tensor h_n = encode_history(x, t_embeds, batch);
  if (config_.no_decoder) return direct_head(h_n, batch);
  if (config_.mode == PredictionMode::parallel)
    return decode_parallel(h_n, t_embeds, batch);
  return decode_recursive(h_n, t_embeds, batch, opts);
}

Tensor forward_parallel(const PmDmNet& model, const Tensor& x,
                        const TimeIndices& t) {
  if (model.config().mode != PredictionMode::parallel)
    throw std::invalid_argument("forward_parallel: model mode is " +
                                to_string(model.config().mode));
  return model.forward(x, t);
}

Tensor forward_recursive(const PmDmNet& model, const Tensor& x,
                         const TimeIndices& t, const ForwardOptions& opts) {
  if (model.config().mode != PredictionMode::recursive)
    throw std::invalid_argument("forward_recursive: model mode is " +
                                to_string(model.config().mode));
  return model.forward(x, t, opts);
}

}  // namespace pmdm
