#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pmdm/dpmgru.hpp"
#include "pmdm/tam.hpp"
#include "pmdm/time_index.hpp"

namespace pmdm {

enum class PredictionMode { parallel, recursive };

std::string to_string(PredictionMode mode);
PredictionMode mode_from_string(const std::string& text);

// Everything that fixes a model's architecture. Serialized alongside each
// checkpoint so a saved model can be rebuilt exactly.
struct ModelConfig {
  PredictionMode mode = PredictionMode::parallel;
  std::size_t history = 12;       // n, encoder steps
  std::size_t horizon = 12;       // m, predicted steps
  std::size_t nodes = 1;          // N
  std::size_t channels = 1;       // C
  std::size_t hidden = 16;        // D
  std::size_t embed_p = 20;       // p, time/memory embedding width
  std::size_t embed_d = 10;       // d, node embedding width
  std::size_t memory_slots = 10;  // M
  int interval_minutes = 30;
  std::size_t layers = 1;  // encoder depth
  bool no_decoder = false;
  bool no_tam = false;
  bool no_dmn = false;
  bool no_napl = false;
  bool gate_bias = true;
  bool project_patterns = true;

  void validate() const;  // throws std::invalid_argument
};

// Absolute time indices for a batch of windows: day/week index per sample and
// step, flattened as [batch][history + horizon].
struct TimeIndices {
  std::size_t batch = 0;
  std::size_t steps = 0;  // n + m
  std::vector<std::int64_t> day;
  std::vector<std::int64_t> week;
};

struct ForwardOptions {
  const Tensor* teacher = nullptr;  // [B, m, N, C]; training only
  double eps = 0.0;                 // scheduled-sampling probability
  std::mt19937_64* rng = nullptr;   // required when teacher is set and eps > 0
  // When set, receives one flag per decoder step: 1 if that step's input was
  // the ground truth, 0 otherwise (step 0 always consumes zeros).
  std::vector<int>* teacher_used = nullptr;
};

// The assembled dual-mode forecaster.
class PmDmNet {
 public:
  PmDmNet(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const TimeEmbeddingPools& pools() const { return pools_; }
  const CalendarIndexer& calendar() const { return calendar_; }
  const std::vector<DpmgruCell>& encoder_cells() const { return encoder_; }
  const DpmgruCell& decoder_cell() const { return decoder_; }
  const TamParams& tam_params() const { return tam_; }
  const Tensor& head_weight() const { return head_w_; }
  const Tensor& head_bias() const { return head_b_; }

  // x: [B, n, N, C] -> [B, m, N, C]; dispatches on the configured mode and
  // ablation flags.
  Tensor forward(const Tensor& x, const TimeIndices& t,
                 const ForwardOptions& opts = {}) const;

 private:
  friend Tensor forward_parallel(const PmDmNet&, const Tensor&,
                                 const TimeIndices&);
  friend Tensor forward_recursive(const PmDmNet&, const Tensor&,
                                  const TimeIndices&, const ForwardOptions&);

  std::vector<Tensor> step_embeddings(const TimeIndices& t) const;
  Tensor encode_history(const Tensor& x, const std::vector<Tensor>& t_embeds,
                        std::size_t batch) const;
  Tensor head(const Tensor& hidden) const;
  Tensor direct_head(const Tensor& h_n, std::size_t batch) const;
  Tensor decode_parallel(const Tensor& h_n,
                         const std::vector<Tensor>& t_embeds,
                         std::size_t batch) const;
  Tensor decode_recursive(const Tensor& h_n,
                          const std::vector<Tensor>& t_embeds,
                          std::size_t batch, const ForwardOptions& opts) const;
  void check_input(const Tensor& x, const TimeIndices& t) const;

  ModelConfig config_;
  ParamStore store_;
  CalendarIndexer calendar_;
  TimeEmbeddingPools pools_;
  std::vector<DpmgruCell> encoder_;  // one per layer
  DpmgruCell decoder_;
  TamParams tam_;
  Tensor head_w_, head_b_;  // [D, C] / [C]; [D, m*C] / [m*C] when no_decoder
};

// Mode-checked entry points; both raise when the model was built for the
// other mode.
Tensor forward_parallel(const PmDmNet& model, const Tensor& x,
                        const TimeIndices& t);
Tensor forward_recursive(const PmDmNet& model, const Tensor& x,
                         const TimeIndices& t, const ForwardOptions& opts = {});

}  // namespace pmdm
