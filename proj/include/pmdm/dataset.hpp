#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pmdm/model.hpp"
#include "pmdm/tensor.hpp"
#include "pmdm/time_index.hpp"

namespace pmdm {

// A regularly sampled traffic series: data[t, node, channel] starting at
// `start` with one step every interval_minutes.
struct TrafficSeries {
  Tensor data;  // [T, N, C]
  Timestamp start;
  int interval_minutes = 0;
  std::vector<std::string> channel_names;

  std::size_t steps() const { return data.extent(0); }
  std::size_t nodes() const { return data.extent(1); }
  std::size_t channels() const { return data.extent(2); }
  Timestamp stamp_at(std::size_t step) const {
    return advance(start, static_cast<std::int64_t>(step) * interval_minutes);
  }

  void validate() const;  // extents >= 1, finite values, valid interval
};

// On-disk format: <dir>/meta.json with fields start, interval_minutes, N, C,
// channel_names, T, plus <dir>/data.bin holding little-endian f64 values in
// [T, N, C] row-major order (exactly 8*T*N*C bytes).
void save_dataset(const TrafficSeries& series, const std::string& dir);
TrafficSeries load_dataset(const std::string& dir);

// Rows of "timestamp,node_id,channel_id,value" (header optional). Every cell
// of the implied [T, N, C] grid must be covered exactly once.
TrafficSeries import_csv(const std::string& path, int interval_minutes,
                         std::vector<std::string> channel_names = {});

// Contiguous forecasting samples: input steps [s, s+n) and target steps
// [s+n, s+n+m) for each start s.
struct WindowSet {
  std::size_t history = 0;  // n
  std::size_t horizon = 0;  // m
  std::vector<std::size_t> starts;

  std::size_t size() const { return starts.size(); }
};

WindowSet make_windows(const TrafficSeries& series, std::size_t history,
                       std::size_t horizon);

struct SplitSpec {
  double train = 7, val = 1, test = 2;
};

struct SplitWindows {
  WindowSet train, val, test;
};

// Chronological split: floor-rounded proportional sizes for train and val,
// remainder to test. Throws if any part would be empty.
SplitWindows split(const WindowSet& windows, const SplitSpec& spec);

// One training/evaluation batch, targets kept on the raw scale.
struct Batch {
  Tensor x;  // [B, n, N, C]
  Tensor y;  // [B, m, N, C]
  TimeIndices time;
};

Batch assemble_batch(const TrafficSeries& series, const WindowSet& windows,
                     const std::vector<std::size_t>& sample_ids);

// Deterministic batch order for one epoch: shuffled by (seed, epoch) when
// requested, otherwise chronological.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t sample_count,
                                                    std::size_t batch_size,
                                                    bool shuffle,
                                                    std::uint64_t seed,
                                                    std::uint64_t epoch);

struct SynthSpec {
  std::size_t nodes = 8;
  std::size_t days = 14;
  int interval_minutes = 30;
  std::size_t clusters = 2;
  std::size_t channels = 1;
  double noise = 0.1;
  std::uint64_t seed = 1;
  std::string start = "2024-01-01T00:00:00";  // a Monday
};

// Sinusoidal daily/weekly patterns with per-cluster phase and weekend level
// shifts, plus Gaussian noise.
TrafficSeries make_synthetic(const SynthSpec& spec);

}  // namespace pmdm
