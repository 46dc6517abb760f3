#include "pmdm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace pmdm {

namespace fs = std::filesystem;
using nlohmann::json;

void TrafficSeries::validate() const {
  if (!data.defined() || data.rank() != 3)
    throw std::invalid_argument("TrafficSeries: data must be [T, N, C]");
  if (steps() < 1 || nodes() < 1 || channels() < 1)
    throw std::invalid_argument("TrafficSeries: empty axis in " +
                                shape_str(data.shape()));
  if (interval_minutes <= 0 || 1440 % interval_minutes != 0)
    throw std::invalid_argument("TrafficSeries: invalid interval " +
                                std::to_string(interval_minutes));
  if (!data.all_finite())
    throw std::invalid_argument("TrafficSeries: non-finite value in data");
  if (!channel_names.empty() && channel_names.size() != channels())
    throw std::invalid_argument("TrafficSeries: " +
                                std::to_string(channel_names.size()) +
                                " channel names for " +
                                std::to_string(channels()) + " channels");
}

void save_dataset(const TrafficSeries& series, const std::string& dir) {
  series.validate();
  fs::create_directories(dir);
  json meta;
  meta["start"] = format_timestamp(series.start);
  meta["interval_minutes"] = series.interval_minutes;
  meta["N"] = series.nodes();
  meta["C"] = series.channels();
  meta["T"] = series.steps();
  meta["channel_names"] = series.channel_names;
  std::ofstream mf(fs::path(dir) / "meta.json");
  if (!mf) throw std::runtime_error("save_dataset: cannot write meta.json");
  mf << meta.dump(2) << '\n';

  std::ofstream bf(fs::path(dir) / "data.bin", std::ios::binary);
  if (!bf) throw std::runtime_error("save_dataset: cannot write data.bin");
  bf.write(reinterpret_cast<const char*>(series.data.data()),
           static_cast<std::streamsize>(series.data.size() * sizeof(double)));
  if (!bf) throw std::runtime_error("save_dataset: data.bin write failed");
}

TrafficSeries load_dataset(const std::string& dir) {
  const fs::path meta_path = fs::path(dir) / "meta.json";
  std::ifstream mf(meta_path);
  if (!mf)
    throw std::runtime_error("load_dataset: missing " + meta_path.string());
  json meta;
  try {
    mf >> meta;
  } catch (const json::exception& e) {
    throw std::runtime_error("load_dataset: bad meta.json: " +
                             std::string(e.what()));
  }
  for (const char* field :
       {"start", "interval_minutes", "N", "C", "T", "channel_names"}) {
    if (!meta.contains(field))
      throw std::runtime_error("load_dataset: meta.json missing field '" +
                               std::string(field) + "'");
  }

  TrafficSeries series;
  series.start = parse_timestamp(meta["start"].get<std::string>());
  series.interval_minutes = meta["interval_minutes"].get<int>();
  const auto T = meta["T"].get<std::size_t>();
  const auto N = meta["N"].get<std::size_t>();
  const auto C = meta["C"].get<std::size_t>();
  series.channel_names = meta["channel_names"].get<std::vector<std::string>>();

  const fs::path bin_path = fs::path(dir) / "data.bin";
  std::ifstream bf(bin_path, std::ios::binary | std::ios::ate);
  if (!bf)
    throw std::runtime_error("load_dataset: missing " + bin_path.string());
  const auto bytes = static_cast<std::size_t>(bf.tellg());
  const std::size_t expected = 8 * T * N * C;
  if (bytes != expected)
    throw std::runtime_error("load_dataset: data.bin holds " +
                             std::to_string(bytes) + " bytes, expected " +
                             std::to_string(expected) + " for [T=" +
                             std::to_string(T) + ", N=" + std::to_string(N) +
                             ", C=" + std::to_string(C) + "]");
  bf.seekg(0);
  std::vector<double> values(T * N * C);
  bf.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(expected));
  if (!bf) throw std::runtime_error("load_dataset: data.bin read failed");
  series.data = Tensor::from_values({T, N, C}, std::move(values));
  series.validate();
  return series;
}

TrafficSeries import_csv(const std::string& path, int interval_minutes,
                         std::vector<std::string> channel_names) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("import_csv: cannot open " + path);

  struct Row {
    Timestamp stamp;
    std::size_t node, channel;
    double value;
  };
  std::vector<Row> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.find("timestamp") != std::string::npos) continue;
    std::istringstream ls(line);
    std::string stamp, node, channel, value;
    if (!std::getline(ls, stamp, ',') || !std::getline(ls, node, ',') ||
        !std::getline(ls, channel, ',') || !std::getline(ls, value))
      throw std::runtime_error("import_csv: malformed line " +
                               std::to_string(line_no));
    Row r;
    r.stamp = parse_timestamp(stamp);
    r.node = std::stoul(node);
    r.channel = std::stoul(channel);
    r.value = std::stod(value);
    rows.push_back(r);
  }
  if (rows.empty()) throw std::runtime_error("import_csv: no data rows");

  auto minutes = [](const Timestamp& t) {
    return t.days_since_epoch * 1440 + t.minute_of_day;
  };
  Timestamp start = rows[0].stamp;
  std::size_t nodes = 0, channels = 0;
  for (const Row& r : rows) {
    if (minutes(r.stamp) < minutes(start)) start = r.stamp;
    nodes = std::max(nodes, r.node + 1);
    channels = std::max(channels, r.channel + 1);
  }
  std::int64_t max_step = 0;
  for (const Row& r : rows) {
    const std::int64_t delta = minutes(r.stamp) - minutes(start);
    if (delta % interval_minutes != 0)
      throw std::runtime_error("import_csv: timestamp " +
                               format_timestamp(r.stamp) +
                               " is off the " +
                               std::to_string(interval_minutes) +
                               "-minute grid");
    max_step = std::max(max_step, delta / interval_minutes);
  }
  const std::size_t steps = static_cast<std::size_t>(max_step) + 1;

  std::vector<double> values(steps * nodes * channels);
  std::vector<bool> seen(values.size(), false);
  for (const Row& r : rows) {
    const std::size_t step = static_cast<std::size_t>(
        (minutes(r.stamp) - minutes(start)) / interval_minutes);
    const std::size_t at = (step * nodes + r.node) * channels + r.channel;
    if (seen[at])
      throw std::runtime_error("import_csv: duplicate cell at step " +
                               std::to_string(step) + ", node " +
                               std::to_string(r.node));
    seen[at] = true;
    values[at] = r.value;
  }
  const std::size_t missing =
      static_cast<std::size_t>(std::count(seen.begin(), seen.end(), false));
  if (missing)
    throw std::runtime_error("import_csv: " + std::to_string(missing) +
                             " cells of the [T, N, C] grid are missing");

  TrafficSeries series;
  series.data = Tensor::from_values({steps, nodes, channels}, std::move(values));
  series.start = start;
  series.interval_minutes = interval_minutes;
  series.channel_names = std::move(channel_names);
  series.validate();
  return series;
}

WindowSet make_windows(const TrafficSeries& series, std::size_t history,
                       std::size_t horizon) {
  if (history < 1 || horizon < 1)
    throw std::invalid_argument("make_windows: history and horizon must be >= 1");
  const std::size_t need = history + horizon;
  if (series.steps() < need)
    throw std::invalid_argument("make_windows: series has " +
                                std::to_string(series.steps()) +
                                " steps, need at least " +
                                std::to_string(need));
  WindowSet w;
  w.history = history;
  w.horizon = horizon;
  w.starts.resize(series.steps() - need + 1);
  std::iota(w.starts.begin(), w.starts.end(), 0);
  return w;
}

SplitWindows split(const WindowSet& windows, const SplitSpec& spec) {
  if (spec.train <= 0 || spec.val <= 0 || spec.test <= 0)
    throw std::invalid_argument("split: ratios must be positive");
  const double total_ratio = spec.train + spec.val + spec.test;
  const std::size_t total = windows.size();
  const auto n_train =
      static_cast<std::size_t>(std::floor(total * spec.train / total_ratio));
  const auto n_val =
      static_cast<std::size_t>(std::floor(total * spec.val / total_ratio));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= total)
    throw std::invalid_argument("split: empty split for " +
                                std::to_string(total) + " windows");
  auto part = [&](std::size_t lo, std::size_t hi) {
    WindowSet w;
    w.history = windows.history;
    w.horizon = windows.horizon;
    w.starts.assign(windows.starts.begin() + static_cast<std::ptrdiff_t>(lo),
                    windows.starts.begin() + static_cast<std::ptrdiff_t>(hi));
    return w;
  };
  SplitWindows out;
  out.train = part(0, n_train);
  out.val = part(n_train, n_train + n_val);
  out.test = part(n_train + n_val, total);
  return out;
}

Batch assemble_batch(const TrafficSeries& series, const WindowSet& windows,
                     const std::vector<std::size_t>& sample_ids) {
  const std::size_t n = windows.history, m = windows.horizon;
  const std::size_t N = series.nodes(), C = series.channels();
  const std::size_t B = sample_ids.size();
  const std::size_t steps = n + m;
  CalendarIndexer cal(series.interval_minutes);

  Batch batch;
  batch.x = Tensor::zeros({B, n, N, C});
  batch.y = Tensor::zeros({B, m, N, C});
  batch.time.batch = B;
  batch.time.steps = steps;
  batch.time.day.resize(B * steps);
  batch.time.week.resize(B * steps);

  const double* src = series.data.data();
  double* xv = batch.x.mutable_values().data();
  double* yv = batch.y.mutable_values().data();
  const std::size_t frame = N * C;
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t s0 = windows.starts.at(sample_ids[b]);
    for (std::size_t s = 0; s < n; ++s)
      std::copy_n(src + (s0 + s) * frame, frame, xv + (b * n + s) * frame);
    for (std::size_t s = 0; s < m; ++s)
      std::copy_n(src + (s0 + n + s) * frame, frame, yv + (b * m + s) * frame);
    for (std::size_t s = 0; s < steps; ++s) {
      const Timestamp t = series.stamp_at(s0 + s);
      batch.time.day[b * steps + s] = cal.day_index(t);
      batch.time.week[b * steps + s] = cal.week_index(t);
    }
  }
  return batch;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t sample_count,
                                                    std::size_t batch_size,
                                                    bool shuffle,
                                                    std::uint64_t seed,
                                                    std::uint64_t epoch) {
  if (batch_size == 0)
    throw std::invalid_argument("epoch_batches: batch_size must be >= 1");
  std::vector<std::size_t> ids(sample_count);
  std::iota(ids.begin(), ids.end(), 0);
  if (shuffle) {
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + epoch);
    std::shuffle(ids.begin(), ids.end(), rng);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t at = 0; at < ids.size(); at += batch_size) {
    const std::size_t hi = std::min(ids.size(), at + batch_size);
    batches.emplace_back(ids.begin() + static_cast<std::ptrdiff_t>(at),
                         ids.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  return batches;
}

TrafficSeries make_synthetic(const SynthSpec& spec) {
  if (spec.nodes < 1 || spec.days < 1 || spec.clusters < 1 ||
      spec.channels < 1)
    throw std::invalid_argument("make_synthetic: empty dimension");
  const std::size_t per_day =
      static_cast<std::size_t>(1440 / spec.interval_minutes);
  const std::size_t steps = per_day * spec.days;
  const std::size_t N = spec.nodes, C = spec.channels;

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Per-node jitter on top of per-cluster phase/level structure.
  std::vector<double> node_phase(N), node_level(N);
  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t cluster = i % spec.clusters;
    node_phase[i] = 2.0 * M_PI * static_cast<double>(cluster) /
                        static_cast<double>(spec.clusters) +
                    0.15 * gauss(rng);
    node_level[i] = 10.0 + 2.0 * static_cast<double>(cluster) + 0.3 * gauss(rng);
  }

  TrafficSeries series;
  series.start = parse_timestamp(spec.start);
  series.interval_minutes = spec.interval_minutes;
  if (C == 2) series.channel_names = {"Pick-up", "Drop-off"};
  std::vector<double> values(steps * N * C);
  CalendarIndexer cal(spec.interval_minutes);
  for (std::size_t t = 0; t < steps; ++t) {
    const Timestamp stamp = series.stamp_at(t);
    const double tod = static_cast<double>(stamp.minute_of_day) / 1440.0;
    const int dow = cal.week_index(stamp);
    const bool weekend = dow >= 5;
    for (std::size_t i = 0; i < N; ++i) {
      const std::size_t cluster = i % spec.clusters;
      const double daily = 5.0 * std::sin(2.0 * M_PI * tod + node_phase[i]);
      const double weekly =
          (weekend ? -2.0 : 2.0) * (cluster % 2 == 0 ? 1.0 : -1.0);
      for (std::size_t c = 0; c < C; ++c) {
        const double channel_gain = 1.0 + 0.25 * static_cast<double>(c);
        values[(t * N + i) * C + c] =
            node_level[i] + channel_gain * daily + weekly +
            spec.noise * gauss(rng);
      }
    }
  }
  series.data = Tensor::from_values({steps, N, C}, std::move(values));
  series.validate();
  return series;
}

}  // namespace pmdm
