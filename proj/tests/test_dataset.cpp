#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "pmdm/dataset.hpp"
#include "test_support.hpp"

using namespace pmdm;
namespace fs = std::filesystem;

namespace {

TrafficSeries tiny_series(std::size_t steps, std::size_t nodes,
                          std::size_t channels, int interval) {
  TrafficSeries s;
  std::vector<double> v(steps * nodes * channels);
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = static_cast<double>(i) * 0.5 + 1.0;
  s.data = Tensor::from_values({steps, nodes, channels}, std::move(v));
  s.start = parse_timestamp("2024-01-01T00:00:00");
  s.interval_minutes = interval;
  return s;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("dataset save/load round-trips bit-exactly") {
  TempDir dir("pmdm_ds_roundtrip");
  TrafficSeries s = tiny_series(6, 2, 2, 30);
  s.channel_names = {"Pick-up", "Drop-off"};
  save_dataset(s, dir.path.string());
  TrafficSeries r = load_dataset(dir.path.string());
  CHECK(r.data.values() == s.data.values());
  CHECK(r.interval_minutes == 30);
  CHECK(r.channel_names == s.channel_names);
  CHECK(r.start.days_since_epoch == s.start.days_since_epoch);
}

TEST_CASE("data.bin length must match 8*T*N*C exactly") {
  TempDir dir("pmdm_ds_len");
  TrafficSeries s = tiny_series(2, 1, 1, 60);
  save_dataset(s, dir.path.string());
  CHECK(fs::file_size(dir.path / "data.bin") == 16);
  CHECK_NOTHROW(load_dataset(dir.path.string()));
  std::ofstream f(dir.path / "data.bin", std::ios::binary | std::ios::app);
  f.put('\0');
  f.close();
  CHECK_THROWS_WITH_AS(load_dataset(dir.path.string()),
                       doctest::Contains("17"), std::runtime_error);
}

TEST_CASE("missing meta fields and non-finite values are rejected") {
  TempDir dir("pmdm_ds_meta");
  TrafficSeries s = tiny_series(4, 1, 1, 60);
  save_dataset(s, dir.path.string());
  std::ofstream m(dir.path / "meta.json", std::ios::trunc);
  m << "{\"start\": \"2024-01-01T00:00:00\", \"interval_minutes\": 60}";
  m.close();
  CHECK_THROWS_WITH_AS(load_dataset(dir.path.string()),
                       doctest::Contains("missing field"), std::runtime_error);

  TrafficSeries bad = tiny_series(4, 1, 1, 60);
  bad.data.mutable_values()[2] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(save_dataset(bad, dir.path.string()),
                  std::invalid_argument);
}

TEST_CASE("csv import reproduces a hand-constructed series") {
  TempDir dir("pmdm_ds_csv");
  const fs::path csv = dir.path / "rows.csv";
  std::ofstream f(csv);
  f << "timestamp,node_id,channel_id,value\n"
       "2024-01-01T00:00:00,0,0,1.5\n"
       "2024-01-01T00:30:00,0,0,2.5\n"
       "2024-01-01T00:00:00,1,0,3.25\n"
       "2024-01-01T00:30:00,1,0,4.75\n";
  f.close();
  TrafficSeries got = import_csv(csv.string(), 30);
  TrafficSeries want = tiny_series(2, 2, 1, 30);
  want.data.mutable_values() = {1.5, 3.25, 2.5, 4.75};
  CHECK(got.data.values() == want.data.values());
  CHECK(got.steps() == 2);
  CHECK(got.nodes() == 2);

  SUBCASE("missing cells are rejected") {
    std::ofstream g(csv, std::ios::app);
    g << "2024-01-01T01:00:00,0,0,9.0\n";  // node 1 now missing at step 2
    g.close();
    CHECK_THROWS_WITH_AS(import_csv(csv.string(), 30),
                         doctest::Contains("missing"), std::runtime_error);
  }
}

TEST_CASE("window counts at the boundaries") {
  TrafficSeries s = tiny_series(7, 1, 1, 60);
  CHECK(make_windows(s, 4, 3).size() == 1);   // T = n + m
  TrafficSeries s2 = tiny_series(8, 1, 1, 60);
  CHECK(make_windows(s2, 4, 3).size() == 2);  // one extra step
  CHECK(make_windows(s2, 4, 3).starts == std::vector<std::size_t>{0, 1});
  CHECK_THROWS_AS(make_windows(tiny_series(5, 1, 1, 60), 4, 3),
                  std::invalid_argument);
}

TEST_CASE("batch time indices match recomputation from the start stamp") {
  TrafficSeries s = tiny_series(60, 2, 1, 30);
  WindowSet w = make_windows(s, 4, 2);
  Batch batch = assemble_batch(s, w, {7, 19});
  CalendarIndexer cal(30);
  for (std::size_t b = 0; b < 2; ++b) {
    const std::size_t s0 = w.starts[b == 0 ? 7 : 19];
    for (std::size_t step = 0; step < 6; ++step) {
      const Timestamp stamp = s.stamp_at(s0 + step);
      CHECK(batch.time.day[b * 6 + step] == cal.day_index(stamp));
      CHECK(batch.time.week[b * 6 + step] == cal.week_index(stamp));
    }
  }
  // And the window payloads are plain slices of the series.
  for (std::size_t step = 0; step < 4; ++step)
    for (std::size_t i = 0; i < 2; ++i)
      CHECK(batch.x.values()[(0 * 4 + step) * 2 + i] ==
            s.data.values()[(7 + step) * 2 + i]);
  for (std::size_t step = 0; step < 2; ++step)
    for (std::size_t i = 0; i < 2; ++i)
      CHECK(batch.y.values()[(0 * 2 + step) * 2 + i] ==
            s.data.values()[(7 + 4 + step) * 2 + i]);
}

TEST_CASE("split honors the documented ratios") {
  WindowSet w;
  w.history = 1;
  w.horizon = 1;
  w.starts.resize(10);
  std::iota(w.starts.begin(), w.starts.end(), 0);

  SplitWindows a = split(w, SplitSpec{7, 1, 2});
  CHECK(a.train.size() == 7);
  CHECK(a.val.size() == 1);
  CHECK(a.test.size() == 2);

  SplitWindows b = split(w, SplitSpec{6, 2, 2});
  CHECK(b.train.size() == 6);
  CHECK(b.val.size() == 2);
  CHECK(b.test.size() == 2);

  // Partition: union equals the original set, pairwise disjoint, ordered.
  std::set<std::size_t> all;
  for (const auto* part : {&b.train, &b.val, &b.test})
    for (std::size_t s : part->starts) CHECK(all.insert(s).second);
  CHECK(all.size() == 10);
  CHECK(b.train.starts.back() < b.val.starts.front());
  CHECK(b.val.starts.back() < b.test.starts.front());

  CHECK_THROWS_AS(split(w, SplitSpec{0, 1, 1}), std::invalid_argument);
  WindowSet two = w;
  two.starts.resize(2);
  CHECK_THROWS_AS(split(two, SplitSpec{7, 1, 2}), std::invalid_argument);
}

TEST_CASE("epoch batching is deterministic in (seed, epoch)") {
  const auto a = epoch_batches(37, 8, true, 11, 3);
  const auto b = epoch_batches(37, 8, true, 11, 3);
  CHECK(a == b);
  const auto c = epoch_batches(37, 8, true, 11, 4);
  CHECK(a != c);
  const auto plain = epoch_batches(10, 4, false, 0, 0);
  CHECK(plain.size() == 3);
  CHECK(plain[0] == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(plain[2] == std::vector<std::size_t>{8, 9});
}

TEST_CASE("synthetic data is finite, periodic and cluster-structured") {
  SynthSpec spec;
  spec.nodes = 6;
  spec.days = 8;
  spec.interval_minutes = 60;
  spec.clusters = 2;
  spec.noise = 0.0;
  TrafficSeries s = make_synthetic(spec);
  CHECK(s.steps() == 8 * 24);
  CHECK(s.nodes() == 6);
  s.validate();
  // Same weekday/time one week apart must coincide when noiseless.
  const std::size_t day = 24;
  for (std::size_t t = 0; t < day; ++t)
    for (std::size_t i = 0; i < 6; ++i)
      CHECK(s.data.values()[(t * 6 + i)] ==
            doctest::Approx(s.data.values()[((t + 7 * day) * 6 + i)])
                .epsilon(1e-12));
  // Reproducible in the seed.
  TrafficSeries again = make_synthetic(spec);
  CHECK(again.data.values() == s.data.values());
}
