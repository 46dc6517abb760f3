#pragma once

#include <cstdint>
#include <string>

#include "pmdm/ops.hpp"
#include "pmdm/param_store.hpp"
#include "pmdm/tensor.hpp"

namespace pmdm {

// Naive local wall-clock instant: calendar day plus minutes since midnight.
// No timezone or DST handling; fixed-interval series carry naive time.
struct Timestamp {
  std::int64_t days_since_epoch = 0;  // 1970-01-01 = 0
  std::int32_t minute_of_day = 0;     // [0, 1440)
};

// Parses "YYYY-MM-DD[T ]HH:MM[:SS]" (seconds must be zero if present).
Timestamp parse_timestamp(const std::string& text);
std::string format_timestamp(const Timestamp& t);

Timestamp advance(const Timestamp& t, std::int64_t minutes);

// Maps wall-clock instants onto intra-day slots and weekdays.
class CalendarIndexer {
 public:
  explicit CalendarIndexer(int interval_minutes);

  int interval_minutes() const { return interval_minutes_; }
  int slots_per_day() const { return slots_per_day_; }
  static constexpr int kWeekLength = 7;

  // floor(minutes-since-midnight / interval); total on valid timestamps.
  int day_index(const Timestamp& t) const;
  // Monday = 0 ... Sunday = 6.
  int week_index(const Timestamp& t) const;

  // Renders a slot back to its H:MM:SS clock string (display only).
  std::string slot_clock(int slot) const;
  static std::string weekday_name(int week_index);

 private:
  int interval_minutes_;
  int slots_per_day_;
};

// Learnable intra-day and weekly embedding pools of shared width p.
struct TimeEmbeddingPools {
  Tensor day_pool;   // [slots_per_day, p]
  Tensor week_pool;  // [7, p]

  std::size_t width() const { return day_pool.extent(1); }

  static TimeEmbeddingPools create(ParamStore& store, int slots_per_day,
                                   std::size_t p, const std::string& prefix);
};

// T_t = day row (.) week row for a single instant -> [p].
Tensor time_embedding(const Timestamp& t, const CalendarIndexer& cal,
                      const TimeEmbeddingPools& pools);

// Batched lookup: day/week index per sample -> [count, p].
Tensor time_embedding_rows(const TimeEmbeddingPools& pools,
                           const std::vector<std::int64_t>& day_idx,
                           const std::vector<std::int64_t>& week_idx);

}  // namespace pmdm
