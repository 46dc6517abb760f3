#include "pmdm/time_index.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace pmdm {

namespace {

// Days from civil date (proleptic Gregorian), Howard Hinnant's algorithm.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y += m <= 2;
}

}  // namespace

Timestamp parse_timestamp(const std::string& text) {
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  char sep = 0;
  const int got = std::sscanf(text.c_str(), "%d-%d-%d%c%d:%d:%d", &year,
                              &month, &day, &sep, &hour, &minute, &second);
  if (got < 6 || (sep != 'T' && sep != ' '))
    throw std::invalid_argument("parse_timestamp: expected "
                                "YYYY-MM-DD[T ]HH:MM[:SS], got '" + text + "'");
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour < 0 || hour > 23 ||
      minute < 0 || minute > 59 || second != 0)
    throw std::invalid_argument("parse_timestamp: out-of-range field in '" +
                                text + "'");
  Timestamp t;
  t.days_since_epoch = days_from_civil(year, static_cast<unsigned>(month),
                                       static_cast<unsigned>(day));
  t.minute_of_day = hour * 60 + minute;
  return t;
}

std::string format_timestamp(const Timestamp& t) {
  std::int64_t y;
  unsigned m, d;
  civil_from_days(t.days_since_epoch, y, m, d);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02d:%02d:00",
                static_cast<long long>(y), m, d, t.minute_of_day / 60,
                t.minute_of_day % 60);
  return buf;
}

Timestamp advance(const Timestamp& t, std::int64_t minutes) {
  std::int64_t total = t.days_since_epoch * 1440 + t.minute_of_day + minutes;
  Timestamp out;
  out.days_since_epoch = total >= 0 ? total / 1440 : -((-total + 1439) / 1440);
  out.minute_of_day = static_cast<std::int32_t>(total - out.days_since_epoch * 1440);
  return out;
}

CalendarIndexer::CalendarIndexer(int interval_minutes)
    : interval_minutes_(interval_minutes) {
  if (interval_minutes <= 0 || 1440 % interval_minutes != 0)
    throw std::invalid_argument(
        "CalendarIndexer: interval_minutes must divide 1440, got " +
        std::to_string(interval_minutes));
  slots_per_day_ = 1440 / interval_minutes;
}

int CalendarIndexer::day_index(const Timestamp& t) const {
  return t.minute_of_day / interval_minutes_;
}

int CalendarIndexer::week_index(const Timestamp& t) const {
  // 1970-01-01 was a Thursday; Monday = 0.
  std::int64_t w = (t.days_since_epoch + 3) % 7;
  if (w < 0) w += 7;
  return static_cast<int>(w);
}

std::string CalendarIndexer::slot_clock(int slot) const {
  const int minutes = slot * interval_minutes_;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%d:%02d:00", minutes / 60, minutes % 60);
  return buf;
}

std::string CalendarIndexer::weekday_name(int week_index) {
  static const char* kNames[7] = {"Monday",   "Tuesday", "Wednesday",
                                  "Thursday", "Friday",  "Saturday",
                                  "Sunday"};
  if (week_index < 0 || week_index >= 7)
    throw std::out_of_range("weekday_name: index " +
                            std::to_string(week_index));
  return kNames[week_index];
}

TimeEmbeddingPools TimeEmbeddingPools::create(ParamStore& store,
                                              int slots_per_day, std::size_t p,
                                              const std::string& prefix) {
  const double bound = 0.5 / std::sqrt(static_cast<double>(p));
  TimeEmbeddingPools pools;
  pools.day_pool = store.create_uniform(
      prefix + "day_pool", {static_cast<std::size_t>(slots_per_day), p}, bound);
  pools.week_pool = store.create_uniform(prefix + "week_pool", {7, p}, bound);
  return pools;
}

Tensor time_embedding(const Timestamp& t, const CalendarIndexer& cal,
                      const TimeEmbeddingPools& pools) {
  if (pools.day_pool.extent(1) != pools.week_pool.extent(1))
    throw std::invalid_argument("time_embedding: pool widths differ, " +
                                shape_str(pools.day_pool.shape()) + " vs " +
                                shape_str(pools.week_pool.shape()));
  const std::vector<std::int64_t> d{cal.day_index(t)};
  const std::vector<std::int64_t> w{cal.week_index(t)};
  Tensor row = time_embedding_rows(pools, d, w);
  return ops::reshape(row, {pools.width()});
}

Tensor time_embedding_rows(const TimeEmbeddingPools& pools,
                           const std::vector<std::int64_t>& day_idx,
                           const std::vector<std::int64_t>& week_idx) {
  if (day_idx.size() != week_idx.size())
    throw std::invalid_argument("time_embedding_rows: index count mismatch");
  if (pools.day_pool.extent(1) != pools.week_pool.extent(1))
    throw std::invalid_argument("time_embedding_rows: pool widths differ");
  Tensor d = ops::gather_rows(pools.day_pool, day_idx);
  Tensor w = ops::gather_rows(pools.week_pool, week_idx);
  return ops::mul(d, w);
}

}  // namespace pmdm
