#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <map>
#include <string_view>
#include <vector>

#include "dmsuc/common.hpp"

namespace dmsuc {

/// Uniform-step MW series on a time grid.  Gaps in the input are kept as
/// NaN grid slots and reported in gap_timestamps.
struct TimeSeries {
  std::int64_t start = 0;  // unix seconds of the first sample
  std::int64_t step = 0;   // seconds between grid points
  std::vector<double> values;
  std::vector<std::int64_t> gap_timestamps;

  bool has_gaps() const { return !gap_timestamps.empty(); }
  std::size_t size() const { return values.size(); }
};

namespace detail {

// days-from-civil (Howard Hinnant's algorithm); all timestamps are UTC.
inline std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                       static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline bool parse_int_field(std::string_view s, int& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

}  // namespace detail

/// Parses "YYYY-MM-DD[T ]HH:MM[:SS][Z]" into unix seconds (UTC).
inline std::int64_t parse_iso8601(std::string_view s) {
  std::string_view orig = s;
  if (!s.empty() && (s.back() == 'Z' || s.back() == 'z')) s.remove_suffix(1);
  auto bad = [&]() -> std::int64_t { fail("invalid ISO-8601 timestamp '", std::string(orig), "'"); };
  if (s.size() < 16 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':')
    return bad();
  int year, month, day, hour, minute, second = 0;
  if (!detail::parse_int_field(s.substr(0, 4), year) ||
      !detail::parse_int_field(s.substr(5, 2), month) ||
      !detail::parse_int_field(s.substr(8, 2), day) ||
      !detail::parse_int_field(s.substr(11, 2), hour) ||
      !detail::parse_int_field(s.substr(14, 2), minute))
    return bad();
  if (s.size() > 16) {
    if (s.size() != 19 || s[16] != ':' || !detail::parse_int_field(s.substr(17, 2), second))
      return bad();
  }
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60)
    return bad();
  return detail::days_from_civil(year, month, day) * 86400 + hour * 3600 + minute * 60 + second;
}

inline std::string format_iso8601(std::int64_t t) {
  std::int64_t days = t / 86400;
  std::int64_t rem = t % 86400;
  if (rem < 0) {
    rem += 86400;
    days -= 1;
  }
  // civil-from-days, inverse of the above
  days += 719468;
  const std::int64_t era = (days >= 0 ? days : days - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(days - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:%02lld:%02lld",
                static_cast<long long>(y + (m <= 2)), m, d, static_cast<long long>(rem / 3600),
                static_cast<long long>((rem % 3600) / 60), static_cast<long long>(rem % 60));
  return buf;
}

/// Loads a (timestamp, load_mw) CSV.  Timestamps must be strictly increasing
/// and lie on a uniform grid; missing grid points become NaN values and are
/// listed in gap_timestamps.  Malformed rows raise with the line number.
inline TimeSeries load_timeseries(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open time series file ", path.string());

  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "time series file ", path.string(),
          " is empty");
  // Header row required; columns are positional (timestamp, load_mw).

  std::vector<std::int64_t> stamps;
  std::vector<double> loads;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty()) continue;
    auto comma = line.find(',');
    require(comma != std::string::npos, path.string(), ":", line_no, ": expected 'timestamp,load_mw'");
    std::string_view ts_field(line.data(), comma);
    std::string_view load_field(line.data() + comma + 1, line.size() - comma - 1);
    std::int64_t ts;
    try {
      ts = parse_iso8601(ts_field);
    } catch (const Error& e) {
      fail(path.string(), ":", line_no, ": ", e.what());
    }
    double mw;
    auto [p, ec] = std::from_chars(load_field.data(), load_field.data() + load_field.size(), mw);
    require(ec == std::errc{} && p == load_field.data() + load_field.size() && std::isfinite(mw),
            path.string(), ":", line_no, ": non-numeric load value '", std::string(load_field), "'");
    if (!stamps.empty()) {
      require(ts != stamps.back(), path.string(), ":", line_no, ": duplicate timestamp ",
              format_iso8601(ts));
      require(ts > stamps.back(), path.string(), ":", line_no,
              ": timestamps must be strictly increasing");
    }
    stamps.push_back(ts);
    loads.push_back(mw);
  }
  require(stamps.size() >= 2, path.string(), ": need at least two data rows");

  // The grid step is the most common delta (smallest on ties); every
  // timestamp must sit on that grid, missing grid points are gaps.
  std::map<std::int64_t, std::size_t> delta_counts;
  for (std::size_t i = 0; i + 1 < stamps.size(); ++i) ++delta_counts[stamps[i + 1] - stamps[i]];
  std::int64_t step = 0;
  std::size_t step_count = 0;
  for (const auto& [delta, count] : delta_counts)
    if (count > step_count) {
      step = delta;
      step_count = count;
    }

  TimeSeries series;
  series.start = stamps.front();
  series.step = step;
  series.values.assign(static_cast<std::size_t>((stamps.back() - stamps.front()) / step) + 1,
                       std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < stamps.size(); ++i) {
    std::int64_t offset = stamps[i] - series.start;
    require(offset % step == 0, path.string(), ": non-uniform step at ",
            format_iso8601(stamps[i]), " (grid step ", step, "s)");
    series.values[static_cast<std::size_t>(offset / step)] = loads[i];
  }
  for (std::size_t i = 0; i < series.values.size(); ++i)
    if (std::isnan(series.values[i]))
      series.gap_timestamps.push_back(series.start + static_cast<std::int64_t>(i) * step);
  return series;
}

inline void save_timeseries(const TimeSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open ", path.string(), " for writing");
  out << "timestamp,load_mw\n";
  char buf[64];
  for (std::size_t i = 0; i < series.values.size(); ++i) {
    if (std::isnan(series.values[i])) continue;
    std::snprintf(buf, sizeof(buf), "%.10g", series.values[i]);
    out << format_iso8601(series.start + static_cast<std::int64_t>(i) * series.step) << "," << buf
        << "\n";
  }
  require(out.good(), "failed writing ", path.string());
}

}  // namespace dmsuc
