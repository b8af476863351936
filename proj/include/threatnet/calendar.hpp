#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace threatnet {

using Date = std::chrono::sys_days;
using Timestamp = std::chrono::sys_seconds;

/// Half-open interval of UTC calendar days, [begin, end).
struct DateRange {
  Date begin{};
  Date end{};

  bool empty() const { return end <= begin; }
  std::int64_t days() const { return empty() ? 0 : (end - begin).count(); }
  bool contains(Date d) const { return d >= begin && d < end; }
  bool contains(Timestamp t) const {
    return t >= Timestamp{begin} && t < Timestamp{end};
  }

  /// Convex hull; empty ranges are ignored.
  DateRange hull(const DateRange& other) const;

  /// Builds [first, last] from inclusive endpoints.
  static DateRange inclusive(Date first, Date last);

  auto operator<=>(const DateRange&) const = default;
};

/// A calendar span such as "3m", "14d" or "2w".
struct Span {
  enum class Unit { days, weeks, months };
  int count = 0;
  Unit unit = Unit::days;

  static Span parse(std::string_view text);
  std::string str() const;
  bool operator==(const Span&) const = default;
};

Date add(Date d, Span span, int times = 1);
Date add_months(Date d, int months);
Date day_of(Timestamp t);

/// Monday of the ISO week containing d.
Date iso_week_start(Date d);
Date first_of_month(Date d);

/// Accepts YYYY-MM-DD. Throws std::invalid_argument.
Date parse_date(std::string_view text);
/// Accepts YYYY-MM-DDTHH:MM:SS with optional trailing 'Z' or "+00:00".
Timestamp parse_timestamp(std::string_view text);

std::string format_date(Date d);
std::string format_timestamp(Timestamp t);

}  // namespace threatnet
