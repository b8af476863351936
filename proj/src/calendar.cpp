#include "threatnet/calendar.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace threatnet {

namespace chr = std::chrono;

DateRange DateRange::hull(const DateRange& other) const {
  if (other.empty()) return *this;
  if (empty()) return other;
  return {std::min(begin, other.begin), std::max(end, other.end)};
}

DateRange DateRange::inclusive(Date first, Date last) {
  return {first, last + chr::days{1}};
}

Span Span::parse(std::string_view text) {
  if (text.size() < 2) throw std::invalid_argument("bad span: " + std::string(text));
  Span s;
  const char suffix = text.back();
  switch (suffix) {
    case 'd': s.unit = Unit::days; break;
    case 'w': s.unit = Unit::weeks; break;
    case 'm': s.unit = Unit::months; break;
    default: throw std::invalid_argument("bad span unit: " + std::string(text));
  }
  auto digits = text.substr(0, text.size() - 1);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), s.count);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || s.count <= 0)
    throw std::invalid_argument("bad span count: " + std::string(text));
  return s;
}

std::string Span::str() const {
  const char suffix = unit == Unit::days ? 'd' : unit == Unit::weeks ? 'w' : 'm';
  return std::to_string(count) + suffix;
}

Date add_months(Date d, int months) {
  chr::year_month_day ymd{d};
  auto ym = chr::year_month{ymd.year(), ymd.month()} + chr::months{months};
  auto last = chr::year_month_day_last{ym.year(), chr::month_day_last{ym.month()}};
  auto day = std::min(ymd.day(), last.day());
  return Date{chr::year_month_day{ym.year(), ym.month(), day}};
}

Date add(Date d, Span span, int times) {
  const int n = span.count * times;
  switch (span.unit) {
    case Span::Unit::days: return d + chr::days{n};
    case Span::Unit::weeks: return d + chr::days{7 * n};
    case Span::Unit::months: return add_months(d, n);
  }
  return d;
}

Date day_of(Timestamp t) { return chr::floor<chr::days>(t); }

Date iso_week_start(Date d) {
  chr::weekday wd{d};
  // iso_encoding: Monday = 1 ... Sunday = 7
  return d - chr::days{wd.iso_encoding() - 1};
}

Date first_of_month(Date d) {
  chr::year_month_day ymd{d};
  return Date{ymd.year() / ymd.month() / chr::day{1}};
}

namespace {

int parse_fixed(std::string_view s, std::size_t pos, std::size_t len) {
  if (pos + len > s.size()) throw std::invalid_argument("truncated date/time");
  int v = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') throw std::invalid_argument("non-digit in date/time");
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

void expect(std::string_view s, std::size_t pos, char c) {
  if (pos >= s.size() || s[pos] != c)
    throw std::invalid_argument("malformed date/time: " + std::string(s));
}

}  // namespace

Date parse_date(std::string_view text) {
  if (text.size() != 10) throw std::invalid_argument("malformed date: " + std::string(text));
  const int y = parse_fixed(text, 0, 4);
  expect(text, 4, '-');
  const unsigned m = static_cast<unsigned>(parse_fixed(text, 5, 2));
  expect(text, 7, '-');
  const unsigned dd = static_cast<unsigned>(parse_fixed(text, 8, 2));
  chr::year_month_day ymd{chr::year{y}, chr::month{m}, chr::day{dd}};
  if (!ymd.ok()) throw std::invalid_argument("invalid date: " + std::string(text));
  return Date{ymd};
}

Timestamp parse_timestamp(std::string_view text) {
  if (text.size() < 19) throw std::invalid_argument("malformed timestamp: " + std::string(text));
  const Date d = parse_date(text.substr(0, 10));
  if (text[10] != 'T' && text[10] != ' ')
    throw std::invalid_argument("malformed timestamp: " + std::string(text));
  const int hh = parse_fixed(text, 11, 2);
  expect(text, 13, ':');
  const int mm = parse_fixed(text, 14, 2);
  expect(text, 16, ':');
  const int ss = parse_fixed(text, 17, 2);
  auto rest = text.substr(19);
  if (!(rest.empty() || rest == "Z" || rest == "+00:00"))
    throw std::invalid_argument("timestamp must be UTC: " + std::string(text));
  if (hh > 23 || mm > 59 || ss > 59)
    throw std::invalid_argument("invalid time of day: " + std::string(text));
  return Timestamp{d} + chr::hours{hh} + chr::minutes{mm} + chr::seconds{ss};
}

std::string format_date(Date d) {
  chr::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string format_timestamp(Timestamp t) {
  const Date d = day_of(t);
  const auto secs = (t - Timestamp{d}).count();
  char buf[64];
  std::snprintf(buf, sizeof buf, "T%02lld:%02lld:%02lldZ", static_cast<long long>(secs / 3600),
                static_cast<long long>(secs / 60 % 60), static_cast<long long>(secs % 60));
  return format_date(d) + buf;
}

}  // namespace threatnet
