#pragma once

#include <chrono>
#include <compare>
#include <string>
#include <string_view>
#include <vector>

namespace qw {

/// A calendar day (proleptic Gregorian, day granularity).
class Date {
 public:
  Date() = default;
  Date(int year, unsigned month, unsigned day);
  explicit Date(std::chrono::sys_days days) : days_(days) {}

  /// Parses "YYYY-MM-DD"; throws ErrorKind::bad_date on anything else.
  static Date parse(std::string_view iso);

  std::string iso() const;
  int year() const;
  unsigned month() const;
  unsigned day() const;
  /// 1-based ordinal day within the year (1..366).
  int day_of_year() const;
  /// 0 = Sunday ... 6 = Saturday.
  unsigned weekday() const;

  Date plus_days(long n) const { return Date(days_ + std::chrono::days(n)); }
  long days_since(const Date& other) const {
    return (days_ - other.days_).count();
  }
  std::chrono::sys_days sys_days() const { return days_; }

  /// Same month/day in another year. Feb 29 maps to Feb 28 in non-leap years.
  Date with_year(int year) const;

  auto operator<=>(const Date&) const = default;

 private:
  std::chrono::sys_days days_{};
};

bool is_leap_year(int year);

/// Monday and Thursday dates within a calendar year, in order.
std::vector<Date> monday_thursday_inits(int year);

/// Inclusive range of years.
struct YearRange {
  int first = 0;
  int last = 0;

  int count() const { return last - first + 1; }
  bool contains(int y) const { return y >= first && y <= last; }
  bool overlaps(const YearRange& other) const {
    return first <= other.last && other.first <= last;
  }
};

}  // namespace qw
