#include "qw/calendar.hpp"

#include <charconv>
#include <cstdio>

#include "qw/error.hpp"

namespace qw {

namespace chr = std::chrono;

Date::Date(int year, unsigned month, unsigned day) {
  const chr::year_month_day ymd{chr::year{year}, chr::month{month},
                                chr::day{day}};
  if (!ymd.ok()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "invalid calendar date %04d-%02u-%02u",
                  year, month, day);
    fail(ErrorKind::bad_date, buf);
  }
  days_ = chr::sys_days{ymd};
}

Date Date::parse(std::string_view iso) {
  auto bad = [&]() -> Date {
    fail(ErrorKind::bad_date,
         "not an ISO-8601 date (YYYY-MM-DD): '" + std::string(iso) + "'");
  };
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') return bad();
  auto field = [&](std::size_t pos, std::size_t len, int& out) {
    for (std::size_t i = pos; i < pos + len; ++i) {
      if (iso[i] < '0' || iso[i] > '9') return false;
    }
    auto res = std::from_chars(iso.data() + pos, iso.data() + pos + len, out);
    return res.ec == std::errc{};
  };
  int y = 0, m = 0, d = 0;
  if (!field(0, 4, y) || !field(5, 2, m) || !field(8, 2, d)) return bad();
  const chr::year_month_day ymd{chr::year{y}, chr::month{unsigned(m)},
                                chr::day{unsigned(d)}};
  if (!ymd.ok()) return bad();
  return Date(chr::sys_days{ymd});
}

std::string Date::iso() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year(), month(), day());
  return buf;
}

int Date::year() const {
  return int(chr::year_month_day{days_}.year());
}

unsigned Date::month() const {
  return unsigned(chr::year_month_day{days_}.month());
}

unsigned Date::day() const {
  return unsigned(chr::year_month_day{days_}.day());
}

int Date::day_of_year() const {
  const chr::year_month_day ymd{days_};
  const chr::sys_days jan1{ymd.year() / chr::January / 1};
  return int((days_ - jan1).count()) + 1;
}

unsigned Date::weekday() const {
  return chr::weekday{days_}.c_encoding();
}

Date Date::with_year(int y) const {
  unsigned m = month();
  unsigned d = day();
  if (m == 2 && d == 29 && !is_leap_year(y)) d = 28;
  return Date(y, m, d);
}

bool is_leap_year(int year) {
  return chr::year{year}.is_leap();
}

std::vector<Date> monday_thursday_inits(int year) {
  std::vector<Date> out;
  for (Date d(year, 1, 1); d.year() == year; d = d.plus_days(1)) {
    const unsigned wd = d.weekday();
    if (wd == 1 || wd == 4) out.push_back(d);
  }
  return out;
}

}  // namespace qw
