#include "netmom/dates.hpp"

#include <charconv>
#include <cstdio>

#include "netmom/errors.hpp"

namespace netmom {

namespace {

bool parse_uint(std::string_view s, unsigned& out) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
  }
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

Date Date::from_ymd(int year, unsigned month, unsigned day) {
  const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                        std::chrono::day{day}};
  if (!ymd.ok()) {
    throw DataError("invalid calendar date " + std::to_string(year) + "-" + std::to_string(month) +
                    "-" + std::to_string(day));
  }
  return Date{std::chrono::sys_days{ymd}};
}

Date Date::parse(std::string_view iso) {
  unsigned y = 0, m = 0, d = 0;
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-' || !parse_uint(iso.substr(0, 4), y) ||
      !parse_uint(iso.substr(5, 2), m) || !parse_uint(iso.substr(8, 2), d)) {
    throw DataError("unparseable date '" + std::string(iso) + "' (expected YYYY-MM-DD)");
  }
  return from_ymd(static_cast<int>(y), m, d);
}

bool Date::is_weekday() const {
  const std::chrono::weekday wd{sys_days()};
  return wd != std::chrono::Saturday && wd != std::chrono::Sunday;
}

std::string Date::iso() const {
  const auto d = ymd();
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

std::vector<Date> business_days(Date first, Date last) {
  std::vector<Date> out;
  for (Date d = first; d <= last; d = d + 1) {
    if (d.is_weekday()) out.push_back(d);
  }
  return out;
}

std::vector<Date> business_days(Date first, int count) {
  std::vector<Date> out;
  out.reserve(count > 0 ? static_cast<std::size_t>(count) : 0);
  for (Date d = first; static_cast<int>(out.size()) < count; d = d + 1) {
    if (d.is_weekday()) out.push_back(d);
  }
  return out;
}

}  // namespace netmom
