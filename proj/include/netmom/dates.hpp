#pragma once

#include <chrono>
#include <compare>
#include <string>
#include <string_view>
#include <vector>

namespace netmom {

/// Calendar date stored as days since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;
  explicit constexpr Date(std::chrono::sys_days d) : days_(d.time_since_epoch().count()) {}

  static Date from_ymd(int year, unsigned month, unsigned day);
  /// Parses `YYYY-MM-DD`; throws DataError on anything else.
  static Date parse(std::string_view iso);

  std::chrono::sys_days sys_days() const { return std::chrono::sys_days{std::chrono::days{days_}}; }
  std::chrono::year_month_day ymd() const { return std::chrono::year_month_day{sys_days()}; }
  int year() const { return static_cast<int>(ymd().year()); }
  bool is_weekday() const;
  std::string iso() const;
  int serial() const { return days_; }

  Date operator+(int n) const { return Date{sys_days() + std::chrono::days{n}}; }

  auto operator<=>(const Date&) const = default;

 private:
  int days_ = 0;
};

/// Monday-to-Friday dates in [first, last].
std::vector<Date> business_days(Date first, Date last);

/// First `count` Monday-to-Friday dates on or after `first`.
std::vector<Date> business_days(Date first, int count);

}  // namespace netmom
