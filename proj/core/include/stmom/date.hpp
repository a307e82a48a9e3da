#pragma once

#include <chrono>
#include <compare>
#include <string>
#include <string_view>

namespace stmom {

/// Calendar date with day resolution.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::chrono::sys_days days) : days_(days) {}

  static Date from_ymd(int year, unsigned month, unsigned day);

  /// Parses `YYYY-MM-DD`; throws std::invalid_argument on anything else.
  static Date parse(std::string_view text);

  std::string to_string() const;
  int year() const;
  constexpr std::chrono::sys_days days() const { return days_; }

  Date plus_days(int n) const { return Date(days_ + std::chrono::days(n)); }

  friend constexpr auto operator<=>(const Date&, const Date&) = default;

 private:
  std::chrono::sys_days days_{};
};

}  // namespace stmom
