#include "stmom/date.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace stmom {

namespace {

bool parse_digits(std::string_view text, int& out) {
  if (text.empty()) return false;
  for (char c : text) {
    if (c < '0' || c > '9') return false;
  }
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

Date Date::from_ymd(int year, unsigned month, unsigned day) {
  const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                        std::chrono::day{day}};
  if (!ymd.ok()) {
    throw std::invalid_argument("invalid calendar date");
  }
  return Date(std::chrono::sys_days{ymd});
}

Date Date::parse(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw std::invalid_argument("expected YYYY-MM-DD, got '" + std::string(text) + "'");
  }
  int y = 0;
  int m = 0;
  int d = 0;
  if (!parse_digits(text.substr(0, 4), y) || !parse_digits(text.substr(5, 2), m) ||
      !parse_digits(text.substr(8, 2), d)) {
    throw std::invalid_argument("expected YYYY-MM-DD, got '" + std::string(text) + "'");
  }
  try {
    return from_ymd(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("invalid calendar date '" + std::string(text) + "'");
  }
}

std::string Date::to_string() const {
  const std::chrono::year_month_day ymd{days_};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

int Date::year() const {
  return static_cast<int>(std::chrono::year_month_day{days_}.year());
}

}  // namespace stmom
