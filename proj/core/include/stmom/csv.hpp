#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stmom::csv {

/// Splits one CSV line on commas. Quoted fields are not supported; the
/// formats read and written here never need them.
std::vector<std::string_view> split(std::string_view line);

std::string_view trim(std::string_view s);

/// 17 significant digits, which round-trips any double. NaN renders as "".
std::string format_double(double v);

/// Formats with 17 significant digits, or "NA" when empty.
std::string format_optional(const std::optional<double>& v);

/// Writes a header and rows, joining fields with commas and rows with '\n'.
class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& out_;
};

}  // namespace stmom::csv
