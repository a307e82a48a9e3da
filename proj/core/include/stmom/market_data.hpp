#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stmom/date.hpp"
#include "stmom/matrix.hpp"

namespace stmom {

enum class ValueFormat { Price, Return };

/// Date-by-asset panel of daily simple returns on a shared calendar.
///
/// returns(t, i) is the return realized on dates[t] (from t-1 to t). Leading
/// entries before an asset's first observation are NaN; there are no interior
/// gaps. prices, when present, has the same shape.
class ReturnsPanel {
 public:
  ReturnsPanel() = default;
  ReturnsPanel(std::vector<Date> dates, std::vector<std::string> assets, Matrix returns,
               std::optional<Matrix> prices = std::nullopt);

  std::size_t num_dates() const noexcept { return dates_.size(); }
  std::size_t num_assets() const noexcept { return assets_.size(); }

  const std::vector<Date>& dates() const noexcept { return dates_; }
  const std::vector<std::string>& assets() const noexcept { return assets_; }
  const Matrix& returns() const noexcept { return returns_; }
  const std::optional<Matrix>& prices() const noexcept { return prices_; }

  /// Index of the first date >= d (num_dates() when none).
  std::size_t lower_bound(const Date& d) const;
  std::optional<std::size_t> asset_index(const std::string& id) const;

  /// Rows [begin, end).
  ReturnsPanel slice(std::size_t begin, std::size_t end) const;

  /// Same panel with returns replaced (prices dropped, since they would no
  /// longer be consistent).
  ReturnsPanel with_returns(Matrix returns) const;

 private:
  std::vector<Date> dates_;
  std::vector<std::string> assets_;
  Matrix returns_;
  std::optional<Matrix> prices_;
};

/// Columns with this fraction of missing observations or more are rejected.
inline constexpr double kMaxMissingFraction = 0.10;

/// Reads a long (`date,asset,value`) or wide (`date,<asset>...`) CSV.
///
/// Prices become returns via p_t / p_{t-1} - 1. Interior gaps carry the last
/// price forward (zero return); leading gaps stay missing. Throws ParseError
/// for malformed rows and DataError for assets with too many missing dates.
ReturnsPanel ingest_csv(const std::filesystem::path& path, ValueFormat format);
ReturnsPanel ingest_csv(std::istream& in, ValueFormat format);

/// Wide CSV of the returns matrix with 17 significant digits per value;
/// missing values are empty fields.
void write_panel_csv(std::ostream& out, const ReturnsPanel& panel);
void write_panel_csv(const std::filesystem::path& path, const ReturnsPanel& panel);

struct WinsorizeConfig {
  int span_days = 252;
  double n_sigmas = 5.0;  // +infinity disables clipping
  std::size_t min_periods = 20;
};

/// Clips each return to mean +/- n_sigmas * std, where the EWM statistics are
/// built from the already-clipped series strictly before the date. This makes
/// the operation causal and idempotent.
ReturnsPanel winsorize(const ReturnsPanel& panel, const WinsorizeConfig& config = {});

/// Half-open index range [begin, end).
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// Chronological split at floor(fraction * n). Requires at least 10 entries
/// and both parts nonempty.
std::pair<IndexRange, IndexRange> split_train_validation(IndexRange range, double fraction = 0.9);

}  // namespace stmom
