#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "stmom/features.hpp"
#include "stmom/market_data.hpp"
#include "stmom/matrix.hpp"

namespace stmom {

/// Per-date trading signals X_t in [-1, 1] with a usability mask.
///
/// Unusable entries carry a zero signal and are excluded from N_t when
/// returns are aggregated.
struct SignalMatrix {
  std::vector<Date> dates;
  std::vector<std::string> assets;
  Matrix signals;
  std::vector<unsigned char> usable;  // row-major, same shape as signals

  SignalMatrix() = default;
  SignalMatrix(std::vector<Date> d, std::vector<std::string> a);

  std::size_t num_dates() const noexcept { return dates.size(); }
  std::size_t num_assets() const noexcept { return assets.size(); }
  bool is_usable(std::size_t t, std::size_t i) const { return usable[t * assets.size() + i] != 0; }
  void set(std::size_t t, std::size_t i, double x) {
    signals(t, i) = x;
    usable[t * assets.size() + i] = 1;
  }
};

/// +1 wherever the asset has a return on the date.
SignalMatrix long_only(const ReturnsPanel& panel);

/// Compounded simple return over the trailing `lookback` daily returns ending
/// at t; NaN with insufficient history.
Matrix trailing_returns(const ReturnsPanel& panel, int lookback_days);

/// sign of the trailing lookback return, with sign(0) = 0.
SignalMatrix tsmom_signal(const ReturnsPanel& panel, int lookback_days = 252);

/// Equal-weight average of phi(Y) over the configured MACD scale pairs.
SignalMatrix macd_signal(const ReturnsPanel& panel, const MacdConfig& config = {});

/// Cross-sectional decile portfolio on trailing returns: the top
/// max(1, floor(decile * N_t)) assets go long, the same number at the bottom
/// go short. Ties rank by asset identifier.
SignalMatrix csmom_signal(const ReturnsPanel& panel, int lookback_days = 252,
                          double decile = 0.10);

/// Ranks one cross-section. scores may contain NaN (excluded). Returns
/// per-asset signals in {-1, 0, 1}.
std::vector<double> decile_positions(const std::vector<double>& scores,
                                     const std::vector<std::string>& ids, double decile);

/// Wide CSV `date,<asset>...`; unusable entries are empty fields.
void write_signal_csv(std::ostream& out, const SignalMatrix& signals);

}  // namespace stmom
