#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "stmom/classical.hpp"
#include "stmom/features.hpp"
#include "stmom/market_data.hpp"
#include "stmom/matrix.hpp"

namespace stmom {

/// Annualized portfolio volatility estimates below this are floored.
inline constexpr double kPortfolioVolFloor = 1e-6;

/// Daily strategy returns indexed by signal date t; entry t is realized from
/// t to t + 1, so the last date always carries 0.
struct BacktestResult {
  std::vector<Date> dates;
  std::vector<double> raw;
  std::vector<double> rescaled;
  std::vector<double> scale_factors;  // rescaled = raw * factor
  Matrix captured;                    // per-asset R_i(t); NaN where unusable
  Matrix turnover;                    // per-asset TO_t in daily sigma-target units; NaN where unusable
  std::vector<std::size_t> active;    // N_t
  std::vector<unsigned char> flagged; // 1 where no asset was usable
};

/// Equal-weight volatility-scaled portfolio
///   (1 / N_t) sum_i X_t (sigma_tgt / sigma_t) r_{t+1}
/// with sigma_tgt annualized and converted to daily. An asset counts toward
/// N_t when its signal is usable and sigma_t and r_{t+1} are finite. Also
/// fills turnover (daily target units) and the portfolio rescale with
/// default settings.
BacktestResult aggregate_returns(const SignalMatrix& signals, const ReturnsPanel& panel,
                                 const VolatilityEstimates& vol, double sigma_target = 0.15);

struct RescaleResult {
  std::vector<double> series;
  std::vector<double> factors;
};

/// scaled_t = raw_t * sigma_tgt / sigma_hat_{t-1}, with sigma_hat the
/// annualized EWM std of raw through t - 1. Leading zeros (a strategy not yet
/// trading) are passed through, and the estimator starts at the first
/// nonzero date; the first span_days dates from there are left unscaled.
RescaleResult portfolio_rescale(std::span<const double> raw, double sigma_target = 0.15,
                                int span_days = 60);

/// TO_t = sigma_tgt * |X_t / sigma_t - X_{t-1} / sigma_{t-1}|, where an
/// unusable entry holds a flat position; the first date trades from flat.
/// sigma_tgt is used as given, in whatever units the caller chooses.
Matrix turnover(const SignalMatrix& signals, const VolatilityEstimates& vol, double sigma_target);

/// (1 / N_t) sum_i (R_i(t) - c * TO_t), c = cost_bps * 1e-4.
std::vector<double> apply_costs(const BacktestResult& result, double cost_bps);

/// The Table-4 style cost grid in basis points.
inline const std::vector<double>& default_cost_grid() {
  static const std::vector<double> grid{0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 10.0};
  return grid;
}

/// Weighted sum of the constituents' rescaled series (stored as raw), then
/// rescaled again. Weights must sum to 1 and dates must match.
BacktestResult combine_strategies(std::span<const BacktestResult> results,
                                  std::span<const double> weights, double sigma_target = 0.15,
                                  int span_days = 60);

/// Keeps dates [begin, end) of every per-date series and recomputes the
/// portfolio rescale on the kept raw series.
BacktestResult slice(const BacktestResult& result, std::size_t begin, std::size_t end,
                     double sigma_target = 0.15, int span_days = 60);

/// `date,raw,rescaled,net_c{bps}...` for each cost level. Net series are
/// rescaled with the same factors as the gross series.
void write_returns_csv(std::ostream& out, const BacktestResult& result,
                       std::span<const double> costs_bps);

/// Long `date,asset,turnover` for usable entries.
void write_turnover_csv(std::ostream& out, const BacktestResult& result,
                        const std::vector<std::string>& assets);

}  // namespace stmom
