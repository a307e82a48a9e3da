#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stmom/matrix.hpp"

namespace stmom {

/// Annualized performance measures of a daily return series. Ratios that
/// are undefined (zero denominator) are empty and render as "NA".
struct MetricsRow {
  double expected_return = 0.0;
  double volatility = 0.0;
  double downside_deviation = 0.0;
  double max_drawdown = 0.0;
  std::optional<double> sharpe;
  std::optional<double> sortino;
  std::optional<double> calmar;
  double hit_rate = 0.0;
  std::optional<double> avg_profit_over_loss;
};

/// Names of the nine metrics in column order.
const std::vector<std::string>& metric_names();

/// The nine metrics in column order.
std::vector<std::optional<double>> metric_values(const MetricsRow& row);

/// E[ret] = 252 mean, vol = sqrt(252) std, downside deviation = sqrt(252)
/// std of the strictly negative days, MDD on additive cumulative returns
/// (peak starting at 0), hit rate = share of days > 0, Ave.P/Ave.L =
/// mean(gains) / |mean(losses)|. Standard deviations are population.
/// Requires at least two observations.
MetricsRow compute_metrics(std::span<const double> returns);

/// Pearson correlations between series; empty entries where undefined.
std::vector<std::vector<std::optional<double>>> correlation_matrix(
    const std::vector<std::vector<double>>& series);

/// Correlation over the trailing `window` days ending at each date; empty
/// before a full window or where a window has zero variance.
std::vector<std::optional<double>> rolling_correlation(std::span<const double> a,
                                                       std::span<const double> b,
                                                       std::size_t window = 252);

struct TurnoverSummary {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

/// Five-number summary plus mean of the daily cross-asset average turnover.
/// NaN entries are ignored; dates with no finite entry are skipped.
TurnoverSummary turnover_distribution(const Matrix& turnover);

/// Summary of a series directly.
TurnoverSummary summarize(std::span<const double> values);

}  // namespace stmom
