#include "stmom/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stmom/stats.hpp"

namespace stmom {

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{
      "expected_return", "volatility", "downside_deviation", "max_drawdown", "sharpe",
      "sortino",         "calmar",     "hit_rate",           "avg_profit_over_loss"};
  return names;
}

std::vector<std::optional<double>> metric_values(const MetricsRow& m) {
  return {m.expected_return, m.volatility, m.downside_deviation,
          m.max_drawdown,    m.sharpe,     m.sortino,
          m.calmar,          m.hit_rate,   m.avg_profit_over_loss};
}

MetricsRow compute_metrics(std::span<const double> returns) {
  if (returns.size() < 2) throw std::invalid_argument("metrics need at least two observations");
  const double n = static_cast<double>(returns.size());
  MetricsRow m;
  const double mean = stats::mean(returns);
  m.expected_return = 252.0 * mean;
  m.volatility = std::sqrt(252.0) * stats::population_stddev(returns);

  std::vector<double> gains, losses;
  double cum = 0.0, peak = 0.0, mdd = 0.0;
  for (double r : returns) {
    if (r > 0.0) gains.push_back(r);
    if (r < 0.0) losses.push_back(r);
    cum += r;
    peak = std::max(peak, cum);
    mdd = std::max(mdd, peak - cum);
  }
  m.max_drawdown = mdd;
  m.hit_rate = static_cast<double>(gains.size()) / n;
  m.downside_deviation = losses.empty() ? 0.0 : std::sqrt(252.0) * stats::population_stddev(losses);

  if (m.volatility > 0.0) m.sharpe = m.expected_return / m.volatility;
  if (m.downside_deviation > 0.0) m.sortino = m.expected_return / m.downside_deviation;
  if (mdd > 0.0) m.calmar = m.expected_return / mdd;
  if (!losses.empty()) {
    const double avg_gain = gains.empty() ? 0.0 : stats::mean(gains);
    m.avg_profit_over_loss = avg_gain / std::abs(stats::mean(losses));
  }
  return m;
}

std::vector<std::vector<std::optional<double>>> correlation_matrix(
    const std::vector<std::vector<double>>& series) {
  const std::size_t k = series.size();
  for (const auto& s : series) {
    if (s.size() != series.front().size()) {
      throw std::invalid_argument("correlation inputs have different lengths");
    }
  }
  std::vector<std::vector<std::optional<double>>> out(k, std::vector<std::optional<double>>(k));
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a; b < k; ++b) {
      out[a][b] = out[b][a] = stats::pearson(series[a], series[b]);
    }
  }
  return out;
}

std::vector<std::optional<double>> rolling_correlation(std::span<const double> a,
                                                       std::span<const double> b,
                                                       std::size_t window) {
  if (a.size() != b.size()) throw std::invalid_argument("rolling correlation needs equal lengths");
  if (window < 2 || window > a.size()) {
    throw std::invalid_argument("rolling window must lie in [2, series length]");
  }
  std::vector<std::optional<double>> out(a.size());
  for (std::size_t t = window - 1; t < a.size(); ++t) {
    out[t] = stats::pearson(a.subspan(t + 1 - window, window), b.subspan(t + 1 - window, window));
  }
  return out;
}

TurnoverSummary summarize(std::span<const double> values) {
  if (values.empty()) return {};
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return TurnoverSummary{sorted.front(),
                         stats::quantile_sorted(sorted, 0.25),
                         stats::quantile_sorted(sorted, 0.5),
                         stats::quantile_sorted(sorted, 0.75),
                         sorted.back(),
                         stats::mean(sorted)};
}

TurnoverSummary turnover_distribution(const Matrix& turnover) {
  std::vector<double> daily;
  for (std::size_t t = 0; t < turnover.rows(); ++t) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double v : turnover.row(t)) {
      if (std::isnan(v)) continue;
      sum += v;
      ++n;
    }
    if (n > 0) daily.push_back(sum / static_cast<double>(n));
  }
  return summarize(daily);
}

}  // namespace stmom
