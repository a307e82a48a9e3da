#include "stmom/backtest.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "stmom/csv.hpp"
#include "stmom/stats.hpp"

namespace stmom {

namespace {

double daily(double annual) { return annual / std::sqrt(252.0); }

bool has_position(const SignalMatrix& signals, const VolatilityEstimates& vol, std::size_t t,
                  std::size_t i) {
  return signals.is_usable(t, i) && std::isfinite(vol.sigma(t, i));
}

void check_alignment(const SignalMatrix& signals, const VolatilityEstimates& vol) {
  if (vol.sigma.rows() != signals.num_dates() || vol.sigma.cols() != signals.num_assets()) {
    throw std::invalid_argument("signals and volatility estimates are not aligned");
  }
}

}  // namespace

Matrix turnover(const SignalMatrix& signals, const VolatilityEstimates& vol, double sigma_target) {
  check_alignment(signals, vol);
  const std::size_t T = signals.num_dates(), N = signals.num_assets();
  Matrix out(T, N, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    double prev = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const double pos =
          has_position(signals, vol, t, i) ? signals.signals(t, i) / vol.sigma(t, i) : 0.0;
      out(t, i) = sigma_target * std::abs(pos - prev);
      prev = pos;
    }
  }
  return out;
}

RescaleResult portfolio_rescale(std::span<const double> raw, double sigma_target, int span_days) {
  if (span_days < 2) throw std::invalid_argument("rescale span must be >= 2");
  if (!(sigma_target > 0.0)) throw std::invalid_argument("sigma target must be positive");
  RescaleResult out{std::vector<double>(raw.begin(), raw.end()),
                    std::vector<double>(raw.size(), 1.0)};
  std::size_t start = 0;
  while (start < raw.size() && raw[start] == 0.0) ++start;
  stats::EwmMoments ewm(stats::span_alpha(span_days));
  const double annualize = std::sqrt(252.0);
  for (std::size_t t = start; t < raw.size(); ++t) {
    if (t - start >= static_cast<std::size_t>(span_days)) {
      const double sigma_hat = std::max(ewm.stddev() * annualize, kPortfolioVolFloor);
      out.factors[t] = sigma_target / sigma_hat;
      out.series[t] = raw[t] * out.factors[t];
    }
    ewm.update(raw[t]);
  }
  return out;
}

BacktestResult aggregate_returns(const SignalMatrix& signals, const ReturnsPanel& panel,
                                 const VolatilityEstimates& vol, double sigma_target) {
  check_alignment(signals, vol);
  if (panel.num_dates() != signals.num_dates() || panel.num_assets() != signals.num_assets()) {
    throw std::invalid_argument("signals and returns panel are not aligned");
  }
  const std::size_t T = signals.num_dates(), N = signals.num_assets();
  const double target = daily(sigma_target);
  BacktestResult out;
  out.dates = signals.dates;
  out.raw.assign(T, 0.0);
  out.captured = Matrix(T, N, kMissing);
  out.active.assign(T, 0);
  out.flagged.assign(T, 0);
  const Matrix& r = panel.returns();
  for (std::size_t t = 0; t < T; ++t) {
    double sum = 0.0;
    std::size_t n = 0;
    if (t + 1 < T) {
      for (std::size_t i = 0; i < N; ++i) {
        if (!has_position(signals, vol, t, i) || !std::isfinite(r(t + 1, i))) continue;
        const double captured = signals.signals(t, i) * (target / vol.sigma(t, i)) * r(t + 1, i);
        out.captured(t, i) = captured;
        sum += captured;
        ++n;
      }
    }
    out.active[t] = n;
    out.flagged[t] = n == 0 ? 1 : 0;
    out.raw[t] = n > 0 ? sum / static_cast<double>(n) : 0.0;
  }
  out.turnover = turnover(signals, vol, target);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < N; ++i) {
      if (std::isnan(out.captured(t, i))) out.turnover(t, i) = kMissing;
    }
  }
  RescaleResult rs = portfolio_rescale(out.raw, sigma_target);
  out.rescaled = std::move(rs.series);
  out.scale_factors = std::move(rs.factors);
  return out;
}

std::vector<double> apply_costs(const BacktestResult& result, double cost_bps) {
  if (!(cost_bps >= 0.0)) throw std::invalid_argument("cost must be >= 0 bps");
  const double c = cost_bps * 1e-4;
  const std::size_t T = result.raw.size();
  std::vector<double> net(T, 0.0);
  if (result.captured.empty()) {
    // Combined strategies carry no per-asset detail; costs are not modeled.
    return result.raw;
  }
  for (std::size_t t = 0; t < T; ++t) {
    if (result.active[t] == 0) continue;
    double sum = 0.0;
    for (std::size_t i = 0; i < result.captured.cols(); ++i) {
      const double R = result.captured(t, i);
      if (std::isnan(R)) continue;
      sum += R - c * result.turnover(t, i);
    }
    net[t] = sum / static_cast<double>(result.active[t]);
  }
  return net;
}

BacktestResult combine_strategies(std::span<const BacktestResult> results,
                                  std::span<const double> weights, double sigma_target,
                                  int span_days) {
  if (results.empty()) throw std::invalid_argument("nothing to combine");
  if (weights.size() != results.size()) {
    throw std::invalid_argument("one weight per strategy required");
  }
  double total = 0.0;
  for (double w : weights) total += w;
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("weights must sum to 1");
  const std::size_t T = results.front().dates.size();
  for (const BacktestResult& r : results) {
    if (r.dates != results.front().dates) {
      throw std::invalid_argument("strategies to combine have different dates");
    }
  }
  BacktestResult out;
  out.dates = results.front().dates;
  out.raw.assign(T, 0.0);
  out.active.assign(T, 0);
  out.flagged.assign(T, 1);
  for (std::size_t k = 0; k < results.size(); ++k) {
    for (std::size_t t = 0; t < T; ++t) {
      out.raw[t] += weights[k] * results[k].rescaled[t];
      out.active[t] += results[k].active[t];
      if (!results[k].flagged[t]) out.flagged[t] = 0;
    }
  }
  RescaleResult rs = portfolio_rescale(out.raw, sigma_target, span_days);
  out.rescaled = std::move(rs.series);
  out.scale_factors = std::move(rs.factors);
  return out;
}

BacktestResult slice(const BacktestResult& result, std::size_t begin, std::size_t end,
                     double sigma_target, int span_days) {
  const std::size_t T = result.dates.size();
  if (begin > end || end > T) throw std::invalid_argument("slice range out of bounds");
  auto cut = [&](const auto& v) {
    using V = std::decay_t<decltype(v)>;
    return V(v.begin() + static_cast<std::ptrdiff_t>(begin),
             v.begin() + static_cast<std::ptrdiff_t>(end));
  };
  auto cut_matrix = [&](const Matrix& m) {
    if (m.empty()) return Matrix();
    Matrix out(end - begin, m.cols());
    for (std::size_t t = begin; t < end; ++t) {
      for (std::size_t i = 0; i < m.cols(); ++i) out(t - begin, i) = m(t, i);
    }
    return out;
  };
  BacktestResult out;
  out.dates = cut(result.dates);
  out.raw = cut(result.raw);
  out.captured = cut_matrix(result.captured);
  out.turnover = cut_matrix(result.turnover);
  out.active = cut(result.active);
  out.flagged = cut(result.flagged);
  RescaleResult rs = portfolio_rescale(out.raw, sigma_target, span_days);
  out.rescaled = std::move(rs.series);
  out.scale_factors = std::move(rs.factors);
  return out;
}

void write_returns_csv(std::ostream& out, const BacktestResult& result,
                       std::span<const double> costs_bps) {
  std::vector<std::string> header{"date", "raw", "rescaled"};
  std::vector<std::vector<double>> nets;
  for (double c : costs_bps) {
    header.push_back("net_c" + csv::format_double(c));
    std::vector<double> net = apply_costs(result, c);
    for (std::size_t t = 0; t < net.size(); ++t) net[t] *= result.scale_factors[t];
    nets.push_back(std::move(net));
  }
  csv::Writer w(out);
  w.row(header);
  for (std::size_t t = 0; t < result.dates.size(); ++t) {
    std::vector<std::string> row{result.dates[t].to_string(), csv::format_double(result.raw[t]),
                                 csv::format_double(result.rescaled[t])};
    for (const auto& net : nets) row.push_back(csv::format_double(net[t]));
    w.row(row);
  }
}

void write_turnover_csv(std::ostream& out, const BacktestResult& result,
                        const std::vector<std::string>& assets) {
  csv::Writer w(out);
  w.row({"date", "asset", "turnover"});
  for (std::size_t t = 0; t < result.dates.size(); ++t) {
    for (std::size_t i = 0; i < assets.size(); ++i) {
      if (std::isnan(result.captured(t, i))) continue;
      w.row({result.dates[t].to_string(), assets[i], csv::format_double(result.turnover(t, i))});
    }
  }
}

}  // namespace stmom
