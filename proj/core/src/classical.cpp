#include "stmom/classical.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "stmom/csv.hpp"

namespace stmom {

SignalMatrix::SignalMatrix(std::vector<Date> d, std::vector<std::string> a)
    : dates(std::move(d)),
      assets(std::move(a)),
      signals(dates.size(), assets.size(), 0.0),
      usable(dates.size() * assets.size(), 0) {}

SignalMatrix long_only(const ReturnsPanel& panel) {
  SignalMatrix out(panel.dates(), panel.assets());
  for (std::size_t t = 0; t < panel.num_dates(); ++t) {
    for (std::size_t i = 0; i < panel.num_assets(); ++i) {
      if (!std::isnan(panel.returns()(t, i))) out.set(t, i, 1.0);
    }
  }
  return out;
}

Matrix trailing_returns(const ReturnsPanel& panel, int lookback_days) {
  if (lookback_days < 1) throw std::invalid_argument("lookback_days must be >= 1");
  const auto window = static_cast<std::size_t>(lookback_days);
  const Matrix& r = panel.returns();
  Matrix out(r.rows(), r.cols(), kMissing);
  for (std::size_t i = 0; i < r.cols(); ++i) {
    for (std::size_t t = window - 1; t < r.rows(); ++t) {
      if (std::isnan(r(t + 1 - window, i))) continue;
      double growth = 1.0;
      for (std::size_t s = t + 1 - window; s <= t; ++s) growth *= 1.0 + r(s, i);
      out(t, i) = growth - 1.0;
    }
  }
  return out;
}

SignalMatrix tsmom_signal(const ReturnsPanel& panel, int lookback_days) {
  const Matrix trailing = trailing_returns(panel, lookback_days);
  SignalMatrix out(panel.dates(), panel.assets());
  for (std::size_t t = 0; t < trailing.rows(); ++t) {
    for (std::size_t i = 0; i < trailing.cols(); ++i) {
      const double r = trailing(t, i);
      if (std::isnan(r)) continue;
      out.set(t, i, r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0));
    }
  }
  return out;
}

SignalMatrix macd_signal(const ReturnsPanel& panel, const MacdConfig& config) {
  const std::vector<Matrix> scores = macd_features(panel, config);
  SignalMatrix out(panel.dates(), panel.assets());
  const double weight = 1.0 / static_cast<double>(scores.size());
  for (std::size_t t = 0; t < panel.num_dates(); ++t) {
    for (std::size_t i = 0; i < panel.num_assets(); ++i) {
      double sum = 0.0;
      bool ok = true;
      for (const Matrix& y : scores) {
        if (std::isnan(y(t, i))) {
          ok = false;
          break;
        }
        sum += response_phi(y(t, i));
      }
      if (ok) out.set(t, i, std::clamp(weight * sum, -1.0, 1.0));
    }
  }
  return out;
}

std::vector<double> decile_positions(const std::vector<double>& scores,
                                     const std::vector<std::string>& ids, double decile) {
  if (scores.size() != ids.size()) throw std::invalid_argument("scores and ids differ in length");
  std::vector<double> positions(scores.size(), 0.0);
  std::vector<std::size_t> ranked;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isnan(scores[i])) ranked.push_back(i);
  }
  if (ranked.size() < 2) return positions;
  std::sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  });
  const std::size_t n_avail = ranked.size();
  std::size_t n_leg = static_cast<std::size_t>(std::floor(decile * static_cast<double>(n_avail) + 1e-9));
  n_leg = std::clamp<std::size_t>(n_leg, 1, n_avail / 2);
  for (std::size_t k = 0; k < n_leg; ++k) {
    positions[ranked[k]] = 1.0;
    positions[ranked[n_avail - 1 - k]] = -1.0;
  }
  return positions;
}

SignalMatrix csmom_signal(const ReturnsPanel& panel, int lookback_days, double decile) {
  if (panel.num_assets() < 2) throw std::invalid_argument("CSMOM needs at least two assets");
  if (!(decile > 0.0 && decile <= 0.5)) throw std::invalid_argument("decile must lie in (0, 0.5]");
  const Matrix trailing = trailing_returns(panel, lookback_days);
  SignalMatrix out(panel.dates(), panel.assets());
  std::vector<double> scores(panel.num_assets());
  for (std::size_t t = 0; t < trailing.rows(); ++t) {
    auto row = trailing.row(t);
    std::copy(row.begin(), row.end(), scores.begin());
    const std::size_t available =
        static_cast<std::size_t>(std::count_if(scores.begin(), scores.end(),
                                               [](double s) { return !std::isnan(s); }));
    if (available < 2) continue;
    const std::vector<double> pos = decile_positions(scores, panel.assets(), decile);
    for (std::size_t i = 0; i < pos.size(); ++i) {
      if (!std::isnan(scores[i])) out.set(t, i, pos[i]);
    }
  }
  return out;
}

void write_signal_csv(std::ostream& out, const SignalMatrix& signals) {
  csv::Writer w(out);
  std::vector<std::string> fields{"date"};
  for (const auto& a : signals.assets) fields.push_back(a);
  w.row(fields);
  for (std::size_t t = 0; t < signals.num_dates(); ++t) {
    fields.assign(1, signals.dates[t].to_string());
    for (std::size_t i = 0; i < signals.num_assets(); ++i) {
      fields.push_back(signals.is_usable(t, i) ? csv::format_double(signals.signals(t, i))
                                               : std::string());
    }
    w.row(fields);
  }
}

}  // namespace stmom
