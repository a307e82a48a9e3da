#include "oracles.hpp"

#include <cmath>

namespace stmom::testing {

std::vector<double> counting_decile_positions(const std::vector<double>& scores,
                                              const std::vector<std::string>& ids,
                                              double decile) {
  const std::size_t n = scores.size();
  std::vector<double> out(n, 0.0);
  std::size_t legs = static_cast<std::size_t>(std::floor(decile * static_cast<double>(n) + 1e-9));
  if (legs < 1) legs = 1;
  if (legs > n / 2) legs = n / 2;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t above = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (scores[j] > scores[i] || (scores[j] == scores[i] && ids[j] < ids[i])) ++above;
    }
    if (above < legs) out[i] = 1.0;
    if (above >= n - legs) out[i] = -1.0;
  }
  return out;
}

std::vector<double> literal_portfolio_returns(const std::vector<std::vector<double>>& signals,
                                              const std::vector<std::vector<bool>>& usable,
                                              const std::vector<std::vector<double>>& sigma,
                                              const std::vector<std::vector<double>>& returns,
                                              double annual_target) {
  const std::size_t T = signals.size();
  const double daily_target = annual_target / std::sqrt(252.0);
  std::vector<double> out(T, 0.0);
  for (std::size_t t = 0; t + 1 < T; ++t) {
    double total = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < signals[t].size(); ++i) {
      if (!usable[t][i]) continue;
      if (!std::isfinite(sigma[t][i]) || !std::isfinite(returns[t + 1][i])) continue;
      total += signals[t][i] * daily_target / sigma[t][i] * returns[t + 1][i];
      ++count;
    }
    out[t] = count > 0 ? total / count : 0.0;
  }
  return out;
}

}  // namespace stmom::testing
