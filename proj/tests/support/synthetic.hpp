#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "stmom/market_data.hpp"

namespace stmom::testing {

/// Weekdays starting at `start`.
std::vector<Date> business_days(Date start, std::size_t count);

/// Trend-following market with a cross-asset lead-lag.
///
/// Each asset carries a persistent AR(1) drift mu_i. Asset i's next-day
/// return also loads on asset i-1's return today (asset 0 has no leader):
///   r_i(t+1) = mu_i(t) + lead_lag * r_{i-1}(t) + noise_sd * e
struct SyntheticMarketConfig {
  std::size_t num_assets = 10;
  std::size_t num_days = 2000;
  Date start = Date::from_ymd(2000, 1, 3);
  double trend_persistence = 0.995;
  double trend_sd = 0.0008;  // stationary std of mu
  double noise_sd = 0.01;
  double lead_lag = 0.1;
  std::uint64_t seed = 1;
};

ReturnsPanel synthetic_momentum_market(const SyntheticMarketConfig& config);

/// IID Gaussian returns.
ReturnsPanel random_panel(std::size_t num_assets, std::size_t num_days, std::uint64_t seed,
                          double sd = 0.01);

/// Geometric random-walk prices starting at 100.
std::vector<double> random_prices(std::size_t num_days, std::uint64_t seed, double sd = 0.01);

}  // namespace stmom::testing
