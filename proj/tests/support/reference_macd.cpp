#include "reference_macd.hpp"

#include <cmath>
#include <limits>

namespace stmom::testing {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// sum_{k=0..t} w^k p[t-k] / sum_{k=0..t} w^k
double weighted_average(const std::vector<double>& p, long t, double w) {
  double num = 0.0, den = 0.0;
  for (long k = 0; k <= t; ++k) {
    const double weight = std::pow(w, static_cast<double>(k));
    num += weight * p[static_cast<std::size_t>(t - k)];
    den += weight;
  }
  return num / den;
}

double sample_std(const std::vector<double>& x, long last, long n) {
  double mean = 0.0;
  for (long k = last - n + 1; k <= last; ++k) mean += x[static_cast<std::size_t>(k)];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (long k = last - n + 1; k <= last; ++k) {
    const double d = x[static_cast<std::size_t>(k)] - mean;
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(n - 1));
}

}  // namespace

double reference_half_life(int time_scale) {
  return std::log(0.5) / std::log(1.0 - 1.0 / static_cast<double>(time_scale));
}

std::vector<double> reference_macd_signal(const std::vector<double>& prices) {
  const int shorts[3] = {8, 16, 32};
  const int longs[3] = {24, 48, 96};
  const long T = static_cast<long>(prices.size());
  std::vector<double> signal(prices.size(), 0.0);
  std::vector<int> defined(prices.size(), 1);
  for (int k = 0; k < 3; ++k) {
    const double ws = 1.0 - 1.0 / shorts[k];
    const double wl = 1.0 - 1.0 / longs[k];
    std::vector<double> q(prices.size(), kNaN);
    for (long t = 0; t < T; ++t) {
      if (t + 1 < longs[k] || t + 1 < 63) continue;
      const double macd = weighted_average(prices, t, ws) - weighted_average(prices, t, wl);
      q[static_cast<std::size_t>(t)] = macd / sample_std(prices, t, 63);
    }
    for (long t = 0; t < T; ++t) {
      const auto ut = static_cast<std::size_t>(t);
      bool ok = t + 1 >= 252;
      for (long s = t - 251; ok && s <= t; ++s) ok = !std::isnan(q[static_cast<std::size_t>(s)]);
      if (!ok) {
        defined[ut] = 0;
        continue;
      }
      const double y = q[ut] / sample_std(q, t, 252);
      signal[ut] += y * std::exp(-y * y / 4.0) / 0.89 / 3.0;
    }
  }
  for (std::size_t t = 0; t < signal.size(); ++t) {
    if (!defined[t]) {
      signal[t] = kNaN;
    } else if (signal[t] > 1.0) {
      signal[t] = 1.0;
    } else if (signal[t] < -1.0) {
      signal[t] = -1.0;
    }
  }
  return signal;
}

}  // namespace stmom::testing
