#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "stmom/market_data.hpp"
#include "stmom/matrix.hpp"

namespace stmom {

/// Daily volatility below this is floored.
inline constexpr double kVolFloor = 1e-6;

/// Causal ex-ante daily volatility per asset (NaN before an asset's first return).
struct VolatilityEstimates {
  Matrix sigma;
  int span_days = 60;
};

/// EWM standard deviation of daily returns up to and including each date,
/// floored at kVolFloor. Throws std::invalid_argument for span_days < 2.
VolatilityEstimates ex_ante_volatility(const ReturnsPanel& panel, int span_days = 60);

struct MacdConfig {
  std::vector<int> short_scales{8, 16, 32};
  std::vector<int> long_scales{24, 48, 96};
  int price_std_window = 63;
  int signal_std_window = 252;

  /// Throws std::invalid_argument unless scales pair up with S_k < L_k.
  void validate() const;
};

/// Half-life of the moving average with time scale j: log(0.5) / log(1 - 1/j).
double macd_half_life(int time_scale);

/// Bounded odd response y * exp(-y^2 / 4) / 0.89; peaks at y = sqrt(2).
double response_phi(double y);

/// One T x N matrix per horizon k: r_{t-k,t} / (sigma_t * sqrt(k)), where the
/// k-day return compounds daily simple returns. NaN where history is short.
std::vector<Matrix> normalized_returns(const ReturnsPanel& panel, const VolatilityEstimates& vol,
                                       const std::vector<int>& horizons);

/// One T x N matrix per (S_k, L_k) pair holding the doubly normalized MACD
/// score Y_t. Entries are NaN during warm-up or where a rolling std is zero.
std::vector<Matrix> macd_features(const ReturnsPanel& panel, const MacdConfig& config);

/// Price levels for MACD: the panel's prices when present, otherwise the
/// cumulative product of (1 + r) starting from 1.0.
Matrix price_levels(const ReturnsPanel& panel);

inline const std::vector<int>& default_return_horizons() {
  static const std::vector<int> horizons{1, 20, 63, 126, 252};
  return horizons;
}

/// Per-date momentum features with a temporal history of tau lags.
///
/// Stored compactly as base features (T x N x d); the spatio-temporal entry
/// u_t(i, j, k) is base(t - j, i, k). Row t is usable when every entry of u_t
/// is finite.
class FeatureTensor {
 public:
  FeatureTensor(std::vector<Date> dates, std::vector<std::string> assets,
                std::vector<std::string> feature_names, std::vector<double> base, std::size_t tau);

  std::size_t num_dates() const noexcept { return dates_.size(); }
  std::size_t num_assets() const noexcept { return assets_.size(); }
  std::size_t num_features() const noexcept { return feature_names_.size(); }
  std::size_t tau() const noexcept { return tau_; }

  /// Flattened per-date input length m = N * tau * d.
  std::size_t sample_width() const noexcept { return num_assets() * tau_ * num_features(); }

  const std::vector<Date>& dates() const noexcept { return dates_; }
  const std::vector<std::string>& assets() const noexcept { return assets_; }
  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }

  /// Base feature k of asset i on date t.
  double base(std::size_t t, std::size_t i, std::size_t k) const {
    return (*base_)[(t * num_assets() + i) * num_features() + k];
  }

  /// u_t(i, j, k): feature k of asset i at date t - j. NaN when t < j.
  double at(std::size_t t, std::size_t i, std::size_t j, std::size_t k) const;

  bool usable(std::size_t t) const { return usable_[t] != 0; }

  /// Flattened u_t in canonical order ((i * tau + j) * d + k).
  void sample(std::size_t t, std::span<double> out) const;
  std::vector<double> sample(std::size_t t) const;

  /// Label of canonical column c, e.g. "AJG_t-4_MACD_32_96".
  std::string column_label(std::size_t column) const;

  /// Same base features with a different temporal history.
  FeatureTensor with_tau(std::size_t tau) const;

 private:
  void compute_usable();

  std::vector<Date> dates_;
  std::vector<std::string> assets_;
  std::vector<std::string> feature_names_;
  std::shared_ptr<const std::vector<double>> base_;
  std::size_t tau_;
  std::vector<unsigned char> usable_;
};

/// Stacks normalized returns (default horizons) and MACD scores for every
/// asset; feature names are NORM_RET_{k} and MACD_{S}_{L}. tau >= 1.
FeatureTensor assemble_tensor(const ReturnsPanel& panel, const VolatilityEstimates& vol,
                              const MacdConfig& config, std::size_t tau,
                              const std::vector<int>& horizons = default_return_horizons());

/// Long audit CSV `date,asset,lag,feature,value` for rows [begin, end).
void write_feature_csv(std::ostream& out, const FeatureTensor& features, std::size_t begin,
                       std::size_t end);

}  // namespace stmom
