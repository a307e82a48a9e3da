#include "stmom/features.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "stmom/csv.hpp"
#include "stmom/stats.hpp"

namespace stmom {

VolatilityEstimates ex_ante_volatility(const ReturnsPanel& panel, int span_days) {
  if (span_days < 2) throw std::invalid_argument("ex_ante_volatility: span_days must be >= 2");
  const double alpha = stats::span_alpha(span_days);
  const Matrix& r = panel.returns();
  VolatilityEstimates out{Matrix(r.rows(), r.cols(), kMissing), span_days};
  for (std::size_t i = 0; i < r.cols(); ++i) {
    stats::EwmMoments moments(alpha);
    for (std::size_t t = 0; t < r.rows(); ++t) {
      if (std::isnan(r(t, i))) continue;
      moments.update(r(t, i));
      out.sigma(t, i) = std::max(moments.stddev(), kVolFloor);
    }
  }
  return out;
}

void MacdConfig::validate() const {
  if (short_scales.empty() || short_scales.size() != long_scales.size()) {
    throw std::invalid_argument("MACD short and long scales must pair up");
  }
  for (std::size_t k = 0; k < short_scales.size(); ++k) {
    if (short_scales[k] < 2 || short_scales[k] >= long_scales[k]) {
      throw std::invalid_argument("MACD scales need 2 <= S_k < L_k");
    }
  }
  if (price_std_window < 2 || signal_std_window < 2) {
    throw std::invalid_argument("MACD std windows must be >= 2");
  }
}

double macd_half_life(int time_scale) {
  if (time_scale < 2) throw std::invalid_argument("MACD time scale must be >= 2");
  return std::log(0.5) / std::log(1.0 - 1.0 / static_cast<double>(time_scale));
}

double response_phi(double y) { return y * std::exp(-y * y / 4.0) / 0.89; }

std::vector<Matrix> normalized_returns(const ReturnsPanel& panel, const VolatilityEstimates& vol,
                                       const std::vector<int>& horizons) {
  const Matrix& r = panel.returns();
  if (vol.sigma.rows() != r.rows() || vol.sigma.cols() != r.cols()) {
    throw std::invalid_argument("volatility estimates do not match the panel");
  }
  std::vector<Matrix> out;
  out.reserve(horizons.size());
  for (int k : horizons) {
    if (k < 1) throw std::invalid_argument("return horizon must be >= 1");
    const auto window = static_cast<std::size_t>(k);
    const double scale = std::sqrt(static_cast<double>(k));
    Matrix feature(r.rows(), r.cols(), kMissing);
    for (std::size_t i = 0; i < r.cols(); ++i) {
      for (std::size_t t = window - 1; t < r.rows(); ++t) {
        const double sigma = vol.sigma(t, i);
        if (std::isnan(sigma) || std::isnan(r(t + 1 - window, i))) continue;
        double growth = 1.0;
        for (std::size_t s = t + 1 - window; s <= t; ++s) growth *= 1.0 + r(s, i);
        feature(t, i) = (growth - 1.0) / (sigma * scale);
      }
    }
    out.push_back(std::move(feature));
  }
  return out;
}

Matrix price_levels(const ReturnsPanel& panel) {
  if (panel.prices()) return *panel.prices();
  const Matrix& r = panel.returns();
  Matrix p(r.rows(), r.cols(), kMissing);
  for (std::size_t i = 0; i < r.cols(); ++i) {
    double level = 1.0;
    for (std::size_t t = 0; t < r.rows(); ++t) {
      if (std::isnan(r(t, i))) continue;
      level *= 1.0 + r(t, i);
      p(t, i) = level;
    }
  }
  return p;
}

namespace {

// Sample std of xs[end - window, end); NaN if any entry is missing.
double trailing_sample_std(const std::vector<double>& xs, std::size_t end, std::size_t window,
                           double& mean_out) {
  double sum = 0.0;
  for (std::size_t s = end - window; s < end; ++s) {
    if (std::isnan(xs[s])) return kMissing;
    sum += xs[s];
  }
  const double m = sum / static_cast<double>(window);
  double ss = 0.0;
  for (std::size_t s = end - window; s < end; ++s) ss += (xs[s] - m) * (xs[s] - m);
  mean_out = m;
  return std::sqrt(ss / static_cast<double>(window - 1));
}

// Relative threshold under which a rolling std counts as zero (flat series).
constexpr double kDegenerateStd = 1e-12;

}  // namespace

std::vector<Matrix> macd_features(const ReturnsPanel& panel, const MacdConfig& config) {
  config.validate();
  const Matrix prices = price_levels(panel);
  const std::size_t T = prices.rows();
  const std::size_t N = prices.cols();
  const auto price_window = static_cast<std::size_t>(config.price_std_window);
  const auto signal_window = static_cast<std::size_t>(config.signal_std_window);

  std::vector<Matrix> out;
  for (std::size_t pair = 0; pair < config.short_scales.size(); ++pair) {
    const int short_scale = config.short_scales[pair];
    const int long_scale = config.long_scales[pair];
    // Decay per step implied by the half-life: 0.5^(1/HL) = 1 - 1/j.
    const double w_short = std::pow(0.5, 1.0 / macd_half_life(short_scale));
    const double w_long = std::pow(0.5, 1.0 / macd_half_life(long_scale));
    Matrix feature(T, N, kMissing);

    for (std::size_t i = 0; i < N; ++i) {
      std::vector<double> p = prices.column(i);
      std::vector<double> norm(T, kMissing);
      double num_s = 0.0, den_s = 0.0, num_l = 0.0, den_l = 0.0;
      std::size_t seen = 0;
      for (std::size_t t = 0; t < T; ++t) {
        if (std::isnan(p[t])) continue;
        // Bias-adjusted EWMA: sum_k w^k p_{t-k} / sum_k w^k.
        num_s = w_short * num_s + p[t];
        den_s = w_short * den_s + 1.0;
        num_l = w_long * num_l + p[t];
        den_l = w_long * den_l + 1.0;
        ++seen;
        if (seen < static_cast<std::size_t>(long_scale) || seen < price_window) continue;
        double price_mean = 0.0;
        const double price_std = trailing_sample_std(p, t + 1, price_window, price_mean);
        if (!(price_std > kDegenerateStd * std::abs(price_mean))) continue;
        norm[t] = (num_s / den_s - num_l / den_l) / price_std;
      }
      for (std::size_t t = signal_window - 1; t < T; ++t) {
        if (std::isnan(norm[t])) continue;
        double norm_mean = 0.0;
        const double signal_std = trailing_sample_std(norm, t + 1, signal_window, norm_mean);
        if (!(signal_std > kDegenerateStd)) continue;
        feature(t, i) = norm[t] / signal_std;
      }
    }
    out.push_back(std::move(feature));
  }
  return out;
}

// ---------------------------------------------------------------------------

FeatureTensor::FeatureTensor(std::vector<Date> dates, std::vector<std::string> assets,
                             std::vector<std::string> feature_names, std::vector<double> base,
                             std::size_t tau)
    : dates_(std::move(dates)),
      assets_(std::move(assets)),
      feature_names_(std::move(feature_names)),
      base_(std::make_shared<const std::vector<double>>(std::move(base))),
      tau_(tau) {
  if (tau_ < 1) throw std::invalid_argument("tau must be >= 1");
  if (base_->size() != dates_.size() * assets_.size() * feature_names_.size()) {
    throw std::invalid_argument("base feature array has the wrong size");
  }
  compute_usable();
}

void FeatureTensor::compute_usable() {
  const std::size_t T = dates_.size();
  std::vector<unsigned char> row_ok(T, 1);
  const std::size_t row_width = assets_.size() * feature_names_.size();
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t c = 0; c < row_width; ++c) {
      if (!std::isfinite((*base_)[t * row_width + c])) {
        row_ok[t] = 0;
        break;
      }
    }
  }
  usable_.assign(T, 0);
  std::size_t run = 0;
  for (std::size_t t = 0; t < T; ++t) {
    run = row_ok[t] ? run + 1 : 0;
    usable_[t] = run >= tau_ ? 1 : 0;
  }
}


double FeatureTensor::at(std::size_t t, std::size_t i, std::size_t j, std::size_t k) const {
  if (j > t) return kMissing;
  return base(t - j, i, k);
}

void FeatureTensor::sample(std::size_t t, std::span<double> out) const {
  if (out.size() != sample_width()) throw std::invalid_argument("sample buffer has wrong width");
  const std::size_t d = num_features();
  std::size_t c = 0;
  for (std::size_t i = 0; i < num_assets(); ++i) {
    for (std::size_t j = 0; j < tau_; ++j) {
      for (std::size_t k = 0; k < d; ++k) out[c++] = at(t, i, j, k);
    }
  }
}

std::vector<double> FeatureTensor::sample(std::size_t t) const {
  std::vector<double> out(sample_width());
  sample(t, out);
  return out;
}

std::string FeatureTensor::column_label(std::size_t column) const {
  const std::size_t d = num_features();
  const std::size_t k = column % d;
  const std::size_t j = (column / d) % tau_;
  const std::size_t i = column / (d * tau_);
  return assets_.at(i) + "_t-" + std::to_string(j) + "_" + feature_names_.at(k);
}

FeatureTensor FeatureTensor::with_tau(std::size_t tau) const {
  if (tau < 1) throw std::invalid_argument("tau must be >= 1");
  FeatureTensor copy = *this;
  copy.tau_ = tau;
  copy.compute_usable();
  return copy;
}

FeatureTensor assemble_tensor(const ReturnsPanel& panel, const VolatilityEstimates& vol,
                              const MacdConfig& config, std::size_t tau,
                              const std::vector<int>& horizons) {
  std::vector<Matrix> slices = normalized_returns(panel, vol, horizons);
  std::vector<std::string> names;
  for (int k : horizons) names.push_back("NORM_RET_" + std::to_string(k));
  std::vector<Matrix> macd = macd_features(panel, config);
  for (std::size_t p = 0; p < macd.size(); ++p) {
    names.push_back("MACD_" + std::to_string(config.short_scales[p]) + "_" +
                    std::to_string(config.long_scales[p]));
    slices.push_back(std::move(macd[p]));
  }
  const std::size_t T = panel.num_dates();
  const std::size_t N = panel.num_assets();
  const std::size_t d = slices.size();
  std::vector<double> base(T * N * d);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t k = 0; k < d; ++k) base[(t * N + i) * d + k] = slices[k](t, i);
    }
  }
  return FeatureTensor(panel.dates(), panel.assets(), std::move(names), std::move(base), tau);
}

void write_feature_csv(std::ostream& out, const FeatureTensor& features, std::size_t begin,
                       std::size_t end) {
  csv::Writer w(out);
  w.row({"date", "asset", "lag", "feature", "value"});
  end = std::min(end, features.num_dates());
  for (std::size_t t = begin; t < end; ++t) {
    const std::string date = features.dates()[t].to_string();
    for (std::size_t i = 0; i < features.num_assets(); ++i) {
      for (std::size_t j = 0; j < features.tau(); ++j) {
        for (std::size_t k = 0; k < features.num_features(); ++k) {
          w.row({date, features.assets()[i], std::to_string(j), features.feature_names()[k],
                 csv::format_double(features.at(t, i, j, k))});
        }
      }
    }
  }
}

}  // namespace stmom
