#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace stmom::stats {

/// Smoothing factor for span semantics: alpha = 2 / (span + 1), so the decay
/// weight applied to the previous estimate is 1 - alpha.
double span_alpha(int span_days);

/// Recursive exponentially weighted mean and variance.
///
/// The first observation initializes the mean with zero variance; each later
/// observation applies
///   mean += alpha * (x - mean)
///   var   = (1 - alpha) * (var + alpha * (x - mean_prev)^2).
class EwmMoments {
 public:
  explicit EwmMoments(double alpha) : alpha_(alpha) {}

  void update(double x);

  std::size_t count() const noexcept { return count_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept { return variance_; }
  double stddev() const;

 private:
  double alpha_;
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double variance_ = 0.0;
};

double mean(std::span<const double> xs);

/// Population standard deviation (divides by n).
double population_stddev(std::span<const double> xs);

/// Sample standard deviation (divides by n - 1). Requires n >= 2.
double sample_stddev(std::span<const double> xs);

/// Pearson correlation; empty when either side has zero variance or n < 2.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

/// Linear-interpolation quantile of an ascending-sorted sample, q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);

}  // namespace stmom::stats
