#include "stmom/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stmom/matrix.hpp"

namespace stmom {

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    const bool an = std::isnan(av[i]);
    const bool bn = std::isnan(bv[i]);
    if (an != bn) return false;
    if (!an && av[i] != bv[i]) return false;
  }
  return true;
}

}  // namespace stmom

namespace stmom::stats {

double span_alpha(int span_days) {
  if (span_days < 1) throw std::invalid_argument("span must be positive");
  return 2.0 / (static_cast<double>(span_days) + 1.0);
}

void EwmMoments::update(double x) {
  if (count_ == 0) {
    mean_ = x;
    variance_ = 0.0;
  } else {
    const double diff = x - mean_;
    const double incr = alpha_ * diff;
    mean_ += incr;
    variance_ = (1.0 - alpha_) * (variance_ + diff * incr);
  }
  ++count_;
}

double EwmMoments::stddev() const { return std::sqrt(variance_); }

double mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean of empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double population_stddev(std::span<const double> xs) {
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size()));
}

double sample_stddev(std::span<const double> xs) {
  if (xs.size() < 2) throw std::invalid_argument("sample stddev needs two observations");
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("pearson: length mismatch");
  if (a.size() < 2) return std::nullopt;
  const double ma = mean(a);
  const double mb = mean(b);
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
  double r = sab / std::sqrt(saa * sbb);
  if (r > 1.0) r = 1.0;
  if (r < -1.0) r = -1.0;
  return r;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  if (q <= 0.0) return sorted.front();
  if (q >= 1.0) return sorted.back();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace stmom::stats
