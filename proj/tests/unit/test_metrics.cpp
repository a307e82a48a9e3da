#include <doctest.h>

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "golden.hpp"
#include "stmom/metrics.hpp"
#include "stmom/random.hpp"

using namespace stmom;

namespace {

/// k-th smallest value (0-based) found by counting, without sorting.
double order_statistic(const std::vector<double>& xs, std::size_t k) {
  for (double x : xs) {
    std::size_t less = 0, equal = 0;
    for (double y : xs) {
      less += y < x;
      equal += y == x;
    }
    if (less <= k && k < less + equal) return x;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double counting_quantile(const std::vector<double>& xs, double q) {
  const double h = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const double a = order_statistic(xs, lo);
  if (lo + 1 >= xs.size()) return a;
  return a + (h - static_cast<double>(lo)) * (order_statistic(xs, lo + 1) - a);
}

}  // namespace

TEST_CASE("golden 20-day metrics") {
  const auto& r = testing::kGoldenReturns;
  const testing::GoldenMetrics g;
  const auto m = compute_metrics(r);
  CHECK(std::abs(m.expected_return - g.expected_return) <= 1e-12);
  CHECK(std::abs(m.volatility - g.volatility) <= 1e-12);
  CHECK(std::abs(m.downside_deviation - g.downside_deviation) <= 1e-12);
  CHECK(std::abs(m.max_drawdown - g.max_drawdown) <= 1e-12);
  REQUIRE(m.sharpe.has_value());
  REQUIRE(m.sortino.has_value());
  REQUIRE(m.calmar.has_value());
  REQUIRE(m.avg_profit_over_loss.has_value());
  CHECK(std::abs(*m.sharpe - g.sharpe) <= 1e-12);
  CHECK(std::abs(*m.sortino - g.sortino) <= 1e-12);
  CHECK(std::abs(*m.calmar - g.calmar) <= 1e-12);
  CHECK(std::abs(m.hit_rate - g.hit_rate) <= 1e-12);
  CHECK(std::abs(*m.avg_profit_over_loss - g.avg_profit_over_loss) <= 1e-12);
  CHECK(metric_names().size() == 9);
  CHECK(metric_values(m).size() == 9);
  CHECK(metric_values(m)[4] == m.sharpe);
}

TEST_CASE("metric examples") {
  const std::vector<double> dd{0.01, -0.02, 0.015};
  CHECK(compute_metrics(dd).max_drawdown == doctest::Approx(0.02));

  const std::vector<double> up{0.01, 0.02, 0.005, 0.03};
  const auto u = compute_metrics(up);
  CHECK(u.max_drawdown == 0.0);
  CHECK(u.hit_rate == 1.0);
  CHECK_FALSE(u.calmar.has_value());
  CHECK_FALSE(u.sortino.has_value());
  CHECK_FALSE(u.avg_profit_over_loss.has_value());

  std::vector<double> alt;
  for (int k = 0; k < 10; ++k) alt.push_back(k % 2 == 0 ? 0.01 : -0.01);
  const auto a = compute_metrics(alt);
  CHECK(a.expected_return == doctest::Approx(0.0));
  CHECK(a.sharpe.value() == doctest::Approx(0.0));
  CHECK(a.hit_rate == 0.5);
  CHECK(a.avg_profit_over_loss.value() == doctest::Approx(1.0));

  const auto flat = compute_metrics(std::vector<double>(5, 0.0));
  CHECK_FALSE(flat.sharpe.has_value());
  CHECK(flat.hit_rate == 0.0);
  CHECK_THROWS_AS(compute_metrics(std::vector<double>{0.01}), std::invalid_argument);
}

TEST_CASE("Sharpe sign follows the mean and metrics ignore relabeling") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> r(30);
    for (double& v : r) v = 0.01 * rng.normal() + 0.001 * (rng.uniform() - 0.5);
    const auto m = compute_metrics(r);
    double mean = 0.0;
    for (double v : r) mean += v;
    CHECK((mean > 0) == (m.sharpe.value() > 0));
    CHECK(m.hit_rate >= 0.0);
    CHECK(m.hit_rate <= 1.0);
    CHECK(m.volatility >= 0.0);
    CHECK(m.max_drawdown >= 0.0);

    // order matters only for drawdown
    std::vector<double> shuffled = r;
    rng.shuffle(std::span<double>(shuffled));
    const auto p = compute_metrics(shuffled);
    CHECK(p.expected_return == doctest::Approx(m.expected_return).epsilon(1e-12));
    CHECK(p.volatility == doctest::Approx(m.volatility).epsilon(1e-12));
    CHECK(p.downside_deviation == doctest::Approx(m.downside_deviation).epsilon(1e-12));
    CHECK(p.hit_rate == m.hit_rate);
  }
}

TEST_CASE("correlations") {
  Rng rng(7);
  std::vector<double> x(5000), y(5000);
  for (double& v : x) v = rng.normal();
  for (double& v : y) v = rng.normal();
  std::vector<double> neg = x;
  for (double& v : neg) v = -v;
  const auto c = correlation_matrix({x, neg, y, std::vector<double>(5000, 1.0)});
  CHECK(c[0][0].value() == doctest::Approx(1.0));
  CHECK(c[0][1].value() == doctest::Approx(-1.0));
  CHECK(std::abs(c[0][2].value()) < 0.1);
  CHECK(c[2][0] == c[0][2]);
  CHECK_FALSE(c[0][3].has_value());

  const auto roll = rolling_correlation(x, neg, 252);
  REQUIRE(roll.size() == 5000);
  for (std::size_t t = 0; t < 251; ++t) CHECK_FALSE(roll[t].has_value());
  CHECK(roll[251].value() == doctest::Approx(-1.0));
  const auto r2 = rolling_correlation(x, y, 100);
  const auto direct = correlation_matrix({std::vector<double>(x.begin() + 400, x.begin() + 500),
                                          std::vector<double>(y.begin() + 400, y.begin() + 500)});
  CHECK(r2[499].value() == doctest::Approx(direct[0][1].value()).epsilon(1e-12));
}

TEST_CASE("turnover distribution") {
  const auto zero = turnover_distribution(Matrix(10, 3, 0.0));
  CHECK(zero.min == 0.0);
  CHECK(zero.max == 0.0);
  CHECK(zero.mean == 0.0);

  const auto k = turnover_distribution(Matrix(10, 3, 0.7));
  CHECK(k.min == doctest::Approx(0.7));
  CHECK(k.max == doctest::Approx(0.7));
  CHECK(k.mean == doctest::Approx(0.7));

  Matrix m(3, 2, std::numeric_limits<double>::quiet_NaN());
  m(0, 0) = 1.0;
  m(0, 1) = 3.0;
  m(1, 1) = 5.0;
  const auto s = turnover_distribution(m);  // daily averages 2 and 5
  CHECK(s.min == 2.0);
  CHECK(s.max == 5.0);
  CHECK(s.mean == 3.5);
  CHECK(s.median == 3.5);

  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(100);
    for (double& x : v) x = static_cast<double>(rng.uniform_index(40));  // ties included
    const auto q = summarize(v);
    CHECK(q.min == counting_quantile(v, 0.0));
    CHECK(q.q1 == doctest::Approx(counting_quantile(v, 0.25)).epsilon(1e-14));
    CHECK(q.median == doctest::Approx(counting_quantile(v, 0.5)).epsilon(1e-14));
    CHECK(q.q3 == doctest::Approx(counting_quantile(v, 0.75)).epsilon(1e-14));
    CHECK(q.max == counting_quantile(v, 1.0));
  }
}
