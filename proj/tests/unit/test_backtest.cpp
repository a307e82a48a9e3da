#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "stmom/backtest.hpp"
#include "stmom/random.hpp"
#include "stmom/stats.hpp"
#include "synthetic.hpp"

using namespace stmom;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Instance {
  ReturnsPanel panel;
  SignalMatrix signals;
  VolatilityEstimates vol;
};

Instance make_instance(const Matrix& r, const Matrix& x, const Matrix& sigma) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < r.cols(); ++i) ids.push_back("A" + std::to_string(i));
  ReturnsPanel panel(testing::business_days(Date::from_ymd(2015, 1, 1), r.rows()), ids, r);
  SignalMatrix s(panel.dates(), ids);
  for (std::size_t t = 0; t < r.rows(); ++t) {
    for (std::size_t i = 0; i < r.cols(); ++i) {
      if (!std::isnan(x(t, i))) s.set(t, i, x(t, i));
    }
  }
  return {panel, s, VolatilityEstimates{sigma, 60}};
}

/// Explicit-weight form of the recursive EWM: first observation weight
/// (1 - a)^(n - 1), observation k > 0 weight a (1 - a)^(n - 1 - k).
double explicit_ewm_std(const std::vector<double>& xs, double a) {
  const std::size_t n = xs.size();
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double decay = std::pow(1.0 - a, static_cast<double>(n - 1 - k));
    w[k] = k == 0 ? decay : a * decay;
  }
  double m = 0.0;
  for (std::size_t k = 0; k < n; ++k) m += w[k] * xs[k];
  double v = 0.0;
  for (std::size_t k = 0; k < n; ++k) v += w[k] * (xs[k] - m) * (xs[k] - m);
  return std::sqrt(v);
}

std::vector<double> random_series(std::size_t n, std::uint64_t seed, double sd) {
  Rng rng(seed);
  std::vector<double> out(n);
  for (double& v : out) v = sd * rng.normal();
  return out;
}

}  // namespace

TEST_CASE("aggregate returns examples") {
  const double daily_target = 0.15 / std::sqrt(252.0);
  {
    Matrix r(3, 1, 0.01), x(3, 1, 1.0), sigma(3, 1, daily_target);
    r(2, 0) = -0.02;
    const auto in = make_instance(r, x, sigma);
    const auto res = aggregate_returns(in.signals, in.panel, in.vol);
    CHECK(res.raw[0] == doctest::Approx(0.01));
    CHECK(res.raw[1] == doctest::Approx(-0.02));
    CHECK(res.raw[2] == 0.0);  // nothing realized after the last date
  }
  {
    Matrix r(4, 2, 0.013), x(4, 2), sigma(4, 2, 0.02);
    for (std::size_t t = 0; t < 4; ++t) {
      x(t, 0) = 1.0;
      x(t, 1) = -1.0;
    }
    const auto in = make_instance(r, x, sigma);
    for (double v : aggregate_returns(in.signals, in.panel, in.vol).raw) CHECK(v == 0.0);
  }
  {
    Matrix r(4, 2, 0.013), x(4, 2, 0.0), sigma(4, 2, 0.02);
    const auto in = make_instance(r, x, sigma);
    const auto res = aggregate_returns(in.signals, in.panel, in.vol);
    for (double v : res.raw) CHECK(v == 0.0);
    for (double v : res.rescaled) CHECK(v == 0.0);
  }
  {
    // only usable assets count toward N_t
    Matrix r(3, 2, 0.01), x(3, 2, 1.0), sigma(3, 2, daily_target);
    x(0, 1) = kNaN;
    sigma(1, 0) = kNaN;
    const auto in = make_instance(r, x, sigma);
    const auto res = aggregate_returns(in.signals, in.panel, in.vol);
    CHECK(res.active[0] == 1);
    CHECK(res.active[1] == 1);
    CHECK(res.raw[0] == doctest::Approx(0.01));
    Matrix none(3, 2, kNaN);
    const auto empty = make_instance(r, none, sigma);
    const auto flagged = aggregate_returns(empty.signals, empty.panel, empty.vol);
    CHECK(flagged.flagged[0] == 1);
    CHECK(flagged.raw[0] == 0.0);
  }
}

TEST_CASE("aggregate returns match the literal summation") {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t N = 1 + rng.uniform_index(4), T = 2 + rng.uniform_index(9);
    Matrix r(T, N), x(T, N), sigma(T, N);
    std::vector<std::vector<double>> xs(T, std::vector<double>(N)), ss = xs, rs = xs;
    std::vector<std::vector<bool>> usable(T, std::vector<bool>(N));
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t i = 0; i < N; ++i) {
        r(t, i) = rs[t][i] = rng.bernoulli(0.1) ? kNaN : rng.uniform(-0.05, 0.05);
        sigma(t, i) = ss[t][i] = rng.bernoulli(0.1) ? kNaN : rng.uniform(0.005, 0.03);
        usable[t][i] = !rng.bernoulli(0.15);
        xs[t][i] = rng.uniform(-1.0, 1.0);
        x(t, i) = usable[t][i] ? xs[t][i] : kNaN;
      }
    }
    const auto in = make_instance(r, x, sigma);
    const auto got = aggregate_returns(in.signals, in.panel, in.vol).raw;
    const auto want = testing::literal_portfolio_returns(xs, usable, ss, rs, 0.15);
    REQUIRE(got.size() == want.size());
    for (std::size_t t = 0; t < T; ++t) CHECK(std::abs(got[t] - want[t]) <= 1e-12);
  }
}

TEST_CASE("turnover examples") {
  Matrix r(3, 1, 0.0), x(3, 1, 1.0), sigma(3, 1, 0.01);
  x(1, 0) = -1.0;
  x(2, 0) = -1.0;
  const auto in = make_instance(r, x, sigma);
  const Matrix to = turnover(in.signals, in.vol, 0.15);
  CHECK(to(0, 0) == doctest::Approx(15.0));  // established from flat
  CHECK(to(1, 0) == doctest::Approx(30.0));
  CHECK(to(2, 0) == 0.0);

  Matrix halved(3, 1, 0.02);
  halved(2, 0) = 0.01;
  Matrix hold(3, 1, 0.5);
  const auto reb = make_instance(r, hold, halved);
  const Matrix to2 = turnover(reb.signals, reb.vol, 0.15);
  CHECK(to2(1, 0) == 0.0);
  CHECK(to2(2, 0) == doctest::Approx(0.15 * 0.5 * (1.0 / 0.01 - 1.0 / 0.02)));

  // unusable dates hold a flat position
  Matrix gap(3, 1, 1.0);
  gap(1, 0) = kNaN;
  const auto g = make_instance(r, gap, sigma);
  const Matrix to3 = turnover(g.signals, g.vol, 0.15);
  CHECK(to3(1, 0) == doctest::Approx(15.0));
  CHECK(to3(2, 0) == doctest::Approx(15.0));
}

TEST_CASE("transaction costs") {
  BacktestResult res;
  res.dates = testing::business_days(Date::from_ymd(2015, 1, 1), 2);
  res.raw = {0.001, 0.0};
  res.captured = Matrix(2, 1, kNaN);
  res.captured(0, 0) = 0.001;
  res.turnover = Matrix(2, 1, 0.0);
  res.turnover(0, 0) = 1.0;
  res.active = {1, 0};
  res.flagged = {0, 1};
  res.scale_factors = {1.0, 1.0};
  res.rescaled = res.raw;
  const auto net = apply_costs(res, 5.0);
  CHECK(net[0] == doctest::Approx(0.0005).epsilon(1e-12));
  CHECK(net[1] == 0.0);
  CHECK(apply_costs(res, 0.0) == res.raw);
  CHECK_THROWS_AS(apply_costs(res, -1.0), std::invalid_argument);

  const auto panel = testing::random_panel(3, 400, 51, 0.01);
  const auto vol = ex_ante_volatility(panel);
  const auto full = aggregate_returns(tsmom_signal(panel, 60), panel, vol);
  const auto gross = apply_costs(full, 0.0);
  for (std::size_t t = 0; t < gross.size(); ++t) CHECK(gross[t] == doctest::Approx(full.raw[t]));
  std::vector<double> prev = gross;
  for (double c : default_cost_grid()) {
    const auto n = apply_costs(full, c);
    for (std::size_t t = 0; t < n.size(); ++t) CHECK(n[t] <= prev[t] + 1e-15);
    prev = n;
  }

  const VolatilityEstimates constant_vol{Matrix(400, 3, 0.01), 60};
  const auto flat = aggregate_returns(long_only(panel), panel, constant_vol);
  const auto flat_net = apply_costs(flat, 10.0);
  for (std::size_t t = 1; t < 399; ++t) CHECK(flat_net[t] == doctest::Approx(flat.raw[t]));
}

TEST_CASE("portfolio rescale") {
  const auto raw = random_series(400, 61, 0.004);
  const auto rs = portfolio_rescale(raw);
  const double a = stats::span_alpha(60);
  for (std::size_t t = 0; t < 60; ++t) {
    CHECK(rs.factors[t] == 1.0);
    CHECK(rs.series[t] == raw[t]);
  }
  for (std::size_t t = 60; t < 400; t += 17) {
    const std::vector<double> history(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(t));
    const double expected = 0.15 / (explicit_ewm_std(history, a) * std::sqrt(252.0));
    CHECK(rs.factors[t] == doctest::Approx(expected).epsilon(1e-10));
    CHECK(rs.series[t] == doctest::Approx(raw[t] * expected).epsilon(1e-10));
  }

  std::vector<double> doubled = raw;
  for (double& v : doubled) v *= 2.0;
  const auto rs2 = portfolio_rescale(doubled);
  for (std::size_t t = 60; t < 400; ++t) {
    CHECK(rs2.factors[t] == doctest::Approx(rs.factors[t] / 2.0).epsilon(1e-12));
    CHECK(rs2.series[t] == doctest::Approx(rs.series[t]).epsilon(1e-12));
  }

  for (double v : portfolio_rescale(std::vector<double>(100, 0.0)).series) CHECK(v == 0.0);

  // leading zeros pass through and delay the warm-up
  std::vector<double> late(50, 0.0);
  late.insert(late.end(), raw.begin(), raw.end());
  const auto rl = portfolio_rescale(late);
  for (std::size_t t = 0; t < 400; ++t) CHECK(rl.factors[t + 50] == rs.factors[t]);

  // the realized vol of the rescaled series lands near the target
  const auto long_raw = random_series(5000, 62, 0.003);
  const auto scaled = portfolio_rescale(long_raw).series;
  const std::vector<double> tail(scaled.begin() + 500, scaled.end());
  CHECK(stats::population_stddev(tail) * std::sqrt(252.0) == doctest::Approx(0.15).epsilon(0.05));
  CHECK_THROWS_AS(portfolio_rescale(raw, 0.15, 1), std::invalid_argument);
}

TEST_CASE("combining strategies") {
  const auto panel = testing::random_panel(4, 500, 63, 0.01);
  const auto vol = ex_ante_volatility(panel);
  const auto a = aggregate_returns(tsmom_signal(panel, 60), panel, vol);
  const std::vector<BacktestResult> twice{a, a};
  const std::vector<double> halves{0.5, 0.5};
  const auto same = combine_strategies(twice, halves);
  for (std::size_t t = 0; t < 500; ++t) CHECK(same.raw[t] == doctest::Approx(a.rescaled[t]));

  BacktestResult neg = a;
  for (double& v : neg.rescaled) v = -v;
  const std::vector<BacktestResult> opposite{a, neg};
  const auto zero = combine_strategies(opposite, halves);
  for (std::size_t t = 0; t < 500; ++t) {
    CHECK(zero.raw[t] == 0.0);
    CHECK(zero.rescaled[t] == 0.0);
  }

  const std::vector<double> bad{0.7, 0.7};
  CHECK_THROWS_AS(combine_strategies(twice, bad), std::invalid_argument);
  BacktestResult shifted = a;
  shifted.dates = testing::business_days(Date::from_ymd(2001, 1, 1), 500);
  const std::vector<BacktestResult> misaligned{a, shifted};
  CHECK_THROWS_AS(combine_strategies(misaligned, halves), std::invalid_argument);
}

TEST_CASE("uncorrelated strategies diversify") {
  // two independent series with equal Sharpe; the blend gains about sqrt(2)
  double ratio_sum = 0.0;
  const int trials = 20;
  for (int k = 0; k < trials; ++k) {
    auto x = random_series(3000, 100 + k, 0.01);
    auto y = random_series(3000, 200 + k, 0.01);
    for (double& v : x) v += 0.0006;
    for (double& v : y) v += 0.0006;
    std::vector<double> blend(3000);
    for (std::size_t t = 0; t < 3000; ++t) blend[t] = 0.5 * (x[t] + y[t]);
    auto sharpe = [](const std::vector<double>& s) {
      return stats::mean(s) / stats::population_stddev(s);
    };
    ratio_sum += sharpe(blend) / (0.5 * (sharpe(x) + sharpe(y)));
  }
  CHECK(ratio_sum / trials == doctest::Approx(std::sqrt(2.0)).epsilon(0.1));
}

TEST_CASE("slicing recomputes the rescale") {
  const auto panel = testing::random_panel(2, 400, 64, 0.01);
  const auto vol = ex_ante_volatility(panel);
  const auto full = aggregate_returns(long_only(panel), panel, vol);
  const auto part = slice(full, 100, 300);
  REQUIRE(part.dates.size() == 200);
  CHECK(part.dates.front() == full.dates[100]);
  const auto expected = portfolio_rescale(std::vector<double>(full.raw.begin() + 100,
                                                              full.raw.begin() + 300));
  CHECK(part.rescaled == expected.series);
  CHECK(part.captured(0, 1) == full.captured(100, 1));
  CHECK_THROWS_AS(slice(full, 300, 100), std::invalid_argument);
}

TEST_CASE("returns and turnover CSV layout") {
  const auto panel = testing::random_panel(2, 80, 65, 0.01);
  const auto vol = ex_ante_volatility(panel);
  const auto res = aggregate_returns(long_only(panel), panel, vol);
  std::ostringstream out;
  const std::vector<double> costs{0.0, 0.5, 10.0};
  write_returns_csv(out, res, costs);
  std::istringstream lines(out.str());
  std::string header;
  std::getline(lines, header);
  CHECK(header == "date,raw,rescaled,net_c0,net_c0.5,net_c10");
  std::size_t rows = 0;
  for (std::string line; std::getline(lines, line);) ++rows;
  CHECK(rows == 80);

  std::ostringstream to;
  write_turnover_csv(to, res, panel.assets());
  CHECK(to.str().rfind("date,asset,turnover\n", 0) == 0);
}
