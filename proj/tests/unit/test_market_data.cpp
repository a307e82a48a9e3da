#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "stmom/error.hpp"
#include "stmom/market_data.hpp"
#include "stmom/stats.hpp"
#include "synthetic.hpp"

using namespace stmom;

namespace {

ReturnsPanel from_text(const std::string& text, ValueFormat format) {
  std::istringstream in(text);
  return ingest_csv(in, format);
}

ReturnsPanel single_asset(const std::vector<double>& r) {
  Matrix m(r.size(), 1);
  for (std::size_t t = 0; t < r.size(); ++t) m(t, 0) = r[t];
  return ReturnsPanel(testing::business_days(Date::from_ymd(2020, 1, 1), r.size()), {"X"}, m);
}

}  // namespace

TEST_CASE("wide price CSV converts to simple returns") {
  const auto panel = from_text(
      "date,AAA,BBB\n"
      "2020-01-01,100,50\n"
      "2020-01-02,101,50\n"
      "2020-01-03,102,50\n",
      ValueFormat::Price);
  REQUIRE(panel.num_dates() == 3);
  REQUIRE(panel.num_assets() == 2);
  CHECK(std::isnan(panel.returns()(0, 0)));
  CHECK(panel.returns()(1, 0) == doctest::Approx(0.01).epsilon(1e-14));
  CHECK(panel.returns()(2, 0) == doctest::Approx(102.0 / 101.0 - 1.0).epsilon(1e-14));
  CHECK(panel.returns()(2, 0) == doctest::Approx(0.009901).epsilon(1e-4));
  // constant price gives zero returns
  CHECK(panel.returns()(1, 1) == 0.0);
  CHECK(panel.returns()(2, 1) == 0.0);
  REQUIRE(panel.prices().has_value());
  CHECK((*panel.prices())(2, 0) == 102.0);
}

TEST_CASE("long format is read on the union calendar with sorted assets") {
  std::string text = "date,asset,value\n";
  for (int d = 1; d <= 11; ++d) {
    char buf[64];
    if (d > 1) {
      std::snprintf(buf, sizeof buf, "2020-01-%02d,ZZZ,%d\n", d, d);
      text += buf;
    }
    std::snprintf(buf, sizeof buf, "2020-01-%02d,AAA,-%d\n", d, d);
    text += buf;
  }
  const auto panel = from_text(text, ValueFormat::Return);
  REQUIRE(panel.assets() == std::vector<std::string>{"AAA", "ZZZ"});
  REQUIRE(panel.num_dates() == 11);
  CHECK(panel.returns()(0, 0) == -1.0);
  CHECK(std::isnan(panel.returns()(0, 1)));  // leading gap stays missing
  CHECK(panel.returns()(1, 1) == 2.0);
  CHECK(panel.returns()(10, 1) == 11.0);
}

TEST_CASE("interior price gaps carry the price forward") {
  std::string text = "date,A,B\n";
  // 20 dates; B misses one interior date (5% missing)
  for (int d = 1; d <= 20; ++d) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "2020-01-%02d,%d,%s\n", d, 100 + d,
                  d == 10 ? "" : std::to_string(200 + d).c_str());
    text += buf;
  }
  const auto panel = from_text(text, ValueFormat::Price);
  CHECK(panel.returns()(9, 1) == 0.0);
  CHECK(panel.returns()(10, 1) == doctest::Approx(211.0 / 209.0 - 1.0));
  CHECK((*panel.prices())(9, 1) == 209.0);
}

TEST_CASE("asset with too much missing data is rejected by name") {
  std::string text = "date,GOOD,SPARSE\n";
  for (int d = 1; d <= 20; ++d) {
    char buf[64];
    // SPARSE misses 3 of 20 dates (15%)
    std::snprintf(buf, sizeof buf, "2020-01-%02d,%d,%s\n", d, 100 + d,
                  (d == 4 || d == 9 || d == 15) ? "" : "50");
    text += buf;
  }
  try {
    from_text(text, ValueFormat::Price);
    FAIL("expected rejection");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("SPARSE") != std::string::npos);
    CHECK(msg.find("GOOD") == std::string::npos);
  }
}

TEST_CASE("malformed rows report their line number") {
  try {
    from_text("date,A\n2020-01-01,1\n2020-01-02,abc\n", ValueFormat::Return);
    FAIL("expected parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(from_text("date,A\n2020-13-01,1\n", ValueFormat::Return), ParseError);
  CHECK_THROWS_AS(from_text("date,A,B\n2020-01-01,1\n", ValueFormat::Return), ParseError);
  CHECK_THROWS_AS(ingest_csv(std::filesystem::path("/nonexistent/file.csv"), ValueFormat::Price),
                  std::invalid_argument);
}

TEST_CASE("panel CSV round-trips bit-identically") {
  const auto panel = testing::random_panel(4, 300, 11, 0.013);
  std::ostringstream out;
  write_panel_csv(out, panel);
  const auto back = from_text(out.str(), ValueFormat::Return);
  REQUIRE(back.dates() == panel.dates());
  REQUIRE(back.assets() == panel.assets());
  for (std::size_t t = 0; t < panel.num_dates(); ++t) {
    for (std::size_t i = 0; i < panel.num_assets(); ++i) {
      CHECK(back.returns()(t, i) == panel.returns()(t, i));
    }
  }
}

TEST_CASE("winsorize clips a spike to mean plus n sigmas") {
  std::vector<double> r;
  for (int t = 0; t < 400; ++t) r.push_back(t % 2 == 0 ? 0.01 : -0.01);
  r.push_back(10.0);
  const auto out = winsorize(single_asset(r));
  // independent EWM of the prefix
  const double alpha = 2.0 / 253.0;
  double wsum = 0.0, m = 0.0;
  for (std::size_t k = 0; k < 400; ++k) {
    const double w = std::pow(1.0 - alpha, 399.0 - static_cast<double>(k));
    wsum += w;
    m += w * r[k];
  }
  m /= wsum;
  const double clipped = out.returns()(400, 0);
  CHECK(clipped == doctest::Approx(0.05).epsilon(0.02));
  CHECK(clipped > m);
  CHECK(clipped < 0.06);
  for (std::size_t t = 0; t < 400; ++t) CHECK(out.returns()(t, 0) == r[t]);
}

TEST_CASE("winsorize leaves in-band data and disabled clipping untouched") {
  const auto panel = testing::random_panel(3, 500, 5, 0.01);
  WinsorizeConfig off;
  off.n_sigmas = std::numeric_limits<double>::infinity();
  const auto a = winsorize(panel, off);
  WinsorizeConfig wide;
  wide.n_sigmas = 50.0;
  const auto b = winsorize(panel, wide);
  for (std::size_t t = 0; t < panel.num_dates(); ++t) {
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(a.returns()(t, i) == panel.returns()(t, i));
      CHECK(b.returns()(t, i) == panel.returns()(t, i));
    }
  }
  WinsorizeConfig bad;
  bad.span_days = 1;
  CHECK_THROWS_AS(winsorize(panel, bad), std::invalid_argument);
}

TEST_CASE("winsorize is idempotent and causal") {
  auto panel = testing::random_panel(3, 600, 9, 0.01);
  Matrix r = panel.returns();
  r(300, 0) = 0.5;
  r(450, 1) = -0.4;
  r(100, 2) = 0.3;
  panel = panel.with_returns(r);
  const auto once = winsorize(panel);
  const auto twice = winsorize(once);
  for (std::size_t t = 0; t < panel.num_dates(); ++t) {
    for (std::size_t i = 0; i < 3; ++i) CHECK(twice.returns()(t, i) == once.returns()(t, i));
  }
  CHECK(once.returns()(300, 0) < 0.5);

  Matrix noisy = r;
  for (std::size_t t = 351; t < noisy.rows(); ++t) {
    for (std::size_t i = 0; i < 3; ++i) noisy(t, i) = (t % 3 == 0) ? 1.0 : -0.7;
  }
  const auto changed = winsorize(panel.with_returns(noisy));
  for (std::size_t t = 0; t <= 350; ++t) {
    for (std::size_t i = 0; i < 3; ++i) CHECK(changed.returns()(t, i) == once.returns()(t, i));
  }
}

TEST_CASE("chronological train/validation split") {
  auto check = [](std::size_t n, std::size_t train) {
    const auto [a, b] = split_train_validation(IndexRange{0, n}, 0.9);
    CHECK(a == IndexRange{0, train});
    CHECK(b == IndexRange{train, n});
  };
  check(100, 90);
  check(10, 9);
  check(11, 9);
  const auto [a, b] = split_train_validation(IndexRange{50, 150}, 0.9);
  CHECK(a == IndexRange{50, 140});
  CHECK(b == IndexRange{140, 150});
  CHECK_THROWS_AS(split_train_validation(IndexRange{0, 9}, 0.9), std::invalid_argument);
  CHECK_THROWS_AS(split_train_validation(IndexRange{0, 100}, 1.0), std::invalid_argument);
}

TEST_CASE("panel invariants are enforced") {
  const auto d = testing::business_days(Date::from_ymd(2020, 1, 1), 3);
  CHECK_THROWS_AS(ReturnsPanel(d, {"A", "A"}, Matrix(3, 2)), std::invalid_argument);
  CHECK_THROWS_AS(ReturnsPanel({d[1], d[0], d[2]}, {"A"}, Matrix(3, 1)), std::invalid_argument);
  CHECK_THROWS_AS(ReturnsPanel(d, {"A"}, Matrix(2, 1)), std::invalid_argument);
}
