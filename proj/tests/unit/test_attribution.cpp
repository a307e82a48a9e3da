#include <doctest.h>

#include <cmath>
#include <vector>

#include "stmom/attribution.hpp"
#include "stmom/error.hpp"
#include "synthetic.hpp"

using namespace stmom;

namespace {

struct Fixture {
  ReturnsPanel panel = testing::random_panel(3, 600, 71, 0.01);
  VolatilityEstimates vol = ex_ante_volatility(panel);
  FeatureTensor features = assemble_tensor(panel, vol, MacdConfig{}, 2);

  ArchitectureSpec spec(ModelKind kind) const {
    ArchitectureSpec s;
    s.kind = kind;
    s.num_assets = 3;
    s.num_features = features.num_features();
    s.tau = 2;
    s.hidden_size = 4;
    return s;
  }
};

}  // namespace

TEST_CASE("samples cover usable dates in range") {
  const Fixture f;
  const auto samples = collect_samples(f.features, 400, 600);
  REQUIRE(samples.dates.size() == 200);
  CHECK(samples.values.rows() == 200);
  CHECK(samples.values.cols() == f.features.sample_width());
  const auto row = f.features.sample(450);
  for (std::size_t k = 0; k < row.size(); ++k) CHECK(samples.values(50, k) == row[k]);
  const auto mu = background_mean(samples.values);
  double m0 = 0.0;
  for (std::size_t s = 0; s < 200; ++s) m0 += samples.values(s, 0);
  CHECK(mu[0] == doctest::Approx(m0 / 200.0));
  CHECK(collect_samples(f.features, 0, 10).dates.empty());
}

TEST_CASE("linear attribution satisfies efficiency") {
  const Fixture f;
  Rng rng(1);
  const Model model(f.spec(ModelKind::SLP), rng);
  const auto samples = collect_samples(f.features, 400, 600);
  const auto mu = background_mean(samples.values);
  const auto& W = model.parameters()[0].value;
  for (std::size_t asset = 0; asset < 3; ++asset) {
    const Matrix A = slp_linear_attribution(model, samples.values, mu, asset);
    REQUIRE(A.rows() == 200);
    for (std::size_t s = 0; s < 200; ++s) {
      double total = 0.0, pre = 0.0, base = 0.0;
      for (std::size_t j = 0; j < A.cols(); ++j) {
        total += A(s, j);
        pre += W.at(j, asset) * samples.values(s, j);
        base += W.at(j, asset) * mu[j];
      }
      CHECK(total == doctest::Approx(pre - base).epsilon(1e-12));
    }
  }

  Matrix at_background(1, samples.values.cols());
  for (std::size_t j = 0; j < mu.size(); ++j) at_background(0, j) = mu[j];
  const Matrix zero = slp_linear_attribution(model, at_background, mu, 1);
  for (double v : zero.values()) CHECK(v == 0.0);
}

TEST_CASE("a single nonzero weight attributes to one feature") {
  const Fixture f;
  Model model = Model::zeros(f.spec(ModelKind::SLP));
  auto& W = model.parameters()[0].value;
  W.at(7, 2) = 0.8;
  const auto samples = collect_samples(f.features, 400, 600);
  const auto mu = background_mean(samples.values);
  const Matrix A = slp_linear_attribution(model, samples.values, mu, 2);
  for (std::size_t s = 0; s < A.rows(); ++s) {
    for (std::size_t j = 0; j < A.cols(); ++j) {
      if (j != 7) CHECK(A(s, j) == 0.0);
    }
  }
  const auto summary = summarize_linear_attribution(model, f.features, samples);
  const auto ranked = rank_features(summary.labels, summary.per_asset[2], 3);
  REQUIRE(ranked.size() == 3);
  CHECK(ranked[0].feature == f.features.column_label(7));
  CHECK(ranked[0].rank == 1);
  CHECK(ranked[0].mean_abs_attr > 0.0);
  CHECK(ranked[1].mean_abs_attr == 0.0);
  for (double v : summary.per_asset[0]) CHECK(v == 0.0);
  CHECK(summary.global[7] == summary.per_asset[2][7]);
}

TEST_CASE("ranking breaks ties by label") {
  const std::vector<std::string> labels{"c", "a", "b", "d"};
  const std::vector<double> values{1.0, 2.0, 1.0, 0.5};
  const auto r = rank_features(labels, values, 10);
  REQUIRE(r.size() == 4);
  CHECK(r[0].feature == "a");
  CHECK(r[1].feature == "b");
  CHECK(r[2].feature == "c");
  CHECK(r[3].rank == 4);
  CHECK(rank_features(labels, values, 2).size() == 2);
}

TEST_CASE("linear attribution is SLP only") {
  const Fixture f;
  Rng rng(2);
  const Model mlp(f.spec(ModelKind::MLP), rng);
  const auto samples = collect_samples(f.features, 400, 600);
  const auto mu = background_mean(samples.values);
  CHECK_THROWS_AS(slp_linear_attribution(mlp, samples.values, mu, 0), UnsupportedModelError);
  CHECK_THROWS_AS(summarize_linear_attribution(mlp, f.features, samples), UnsupportedModelError);
}

TEST_CASE("permutation importance") {
  const Fixture f;
  Model model = Model::zeros(f.spec(ModelKind::SLP));
  auto& W = model.parameters()[0].value;
  W.at(0, 0) = 1.5;
  W.at(3, 1) = -0.7;
  const auto samples = collect_samples(f.features, 400, 600);
  const auto pi = permutation_importance(model, f.features, samples, f.panel, f.vol, 5, 9);
  REQUIRE(pi.degradation.size() == f.features.sample_width());
  for (std::size_t j = 0; j < pi.degradation.size(); ++j) {
    if (j == 0 || j == 3) continue;
    CHECK(pi.degradation[j] == 0.0);
  }
  CHECK(pi.degradation[0] != 0.0);

  const auto again = permutation_importance(model, f.features, samples, f.panel, f.vol, 5, 9, 3);
  CHECK(again.degradation == pi.degradation);
  CHECK(again.baseline_sharpe == pi.baseline_sharpe);

  // works for any model kind
  Rng rng(3);
  const Model lstm(f.spec(ModelKind::LSTM), rng);
  const auto pl = permutation_importance(lstm, f.features, samples, f.panel, f.vol, 2, 1);
  CHECK(pl.degradation.size() == f.features.sample_width());
  const Matrix preds = predict_from_samples(lstm, samples.values);
  CHECK(preds.rows() == 200);
  CHECK(preds.cols() == 3);
}
