#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "stmom/error.hpp"
#include "stmom/stats.hpp"
#include "stmom/training.hpp"
#include "synthetic.hpp"

using namespace stmom;

namespace {

/// Each asset's next-day return loads on its own return today, so the
/// one-day normalized return predicts the target.
ReturnsPanel autoregressive_panel(std::size_t N, std::size_t T, double phi, std::uint64_t seed) {
  Rng rng(seed);
  Matrix r(T, N);
  for (std::size_t i = 0; i < N; ++i) {
    double prev = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      prev = phi * prev + 0.01 * rng.normal();
      r(t, i) = prev;
    }
  }
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < N; ++i) ids.push_back("S" + std::to_string(i));
  return ReturnsPanel(testing::business_days(Date::from_ymd(2001, 1, 1), T), ids, r);
}

ArchitectureSpec spec_for(ModelKind kind, const MarketView& m, std::size_t tau) {
  ArchitectureSpec spec;
  spec.kind = kind;
  spec.num_assets = m.num_assets();
  spec.num_features = m.features.num_features();
  spec.tau = tau;
  spec.hidden_size = 5;
  return spec;
}

TrainConfig quick_config() {
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.patience = 3;
  cfg.batch_size = 32;
  cfg.learning_rate = 1e-2;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("Sharpe loss values") {
  Matrix r(3, 1);
  r(0, 0) = 0.01;
  r(1, 0) = 0.02;
  r(2, 0) = 0.03;
  const std::vector<double> one{1.0};
  const double expected = -std::sqrt(252.0) * 0.02 / std::sqrt(2.0e-4 / 3.0 + 1e-12);
  CHECK(sharpe_loss(r, one) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(sharpe_loss(r, one) == doctest::Approx(-38.88).epsilon(1e-3));

  Matrix alt(6, 1);
  for (std::size_t t = 0; t < 6; ++t) alt(t, 0) = t % 2 == 0 ? 0.02 : -0.02;
  CHECK(sharpe_loss(alt, one) == doctest::Approx(0.0));

  // zero variance is guarded, not infinite
  const Matrix flat(4, 1, 0.001);
  const double guarded = sharpe_loss(flat, one);
  CHECK(std::isfinite(guarded));
  CHECK(guarded < -1e4);

  // weighted sum over columns
  Matrix two(3, 2);
  for (std::size_t t = 0; t < 3; ++t) {
    two(t, 0) = r(t, 0);
    two(t, 1) = -r(t, 0);
  }
  CHECK(sharpe_loss(two, std::vector<double>{0.75, 0.25}) ==
        doctest::Approx(0.5 * expected).epsilon(1e-12));
}

TEST_CASE("L1 penalty and pair turnover") {
  const std::vector<double> w{1.0, -2.0};
  CHECK(l1_penalty(w, 0.5) == 1.5);
  CHECK(l1_penalty(w, 0.0) == 0.0);
  // X/sigma = 2 and 1 with sigma_tgt 0.15
  CHECK(pair_turnover(0.2, 0.1, 0.1, 0.1, 0.15) == doctest::Approx(0.15));
  CHECK(pair_turnover(0.5, 0.02, 0.5, 0.02, 0.15) == 0.0);
}

TEST_CASE("early stopping") {
  EarlyStopping stop(25);
  int stopped_at = 0;
  for (int epoch = 1; epoch <= 100; ++epoch) {
    if (stop.update(epoch, 1.0 + 0.01 * epoch)) {
      stopped_at = epoch;
      break;
    }
  }
  CHECK(stopped_at == 26);
  CHECK(stop.best_epoch() == 1);
  CHECK(stop.best_loss() == doctest::Approx(1.01));

  EarlyStopping ties(2);
  CHECK_FALSE(ties.update(1, 0.5));
  CHECK(ties.improved());
  CHECK_FALSE(ties.update(2, 0.5));  // equal is not an improvement
  CHECK_FALSE(ties.improved());
  CHECK(ties.update(3, 0.5));
  CHECK_THROWS_AS(EarlyStopping(0), std::invalid_argument);
}

TEST_CASE("train config defaults") {
  const auto slp = TrainConfig::defaults_for(ModelKind::SLP);
  CHECK(slp.epochs == 500);
  CHECK(slp.patience == 25);
  CHECK(TrainConfig::defaults_for(ModelKind::DMN).epochs == 100);
  TrainConfig bad;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = TrainConfig{};
  bad.l1_alpha = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK(daily_sigma_target(0.15) == doctest::Approx(0.15 / std::sqrt(252.0)));
}

TEST_CASE("eligible rows respect range, limit and usability") {
  const auto panel = testing::random_panel(3, 500, 31, 0.01);
  const auto market = MarketView::build(panel, 5);
  const auto spec = spec_for(ModelKind::SLP, market, 5);
  const auto rows = eligible_rows(market, spec, IndexRange{300, 450}, 400);
  REQUIRE_FALSE(rows.empty());
  for (const auto& r : rows) {
    CHECK(r.t >= 300);
    CHECK(r.t + 1 < 400);
    CHECK(market.features.usable(r.t));
  }
  CHECK(rows.back().t == 398);

  const auto lstm = spec_for(ModelKind::LSTM, market.with_tau(4), 4);
  for (const auto& r : eligible_rows(market.with_tau(4), lstm, IndexRange{300, 450}, 450)) {
    CHECK(r.t >= 303);  // the whole output sequence lies in range
  }
  const auto dmn = spec_for(ModelKind::DMN, market, 5);
  const auto per_asset = eligible_rows(market, dmn, IndexRange{400, 410}, 410);
  CHECK(per_asset.size() == 5 * 3);  // sequences need tau - 1 earlier dates
}

TEST_CASE("batch tensors pair outputs with scaled next-day returns") {
  const auto panel = testing::random_panel(2, 450, 32, 0.01);
  const auto market = MarketView::build(panel, 5);
  const auto spec = spec_for(ModelKind::SLP, market, 5);
  const std::vector<RowRef> rows{{420, 0}, {400, 0}, {401, 0}};
  const auto batch = make_batch(market, spec, rows, 0.15);
  const double target = 0.15 / std::sqrt(252.0);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t i = 0; i < 2; ++i) {
      const std::size_t t = rows[r].t;
      CHECK(batch.scale.at(r, i) == doctest::Approx(target / market.sigma(t, i) *
                                                    market.returns(t + 1, i)));
      CHECK(batch.inv_sigma.at(r, i) == doctest::Approx(1.0 / market.sigma(t, i)));
    }
  }
  const auto expected = market.features.sample(420);
  for (std::size_t k = 0; k < expected.size(); ++k) CHECK(batch.inputs.at(0, k) == expected[k]);
}

TEST_CASE("batch loss without costs is the Sharpe loss of captured returns") {
  const auto panel = testing::random_panel(3, 500, 33, 0.01);
  const auto market = MarketView::build(panel, 5);
  const auto spec = spec_for(ModelKind::SLP, market, 5);
  std::vector<RowRef> rows;
  for (std::size_t t = 420; t < 460; ++t) rows.push_back({t, 0});
  const auto batch = make_batch(market, spec, rows, 0.15);
  Rng init(2);
  Model model(spec, init);
  TrainConfig cfg = quick_config();
  cfg.l1_alpha = 0.01;
  ad::Tape tape;
  Rng rng(3);
  const auto parts = batch_loss(tape, model, batch, cfg, false, rng);

  const auto out = model.predict(batch.inputs);
  Matrix captured(rows.size(), 3);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < 3; ++i) captured(r, i) = out.at(r, 0, i) * batch.scale.at(r, i);
  }
  const std::vector<double> lambda(3, 1.0 / 3.0);
  CHECK(parts.smooth.value()[0] == doctest::Approx(sharpe_loss(captured, lambda)).epsilon(1e-12));
  const auto& W = model.input_weights().value;
  CHECK(parts.l1.value()[0] ==
        doctest::Approx(l1_penalty(std::vector<double>(W.values().begin(), W.values().end()),
                                   0.01))
            .epsilon(1e-12));
  CHECK(task_weights(spec, cfg) == lambda);

  // the turnover term only enters with a positive cost
  cfg.cost_bps_train = 50.0;
  ad::Tape tape2;
  Rng rng2(3);
  CHECK(batch_loss(tape2, model, batch, cfg, false, rng2).smooth.value()[0] !=
        parts.smooth.value()[0]);
}

TEST_CASE("epoch batches partition the eligible rows") {
  const auto panel = testing::random_panel(2, 700, 34, 0.01);
  const auto market = MarketView::build(panel, 5);
  const auto spec = spec_for(ModelKind::SLP, market, 5);
  const IndexRange train{350, 650};
  Rng rng(4);
  const auto batches = epoch_batches(market, spec, train, 64, rng);
  std::multiset<std::size_t> seen;
  for (const auto& b : batches) {
    CHECK(b.size() >= 2);
    CHECK(b.size() <= 65);
    for (const auto& r : b) seen.insert(r.t);
  }
  std::multiset<std::size_t> expected;
  for (const auto& r : eligible_rows(market, spec, train, train.end)) expected.insert(r.t);
  CHECK(seen == expected);

  Rng again(4);
  const auto repeat = epoch_batches(market, spec, train, 64, again);
  REQUIRE(repeat.size() == batches.size());
  for (std::size_t k = 0; k < batches.size(); ++k) CHECK(repeat[k] == batches[k]);

  // recurrent rows are non-overlapping sequences
  const auto seq_market = market.with_tau(10);
  const auto lstm = spec_for(ModelKind::LSTM, seq_market, 10);
  Rng r2(5);
  std::vector<std::size_t> ends;
  for (const auto& b : epoch_batches(seq_market, lstm, train, 8, r2)) {
    for (const auto& r : b) ends.push_back(r.t);
  }
  std::sort(ends.begin(), ends.end());
  REQUIRE(ends.size() > 10);
  for (std::size_t k = 1; k < ends.size(); ++k) CHECK(ends[k] - ends[k - 1] >= 10);

  const auto val = validation_rows(seq_market, lstm, IndexRange{600, 650});
  REQUIRE_FALSE(val.empty());
  for (std::size_t k = 1; k < val.size(); ++k) CHECK(val[k].t - val[k - 1].t == 10);
}

TEST_CASE("training is deterministic and keeps the best epoch") {
  const auto panel = testing::random_panel(2, 700, 35, 0.01);
  const auto market = MarketView::build(panel, 5);
  const auto spec = spec_for(ModelKind::MLP, market, 5);
  TrainConfig cfg = quick_config();
  cfg.epochs = 8;
  const auto a = train_model(spec, cfg, market, {350, 630}, {630, 700});
  const auto b = train_model(spec, cfg, market, {350, 630}, {630, 700});
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t e = 0; e < a.log.size(); ++e) {
    CHECK(a.log[e].train_loss == b.log[e].train_loss);
    CHECK(a.log[e].val_loss == b.log[e].val_loss);
  }
  double best = a.log.front().val_loss;
  int best_epoch = a.log.front().epoch;
  for (const auto& e : a.log) {
    if (e.val_loss < best) {
      best = e.val_loss;
      best_epoch = e.epoch;
    }
  }
  CHECK(a.best_val_loss == best);
  CHECK(a.best_epoch == best_epoch);
  CHECK(a.model.spec().dropout_rate == cfg.dropout_rate);

  // the stored parameters reproduce the best validation loss
  const auto rows = validation_rows(market, spec, {630, 700});
  const auto batch = make_batch(market, spec, rows, cfg.sigma_target);
  ad::Tape tape;
  Rng rng(0);
  Model restored = a.model;
  CHECK(total_loss(tape, restored, batch, cfg, false, rng).value()[0] ==
        doctest::Approx(a.best_val_loss).epsilon(1e-12));

  cfg.seed = 6;
  const auto c = train_model(spec, cfg, market, {350, 630}, {630, 700});
  CHECK(c.log.front().train_loss != a.log.front().train_loss);
}

TEST_CASE("training rejects empty splits") {
  const auto panel = testing::random_panel(2, 400, 36, 0.01);
  const auto market = MarketView::build(panel, 5);
  const auto spec = spec_for(ModelKind::SLP, market, 5);
  // features are not usable this early
  CHECK_THROWS_AS(train_model(spec, quick_config(), market, {0, 50}, {50, 60}), DataError);
}

TEST_CASE("SLP learns a planted one-day predictor") {
  const auto panel = autoregressive_panel(2, 1800, 0.2, 37);
  const auto market = MarketView::build(panel, 5);
  const auto spec = spec_for(ModelKind::SLP, market, 5);
  TrainConfig cfg;
  cfg.epochs = 100;
  cfg.patience = 25;
  cfg.batch_size = 128;
  cfg.learning_rate = 1e-2;
  cfg.max_grad_norm = 10.0;
  cfg.seed = 1;
  const auto [train, val] = split_train_validation(IndexRange{0, 1800}, 0.9);
  const auto result = train_model(spec, cfg, market, train, val);
  CHECK(-result.best_val_loss > 1.0);

  // independent check on the deployed signals
  const auto signals = predict_signals(result.model, market.features, val.begin, val.end - 1);
  for (std::size_t i = 0; i < 2; ++i) {
    std::vector<double> captured;
    for (std::size_t t = val.begin; t + 1 < val.end; ++t) {
      if (!signals.is_usable(t - val.begin, i)) continue;
      captured.push_back(signals.signals(t - val.begin, i) / market.sigma(t, i) *
                         market.returns(t + 1, i));
    }
    double mean = 0.0;
    for (double v : captured) mean += v;
    mean /= static_cast<double>(captured.size());
    double var = 0.0;
    for (double v : captured) var += (v - mean) * (v - mean);
    var /= static_cast<double>(captured.size());
    CHECK(std::sqrt(252.0) * mean / std::sqrt(var) > 1.0);
  }
}
