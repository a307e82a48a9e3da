#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "stmom/backtest.hpp"
#include "stmom/classical.hpp"
#include "stmom/features.hpp"
#include "stmom/models.hpp"
#include "stmom/training.hpp"

using namespace stmom;

namespace {

ReturnsPanel noise_panel(std::size_t assets, std::size_t days, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Date> dates;
  Date d = Date::from_ymd(2000, 1, 3);
  while (dates.size() < days) {
    const auto wd = std::chrono::weekday(d.days()).c_encoding();
    if (wd != 0 && wd != 6) dates.push_back(d);
    d = d.plus_days(1);
  }
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < assets; ++i) ids.push_back("A" + std::to_string(i));
  Matrix r(days, assets);
  for (double& v : r.values()) v = 0.01 * rng.normal();
  return ReturnsPanel(dates, ids, r);
}

ArchitectureSpec spec_for(ModelKind kind, const MarketView& market, std::size_t tau) {
  ArchitectureSpec s;
  s.kind = kind;
  s.num_assets = market.num_assets();
  s.num_features = market.features.num_features();
  s.tau = tau;
  s.hidden_size = 10;
  return s;
}

void BM_Volatility(benchmark::State& state) {
  const auto panel = noise_panel(static_cast<std::size_t>(state.range(0)), 2500, 1);
  for (auto _ : state) benchmark::DoNotOptimize(ex_ante_volatility(panel));
}
BENCHMARK(BM_Volatility)->Arg(12)->Arg(46);

void BM_FeatureTensor(benchmark::State& state) {
  const auto panel = noise_panel(static_cast<std::size_t>(state.range(0)), 2500, 2);
  const auto vol = ex_ante_volatility(panel);
  for (auto _ : state) benchmark::DoNotOptimize(assemble_tensor(panel, vol, MacdConfig{}, 5));
}
BENCHMARK(BM_FeatureTensor)->Arg(12)->Arg(46)->Unit(benchmark::kMillisecond);

void BM_AggregateReturns(benchmark::State& state) {
  const auto panel = noise_panel(static_cast<std::size_t>(state.range(0)), 2500, 3);
  const auto vol = ex_ante_volatility(panel);
  const auto signals = tsmom_signal(panel);
  for (auto _ : state) benchmark::DoNotOptimize(aggregate_returns(signals, panel, vol));
}
BENCHMARK(BM_AggregateReturns)->Arg(12)->Arg(46);

void BM_TrainEpoch(benchmark::State& state) {
  const auto kind = static_cast<ModelKind>(state.range(0));
  const std::size_t tau = is_recurrent(kind) ? 10 : 5;
  const auto panel = noise_panel(12, 1500, 4);
  const auto market = MarketView::build(panel, tau);
  const auto arch = spec_for(kind, market, tau);
  TrainConfig cfg = TrainConfig::defaults_for(kind);
  cfg.epochs = 1;
  cfg.batch_size = 128;
  const auto [train, val] = split_train_validation(IndexRange{0, panel.num_dates()}, 0.9);
  for (auto _ : state) benchmark::DoNotOptimize(train_model(arch, cfg, market, train, val));
  state.SetLabel(std::string(to_string(kind)));
}
BENCHMARK(BM_TrainEpoch)
    ->Arg(static_cast<int>(ModelKind::SLP))
    ->Arg(static_cast<int>(ModelKind::MLP))
    ->Arg(static_cast<int>(ModelKind::CNN))
    ->Arg(static_cast<int>(ModelKind::LSTM))
    ->Unit(benchmark::kMillisecond);

void BM_PredictSignals(benchmark::State& state) {
  const auto panel = noise_panel(12, 2500, 5);
  const auto market = MarketView::build(panel, 10);
  Rng rng(6);
  const Model model(spec_for(ModelKind::LSTM, market, 10), rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict_signals(model, market.features, 0, panel.num_dates()));
  }
}
BENCHMARK(BM_PredictSignals)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
