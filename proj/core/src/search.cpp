#include "stmom/search.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>
#include <thread>

#include "stmom/error.hpp"

namespace stmom {

void SearchGrid::validate() const {
  if (batch_sizes.empty() || dropout_rates.empty() || hidden_sizes.empty() ||
      learning_rates.empty() || max_grad_norms.empty() || l1_alphas.empty()) {
    throw std::invalid_argument("search grid has an empty axis");
  }
}

void apply_hyperparameters(const Hyperparameters& hp, ArchitectureSpec& arch, TrainConfig& cfg) {
  arch.hidden_size = hp.hidden_size;
  arch.dropout_rate = arch.kind == ModelKind::SLP ? 0.0 : hp.dropout_rate;
  cfg.batch_size = hp.batch_size;
  cfg.dropout_rate = hp.dropout_rate;
  cfg.learning_rate = hp.learning_rate;
  cfg.max_grad_norm = hp.max_grad_norm;
  cfg.l1_alpha = hp.l1_alpha;
}

std::vector<Hyperparameters> sample_candidates(const SearchGrid& grid, std::size_t iterations,
                                               Rng& rng) {
  grid.validate();
  std::vector<Hyperparameters> out;
  out.reserve(iterations);
  for (std::size_t k = 0; k < iterations; ++k) {
    Hyperparameters hp;
    hp.batch_size = grid.batch_sizes[rng.uniform_index(grid.batch_sizes.size())];
    hp.dropout_rate = grid.dropout_rates[rng.uniform_index(grid.dropout_rates.size())];
    hp.hidden_size = grid.hidden_sizes[rng.uniform_index(grid.hidden_sizes.size())];
    hp.learning_rate = grid.learning_rates[rng.uniform_index(grid.learning_rates.size())];
    hp.max_grad_norm = grid.max_grad_norms[rng.uniform_index(grid.max_grad_norms.size())];
    hp.l1_alpha = grid.l1_alphas[rng.uniform_index(grid.l1_alphas.size())];
    out.push_back(hp);
  }
  return out;
}

SearchResult random_search(const ArchitectureSpec& arch, const TrainConfig& cfg,
                           const SearchGrid& grid, const MarketView& market, IndexRange train,
                           IndexRange validation, const SearchOptions& options) {
  if (options.iterations == 0) throw std::invalid_argument("random search needs >= 1 iteration");
  const auto window = static_cast<std::uint64_t>(options.window);
  Rng sampler(derive_seed(options.seed, {2, window}));
  const std::vector<Hyperparameters> draws = sample_candidates(grid, options.iterations, sampler);

  std::vector<CandidateResult> results(draws.size());
  std::vector<std::optional<Model>> models(draws.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < draws.size(); k = next++) {
      CandidateResult& r = results[k];
      r.index = k;
      r.hyperparameters = draws[k];
      r.seed = derive_seed(options.seed, {3, window, static_cast<std::uint64_t>(k)});
      ArchitectureSpec a = arch;
      TrainConfig c = cfg;
      apply_hyperparameters(draws[k], a, c);
      c.seed = r.seed;
      try {
        TrainResult tr = train_model(a, c, market, train, validation);
        r.best_val_loss = tr.best_val_loss;
        r.best_epoch = tr.best_epoch;
        r.log = std::move(tr.log);
        models[k].emplace(std::move(tr.model));
      } catch (const NumericalError& e) {
        r.failed = true;
        r.numerical_failure = true;
        r.error = e.what();
      } catch (const std::exception& e) {
        r.failed = true;
        r.error = e.what();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(options.threads, 1, draws.size());
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }

  std::optional<std::size_t> best;
  for (const CandidateResult& r : results) {
    if (r.failed) continue;
    if (!best || r.best_val_loss < results[*best].best_val_loss) best = r.index;
  }
  if (!best) {
    std::string log = "all " + std::to_string(results.size()) + " candidates failed:";
    bool numerical = false;
    for (const CandidateResult& r : results) {
      log += "\n  candidate " + std::to_string(r.index) + ": " + r.error;
      numerical = numerical || r.numerical_failure;
    }
    if (numerical) throw NumericalError(log);
    throw DataError(log);
  }
  ArchitectureSpec best_arch = arch;
  TrainConfig best_cfg = cfg;
  apply_hyperparameters(draws[*best], best_arch, best_cfg);
  best_cfg.seed = results[*best].seed;
  return SearchResult{*best, best_arch, best_cfg, std::move(*models[*best]), std::move(results)};
}

std::vector<Window> expanding_windows(const std::vector<Date>& dates, int first_train_years,
                                      int step_years) {
  if (first_train_years < 1 || step_years < 1) {
    throw std::invalid_argument("window lengths must be >= 1 year");
  }
  if (dates.empty()) throw std::invalid_argument("no dates to split into windows");
  const int first_year = dates.front().year();
  std::vector<Window> out;
  for (int year = first_year + first_train_years;; year += step_years) {
    const Date boundary = Date::from_ymd(year, 1, 1);
    if (!(boundary < dates.back())) break;
    const Date next = Date::from_ymd(year + step_years, 1, 1);
    const auto b = static_cast<std::size_t>(
        std::lower_bound(dates.begin(), dates.end(), boundary) - dates.begin());
    const auto e = static_cast<std::size_t>(
        std::lower_bound(dates.begin(), dates.end(), next) - dates.begin());
    out.push_back(Window{out.size(), boundary, IndexRange{0, b}, IndexRange{b, e}});
  }
  if (out.empty()) {
    throw std::invalid_argument("panel spans fewer than " + std::to_string(first_train_years) +
                                " years; no expanding window fits");
  }
  return out;
}

ExpandingResult expanding_window(const MarketView& market, const ArchitectureSpec& arch,
                                 const TrainConfig& cfg, const SearchGrid& grid,
                                 const SearchOptions& options, int first_train_years,
                                 int step_years) {
  const auto windows = expanding_windows(market.features.dates(), first_train_years, step_years);
  ExpandingResult out{SignalMatrix(market.features.dates(), market.features.assets()), {},
                      windows.front().test.begin};
  for (const Window& w : windows) {
    WindowOutcome outcome{w, false, "", std::nullopt};
    bool any_test = false;
    for (std::size_t t = w.test.begin; t < w.test.end && !any_test; ++t) {
      if (arch.kind == ModelKind::DMN) {
        for (std::size_t i = 0; i < market.num_assets(); ++i) {
          any_test = any_test || asset_block_usable(market.features, t, i);
        }
      } else {
        any_test = market.features.usable(t);
      }
    }
    if (!any_test) {
      outcome.skipped = true;
      outcome.warning = "window " + std::to_string(w.index) + " (" + w.boundary.to_string() +
                        "): no usable test dates";
      out.windows.push_back(std::move(outcome));
      continue;
    }
    IndexRange train, validation;
    try {
      std::tie(train, validation) = split_train_validation(w.fit, cfg.train_fraction);
    } catch (const std::invalid_argument& e) {
      outcome.skipped = true;
      outcome.warning = "window " + std::to_string(w.index) + ": " + e.what();
      out.windows.push_back(std::move(outcome));
      continue;
    }
    SearchOptions opts = options;
    opts.window = w.index;
    const std::string where = "window " + std::to_string(w.index) + " (" +
                              w.boundary.to_string() + "): ";
    std::optional<SearchResult> found;
    try {
      found.emplace(random_search(arch, cfg, grid, market, train, validation, opts));
    } catch (const NumericalError& e) {
      throw NumericalError(where + e.what());
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
    SearchResult& search = *found;
    const SignalMatrix s = predict_signals(search.model, market.features, w.test.begin, w.test.end);
    for (std::size_t t = 0; t < s.num_dates(); ++t) {
      for (std::size_t i = 0; i < s.num_assets(); ++i) {
        if (s.is_usable(t, i)) out.signals.set(w.test.begin + t, i, s.signals(t, i));
      }
    }
    outcome.search.emplace(std::move(search));
    out.windows.push_back(std::move(outcome));
  }
  return out;
}

}  // namespace stmom
