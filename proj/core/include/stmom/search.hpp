#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stmom/classical.hpp"
#include "stmom/training.hpp"

namespace stmom {

/// Random-search grid; defaults are the published search ranges.
struct SearchGrid {
  std::vector<std::size_t> batch_sizes{32, 64, 128, 256};
  std::vector<double> dropout_rates{0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<std::size_t> hidden_sizes{5, 10, 20, 40, 80, 160};
  std::vector<double> learning_rates{1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  std::vector<double> max_grad_norms{1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0};
  std::vector<double> l1_alphas{1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0};

  /// Throws std::invalid_argument when any axis is empty.
  void validate() const;
};

struct Hyperparameters {
  std::size_t batch_size = 64;
  double dropout_rate = 0.1;
  std::size_t hidden_size = 10;
  double learning_rate = 1e-3;
  double max_grad_norm = 1.0;
  double l1_alpha = 0.0;

  friend bool operator==(const Hyperparameters&, const Hyperparameters&) = default;
};

/// Applies hp on top of a base architecture and training config.
void apply_hyperparameters(const Hyperparameters& hp, ArchitectureSpec& arch, TrainConfig& cfg);

/// Uniform draws with replacement, one value per axis per candidate.
std::vector<Hyperparameters> sample_candidates(const SearchGrid& grid, std::size_t iterations,
                                               Rng& rng);

struct SearchOptions {
  std::size_t iterations = 100;
  std::size_t threads = 1;
  std::uint64_t seed = 0;
  std::size_t window = 0;  // seed-split coordinate
};

struct CandidateResult {
  std::size_t index = 0;
  Hyperparameters hyperparameters;
  std::uint64_t seed = 0;
  bool failed = false;
  bool numerical_failure = false;
  std::string error;
  double best_val_loss = 0.0;
  int best_epoch = 0;
  std::vector<EpochLog> log;
};

struct SearchResult {
  std::size_t best_index = 0;
  ArchitectureSpec arch;
  TrainConfig config;
  Model model;
  std::vector<CandidateResult> candidates;
};

/// Seeds: candidates are drawn from derive_seed(seed, {2, window}); candidate
/// k trains with derive_seed(seed, {3, window, k}). Candidates run on
/// `threads` workers and the lowest validation loss wins (ties: lowest
/// index). Failed candidates are excluded; if all fail, throws
/// NumericalError (or DataError when no failure was numerical) listing the
/// failures.
SearchResult random_search(const ArchitectureSpec& arch, const TrainConfig& cfg,
                           const SearchGrid& grid, const MarketView& market, IndexRange train,
                           IndexRange validation, const SearchOptions& options);

/// One expanding-window step: fit on [0, boundary), test on [boundary, test_end).
struct Window {
  std::size_t index = 0;
  Date boundary;
  IndexRange fit;
  IndexRange test;
};

/// Calendar-year boundaries first_year + first_train_years + k * step_years,
/// kept while the boundary falls before the last date. Throws
/// std::invalid_argument when no window fits.
std::vector<Window> expanding_windows(const std::vector<Date>& dates, int first_train_years = 5,
                                      int step_years = 5);

struct WindowOutcome {
  Window window;
  bool skipped = false;
  std::string warning;
  std::optional<SearchResult> search;
};

struct ExpandingResult {
  SignalMatrix signals;  // all dates; usable only inside test windows
  std::vector<WindowOutcome> windows;
  std::size_t first_test_index = 0;
};

/// Re-runs random search in each window and concatenates the out-of-sample
/// signals. Windows whose fit or test range has no usable rows are skipped
/// with a warning.
ExpandingResult expanding_window(const MarketView& market, const ArchitectureSpec& arch,
                                 const TrainConfig& cfg, const SearchGrid& grid,
                                 const SearchOptions& options, int first_train_years = 5,
                                 int step_years = 5);

}  // namespace stmom
