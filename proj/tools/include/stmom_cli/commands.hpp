#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stmom/market_data.hpp"
#include "stmom_cli/config.hpp"

namespace stmom::cli {

/// Ingests config.data, restricts it to [start, end] and winsorizes when
/// enabled.
ReturnsPanel load_panel(const RunConfig& config);

/// Writes panel.csv to the output directory and prints N, T, the date span
/// and per-asset missing counts.
void cmd_ingest(const RunConfig& config, std::ostream& out);

/// Classical strategies and expanding-window models for every seed. Writes
/// metric tables, the cost sweep, turnover summary, correlations, per-run
/// return series, training logs, checkpoints, manifest.json and report.json.
void cmd_backtest(const RunConfig& config, std::ostream& out, std::ostream& err);

struct TrainOptions {
  std::string model = "slp";
  std::uint64_t seed = 1;
};

/// Random search on the whole (filtered) panel with a chronological
/// train/validation split; writes checkpoint.json and training_log.csv.
void cmd_train(const RunConfig& config, const TrainOptions& options, std::ostream& out);

struct AttributionOptions {
  std::filesystem::path checkpoint;
  std::string method = "linear";  // or "permutation"
  std::vector<std::string> assets;
  bool global = false;
  std::size_t top = 20;
  std::size_t permutations = 5;
};

/// Ranked feature tables `feature,rank,mean_abs_attr` (linear) or
/// `feature,rank,degradation` (permutation) over the usable dates.
void cmd_attribution(const RunConfig& config, const AttributionOptions& options,
                     std::ostream& out);

/// Rebuilds report.json in `run_dir` from manifest.json and the CSV tables,
/// then prints the rescaled metrics table.
void cmd_report(const std::filesystem::path& run_dir, std::ostream& out);

}  // namespace stmom::cli
