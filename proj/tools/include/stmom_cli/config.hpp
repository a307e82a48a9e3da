#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stmom/backtest.hpp"
#include "stmom/search.hpp"

namespace stmom::cli {

/// Fully resolved settings of a run. Serialized into manifest.json so that a
/// run can be repeated from the manifest and the input file alone.
struct RunConfig {
  std::string data;
  std::string format = "price";
  std::optional<std::string> start;  // inclusive, YYYY-MM-DD
  std::optional<std::string> end;    // inclusive
  bool winsorize = true;
  int winsorize_span = 252;
  double winsorize_sigmas = 5.0;

  std::vector<std::string> strategies{"long_only", "tsmom", "macd", "csmom"};
  std::vector<std::string> combine;  // "a+b" equal-weight blends
  std::vector<double> costs = default_cost_grid();
  std::vector<std::uint64_t> seeds{1};
  double sigma_target = 0.15;
  int vol_span = 60;
  int tsmom_lookback = 252;
  int csmom_lookback = 252;
  double csmom_decile = 0.10;

  // Training and model selection.
  std::optional<int> epochs;  // per-kind default when unset
  int patience = 25;
  double cost_bps_train = 0.0;
  double train_fraction = 0.9;
  std::size_t iterations = 100;
  int first_train_years = 5;
  int step_years = 5;
  std::optional<std::size_t> tau;  // per-kind default when unset
  SearchGrid grid;

  std::string output_dir;
  std::size_t threads = 1;

  /// Throws std::invalid_argument on inconsistent values.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);

/// Starts from `base` and overrides the keys present in `patch`. Unknown keys
/// are rejected.
RunConfig merge(const RunConfig& base, const nlohmann::json& patch);

/// Reads a config file. A manifest written by a previous run is accepted too;
/// its "config" object is used.
nlohmann::json read_config_file(const std::filesystem::path& path);

/// Default output directory: $STMOM_OUTPUT_DIR, else "stmom_out".
std::string default_output_dir();

bool is_classical(const std::string& strategy);
bool is_known_strategy(const std::string& strategy);

}  // namespace stmom::cli
