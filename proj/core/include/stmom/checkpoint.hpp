#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "stmom/models.hpp"

namespace stmom {

inline constexpr int kCheckpointVersion = 1;

/// A trained model together with the context needed to apply it.
///
/// On disk this is a JSON object:
///   {"format": "stmom-checkpoint", "version": 1,
///    "architecture": {"kind", "num_assets", "num_features", "tau",
///                     "hidden_size", "dropout_rate", "conv"?},
///    "seed": <uint>, "assets": [...], "feature_names": [...],
///    "parameters": [{"name", "shape": [...], "values": [...]}]}
/// Values are row-major float64 written with round-trip precision.
struct Checkpoint {
  Model model;
  std::uint64_t seed = 0;
  std::vector<std::string> assets;
  std::vector<std::string> feature_names;
};

void save_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Throws std::invalid_argument when the file cannot be opened and DataError
/// when its contents are malformed or inconsistent with the architecture.
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace stmom
