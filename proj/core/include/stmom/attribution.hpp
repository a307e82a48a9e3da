#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stmom/features.hpp"
#include "stmom/market_data.hpp"
#include "stmom/matrix.hpp"
#include "stmom/models.hpp"

namespace stmom {

/// Canonical feature rows u_t (one per usable date in [begin, end)).
struct SampleSet {
  std::vector<std::size_t> dates;  // indices into the feature tensor
  Matrix values;                   // dates x (N * tau * d)
};

SampleSet collect_samples(const FeatureTensor& features, std::size_t begin, std::size_t end);

/// Column means of the samples.
std::vector<double> background_mean(const Matrix& samples);

/// Exact Shapley values of the SLP pre-activation for output `asset`:
/// A(s, j) = W(j, asset) * (x_sj - mu_j). Throws UnsupportedModelError for
/// other kinds.
Matrix slp_linear_attribution(const Model& model, const Matrix& samples,
                              std::span<const double> background, std::size_t asset);

struct AttributionSummary {
  std::vector<std::string> labels;             // canonical column labels
  std::vector<std::vector<double>> per_asset;  // mean |attribution| per output
  std::vector<double> global;                  // sum over outputs
};

/// Mean absolute linear attribution over the samples, per asset and summed.
AttributionSummary summarize_linear_attribution(const Model& model, const FeatureTensor& features,
                                                const SampleSet& samples);

struct RankedFeature {
  std::string feature;
  std::size_t rank = 0;  // 1-based
  double mean_abs_attr = 0.0;
};

/// Sorted by value descending (ties by label), truncated to `top`.
std::vector<RankedFeature> rank_features(const std::vector<std::string>& labels,
                                         std::span<const double> values, std::size_t top = 20);

/// Deployed signals (samples x N) for canonical rows of any model kind.
Matrix predict_from_samples(const Model& model, const Matrix& samples);

struct PermutationImportance {
  std::vector<std::string> labels;
  double baseline_sharpe = 0.0;
  std::vector<double> degradation;  // baseline - mean permuted Sharpe, per column
};

/// For every canonical column, shuffles it across the sample dates
/// (permutation p of column j seeded with derive_seed(seed, {j, p})),
/// recomputes the annualized Sharpe of the raw strategy over those dates and
/// reports the mean degradation over n_permutations.
PermutationImportance permutation_importance(const Model& model, const FeatureTensor& features,
                                             const SampleSet& samples, const ReturnsPanel& panel,
                                             const VolatilityEstimates& vol,
                                             std::size_t n_permutations = 5,
                                             std::uint64_t seed = 0, std::size_t threads = 1,
                                             double sigma_target = 0.15);

}  // namespace stmom
