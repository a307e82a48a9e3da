#include "stmom/attribution.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "stmom/backtest.hpp"
#include "stmom/error.hpp"
#include "stmom/metrics.hpp"

namespace stmom {

SampleSet collect_samples(const FeatureTensor& features, std::size_t begin, std::size_t end) {
  end = std::min(end, features.num_dates());
  SampleSet out;
  for (std::size_t t = begin; t < end; ++t) {
    if (features.usable(t)) out.dates.push_back(t);
  }
  const std::size_t m = features.sample_width();
  out.values = Matrix(out.dates.size(), m);
  for (std::size_t s = 0; s < out.dates.size(); ++s) features.sample(out.dates[s], out.values.row(s));
  return out;
}

std::vector<double> background_mean(const Matrix& samples) {
  std::vector<double> mu(samples.cols(), 0.0);
  if (samples.rows() == 0) return mu;
  for (std::size_t s = 0; s < samples.rows(); ++s) {
    for (std::size_t j = 0; j < samples.cols(); ++j) mu[j] += samples(s, j);
  }
  for (double& v : mu) v /= static_cast<double>(samples.rows());
  return mu;
}

Matrix slp_linear_attribution(const Model& model, const Matrix& samples,
                              std::span<const double> background, std::size_t asset) {
  if (model.spec().kind != ModelKind::SLP) {
    throw UnsupportedModelError("linear attribution is exact only for SLP models; use "
                                "permutation importance for " +
                                std::string(to_string(model.spec().kind)));
  }
  const ad::Tensor& W = model.input_weights().value;
  const std::size_t m = W.dim(0), N = W.dim(1);
  if (samples.cols() != m || background.size() != m) {
    throw std::invalid_argument("samples do not match the model input width");
  }
  if (asset >= N) throw std::invalid_argument("asset index out of range");
  Matrix out(samples.rows(), m);
  for (std::size_t s = 0; s < samples.rows(); ++s) {
    for (std::size_t j = 0; j < m; ++j) {
      out(s, j) = W.at(j, asset) * (samples(s, j) - background[j]);
    }
  }
  return out;
}

AttributionSummary summarize_linear_attribution(const Model& model, const FeatureTensor& features,
                                                const SampleSet& samples) {
  const std::size_t m = features.sample_width();
  AttributionSummary out;
  for (std::size_t j = 0; j < m; ++j) out.labels.push_back(features.column_label(j));
  const std::vector<double> mu = background_mean(samples.values);
  out.global.assign(m, 0.0);
  const double n = std::max<double>(1.0, static_cast<double>(samples.values.rows()));
  for (std::size_t i = 0; i < model.spec().num_assets; ++i) {
    const Matrix a = slp_linear_attribution(model, samples.values, mu, i);
    std::vector<double> mean_abs(m, 0.0);
    for (std::size_t s = 0; s < a.rows(); ++s) {
      for (std::size_t j = 0; j < m; ++j) mean_abs[j] += std::abs(a(s, j));
    }
    for (std::size_t j = 0; j < m; ++j) {
      mean_abs[j] /= n;
      out.global[j] += mean_abs[j];
    }
    out.per_asset.push_back(std::move(mean_abs));
  }
  return out;
}

std::vector<RankedFeature> rank_features(const std::vector<std::string>& labels,
                                         std::span<const double> values, std::size_t top) {
  if (labels.size() != values.size()) throw std::invalid_argument("labels and values differ");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return labels[a] < labels[b];
  });
  std::vector<RankedFeature> out;
  for (std::size_t r = 0; r < std::min(top, order.size()); ++r) {
    out.push_back({labels[order[r]], r + 1, values[order[r]]});
  }
  return out;
}

Matrix predict_from_samples(const Model& model, const Matrix& samples) {
  const ArchitectureSpec& spec = model.spec();
  const std::size_t D = samples.rows(), N = spec.num_assets;
  Matrix out(D, N);
  if (D == 0) return out;
  const std::size_t S = spec.output_steps();
  if (spec.kind == ModelKind::DMN) {
    const std::size_t block = spec.input_width();
    const std::size_t assets = samples.cols() / block;
    out = Matrix(D, assets);
    ad::Tensor rows(ad::Shape{D * assets, block});
    for (std::size_t s = 0; s < D; ++s) {
      std::copy_n(samples.row(s).data(), assets * block, rows.data() + s * assets * block);
    }
    const ad::Tensor y = model.predict(rows);
    for (std::size_t r = 0; r < D * assets; ++r) out(r / assets, r % assets) = y[r * S + S - 1];
    return out;
  }
  ad::Tensor rows(ad::Shape{D, samples.cols()}, std::vector<double>(samples.values().begin(),
                                                                      samples.values().end()));
  const ad::Tensor y = model.predict(rows);
  for (std::size_t s = 0; s < D; ++s) {
    for (std::size_t i = 0; i < N; ++i) out(s, i) = y[(s * S + S - 1) * N + i];
  }
  return out;
}

namespace {

double strategy_sharpe(const Matrix& positions, const SampleSet& samples,
                       const ReturnsPanel& panel, const VolatilityEstimates& vol,
                       double sigma_target) {
  SignalMatrix signals(panel.dates(), panel.assets());
  for (std::size_t s = 0; s < samples.dates.size(); ++s) {
    for (std::size_t i = 0; i < positions.cols(); ++i) signals.set(samples.dates[s], i, positions(s, i));
  }
  const BacktestResult bt = aggregate_returns(signals, panel, vol, sigma_target);
  std::vector<double> raw;
  for (std::size_t t : samples.dates) raw.push_back(bt.raw[t]);
  if (raw.size() < 2) return 0.0;
  return compute_metrics(raw).sharpe.value_or(0.0);
}

}  // namespace

PermutationImportance permutation_importance(const Model& model, const FeatureTensor& features,
                                             const SampleSet& samples, const ReturnsPanel& panel,
                                             const VolatilityEstimates& vol,
                                             std::size_t n_permutations, std::uint64_t seed,
                                             std::size_t threads, double sigma_target) {
  if (n_permutations == 0) throw std::invalid_argument("need at least one permutation");
  const std::size_t m = samples.values.cols();
  PermutationImportance out;
  for (std::size_t j = 0; j < m; ++j) out.labels.push_back(features.column_label(j));
  out.baseline_sharpe =
      strategy_sharpe(predict_from_samples(model, samples.values), samples, panel, vol, sigma_target);
  out.degradation.assign(m, 0.0);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    Matrix shuffled = samples.values;
    for (std::size_t j = next++; j < m; j = next++) {
      std::vector<double> column = samples.values.column(j);
      double total = 0.0;
      for (std::size_t p = 0; p < n_permutations; ++p) {
        std::vector<double> perm = column;
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(p)}));
        rng.shuffle(std::span<double>(perm));
        for (std::size_t s = 0; s < perm.size(); ++s) shuffled(s, j) = perm[s];
        total += strategy_sharpe(predict_from_samples(model, shuffled), samples, panel, vol,
                                 sigma_target);
      }
      for (std::size_t s = 0; s < column.size(); ++s) shuffled(s, j) = column[s];
      out.degradation[j] = out.baseline_sharpe - total / static_cast<double>(n_permutations);
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(m, 1));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }
  return out;
}

}  // namespace stmom
