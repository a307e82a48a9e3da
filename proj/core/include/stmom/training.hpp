#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "stmom/ad/tape.hpp"
#include "stmom/features.hpp"
#include "stmom/market_data.hpp"
#include "stmom/models.hpp"

namespace stmom {

inline constexpr double kTradingDays = 252.0;
inline constexpr double kDefaultSigmaTarget = 0.15;

/// Annualized volatility target expressed per day.
inline double daily_sigma_target(double annual = kDefaultSigmaTarget) {
  return annual / std::sqrt(kTradingDays);
}

struct TrainConfig {
  int epochs = 500;
  int patience = 25;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double max_grad_norm = 1.0;
  double l1_alpha = 0.0;
  double dropout_rate = 0.1;
  std::vector<double> task_weights;  // empty: 1/N per asset (1 for DMN)
  double cost_bps_train = 0.0;       // 0 disables the turnover term
  double sigma_target = kDefaultSigmaTarget;
  double train_fraction = 0.9;
  std::uint64_t seed = 0;

  /// Defaults with the epoch limit of the given kind (100 for DMN).
  static TrainConfig defaults_for(ModelKind kind);
  void validate() const;
};

/// Loss-function inputs aligned by date: features u_t, ex-ante vol sigma_t
/// and daily returns, where the return realized after signal date t is
/// returns(t + 1, i).
struct MarketView {
  FeatureTensor features;
  Matrix sigma;
  Matrix returns;

  /// Builds features (normalized returns and MACD) with temporal history tau.
  static MarketView build(const ReturnsPanel& panel, std::size_t tau,
                          const MacdConfig& macd = {}, int vol_span_days = 60);

  std::size_t num_dates() const noexcept { return features.num_dates(); }
  std::size_t num_assets() const noexcept { return features.num_assets(); }
  MarketView with_tau(std::size_t tau) const;
};

/// One model input row: the signal date t and, for DMN, the asset.
struct RowRef {
  std::size_t t = 0;
  std::size_t asset = 0;
  friend bool operator==(const RowRef&, const RowRef&) = default;
};

/// Tensors for one minibatch. Output entry (row, step, column) of the model
/// is paired with scale = sigma_tgt_daily / sigma * r_next and
/// inv_sigma = 1 / sigma on its own date; pairs gives the turnover partner
/// of each flattened (row * steps + step) entry or -1.
struct Batch {
  ad::Tensor inputs;     // (B x input_width)
  ad::Tensor scale;      // (B*S x C)
  ad::Tensor inv_sigma;  // (B*S x C)
  std::vector<std::ptrdiff_t> pairs;
};

/// Rows whose full output sequence has finite inputs, vol and next-day
/// returns, with every realized return date t + 1 < limit and every output
/// date >= range.begin.
std::vector<RowRef> eligible_rows(const MarketView& market, const ArchitectureSpec& arch,
                                  IndexRange range, std::size_t limit);

Batch make_batch(const MarketView& market, const ArchitectureSpec& arch,
                 std::span<const RowRef> rows, double sigma_target_annual);

/// Per-task weights lambda: cfg.task_weights when set, else uniform.
std::vector<double> task_weights(const ArchitectureSpec& arch, const TrainConfig& cfg);

struct LossParts {
  ad::Var smooth;  // Sharpe of cost-adjusted captured returns
  ad::Var l1;      // alpha * sum |input weights|
};

/// Records the training objective for one batch on `tape`.
LossParts batch_loss(ad::Tape& tape, Model& model, const Batch& batch, const TrainConfig& cfg,
                     bool training, Rng& rng);

/// Full objective smooth + l1 as a single differentiable scalar.
ad::Var total_loss(ad::Tape& tape, Model& model, const Batch& batch, const TrainConfig& cfg,
                   bool training, Rng& rng);

/// sum_c w_c * (-sqrt(252) * mean_c / sqrt(popvar_c + eps)) over columns of R.
double sharpe_loss(const Matrix& captured, std::span<const double> weights,
                   double variance_epsilon = 1e-12);

/// alpha * sum |w|.
double l1_penalty(std::span<const double> weights, double alpha);

/// Minibatch turnover surrogate sigma_tgt * |x_t / s_t - x_u / s_u|.
double pair_turnover(double x_t, double sigma_t, double x_u, double sigma_u, double sigma_target);

/// Stops after `patience` consecutive epochs without a strictly lower
/// validation loss.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);

  /// Records the loss of `epoch`; returns true when training should stop.
  bool update(int epoch, double val_loss);
  bool improved() const noexcept { return improved_; }
  int best_epoch() const noexcept { return best_epoch_; }
  double best_loss() const noexcept { return best_loss_; }

 private:
  int patience_;
  int best_epoch_ = 0;
  double best_loss_;
  int since_best_ = 0;
  bool improved_ = false;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  Model model;  // parameters of the best validation epoch
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_loss = 0.0;
};

/// Minibatch Adam with gradient clipping. The L1 term on the input weights
/// uses orthant-wise steps: a weight that would cross zero stops at zero and
/// stays there while the smooth gradient is within alpha of zero. The
/// validation loss is evaluated after each epoch and the best parameters are
/// kept. Throws NumericalError on a non-finite forward value and
/// DataError when either split has no usable rows.
TrainResult train_model(const ArchitectureSpec& arch, const TrainConfig& cfg,
                        const MarketView& market, IndexRange train, IndexRange validation);

/// Epoch minibatches: shuffled dates for non-recurrent kinds; non-overlapping
/// tau-step sequences with a random phase otherwise (DMN rows pooled across
/// assets, then shuffled). A trailing batch with fewer than two outputs is
/// merged into the previous one.
std::vector<std::vector<RowRef>> epoch_batches(const MarketView& market,
                                               const ArchitectureSpec& arch, IndexRange train,
                                               std::size_t batch_size, Rng& rng);

/// Validation rows in chronological order.
std::vector<RowRef> validation_rows(const MarketView& market, const ArchitectureSpec& arch,
                                    IndexRange validation);

}  // namespace stmom
