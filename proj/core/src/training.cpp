#include "stmom/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "stmom/ad/ops.hpp"
#include "stmom/ad/optim.hpp"
#include "stmom/error.hpp"

namespace stmom {

using ad::Shape;
using ad::Tensor;
using ad::Var;

TrainConfig TrainConfig::defaults_for(ModelKind kind) {
  TrainConfig cfg;
  if (kind == ModelKind::DMN) cfg.epochs = 100;
  return cfg;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(max_grad_norm > 0.0)) throw std::invalid_argument("max gradient norm must be positive");
  if (!(l1_alpha >= 0.0)) throw std::invalid_argument("l1 alpha must be >= 0");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("dropout rate must lie in [0, 1)");
  }
  if (!(cost_bps_train >= 0.0)) throw std::invalid_argument("training cost must be >= 0");
  if (!(sigma_target > 0.0)) throw std::invalid_argument("sigma target must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train fraction must lie in (0, 1)");
  }
}

MarketView MarketView::build(const ReturnsPanel& panel, std::size_t tau, const MacdConfig& macd,
                             int vol_span_days) {
  VolatilityEstimates vol = ex_ante_volatility(panel, vol_span_days);
  FeatureTensor features = assemble_tensor(panel, vol, macd, tau);
  return MarketView{std::move(features), std::move(vol.sigma), panel.returns()};
}

MarketView MarketView::with_tau(std::size_t tau) const {
  return MarketView{features.with_tau(tau), sigma, returns};
}

namespace {

bool targets_finite(const MarketView& market, std::size_t t, std::size_t steps,
                    std::size_t asset_begin, std::size_t asset_end) {
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t u = t - (steps - 1 - s);
    for (std::size_t a = asset_begin; a < asset_end; ++a) {
      if (!std::isfinite(market.sigma(u, a)) || !std::isfinite(market.returns(u + 1, a))) {
        return false;
      }
    }
  }
  return true;
}

void chunk_rows(const std::vector<RowRef>& rows, std::size_t batch_size, std::size_t steps,
                std::vector<std::vector<RowRef>>& out) {
  for (std::size_t first = 0; first < rows.size(); first += batch_size) {
    const std::size_t n = std::min(batch_size, rows.size() - first);
    out.emplace_back(rows.begin() + static_cast<std::ptrdiff_t>(first),
                     rows.begin() + static_cast<std::ptrdiff_t>(first + n));
  }
  if (!out.empty() && out.back().size() * steps < 2) {
    if (out.size() > 1) {
      auto tail = std::move(out.back());
      out.pop_back();
      out.back().insert(out.back().end(), tail.begin(), tail.end());
    } else {
      out.pop_back();
    }
  }
}

}  // namespace

std::vector<RowRef> eligible_rows(const MarketView& market, const ArchitectureSpec& arch,
                                  IndexRange range, std::size_t limit) {
  const std::size_t S = arch.output_steps();
  std::vector<RowRef> rows;
  const std::size_t end = std::min({range.end, market.num_dates(), limit});
  for (std::size_t t = range.begin + S - 1; t < end; ++t) {
    if (t + 1 >= limit || t + 1 >= market.num_dates()) break;
    if (arch.kind == ModelKind::DMN) {
      for (std::size_t i = 0; i < market.num_assets(); ++i) {
        if (asset_block_usable(market.features, t, i) && targets_finite(market, t, S, i, i + 1)) {
          rows.push_back({t, i});
        }
      }
    } else if (market.features.usable(t) && targets_finite(market, t, S, 0, market.num_assets())) {
      rows.push_back({t, 0});
    }
  }
  return rows;
}

Batch make_batch(const MarketView& market, const ArchitectureSpec& arch,
                 std::span<const RowRef> rows, double sigma_target_annual) {
  const std::size_t B = rows.size();
  const std::size_t S = arch.output_steps();
  const std::size_t C = arch.output_width();
  const std::size_t width = arch.input_width();
  const double target = daily_sigma_target(sigma_target_annual);
  Batch batch{Tensor(Shape{B, width}), Tensor(Shape{B * S, C}), Tensor(Shape{B * S, C}), {}};
  batch.pairs.assign(B * S, -1);
  for (std::size_t r = 0; r < B; ++r) {
    const RowRef row = rows[r];
    fill_input_row(market.features, arch.kind, row.t, row.asset,
                   std::span<double>(batch.inputs.data() + r * width, width));
    for (std::size_t s = 0; s < S; ++s) {
      const std::size_t u = row.t - (S - 1 - s);
      const std::size_t flat = r * S + s;
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t a = arch.kind == ModelKind::DMN ? row.asset : c;
        const double sigma = market.sigma(u, a);
        batch.scale[flat * C + c] = target / sigma * market.returns(u + 1, a);
        batch.inv_sigma[flat * C + c] = 1.0 / sigma;
      }
      if (S > 1) {
        if (s > 0) batch.pairs[flat] = static_cast<std::ptrdiff_t>(flat - 1);
      } else if (r + 1 < B) {
        batch.pairs[flat] = static_cast<std::ptrdiff_t>(r + 1);
      }
    }
  }
  return batch;
}

std::vector<double> task_weights(const ArchitectureSpec& arch, const TrainConfig& cfg) {
  const std::size_t C = arch.output_width();
  if (!cfg.task_weights.empty()) {
    if (cfg.task_weights.size() != C) {
      throw std::invalid_argument("expected " + std::to_string(C) + " task weights, got " +
                                  std::to_string(cfg.task_weights.size()));
    }
    return cfg.task_weights;
  }
  return std::vector<double>(C, 1.0 / static_cast<double>(C));
}

LossParts batch_loss(ad::Tape& tape, Model& model, const Batch& batch, const TrainConfig& cfg,
                     bool training, Rng& rng) {
  const ArchitectureSpec& arch = model.spec();
  Var out = model.forward(tape, batch.inputs, training, rng);
  const std::size_t rows = batch.scale.dim(0);
  Var positions = ad::reshape(out, Shape{rows, arch.output_width()});
  Var captured = ad::mul(positions, tape.constant(batch.scale));
  if (cfg.cost_bps_train > 0.0) {
    const double c = cfg.cost_bps_train * 1e-4 * daily_sigma_target(cfg.sigma_target);
    Var levered = ad::mul(positions, tape.constant(batch.inv_sigma));
    Var turnover = ad::abs(ad::pair_diff(levered, batch.pairs));
    captured = ad::sub(captured, ad::scale(turnover, c));
  }
  Var smooth = ad::sharpe_loss(captured, task_weights(arch, cfg));
  Var l1 = cfg.l1_alpha > 0.0
               ? ad::scale(ad::sum(ad::abs(tape.parameter(model.input_weights()))), cfg.l1_alpha)
               : tape.constant(Tensor::scalar(0.0));
  return {smooth, l1};
}

Var total_loss(ad::Tape& tape, Model& model, const Batch& batch, const TrainConfig& cfg,
               bool training, Rng& rng) {
  LossParts parts = batch_loss(tape, model, batch, cfg, training, rng);
  return ad::add(parts.smooth, parts.l1);
}

double sharpe_loss(const Matrix& captured, std::span<const double> weights,
                   double variance_epsilon) {
  const std::size_t T = captured.rows(), C = captured.cols();
  if (T < 2) throw std::invalid_argument("sharpe_loss: needs at least two time steps");
  if (weights.size() != C) throw std::invalid_argument("sharpe_loss: one weight per column");
  double loss = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    double sum = 0.0;
    for (std::size_t t = 0; t < T; ++t) sum += captured(t, c);
    const double mean = sum / static_cast<double>(T);
    double ss = 0.0;
    for (std::size_t t = 0; t < T; ++t) ss += (captured(t, c) - mean) * (captured(t, c) - mean);
    const double sd = std::sqrt(ss / static_cast<double>(T) + variance_epsilon);
    loss += weights[c] * (-std::sqrt(kTradingDays) * mean / sd);
  }
  return loss;
}

double l1_penalty(std::span<const double> weights, double alpha) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("l1 alpha must be >= 0");
  double s = 0.0;
  for (double w : weights) s += std::abs(w);
  return alpha * s;
}

double pair_turnover(double x_t, double sigma_t, double x_u, double sigma_u,
                     double sigma_target) {
  return sigma_target * std::abs(x_t / sigma_t - x_u / sigma_u);
}

EarlyStopping::EarlyStopping(int patience)
    : patience_(patience), best_loss_(std::numeric_limits<double>::infinity()) {
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
}

bool EarlyStopping::update(int epoch, double val_loss) {
  if (val_loss < best_loss_) {
    best_loss_ = val_loss;
    best_epoch_ = epoch;
    since_best_ = 0;
    improved_ = true;
  } else {
    ++since_best_;
    improved_ = false;
  }
  return since_best_ >= patience_;
}

std::vector<std::vector<RowRef>> epoch_batches(const MarketView& market,
                                               const ArchitectureSpec& arch, IndexRange train,
                                               std::size_t batch_size, Rng& rng) {
  const std::size_t S = arch.output_steps();
  std::vector<RowRef> rows = eligible_rows(market, arch, train, train.end);
  if (S > 1) {
    const std::size_t phase = rng.uniform_index(S);
    const std::size_t first = train.begin + S - 1;
    std::erase_if(rows, [&](const RowRef& r) { return (r.t - first) % S != phase; });
  }
  rng.shuffle(std::span<RowRef>(rows));
  std::vector<std::vector<RowRef>> batches;
  chunk_rows(rows, batch_size, S, batches);
  return batches;
}

std::vector<RowRef> validation_rows(const MarketView& market, const ArchitectureSpec& arch,
                                    IndexRange validation) {
  const std::size_t S = arch.output_steps();
  std::vector<RowRef> rows = eligible_rows(market, arch, validation, validation.end);
  if (S > 1 && !rows.empty()) {
    std::size_t last = 0;
    for (const RowRef& r : rows) last = std::max(last, r.t);
    std::erase_if(rows, [&](const RowRef& r) { return (last - r.t) % S != 0; });
  }
  return rows;
}

namespace {

// Replaces the gradient at exactly-zero weights by the minimum-norm
// subgradient of smooth + alpha * |w|, so a zero weight only moves when the
// smooth gradient outweighs the penalty.
void min_norm_subgradient(ad::Parameter& p, double alpha) {
  for (std::size_t k = 0; k < p.value.size(); ++k) {
    if (p.value[k] != 0.0) continue;
    const double g = p.grad[k];
    p.grad[k] = g - std::clamp(g, -alpha, alpha);
  }
}

// Keeps each weight in the orthant it started the step in (or, from zero, in
// the descent direction); anything that would cross zero is set to zero.
void project_orthant(ad::Parameter& p, const std::vector<double>& before,
                     const std::vector<double>& grad) {
  for (std::size_t k = 0; k < p.value.size(); ++k) {
    const double w = p.value[k];
    const double side = before[k] != 0.0 ? before[k] : -grad[k];
    if (side == 0.0 || w * side < 0.0) p.value[k] = 0.0;
  }
}

}  // namespace

TrainResult train_model(const ArchitectureSpec& arch_in, const TrainConfig& cfg,
                        const MarketView& market, IndexRange train, IndexRange validation) {
  cfg.validate();
  ArchitectureSpec arch = arch_in;
  arch.dropout_rate = arch.kind == ModelKind::SLP ? 0.0 : cfg.dropout_rate;
  arch.validate();
  if (market.features.tau() != arch.tau) {
    throw std::invalid_argument("feature tensor tau does not match the architecture");
  }

  const std::vector<RowRef> val_rows = validation_rows(market, arch, validation);
  if (val_rows.size() * arch.output_steps() < 2) {
    throw DataError("validation split has no usable rows");
  }
  const Batch val_batch = make_batch(market, arch, val_rows, cfg.sigma_target);

  Rng init_rng(derive_seed(cfg.seed, {0}));
  Model model(arch, init_rng);
  std::vector<ad::Parameter*> params = model.parameter_ptrs();
  ad::Adam adam(cfg.learning_rate);
  EarlyStopping stopper(cfg.patience);

  TrainResult result{model, {}, 0, 0.0};
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, {1, static_cast<std::uint64_t>(epoch)}));
    const auto batches = epoch_batches(market, arch, train, cfg.batch_size, rng);
    if (batches.empty()) throw DataError("training split has no usable rows");
    double train_sum = 0.0;
    for (const auto& rows : batches) {
      const Batch batch = make_batch(market, arch, rows, cfg.sigma_target);
      ad::Tape tape;
      LossParts parts = batch_loss(tape, model, batch, cfg, true, rng);
      train_sum += parts.smooth.value()[0] + parts.l1.value()[0];
      model.zero_grad();
      tape.backward(ad::add(parts.smooth, parts.l1));
      ad::Parameter& w = model.input_weights();
      if (cfg.l1_alpha > 0.0) min_norm_subgradient(w, cfg.l1_alpha);
      ad::clip_gradient_norm(params, cfg.max_grad_norm);
      const std::vector<double> before(w.value.values().begin(), w.value.values().end());
      const std::vector<double> grad(w.grad.values().begin(), w.grad.values().end());
      adam.step(params);
      if (cfg.l1_alpha > 0.0) project_orthant(w, before, grad);
    }
    ad::Tape tape;
    LossParts val = batch_loss(tape, model, val_batch, cfg, false, rng);
    const double val_loss = val.smooth.value()[0] + val.l1.value()[0];
    if (!std::isfinite(val_loss) || !std::isfinite(train_sum)) {
      throw NumericalError("non-finite loss at epoch " + std::to_string(epoch));
    }
    result.log.push_back({epoch, train_sum / static_cast<double>(batches.size()), val_loss});
    const bool stop = stopper.update(epoch, val_loss);
    if (stopper.improved()) result.model = model;
    if (stop) break;
  }
  result.best_epoch = stopper.best_epoch();
  result.best_val_loss = stopper.best_loss();
  return result;
}

}  // namespace stmom
