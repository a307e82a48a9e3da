#include "stmom/models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

#include "stmom/ad/ops.hpp"
#include "stmom/ad/optim.hpp"

namespace stmom {

using ad::Parameter;
using ad::Shape;
using ad::Tensor;
using ad::Var;

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::SLP: return "SLP";
    case ModelKind::MLP: return "MLP";
    case ModelKind::CNN: return "CNN";
    case ModelKind::LSTM: return "LSTM";
    case ModelKind::DMN: return "DMN";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (ModelKind k : {ModelKind::SLP, ModelKind::MLP, ModelKind::CNN, ModelKind::LSTM,
                      ModelKind::DMN}) {
    if (upper == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown model kind '" + std::string(name) + "'");
}

bool is_recurrent(ModelKind kind) { return kind == ModelKind::LSTM || kind == ModelKind::DMN; }

std::size_t default_tau(ModelKind kind) {
  return kind == ModelKind::SLP || kind == ModelKind::MLP ? 5 : 63;
}

void ArchitectureSpec::validate() const {
  if (num_assets == 0 || num_features == 0 || tau == 0 || hidden_size == 0) {
    throw std::invalid_argument("architecture sizes must be positive");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("dropout rate must lie in [0, 1)");
  }
  if (kind == ModelKind::CNN) {
    const ConvSpec c = resolved_conv();
    if (c.kernel_width == 0 || c.channels == 0 || c.pool_window == 0) {
      throw std::invalid_argument("convolution sizes must be positive");
    }
    if (c.pool_window > tau) {
      throw std::invalid_argument("pool window " + std::to_string(c.pool_window) +
                                  " exceeds tau " + std::to_string(tau));
    }
  }
}

ConvSpec ArchitectureSpec::resolved_conv() const {
  if (conv) return *conv;
  return ConvSpec{3, hidden_size, 4};
}

std::size_t ArchitectureSpec::input_width() const {
  return (kind == ModelKind::DMN ? 1 : num_assets) * tau * num_features;
}

std::size_t ArchitectureSpec::output_width() const {
  return kind == ModelKind::DMN ? 1 : num_assets;
}

std::size_t ArchitectureSpec::output_steps() const { return is_recurrent(kind) ? tau : 1; }

namespace {

struct ParamShape {
  std::string name;
  Shape shape;
  std::size_t fan_in = 0;  // 0 marks a bias
  std::size_t fan_out = 0;
};

std::vector<ParamShape> parameter_layout(const ArchitectureSpec& s) {
  const std::size_t m = s.input_width();
  const std::size_t C = s.output_width();
  const std::size_t H = s.hidden_size;
  switch (s.kind) {
    case ModelKind::SLP:
      return {{"W", {m, C}, m, C}, {"b", {C}}};
    case ModelKind::MLP:
      return {{"W1", {m, H}, m, H}, {"b1", {H}}, {"W2", {H, C}, H, C}, {"b2", {C}}};
    case ModelKind::CNN: {
      const ConvSpec c = s.resolved_conv();
      const std::size_t in_ch = s.num_assets * s.num_features;
      const std::size_t pooled = (s.tau / c.pool_window) * c.channels;
      const std::size_t kw = c.kernel_width, ch = c.channels;
      return {{"conv1.kernel", {kw, in_ch, ch}, kw * in_ch, kw * ch},
              {"conv1.bias", {ch}},
              {"conv2.kernel", {kw, ch, ch}, kw * ch, kw * ch},
              {"conv2.bias", {ch}},
              {"W1", {pooled, H}, pooled, H},
              {"b1", {H}},
              {"W2", {H, C}, H, C},
              {"b2", {C}}};
    }
    case ModelKind::LSTM:
    case ModelKind::DMN: {
      const std::size_t I = (s.kind == ModelKind::DMN ? 1 : s.num_assets) * s.num_features;
      return {{"lstm.W", {I, 4 * H}, I, H},
              {"lstm.V", {H, 4 * H}, H, H},
              {"lstm.b", {4 * H}},
              {"head.W", {H, C}, H, C},
              {"head.b", {C}}};
    }
  }
  return {};
}

// (B x width) canonical rows -> (B x tau x channels) with step s = lag tau-1-s.
Tensor to_sequence(const Tensor& rows, std::size_t assets, std::size_t tau, std::size_t d) {
  const std::size_t B = rows.dim(0);
  const std::size_t width = assets * tau * d;
  const std::size_t M = assets * d;
  Tensor seq(Shape{B, tau, M});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < assets; ++i) {
      for (std::size_t j = 0; j < tau; ++j) {
        const std::size_t s = tau - 1 - j;
        for (std::size_t k = 0; k < d; ++k) {
          seq[(b * tau + s) * M + i * d + k] = rows[b * width + (i * tau + j) * d + k];
        }
      }
    }
  }
  return seq;
}

Var maybe_dropout(Var x, double rate, bool training, Rng* rng) {
  if (!training || rate == 0.0) return x;
  if (rng == nullptr) throw std::invalid_argument("dropout in training mode needs a generator");
  return ad::dropout(x, rate, *rng, true);
}

}  // namespace

Model::Model(ArchitectureSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  for (const ParamShape& ps : parameter_layout(spec_)) {
    params_.emplace_back(ps.name, Tensor(ps.shape));
  }
}

Model::Model(ArchitectureSpec spec, Rng& rng) : Model(std::move(spec)) {
  const auto layout = parameter_layout(spec_);
  for (std::size_t k = 0; k < layout.size(); ++k) {
    const ParamShape& ps = layout[k];
    if (ps.fan_in > 0) {
      params_[k].value = ad::glorot_uniform(ps.shape, ps.fan_in, ps.fan_out, rng);
    }
    if (ps.name == "lstm.b") {
      const std::size_t H = spec_.hidden_size;
      for (std::size_t h = H; h < 2 * H; ++h) params_[k].value[h] = 1.0;
    }
  }
}

Model Model::zeros(ArchitectureSpec spec) { return Model(std::move(spec)); }

std::vector<Parameter*> Model::parameter_ptrs() {
  std::vector<Parameter*> out;
  for (Parameter& p : params_) out.push_back(&p);
  return out;
}

Parameter* Model::find(std::string_view name) {
  for (Parameter& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

void Model::zero_grad() {
  for (Parameter& p : params_) p.zero_grad();
}

Var Model::forward(ad::Tape& tape, const Tensor& rows, bool training, Rng& rng) {
  std::vector<Var> bound;
  for (Parameter& p : params_) bound.push_back(tape.parameter(p));
  return run(tape, bound, rows, training, &rng);
}

Tensor Model::predict(const Tensor& rows) const {
  ad::Tape tape;
  std::vector<Var> bound;
  for (const Parameter& p : params_) bound.push_back(tape.constant(p.value));
  return run(tape, bound, rows, false, nullptr).value();
}

Var Model::run(ad::Tape& tape, std::span<const Var> p, const Tensor& rows, bool training,
               Rng* rng) const {
  const ArchitectureSpec& s = spec_;
  if (rows.rank() != 2 || rows.dim(1) != s.input_width()) {
    throw std::invalid_argument("model input must be (B x " + std::to_string(s.input_width()) +
                                "), got " + ad::shape_string(rows.shape()));
  }
  const std::size_t B = rows.dim(0);
  const std::size_t C = s.output_width();
  switch (s.kind) {
    case ModelKind::SLP: {
      Var x = tape.constant(rows);
      return ad::reshape(ad::tanh(ad::dense(x, p[0], p[1])), Shape{B, 1, C});
    }
    case ModelKind::MLP: {
      Var x = tape.constant(rows);
      Var h = maybe_dropout(ad::tanh(ad::dense(x, p[0], p[1])), s.dropout_rate, training, rng);
      return ad::reshape(ad::tanh(ad::dense(h, p[2], p[3])), Shape{B, 1, C});
    }
    case ModelKind::CNN: {
      const ConvSpec c = s.resolved_conv();
      Var x = tape.constant(to_sequence(rows, s.num_assets, s.tau, s.num_features));
      Var c1 = ad::tanh(ad::causal_conv1d(x, p[0], p[1]));
      Var c2 = ad::tanh(ad::causal_conv1d(c1, p[2], p[3]));
      Var pooled = ad::avg_pool1d(c2, c.pool_window);
      Var flat = ad::reshape(pooled, Shape{B, pooled.shape()[1] * pooled.shape()[2]});
      Var h = maybe_dropout(ad::tanh(ad::dense(flat, p[4], p[5])), s.dropout_rate, training, rng);
      return ad::reshape(ad::tanh(ad::dense(h, p[6], p[7])), Shape{B, 1, C});
    }
    case ModelKind::LSTM:
    case ModelKind::DMN: {
      const std::size_t assets = s.kind == ModelKind::DMN ? 1 : s.num_assets;
      const std::size_t M = assets * s.num_features;
      const std::size_t H = s.hidden_size;
      const Tensor seq = to_sequence(rows, assets, s.tau, s.num_features);
      const ad::LstmWeights w{p[0], p[1], p[2]};
      Var h = tape.constant(Tensor(Shape{B, H}));
      Var cell = tape.constant(Tensor(Shape{B, H}));
      std::vector<Var> outputs;
      outputs.reserve(s.tau);
      for (std::size_t step = 0; step < s.tau; ++step) {
        Tensor u(Shape{B, M});
        for (std::size_t b = 0; b < B; ++b) {
          std::copy_n(seq.data() + (b * s.tau + step) * M, M, u.data() + b * M);
        }
        std::tie(h, cell) = ad::lstm_step(tape.constant(std::move(u)), h, cell, w);
        Var hd = maybe_dropout(h, s.dropout_rate, training, rng);
        outputs.push_back(ad::tanh(ad::dense(hd, p[3], p[4])));
      }
      return ad::stack_steps(outputs);
    }
  }
  throw std::logic_error("unhandled model kind");
}

bool asset_block_usable(const FeatureTensor& features, std::size_t t, std::size_t asset) {
  const std::size_t tau = features.tau();
  if (t + 1 < tau) return false;
  for (std::size_t j = 0; j < tau; ++j) {
    for (std::size_t k = 0; k < features.num_features(); ++k) {
      if (!std::isfinite(features.base(t - j, asset, k))) return false;
    }
  }
  return true;
}

void fill_input_row(const FeatureTensor& features, ModelKind kind, std::size_t t,
                    std::size_t asset, std::span<double> out) {
  if (kind != ModelKind::DMN) {
    features.sample(t, out);
    return;
  }
  const std::size_t d = features.num_features();
  for (std::size_t j = 0; j < features.tau(); ++j) {
    for (std::size_t k = 0; k < d; ++k) out[j * d + k] = features.at(t, asset, j, k);
  }
}

SignalMatrix predict_signals(const Model& model, const FeatureTensor& features, std::size_t begin,
                             std::size_t end) {
  const ArchitectureSpec& s = model.spec();
  if (features.tau() != s.tau || features.num_features() != s.num_features ||
      (s.kind != ModelKind::DMN && features.num_assets() != s.num_assets)) {
    throw std::invalid_argument("feature tensor does not match the model architecture");
  }
  end = std::min(end, features.num_dates());
  std::vector<Date> dates(features.dates().begin() + static_cast<std::ptrdiff_t>(begin),
                          features.dates().begin() + static_cast<std::ptrdiff_t>(end));
  SignalMatrix out(std::move(dates), features.assets());

  std::vector<std::pair<std::size_t, std::size_t>> rows;  // (t, asset)
  for (std::size_t t = begin; t < end; ++t) {
    if (s.kind == ModelKind::DMN) {
      for (std::size_t i = 0; i < features.num_assets(); ++i) {
        if (asset_block_usable(features, t, i)) rows.emplace_back(t, i);
      }
    } else if (features.usable(t)) {
      rows.emplace_back(t, 0);
    }
  }

  constexpr std::size_t kChunk = 256;
  const std::size_t width = s.input_width();
  const std::size_t S = s.output_steps();
  const std::size_t C = s.output_width();
  for (std::size_t first = 0; first < rows.size(); first += kChunk) {
    const std::size_t n = std::min(kChunk, rows.size() - first);
    Tensor batch(Shape{n, width});
    for (std::size_t r = 0; r < n; ++r) {
      const auto [t, i] = rows[first + r];
      fill_input_row(features, s.kind, t, i, std::span<double>(batch.data() + r * width, width));
    }
    const Tensor y = model.predict(batch);
    for (std::size_t r = 0; r < n; ++r) {
      const auto [t, i] = rows[first + r];
      const double* last = y.data() + (r * S + S - 1) * C;
      if (s.kind == ModelKind::DMN) {
        out.set(t - begin, i, last[0]);
      } else {
        for (std::size_t a = 0; a < C; ++a) out.set(t - begin, a, last[a]);
      }
    }
  }
  return out;
}

}  // namespace stmom
