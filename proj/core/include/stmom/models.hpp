#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stmom/ad/tape.hpp"
#include "stmom/classical.hpp"
#include "stmom/features.hpp"
#include "stmom/random.hpp"

namespace stmom {

enum class ModelKind { SLP, MLP, CNN, LSTM, DMN };

std::string_view to_string(ModelKind kind);
/// Case-insensitive; throws std::invalid_argument for unknown names.
ModelKind parse_model_kind(std::string_view name);

/// LSTM and DMN emit a signal per time step and train on sequences.
bool is_recurrent(ModelKind kind);

/// Temporal history used by default: 5 for SLP/MLP, 63 otherwise.
std::size_t default_tau(ModelKind kind);

struct ConvSpec {
  std::size_t kernel_width = 3;
  std::size_t channels = 10;
  std::size_t pool_window = 4;

  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

struct ArchitectureSpec {
  ModelKind kind = ModelKind::SLP;
  std::size_t num_assets = 1;
  std::size_t num_features = 8;
  std::size_t tau = 5;
  std::size_t hidden_size = 10;
  double dropout_rate = 0.0;
  std::optional<ConvSpec> conv;  // CNN only; defaults to {3, hidden_size, 4}

  /// Throws std::invalid_argument on inconsistent sizes.
  void validate() const;

  ConvSpec resolved_conv() const;
  /// Values per input row: N * tau * d, or tau * d for DMN (one asset per row).
  std::size_t input_width() const;
  /// Signals per row and step: N, or 1 for DMN.
  std::size_t output_width() const;
  /// Steps per output: tau for recurrent kinds, 1 otherwise.
  std::size_t output_steps() const;

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

/// Trainable network for one ArchitectureSpec.
///
/// Input rows hold the flattened feature tensor in canonical order
/// ((i * tau + j) * d + k), lag j = 0 being the current date. For DMN a row is
/// one asset's (j * d + k) block. Outputs are (B x S x C) with step s
/// corresponding to lag tau - 1 - s, so the last step is the deployed signal.
///
/// Parameter order is fixed per kind and the first parameter is always the
/// input weight matrix that the L1 penalty applies to:
///   SLP  W, b
///   MLP  W1, b1, W2, b2
///   CNN  conv1.kernel, conv1.bias, conv2.kernel, conv2.bias, W1, b1, W2, b2
///   LSTM/DMN  lstm.W, lstm.V, lstm.b, head.W, head.b
class Model {
 public:
  /// Glorot-uniform weights, zero biases, LSTM forget-gate bias 1.
  Model(ArchitectureSpec spec, Rng& rng);

  /// All parameters zero.
  static Model zeros(ArchitectureSpec spec);

  const ArchitectureSpec& spec() const noexcept { return spec_; }
  std::vector<ad::Parameter>& parameters() noexcept { return params_; }
  const std::vector<ad::Parameter>& parameters() const noexcept { return params_; }
  std::vector<ad::Parameter*> parameter_ptrs();
  ad::Parameter& input_weights() { return params_.front(); }
  const ad::Parameter& input_weights() const { return params_.front(); }
  ad::Parameter* find(std::string_view name);

  void zero_grad();

  /// Records the forward pass on `tape` with parameters bound for gradients.
  /// rows is (B x input_width). rng drives dropout when training.
  ad::Var forward(ad::Tape& tape, const ad::Tensor& rows, bool training, Rng& rng);

  /// Inference pass; returns (B x S x C).
  ad::Tensor predict(const ad::Tensor& rows) const;

 private:
  explicit Model(ArchitectureSpec spec);
  ad::Var run(ad::Tape& tape, std::span<const ad::Var> p, const ad::Tensor& rows, bool training,
              Rng* rng) const;

  ArchitectureSpec spec_;
  std::vector<ad::Parameter> params_;
};

/// True when the DMN input block of asset i at date t is finite.
bool asset_block_usable(const FeatureTensor& features, std::size_t t, std::size_t asset);

/// Copies the model input row for date t (and asset, for DMN) into out.
void fill_input_row(const FeatureTensor& features, ModelKind kind, std::size_t t,
                    std::size_t asset, std::span<double> out);

/// Deployed signals (last output step) for dates [begin, end). Dates or
/// assets without a finite input window are left unusable.
SignalMatrix predict_signals(const Model& model, const FeatureTensor& features, std::size_t begin,
                             std::size_t end);

}  // namespace stmom
