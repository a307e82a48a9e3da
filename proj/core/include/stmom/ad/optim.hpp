#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stmom/ad/tape.hpp"
#include "stmom/random.hpp"

namespace stmom::ad {

/// Bias-corrected Adam. Moments are allocated lazily to match the parameters
/// passed to the first step().
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);

  /// Applies one update using p.grad for each parameter. The parameter list
  /// must be the same (same order and shapes) on every call.
  void step(std::span<Parameter* const> params);

  std::size_t step_count() const noexcept { return step_count_; }
  double learning_rate() const noexcept { return learning_rate_; }

 private:
  double learning_rate_;
  double beta1_;
  double beta2_;
  double epsilon_;
  std::size_t step_count_ = 0;
  std::vector<Tensor> first_moment_;
  std::vector<Tensor> second_moment_;
};

/// Global L2 norm of all gradients.
double gradient_norm(std::span<Parameter* const> params);

/// Rescales all gradients so the global norm is at most max_norm and returns
/// the factor applied (1 when no clipping happened).
double clip_gradient_norm(std::span<Parameter* const> params, double max_norm);

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace stmom::ad
