#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "stmom/ad/tape.hpp"
#include "stmom/random.hpp"

namespace stmom::ad {

// Differentiable ops. Every op checks shapes (std::invalid_argument on
// mismatch) and records an exact backward rule on the tape of its inputs.

/// x (B x I) times w (I x O).
Var matmul(Var x, Var w);

/// Affine map x w + b with b (O) broadcast over rows.
Var dense(Var x, Var w, Var b);

Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product; either side may be a constant.
Var mul(Var a, Var b);
Var scale(Var a, double factor);

Var tanh(Var a);
Var sigmoid(Var a);
/// |a| with subgradient 0 at 0.
Var abs(Var a);

/// Sum of all elements, as a scalar.
Var sum(Var a);

Var reshape(Var a, Shape shape);

/// Columns [begin, end) of a rank-2 tensor.
Var slice_cols(Var a, std::size_t begin, std::size_t end);

/// Step t of a (B x T x C) sequence, as (B x C).
Var time_step(Var x, std::size_t t);

/// Stacks T tensors of shape (B x C) into (B x T x C).
Var stack_steps(std::span<const Var> steps);

/// (A x B x C) -> (A x C x B).
Var swap_last_axes(Var x);

/// Causal 1-D convolution over time with left zero padding.
/// x: (B x T x Cin), kernel: (W x Cin x Cout), bias: (Cout).
/// y[b, t, o] = bias[o] + sum_{w < W} sum_c x[b, t - w, c] * kernel[w, c, o].
Var causal_conv1d(Var x, Var kernel, Var bias);

/// Non-overlapping window means over time for (B x T x C). Windows are
/// aligned to the last step, so when window does not divide T the oldest
/// T mod window steps are dropped. Output is (B x T / window x C).
Var avg_pool1d(Var x, std::size_t window);

/// Inverted dropout. With training == false (or rate == 0) returns x.
Var dropout(Var x, double rate, Rng& rng, bool training);

/// y[r, :] = x[r, :] - x[pairs[r], :], or 0 where pairs[r] < 0. x is rank 2.
Var pair_diff(Var x, std::vector<std::ptrdiff_t> pairs);

/// Weighted negative annualized Sharpe ratio of the columns of captured
/// (T x C): sum_c w_c * (-sqrt(252) * mean_c / sqrt(var_c + eps)), with var
/// the population variance.
Var sharpe_loss(Var captured, std::vector<double> weights, double variance_epsilon = 1e-12);

struct LstmWeights {
  Var input;      // (I x 4H), gate blocks ordered input, forget, output, candidate
  Var recurrent;  // (H x 4H)
  Var bias;       // (4H)
};

/// One LSTM step; returns (h_t, c_t).
std::pair<Var, Var> lstm_step(Var u, Var h_prev, Var c_prev, const LstmWeights& weights);

}  // namespace stmom::ad
