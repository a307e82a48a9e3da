#include "stmom/ad/ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace stmom::ad {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                      shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

// out[b, o] (+)= sum_i x[b, i] w[i, o]
void matmul_forward(const Tensor& x, const Tensor& w, Tensor& out) {
  const std::size_t B = x.dim(0), I = x.dim(1), O = w.dim(1);
  for (std::size_t b = 0; b < B; ++b) {
    double* orow = out.data() + b * O;
    const double* xrow = x.data() + b * I;
    for (std::size_t i = 0; i < I; ++i) {
      const double xv = xrow[i];
      if (xv == 0.0) continue;
      const double* wrow = w.data() + i * O;
      for (std::size_t o = 0; o < O; ++o) orow[o] += xv * wrow[o];
    }
  }
}

void matmul_backward(Tape& tape, std::size_t self, std::size_t xid, std::size_t wid) {
  const Tensor& gy = tape.grad(self);
  const Tensor& x = tape.value(xid);
  const Tensor& w = tape.value(wid);
  const std::size_t B = x.dim(0), I = x.dim(1), O = w.dim(1);
  if (tape.requires_grad(xid)) {
    Tensor& gx = tape.grad(xid);
    for (std::size_t b = 0; b < B; ++b) {
      const double* grow = gy.data() + b * O;
      for (std::size_t i = 0; i < I; ++i) {
        const double* wrow = w.data() + i * O;
        double acc = 0.0;
        for (std::size_t o = 0; o < O; ++o) acc += grow[o] * wrow[o];
        gx[b * I + i] += acc;
      }
    }
  }
  if (tape.requires_grad(wid)) {
    Tensor& gw = tape.grad(wid);
    for (std::size_t b = 0; b < B; ++b) {
      const double* grow = gy.data() + b * O;
      const double* xrow = x.data() + b * I;
      for (std::size_t i = 0; i < I; ++i) {
        const double xv = xrow[i];
        if (xv == 0.0) continue;
        double* gwrow = gw.data() + i * O;
        for (std::size_t o = 0; o < O; ++o) gwrow[o] += xv * grow[o];
      }
    }
  }
}

void check_matmul_shapes(const Var& x, const Var& w, const char* op) {
  require(x.value().rank() == 2 && w.value().rank() == 2,
          std::string(op) + ": expected rank-2 input and weights");
  require(x.shape()[1] == w.shape()[0], std::string(op) + ": inner dimension mismatch " +
                                            shape_string(x.shape()) + " x " +
                                            shape_string(w.shape()));
}

template <class Fwd, class Deriv>
Var unary(const char* op, Var a, Fwd fwd, Deriv deriv_from_output) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t k = 0; k < av.size(); ++k) out[k] = fwd(av[k]);
  const std::size_t aid = a.id();
  return a.tape().record(op, std::move(out), {a},
                         [aid, deriv_from_output](Tape& tape, std::size_t self) {
                           const Tensor& gy = tape.grad(self);
                           const Tensor& y = tape.value(self);
                           const Tensor& x = tape.value(aid);
                           Tensor& gx = tape.grad(aid);
                           for (std::size_t k = 0; k < gy.size(); ++k) {
                             gx[k] += gy[k] * deriv_from_output(x[k], y[k]);
                           }
                         });
}

}  // namespace

Var matmul(Var x, Var w) {
  check_matmul_shapes(x, w, "matmul");
  Tensor out(Shape{x.shape()[0], w.shape()[1]});
  matmul_forward(x.value(), w.value(), out);
  const std::size_t xid = x.id(), wid = w.id();
  return x.tape().record("matmul", std::move(out), {x, w},
                         [xid, wid](Tape& tape, std::size_t self) {
                           matmul_backward(tape, self, xid, wid);
                         });
}

Var dense(Var x, Var w, Var b) {
  check_matmul_shapes(x, w, "dense");
  require(b.value().rank() == 1 && b.shape()[0] == w.shape()[1],
          "dense: bias shape " + shape_string(b.shape()) + " does not match weights " +
              shape_string(w.shape()));
  const std::size_t B = x.shape()[0], O = w.shape()[1];
  Tensor out(Shape{B, O});
  for (std::size_t r = 0; r < B; ++r) {
    for (std::size_t o = 0; o < O; ++o) out[r * O + o] = b.value()[o];
  }
  matmul_forward(x.value(), w.value(), out);
  const std::size_t xid = x.id(), wid = w.id(), bid = b.id();
  return x.tape().record("dense", std::move(out), {x, w, b},
                         [xid, wid, bid, B, O](Tape& tape, std::size_t self) {
                           matmul_backward(tape, self, xid, wid);
                           if (tape.requires_grad(bid)) {
                             const Tensor& gy = tape.grad(self);
                             Tensor& gb = tape.grad(bid);
                             for (std::size_t r = 0; r < B; ++r) {
                               for (std::size_t o = 0; o < O; ++o) gb[o] += gy[r * O + o];
                             }
                           }
                         });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += bv[k];
  const std::size_t aid = a.id(), bid = b.id();
  return a.tape().record("add", std::move(out), {a, b}, [aid, bid](Tape& tape, std::size_t self) {
    const Tensor& gy = tape.grad(self);
    for (std::size_t id : {aid, bid}) {
      if (!tape.requires_grad(id)) continue;
      Tensor& g = tape.grad(id);
      for (std::size_t k = 0; k < gy.size(); ++k) g[k] += gy[k];
    }
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] -= bv[k];
  const std::size_t aid = a.id(), bid = b.id();
  return a.tape().record("sub", std::move(out), {a, b}, [aid, bid](Tape& tape, std::size_t self) {
    const Tensor& gy = tape.grad(self);
    if (tape.requires_grad(aid)) {
      Tensor& g = tape.grad(aid);
      for (std::size_t k = 0; k < gy.size(); ++k) g[k] += gy[k];
    }
    if (tape.requires_grad(bid)) {
      Tensor& g = tape.grad(bid);
      for (std::size_t k = 0; k < gy.size(); ++k) g[k] -= gy[k];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= bv[k];
  const std::size_t aid = a.id(), bid = b.id();
  return a.tape().record("mul", std::move(out), {a, b}, [aid, bid](Tape& tape, std::size_t self) {
    const Tensor& gy = tape.grad(self);
    if (tape.requires_grad(aid)) {
      const Tensor& bv = tape.value(bid);
      Tensor& g = tape.grad(aid);
      for (std::size_t k = 0; k < gy.size(); ++k) g[k] += gy[k] * bv[k];
    }
    if (tape.requires_grad(bid)) {
      const Tensor& av = tape.value(aid);
      Tensor& g = tape.grad(bid);
      for (std::size_t k = 0; k < gy.size(); ++k) g[k] += gy[k] * av[k];
    }
  });
}

Var scale(Var a, double factor) {
  return unary(
      "scale", a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Var tanh(Var a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      "sigmoid", a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var abs(Var a) {
  return unary(
      "abs", a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const std::size_t aid = a.id();
  return a.tape().record("sum", Tensor::scalar(s), {a}, [aid](Tape& tape, std::size_t self) {
    const double g = tape.grad(self)[0];
    Tensor& ga = tape.grad(aid);
    for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g;
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  const std::size_t aid = a.id();
  return a.tape().record("reshape", std::move(out), {a}, [aid](Tape& tape, std::size_t self) {
    const Tensor& gy = tape.grad(self);
    Tensor& ga = tape.grad(aid);
    for (std::size_t k = 0; k < gy.size(); ++k) ga[k] += gy[k];
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  require(a.value().rank() == 2, "slice_cols: expected rank-2 input");
  const std::size_t R = a.shape()[0], C = a.shape()[1];
  require(begin < end && end <= C, "slice_cols: column range out of bounds");
  const std::size_t W = end - begin;
  Tensor out(Shape{R, W});
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < W; ++c) out[r * W + c] = a.value()[r * C + begin + c];
  }
  const std::size_t aid = a.id();
  return a.tape().record("slice_cols", std::move(out), {a},
                         [aid, R, C, W, begin](Tape& tape, std::size_t self) {
                           const Tensor& gy = tape.grad(self);
                           Tensor& ga = tape.grad(aid);
                           for (std::size_t r = 0; r < R; ++r) {
                             for (std::size_t c = 0; c < W; ++c) {
                               ga[r * C + begin + c] += gy[r * W + c];
                             }
                           }
                         });
}

Var time_step(Var x, std::size_t t) {
  require(x.value().rank() == 3, "time_step: expected (B x T x C)");
  const std::size_t B = x.shape()[0], T = x.shape()[1], C = x.shape()[2];
  require(t < T, "time_step: step out of range");
  Tensor out(Shape{B, C});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) out[b * C + c] = x.value()[(b * T + t) * C + c];
  }
  const std::size_t xid = x.id();
  return x.tape().record("time_step", std::move(out), {x},
                         [xid, B, T, C, t](Tape& tape, std::size_t self) {
                           const Tensor& gy = tape.grad(self);
                           Tensor& gx = tape.grad(xid);
                           for (std::size_t b = 0; b < B; ++b) {
                             for (std::size_t c = 0; c < C; ++c) {
                               gx[(b * T + t) * C + c] += gy[b * C + c];
                             }
                           }
                         });
}

Var stack_steps(std::span<const Var> steps) {
  require(!steps.empty(), "stack_steps: no steps");
  const Shape& s0 = steps[0].shape();
  require(s0.size() == 2, "stack_steps: steps must be (B x C)");
  const std::size_t B = s0[0], C = s0[1], T = steps.size();
  Tensor out(Shape{B, T, C});
  std::vector<std::size_t> ids;
  for (std::size_t t = 0; t < T; ++t) {
    require(steps[t].shape() == s0, "stack_steps: step shapes differ");
    const Tensor& v = steps[t].value();
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t c = 0; c < C; ++c) out[(b * T + t) * C + c] = v[b * C + c];
    }
    ids.push_back(steps[t].id());
  }
  return steps[0].tape().record("stack_steps", std::move(out), steps,
                     [ids, B, T, C](Tape& tp, std::size_t self) {
                       const Tensor& gy = tp.grad(self);
                       for (std::size_t t = 0; t < T; ++t) {
                         if (!tp.requires_grad(ids[t])) continue;
                         Tensor& g = tp.grad(ids[t]);
                         for (std::size_t b = 0; b < B; ++b) {
                           for (std::size_t c = 0; c < C; ++c) {
                             g[b * C + c] += gy[(b * T + t) * C + c];
                           }
                         }
                       }
                     });
}

Var swap_last_axes(Var x) {
  require(x.value().rank() == 3, "swap_last_axes: expected rank-3 input");
  const std::size_t A = x.shape()[0], B = x.shape()[1], C = x.shape()[2];
  Tensor out(Shape{A, C, B});
  for (std::size_t a = 0; a < A; ++a) {
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t c = 0; c < C; ++c) out[(a * C + c) * B + b] = x.value()[(a * B + b) * C + c];
    }
  }
  const std::size_t xid = x.id();
  return x.tape().record("swap_last_axes", std::move(out), {x},
                         [xid, A, B, C](Tape& tape, std::size_t self) {
                           const Tensor& gy = tape.grad(self);
                           Tensor& gx = tape.grad(xid);
                           for (std::size_t a = 0; a < A; ++a) {
                             for (std::size_t b = 0; b < B; ++b) {
                               for (std::size_t c = 0; c < C; ++c) {
                                 gx[(a * B + b) * C + c] += gy[(a * C + c) * B + b];
                               }
                             }
                           }
                         });
}

Var causal_conv1d(Var x, Var kernel, Var bias) {
  require(x.value().rank() == 3, "causal_conv1d: input must be (B x T x Cin)");
  require(kernel.value().rank() == 3, "causal_conv1d: kernel must be (W x Cin x Cout)");
  const std::size_t B = x.shape()[0], T = x.shape()[1], Ci = x.shape()[2];
  const std::size_t W = kernel.shape()[0], Co = kernel.shape()[2];
  require(W >= 1, "causal_conv1d: kernel width must be >= 1");
  require(kernel.shape()[1] == Ci, "causal_conv1d: kernel input channels " +
                                       std::to_string(kernel.shape()[1]) + " != " +
                                       std::to_string(Ci));
  require(bias.value().rank() == 1 && bias.shape()[0] == Co, "causal_conv1d: bias shape mismatch");
  const Tensor& xv = x.value();
  const Tensor& kv = kernel.value();
  Tensor out(Shape{B, T, Co});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T; ++t) {
      double* orow = out.data() + (b * T + t) * Co;
      for (std::size_t o = 0; o < Co; ++o) orow[o] = bias.value()[o];
      for (std::size_t w = 0; w < W && w <= t; ++w) {
        const double* xrow = xv.data() + (b * T + (t - w)) * Ci;
        for (std::size_t c = 0; c < Ci; ++c) {
          const double xval = xrow[c];
          if (xval == 0.0) continue;
          const double* krow = kv.data() + (w * Ci + c) * Co;
          for (std::size_t o = 0; o < Co; ++o) orow[o] += xval * krow[o];
        }
      }
    }
  }
  const std::size_t xid = x.id(), kid = kernel.id(), bid = bias.id();
  return x.tape().record(
      "causal_conv1d", std::move(out), {x, kernel, bias},
      [xid, kid, bid, B, T, Ci, W, Co](Tape& tape, std::size_t self) {
        const Tensor& gy = tape.grad(self);
        const Tensor& xv = tape.value(xid);
        const Tensor& kv = tape.value(kid);
        const bool gx_on = tape.requires_grad(xid);
        const bool gk_on = tape.requires_grad(kid);
        Tensor* gx = gx_on ? &tape.grad(xid) : nullptr;
        Tensor* gk = gk_on ? &tape.grad(kid) : nullptr;
        for (std::size_t b = 0; b < B; ++b) {
          for (std::size_t t = 0; t < T; ++t) {
            const double* grow = gy.data() + (b * T + t) * Co;
            for (std::size_t w = 0; w < W && w <= t; ++w) {
              const std::size_t src = (b * T + (t - w)) * Ci;
              for (std::size_t c = 0; c < Ci; ++c) {
                const double* krow = kv.data() + (w * Ci + c) * Co;
                if (gx_on) {
                  double acc = 0.0;
                  for (std::size_t o = 0; o < Co; ++o) acc += grow[o] * krow[o];
                  (*gx)[src + c] += acc;
                }
                if (gk_on) {
                  const double xval = xv[src + c];
                  double* gkrow = gk->data() + (w * Ci + c) * Co;
                  for (std::size_t o = 0; o < Co; ++o) gkrow[o] += xval * grow[o];
                }
              }
            }
          }
        }
        if (tape.requires_grad(bid)) {
          Tensor& gb = tape.grad(bid);
          for (std::size_t r = 0; r < B * T; ++r) {
            for (std::size_t o = 0; o < Co; ++o) gb[o] += gy[r * Co + o];
          }
        }
      });
}

Var avg_pool1d(Var x, std::size_t window) {
  require(window >= 1, "avg_pool1d: window must be >= 1");
  require(x.value().rank() == 3, "avg_pool1d: input must be (B x T x C)");
  const std::size_t B = x.shape()[0], T = x.shape()[1], C = x.shape()[2];
  require(window <= T, "avg_pool1d: window longer than the sequence");
  const std::size_t P = T / window;
  const std::size_t offset = T - P * window;
  const double inv = 1.0 / static_cast<double>(window);
  Tensor out(Shape{B, P, C});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t p = 0; p < P; ++p) {
      for (std::size_t u = 0; u < window; ++u) {
        const std::size_t t = offset + p * window + u;
        for (std::size_t c = 0; c < C; ++c) out[(b * P + p) * C + c] += x.value()[(b * T + t) * C + c];
      }
      for (std::size_t c = 0; c < C; ++c) out[(b * P + p) * C + c] *= inv;
    }
  }
  const std::size_t xid = x.id();
  return x.tape().record("avg_pool1d", std::move(out), {x},
                         [xid, B, T, C, P, offset, window, inv](Tape& tape, std::size_t self) {
                           const Tensor& gy = tape.grad(self);
                           Tensor& gx = tape.grad(xid);
                           for (std::size_t b = 0; b < B; ++b) {
                             for (std::size_t p = 0; p < P; ++p) {
                               for (std::size_t u = 0; u < window; ++u) {
                                 const std::size_t t = offset + p * window + u;
                                 for (std::size_t c = 0; c < C; ++c) {
                                   gx[(b * T + t) * C + c] += inv * gy[(b * P + p) * C + c];
                                 }
                               }
                             }
                           }
                         });
}

Var dropout(Var x, double rate, Rng& rng, bool training) {
  require(rate >= 0.0 && rate < 1.0, "dropout: rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor mask(x.shape());
  for (std::size_t k = 0; k < mask.size(); ++k) mask[k] = rng.bernoulli(rate) ? 0.0 : keep_scale;
  Var m = x.tape().constant(std::move(mask));
  return mul(x, m);
}

Var pair_diff(Var x, std::vector<std::ptrdiff_t> pairs) {
  require(x.value().rank() == 2, "pair_diff: expected rank-2 input");
  const std::size_t R = x.shape()[0], C = x.shape()[1];
  require(pairs.size() == R, "pair_diff: one pairing entry per row required");
  Tensor out(Shape{R, C});
  for (std::size_t r = 0; r < R; ++r) {
    if (pairs[r] < 0) continue;
    const auto p = static_cast<std::size_t>(pairs[r]);
    require(p < R, "pair_diff: pairing index out of range");
    for (std::size_t c = 0; c < C; ++c) out[r * C + c] = x.value()[r * C + c] - x.value()[p * C + c];
  }
  const std::size_t xid = x.id();
  return x.tape().record("pair_diff", std::move(out), {x},
                         [xid, R, C, pairs = std::move(pairs)](Tape& tape, std::size_t self) {
                           const Tensor& gy = tape.grad(self);
                           Tensor& gx = tape.grad(xid);
                           for (std::size_t r = 0; r < R; ++r) {
                             if (pairs[r] < 0) continue;
                             const auto p = static_cast<std::size_t>(pairs[r]);
                             for (std::size_t c = 0; c < C; ++c) {
                               gx[r * C + c] += gy[r * C + c];
                               gx[p * C + c] -= gy[r * C + c];
                             }
                           }
                         });
}

Var sharpe_loss(Var captured, std::vector<double> weights, double variance_epsilon) {
  require(captured.value().rank() == 2, "sharpe_loss: captured returns must be (T x C)");
  const std::size_t T = captured.shape()[0], C = captured.shape()[1];
  require(T >= 2, "sharpe_loss: needs at least two time steps");
  require(weights.size() == C, "sharpe_loss: one weight per column required");
  const Tensor& R = captured.value();
  const double annualize = std::sqrt(252.0);
  const double n = static_cast<double>(T);
  std::vector<double> means(C, 0.0), sds(C, 0.0);
  double loss = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    double s = 0.0;
    for (std::size_t t = 0; t < T; ++t) s += R[t * C + c];
    const double m = s / n;
    double ss = 0.0;
    for (std::size_t t = 0; t < T; ++t) ss += (R[t * C + c] - m) * (R[t * C + c] - m);
    const double sd = std::sqrt(ss / n + variance_epsilon);
    means[c] = m;
    sds[c] = sd;
    loss += weights[c] * (-annualize * m / sd);
  }
  const std::size_t rid = captured.id();
  return captured.tape().record(
      "sharpe_loss", Tensor::scalar(loss), {captured},
      [rid, T, C, n, annualize, weights = std::move(weights), means = std::move(means),
       sds = std::move(sds)](Tape& tape, std::size_t self) {
        const double g = tape.grad(self)[0];
        const Tensor& R = tape.value(rid);
        Tensor& gR = tape.grad(rid);
        for (std::size_t c = 0; c < C; ++c) {
          const double m = means[c], sd = sds[c];
          const double lead = -g * weights[c] * annualize / (n * sd);
          for (std::size_t t = 0; t < T; ++t) {
            gR[t * C + c] += lead * (1.0 - m * (R[t * C + c] - m) / (sd * sd));
          }
        }
      });
}

std::pair<Var, Var> lstm_step(Var u, Var h_prev, Var c_prev, const LstmWeights& weights) {
  require(h_prev.value().rank() == 2 && c_prev.shape() == h_prev.shape(),
          "lstm_step: state shapes must match (B x H)");
  const std::size_t H = h_prev.shape()[1];
  require(weights.recurrent.value().rank() == 2 && weights.recurrent.shape()[0] == H &&
              weights.recurrent.shape()[1] == 4 * H,
          "lstm_step: recurrent weights must be (H x 4H)");
  require(weights.input.value().rank() == 2 && weights.input.shape()[1] == 4 * H,
          "lstm_step: input weights must be (I x 4H)");
  Var z = add(dense(u, weights.input, weights.bias), matmul(h_prev, weights.recurrent));
  Var gate_in = sigmoid(slice_cols(z, 0, H));
  Var gate_forget = sigmoid(slice_cols(z, H, 2 * H));
  Var gate_out = sigmoid(slice_cols(z, 2 * H, 3 * H));
  Var candidate = tanh(slice_cols(z, 3 * H, 4 * H));
  Var c = add(mul(gate_in, candidate), mul(gate_forget, c_prev));
  Var h = mul(gate_out, tanh(c));
  return {h, c};
}

}  // namespace stmom::ad
