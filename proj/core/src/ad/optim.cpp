#include "stmom/ad/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace stmom::ad {

Adam::Adam(double learning_rate, double beta1, double beta2, double epsilon)
    : learning_rate_(learning_rate), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("Adam: learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam: betas must lie in [0, 1)");
  }
}

void Adam::step(std::span<Parameter* const> params) {
  if (first_moment_.empty()) {
    for (const Parameter* p : params) {
      first_moment_.emplace_back(p->value.shape());
      second_moment_.emplace_back(p->value.shape());
    }
  }
  if (first_moment_.size() != params.size()) {
    throw std::invalid_argument("Adam: parameter list changed between steps");
  }
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double correction1 = 1.0 - std::pow(beta1_, t);
  const double correction2 = 1.0 - std::pow(beta2_, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    Tensor& m = first_moment_[k];
    Tensor& v = second_moment_[k];
    if (p.grad.size() != p.value.size()) continue;
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p.value[j] -= learning_rate_ * m_hat / (std::sqrt(v_hat) + epsilon_);
    }
  }
}

double gradient_norm(std::span<Parameter* const> params) {
  double ss = 0.0;
  for (const Parameter* p : params) {
    for (double g : p->grad.values()) ss += g * g;
  }
  return std::sqrt(ss);
}

double clip_gradient_norm(std::span<Parameter* const> params, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip_gradient_norm: max_norm must be positive");
  const double norm = gradient_norm(params);
  if (!(norm > max_norm)) return 1.0;
  const double factor = max_norm / norm;
  for (Parameter* p : params) {
    for (double& g : p->grad.values()) g *= factor;
  }
  return factor;
}

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(-limit, limit);
  return t;
}

}  // namespace stmom::ad
