#include "zskg/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace zskg {

AdamState make_adam_state(const AdamConfig& config, std::span<const Tensor* const> params) {
  AdamState state;
  state.config = config;
  for (const Tensor* p : params) {
    state.first_moment.emplace_back(p->rows(), p->cols());
    state.second_moment.emplace_back(p->rows(), p->cols());
  }
  return state;
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient/state count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(grads[i]) || !params[i]->same_shape(state.first_moment[i]) ||
        !params[i]->same_shape(state.second_moment[i])) {
      throw std::invalid_argument("adam_step: shape mismatch");
    }
  }
  const auto& cfg = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

Adam::Adam(const AdamConfig& config, std::vector<ad::Parameter*> params)
    : params_(std::move(params)) {
  std::vector<const Tensor*> values;
  for (auto* p : params_) values.push_back(&p->value());
  state_ = make_adam_state(config, values);
}

void Adam::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

void Adam::step() {
  std::vector<Tensor*> values;
  std::vector<Tensor> grads;
  values.reserve(params_.size());
  grads.reserve(params_.size());
  for (auto* p : params_) {
    values.push_back(&p->value());
    grads.push_back(p->grad());
  }
  adam_step(values, grads, state_);
}

}  // namespace zskg
