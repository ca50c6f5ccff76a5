#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "zskg/autodiff.hpp"
#include "zskg/tensor.hpp"

namespace zskg {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;
};

/// Zero moments shaped like `params`.
AdamState make_adam_state(const AdamConfig& config, std::span<const Tensor* const> params);

/// One bias-corrected Adam update of every tensor in `params` (in place).
/// Throws std::invalid_argument on any shape mismatch.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state);

/// Adam over autodiff Parameters, consuming their accumulated gradients.
class Adam {
 public:
  Adam() = default;
  Adam(const AdamConfig& config, std::vector<ad::Parameter*> params);

  void zero_grad();
  void step();

  const AdamState& state() const { return state_; }
  AdamState& state() { return state_; }
  const std::vector<ad::Parameter*>& params() const { return params_; }

 private:
  std::vector<ad::Parameter*> params_;
  AdamState state_;
};

}  // namespace zskg
