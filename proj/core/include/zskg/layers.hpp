#pragma once

#include <optional>
#include <string>
#include <vector>

#include "zskg/autodiff.hpp"
#include "zskg/rng.hpp"
#include "zskg/tensor.hpp"

namespace zskg {

/// Persistent power-iteration state for estimating a weight's top singular
/// value. u has the weight's row count, v its column count.
class SpectralNorm {
 public:
  SpectralNorm() = default;
  SpectralNorm(std::size_t rows, std::size_t cols, Rng& rng);

  /// v ← Wᵀu/‖Wᵀu‖, u ← Wv/‖Wv‖, `iterations` times. A zero product leaves
  /// the vectors untouched.
  void power_iteration(const Tensor& weight, int iterations = 1);
  /// Replaces v by the top Ritz vector of WᵀW over a `steps`-dimensional
  /// Krylov space started at v, and u by Wv/‖Wv‖. Unlike single power steps
  /// it follows a top singular direction that rotates between updates.
  void lanczos(const Tensor& weight, int steps);
  /// uᵀ W v with the current vectors.
  double sigma(const Tensor& weight) const;
  /// W / σ; a zero σ is treated as 1.
  Tensor normalize(const Tensor& weight) const;
  /// Differentiable W / σ(W) with u, v held constant.
  ad::Var normalize(const ad::Var& weight) const;

  const Tensor& u() const { return u_; }
  const Tensor& v() const { return v_; }
  void set_vectors(Tensor u, Tensor v);

 private:
  Tensor u_;  // 1×rows
  Tensor v_;  // 1×cols
};

/// One power iteration on `state`, then W / σ.
Tensor spectral_normalize(const Tensor& weight, SpectralNorm& state);

inline constexpr int kRefreshLanczosSteps = 24;

/// Fully-connected layer y = x Wᵀ + b with optional spectral normalization.
class Dense {
 public:
  Dense() = default;
  Dense(const std::string& name, std::size_t in, std::size_t out, Rng& rng, bool spectral);

  ad::Var forward(const ad::Var& x) const;
  /// The weight actually applied in forward().
  Tensor effective_weight() const;
  ad::Var effective_weight_var() const;
  /// Short Lanczos run (kRefreshLanczosSteps); call after every update of W.
  void refresh_spectral();
  /// Longer Lanczos run (capped at the input width, where it is exact);
  /// used once after initialization.
  void warm_up_spectral(int steps);

  std::size_t in_features() const { return weight.value().cols(); }
  std::size_t out_features() const { return weight.value().rows(); }
  std::vector<ad::Parameter*> parameters() { return {&weight, &bias}; }

  ad::Parameter weight;  // out×in
  ad::Parameter bias;    // 1×out
  std::optional<SpectralNorm> spectral;
};

/// Uniform in ±1/√fan_in.
Tensor uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng);

}  // namespace zskg
