#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "zskg/autodiff.hpp"
#include "zskg/checkpoint.hpp"
#include "zskg/dataset.hpp"
#include "zskg/kv.hpp"
#include "zskg/layers.hpp"
#include "zskg/rng.hpp"

namespace zskg::gan {

struct GanConfig {
  std::size_t noise_dim = 15;
  std::size_t critic_iters = 5;  // discriminator updates per generator update
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double margin = 10.0;
  double gp_weight = 10.0;
  double pivot_weight = 1.0;
  double leaky_slope = 0.2;
  std::size_t steps = 1000;  // generator updates
  std::size_t batch_size = 64;
  std::size_t relations_per_batch = 8;
  std::size_t generator_hidden = 0;      // 0: twice the fact width
  std::size_t discriminator_hidden = 0;  // 0: the fact width
  std::size_t eval_every = 100;
  std::size_t n_test = 20;
  bool spectral_norm = true;

  /// Throws ConfigError on an unknown key or a bad value.
  void apply(const KeyValues& values);
  KeyValues to_key_values() const;
  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

/// x̃ = FC2(LayerNorm(LeakyReLU(FC1(T ⊕ z)))). With noise_dim = 0 the input
/// is the text embedding alone.
class Generator {
 public:
  Generator() = default;
  Generator(std::size_t text_dim, std::size_t noise_dim, std::size_t hidden, std::size_t out_dim,
            double leaky_slope, bool spectral, Rng& rng);

  /// text: B×text_dim, noise: B×noise_dim (ignored when noise_dim = 0).
  ad::Var forward(const ad::Var& text, const ad::Var& noise) const;
  /// Single no-grad forward pass.
  std::vector<double> generate(std::span<const double> text, std::span<const double> z) const;

  std::size_t text_dim() const { return text_dim_; }
  std::size_t noise_dim() const { return noise_dim_; }
  std::size_t out_dim() const { return fc2.out_features(); }

  std::vector<ad::Parameter*> parameters();
  std::vector<Dense*> layers() { return {&fc1, &fc2}; }
  std::vector<const Dense*> layers() const { return {&fc1, &fc2}; }
  void refresh_spectral();

  void store(Checkpoint& ckpt, const std::string& prefix) const;
  /// Restores a generator with the recorded shapes.
  static Generator restore(const Checkpoint& ckpt, const std::string& prefix);

  Dense fc1;
  Dense fc2;
  ad::Parameter ln_gain;
  ad::Parameter ln_bias;

 private:
  std::size_t text_dim_ = 0;
  std::size_t noise_dim_ = 0;
  double slope_ = 0.2;
};

struct DiscriminatorOutput {
  ad::Var score;       // B×1 Wasserstein critic score
  ad::Var projection;  // B×fact width classification projection
};

/// Shared FC + LeakyReLU feeding a scalar critic branch and a projection
/// branch back to the fact-embedding space.
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(std::size_t in_dim, std::size_t hidden, double leaky_slope, bool spectral, Rng& rng);

  DiscriminatorOutput forward(const ad::Var& x) const;
  ad::Var score(const ad::Var& x) const;

  std::size_t in_dim() const { return shared.in_features(); }

  std::vector<ad::Parameter*> parameters();
  std::vector<Dense*> layers() { return {&shared, &critic, &classifier}; }
  std::vector<const Dense*> layers() const { return {&shared, &critic, &classifier}; }
  void refresh_spectral();

  void store(Checkpoint& ckpt, const std::string& prefix) const;
  static Discriminator restore(const Checkpoint& ckpt, const std::string& prefix);

  Dense shared;
  Dense critic;
  Dense classifier;

 private:
  double slope_ = 0.2;
};

using CenterTable = std::map<data::RelationId, std::vector<double>>;

/// One center row per label. Throws DataError on a relation without a center.
Tensor center_rows(std::span<const data::RelationId> labels, const CenterTable& centers);

/// mean_i max(0, γ − cos(c_i, candidate_i) + cos(c_i, negative_i)) with c_i
/// the center of row i's relation. All inputs are B×D.
ad::Var classification_loss(const ad::Var& candidates, const Tensor& centers, const ad::Var& negatives,
                            double margin);

/// λ · mean_i (‖∇ D(x̂_i)‖₂ − 1)² with x̂_i = ε_i real_i + (1 − ε_i) fake_i,
/// ε_i ~ U(0, 1). The result is differentiable with respect to the critic's
/// parameters (second-order path).
ad::Var gradient_penalty(const Tensor& real, const Tensor& fake,
                         const std::function<ad::Var(const ad::Var&)>& critic, Rng& rng, double weight);

/// Mean over the distinct labels of ‖mean of that relation's rows − center‖².
/// Throws DataError on a missing center.
ad::Var pivot_regularizer(const ad::Var& generated, std::span<const data::RelationId> labels,
                          const CenterTable& centers);

/// Standard-normal B×Z matrix.
Tensor sample_noise(std::size_t rows, std::size_t noise_dim, Rng& rng);

}  // namespace zskg::gan
