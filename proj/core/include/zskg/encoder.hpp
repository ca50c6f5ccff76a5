#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "zskg/autodiff.hpp"
#include "zskg/checkpoint.hpp"
#include "zskg/dataset.hpp"
#include "zskg/kge.hpp"
#include "zskg/metrics.hpp"
#include "zskg/rng.hpp"

namespace zskg::enc {

/// ω: neighbor encoder f₁ (W1, b1) and entity encoder f₂ (W2, b2). One f₂ is
/// shared by head and tail.
struct FeatureEncoderParams {
  ad::Parameter w1;  // d×2d
  ad::Parameter b1;  // 1×d
  ad::Parameter w2;  // d×d
  ad::Parameter b2;  // 1×d

  /// Uniform ±1/√fan_in initialization.
  static FeatureEncoderParams init(std::size_t dim, Rng& rng);
  static FeatureEncoderParams zeros(std::size_t dim);

  std::size_t dim() const { return w2.value().rows(); }
  std::vector<ad::Parameter*> parameters() { return {&w1, &b1, &w2, &b2}; }

  /// Checkpoint with tensors W1, b1, W2, b2.
  Checkpoint to_checkpoint() const;
  static FeatureEncoderParams from_checkpoint(const Checkpoint& ckpt);
};

/// Encodes entity pairs into fact embeddings
///   x(e1, e2) = u_e1 ⊕ u_ep ⊕ u_e2,
///   u_e  = tanh(mean_{(r,e')∈N(e)} [W1 (v_r ⊕ v_e')] + b1),
///   u_ep = tanh((W2 v_e1 + b2) ⊕ (W2 v_e2 + b2)).
/// The KG tables are frozen, so the mean of (v_r ⊕ v_e') over each
/// neighborhood is computed once; the mean commutes with the affine map.
class FeatureEncoder {
 public:
  FeatureEncoder() = default;
  FeatureEncoder(const kge::EmbeddingView& tables, const data::NeighborIndex& index);

  std::size_t dim() const { return entity_table_.cols(); }
  std::size_t fact_dim() const { return 4 * dim(); }
  std::size_t entity_count() const { return entity_table_.rows(); }

  /// B×d rows u_e.
  ad::Var encode_neighbors(std::span<const data::EntityId> entities,
                           const FeatureEncoderParams& params) const;
  /// B×2d rows u_ep.
  ad::Var encode_entity_pairs(std::span<const std::pair<data::EntityId, data::EntityId>> pairs,
                              const FeatureEncoderParams& params) const;
  /// B×4d fact embeddings (d + 2d + d); differentiable with respect to ω.
  ad::Var encode_facts(std::span<const std::pair<data::EntityId, data::EntityId>> pairs,
                       const FeatureEncoderParams& params) const;
  ad::Var encode_triples(std::span<const data::Triple> triples, const FeatureEncoderParams& params) const;

  const Tensor& entity_table() const { return entity_table_; }
  /// |E|×2d; rows of isolated entities are zero.
  const Tensor& neighbor_means() const { return neighbor_mean_; }
  /// Mean of (v_r ⊕ v_e') over the entity's neighbors.
  std::span<const double> neighbor_mean(data::EntityId e) const { return neighbor_mean_.row(e); }
  bool has_neighbors(data::EntityId e) const { return has_neighbors_[e] != 0; }

 private:
  Tensor entity_table_;   // |E|×d
  Tensor neighbor_mean_;  // |E|×2d
  std::vector<char> has_neighbors_;
};

/// Fact embeddings for fixed ω. Per entity it caches u_e and tanh(W2 v_e + b2),
/// so any pair is assembled in O(d).
class FrozenEncoder {
 public:
  FrozenEncoder() = default;
  FrozenEncoder(const FeatureEncoder& encoder, const FeatureEncoderParams& params);

  std::size_t dim() const { return dim_; }
  std::size_t fact_dim() const { return 4 * dim_; }
  std::size_t entity_count() const { return features_.rows(); }

  void fact_into(data::EntityId head, data::EntityId tail, std::span<double> out) const;
  std::vector<double> fact(data::EntityId head, data::EntityId tail) const;
  /// B×4d.
  Tensor facts(std::span<const data::Triple> triples) const;

 private:
  std::size_t dim_ = 0;
  Tensor features_;  // |E|×2d: u_e ⊕ tanh(W2 v_e + b2)
};

/// mean over pairs of max(0, γ − cos(ref, pos_i) + cos(ref, neg_i)).
/// `reference` is 1×D; positives and negatives are B×D. Throws NumericalError
/// on a zero-norm row.
ad::Var margin_rank_loss(const ad::Var& reference, const ad::Var& positives,
                         const ad::Var& negatives, double margin);

struct RelationCenter {
  data::RelationId relation = 0;
  std::vector<double> center;
  std::size_t support = 0;
};

/// Arithmetic mean of the fact embeddings of each relation's triples, in
/// relation-id order. Throws DataError for a listed relation without triples.
std::vector<RelationCenter> relation_centers(std::span<const data::Triple> triples,
                                             std::span<const data::RelationId> relations,
                                             const FrozenEncoder& encoder);

/// Centers of every seen relation over its training triples.
std::vector<RelationCenter> compute_relation_centers(const data::ZeroShotSplit& split,
                                                     const FrozenEncoder& encoder);

nlohmann::json centers_to_json(std::span<const RelationCenter> centers);
std::vector<RelationCenter> centers_from_json(const nlohmann::json& doc);

struct EncoderConfig {
  std::size_t k_ref = 30;
  std::size_t batch_size = 64;
  double margin = 10.0;
  double learning_rate = 5e-4;
  std::size_t steps = 2000;
  std::size_t eval_every = 100;
  std::size_t max_neighbors = 50;
};

struct EncoderLogEntry {
  std::size_t step = 0;
  std::optional<double> loss;  // absent for the step-0 evaluation
  std::optional<double> valid_hits10;
  std::optional<double> valid_mrr;
};

nlohmann::json to_json(const EncoderLogEntry& entry);

struct PretrainResult {
  FeatureEncoderParams params;  // best by validation Hits@10
  std::vector<EncoderLogEntry> log;
  std::size_t best_step = 0;
  std::optional<double> best_valid_hits10;
};

/// Scores every validation query's candidates by cosine to a reference
/// built from the other validation facts of the same relation (a
/// leave-one-out mean). Relations with a single validation triple are
/// skipped. Returns nullopt when no query can be scored.
std::optional<eval::MetricsReport> reference_validation(const data::ZeroShotSplit& split,
                                                        const FrozenEncoder& encoder);

/// Trains ω with Adam on the margin ranking loss. Each step samples a seen
/// relation with at least k_ref + 1 training triples, k_ref references, a
/// positive batch and tail-polluted negatives; the reference embedding is
/// the mean of the reference facts. Every `eval_every` steps (and at step 0)
/// reference_validation is run; the parameters with the best Hits@10 are
/// returned, or the final ones when there is no validation data.
/// Throws DataError when no seen relation has enough triples.
PretrainResult pretrain_encoder(const data::ZeroShotSplit& split, const data::NeighborIndex& index,
                                const kge::EmbeddingView& tables, const EncoderConfig& config,
                                Rng& rng);

}  // namespace zskg::enc
