#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "zskg/dataset.hpp"
#include "zskg/eval.hpp"
#include "zskg/gan.hpp"
#include "zskg/kge.hpp"
#include "zskg/metrics.hpp"
#include "zskg/rng.hpp"

namespace zskg::kge {

/// Text → relation embedding for the zero-shot KGE baselines: the
/// generator's architecture without a noise input. Outputs d values, or 2d
/// (real then imaginary) for ComplEx.
class TextRelationHead {
 public:
  TextRelationHead() = default;
  TextRelationHead(std::size_t text_dim, std::size_t hidden, std::size_t out_dim, double leaky_slope, Rng& rng);

  ad::Var forward(const ad::Var& text) const;
  std::vector<double> embed(std::span<const double> text) const;
  std::vector<ad::Parameter*> parameters() { return net_.parameters(); }
  const gan::Generator& network() const { return net_; }

 private:
  gan::Generator net_;
};

struct ZsBaselineConfig {
  KgeConfig base;                 // pretraining of the entity tables
  std::size_t steps = 2000;       // fine-tuning steps
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  std::size_t hidden = 0;         // 0: twice the relation-embedding width
  double leaky_slope = 0.2;
  std::size_t eval_every = 100;
};

struct ZsBaselineResult {
  eval::MetricsReport test;
  std::optional<eval::MetricsReport> valid;  // of the selected model
  std::size_t best_step = 0;
  std::vector<double> losses;
  KgEmbeddingTable entities;  // fine-tuned entity tables
  TextRelationHead head;
};

/// Scores every query with the host model's score function, the relation
/// embedding coming from the head.
eval::Evaluation evaluate_zs(std::span<const data::CandidateSet> queries, const KgEmbeddingTable& table,
                             const TextRelationHead& head, const eval::TextTable& texts,
                             std::span<const std::string> names);

/// Fine-tunes the entity tables of `pretrained` and a fresh TextRelationHead
/// with the host model's own objective on the training triples, keeping the
/// state with the best validation MRR (the final state without validation
/// queries), then evaluates on the test queries.
ZsBaselineResult zs_baseline(const data::ZeroShotSplit& split, const eval::TextTable& texts,
                             const KgEmbeddingTable& pretrained, const ZsBaselineConfig& config, Rng& rng);

/// As above, pretraining the tables with train_kge(config.base) first.
ZsBaselineResult zs_baseline(const data::ZeroShotSplit& split, const eval::TextTable& texts,
                             const ZsBaselineConfig& config, Rng& rng);

}  // namespace zskg::kge
