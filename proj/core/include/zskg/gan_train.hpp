#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "zskg/checkpoint.hpp"
#include "zskg/dataset.hpp"
#include "zskg/encoder.hpp"
#include "zskg/eval.hpp"
#include "zskg/gan.hpp"
#include "zskg/optim.hpp"

namespace zskg::gan {

struct GanLogEntry {
  std::size_t step = 0;
  double d_loss = 0.0;  // mean over the step's discriminator updates
  double g_loss = 0.0;
  double gp = 0.0;      // mean over the step's discriminator updates
  double l_cls = 0.0;   // generator-side classification loss
  double l_p = 0.0;
  std::optional<double> valid_mrr;
};

nlohmann::json to_json(const GanLogEntry& entry);

enum class UpdateKind { discriminator, generator };

/// Adversarial training of G and D on frozen fact embeddings. Each step runs
/// `critic_iters` discriminator updates and one generator update; every
/// update refreshes the spectral estimates of the network it changes. Model
/// selection keeps the generator with the best validation MRR (ties keep the
/// earlier one); without validation queries the latest generator is kept.
///
/// The trainer keeps references to the split and encoder.
class GanTrainer {
 public:
  using Observer = std::function<void(UpdateKind, const GanTrainer&)>;

  /// Draws the initial networks from `rng`, then seeds its own training
  /// stream and validation seed from it.
  GanTrainer(const data::ZeroShotSplit& split, const enc::FrozenEncoder& encoder, eval::TextTable texts,
             CenterTable centers, const GanConfig& config, Rng& rng);
  GanTrainer(const GanTrainer&) = delete;
  GanTrainer& operator=(const GanTrainer&) = delete;

  /// Runs until `config().steps` generator steps are done or `max_steps`
  /// more have run. Throws NumericalError on a non-finite loss.
  void train(std::size_t max_steps = SIZE_MAX, const Observer& observer = {});

  const GanConfig& config() const { return config_; }
  std::size_t step() const { return step_; }
  std::size_t discriminator_updates() const { return d_updates_; }
  std::size_t generator_updates() const { return g_updates_; }
  const Generator& generator() const { return generator_; }
  const Discriminator& discriminator() const { return discriminator_; }
  const Generator& best_generator() const { return best_generator_; }
  std::size_t best_step() const { return best_step_; }
  std::optional<double> best_valid_mrr() const { return best_valid_mrr_; }
  const std::vector<GanLogEntry>& log() const { return log_; }
  std::uint64_t validation_seed() const { return valid_seed_; }

  /// Full training state: networks, best generator, both optimizers, the
  /// training stream and counters. Resuming from it continues bit-exactly.
  Checkpoint save_state() const;
  void load_state(const Checkpoint& ckpt);

 private:
  struct Batch {
    std::vector<data::RelationId> labels;
    Tensor real;
    Tensor negatives;
    Tensor text;
    Tensor noise;
  };

  Batch sample_batch();
  double discriminator_update(double& gp_out);
  double generator_update(double& l_cls_out, double& l_p_out);
  std::optional<double> validate();

  const data::ZeroShotSplit& split_;
  const enc::FrozenEncoder& encoder_;
  eval::TextTable texts_;
  CenterTable centers_;
  GanConfig config_;
  data::TripleSampler sampler_;
  std::vector<data::RelationId> relations_;  // seen relations with triples and centers
  std::vector<std::string> names_;

  Generator generator_;
  Discriminator discriminator_;
  Generator best_generator_;
  Adam adam_g_;
  Adam adam_d_;
  Rng rng_;
  std::uint64_t valid_seed_ = 0;
  std::size_t step_ = 0;
  std::size_t d_updates_ = 0;
  std::size_t g_updates_ = 0;
  std::size_t best_step_ = 0;
  std::optional<double> best_valid_mrr_;
  bool initial_validation_done_ = false;
  std::vector<GanLogEntry> log_;
};

}  // namespace zskg::gan
