#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "zskg/autodiff.hpp"
#include "zskg/checkpoint.hpp"
#include "zskg/dataset.hpp"
#include "zskg/rng.hpp"
#include "zskg/tensor.hpp"

namespace zskg::kge {

enum class KgeKind { transe, distmult, complex };

std::string to_string(KgeKind kind);
/// Throws ConfigError for anything but transe | distmult | complex.
KgeKind parse_kind(const std::string& text);

/// Which matrices of a table feed the feature encoder.
enum class TableSource { transe, distmult, complex_real, complex_imag };

std::string to_string(TableSource source);
TableSource parse_source(const std::string& text);
TableSource default_source(KgeKind kind);

/// Entity/relation matrices handed to the feature encoder.
struct EmbeddingView {
  Tensor entities;   // |E|×d
  Tensor relations;  // |R|×d
};

/// Pretrained KG embeddings. Rows are indexed by entity / relation id; rows
/// of relations without training triples are never trained or read. ComplEx
/// keeps its real and imaginary parts in separate matrices.
struct KgEmbeddingTable {
  KgeKind kind = KgeKind::transe;
  Tensor entities;
  Tensor relations;
  Tensor entities_im;   // ComplEx only
  Tensor relations_im;  // ComplEx only

  std::size_t dim() const { return entities.cols(); }
  /// Real part followed by the imaginary part for ComplEx.
  std::vector<double> entity(data::EntityId e) const;
  std::vector<double> relation(data::RelationId r) const;
  /// Throws ConfigError when the source does not match the kind.
  EmbeddingView view(TableSource source) const;

  Checkpoint to_checkpoint() const;
  /// Throws DataError on a missing table or shape mismatch.
  static KgEmbeddingTable from_checkpoint(const Checkpoint& ckpt);
  void save(const std::filesystem::path& path) const;
  static KgEmbeddingTable load(const std::filesystem::path& path);
};

/// TransE: −‖h + r − t‖₂. DistMult: Σ hᵢrᵢtᵢ. ComplEx: Re(Σ hᵢ rᵢ conj(tᵢ)),
/// each argument given as its real part followed by its imaginary part.
/// Throws std::invalid_argument on mismatched lengths (or odd, for ComplEx).
double score_triple(KgeKind kind, std::span<const double> h, std::span<const double> r,
                    std::span<const double> t);

/// Row-wise score_triple over batches (B×d, or B×2d re⊕im for ComplEx),
/// returned as B×1. `eps` is added under the TransE square root so the
/// gradient stays finite at a perfect fit.
ad::Var score_rows(KgeKind kind, const ad::Var& h, const ad::Var& r, const ad::Var& t,
                   double eps = 0.0);

/// The training objective on positive/negative score columns.
ad::Var kge_loss(KgeKind kind, const ad::Var& positive, const ad::Var& negative, double margin);

struct KgeConfig {
  KgeKind kind = KgeKind::distmult;
  std::size_t dim = 100;
  std::size_t steps = 2000;
  std::size_t batch_size = 128;
  double learning_rate = 0.01;
  double margin = 1.0;  // TransE only
};

struct KgeTrainResult {
  KgEmbeddingTable table;
  std::vector<double> losses;  // one per step
};

/// Trains on the background graph with one tail-polluted negative per
/// positive. TransE minimizes max(0, margin − s⁺ + s⁻) and renormalizes
/// entity rows to unit length after every step; DistMult and ComplEx
/// minimize softplus(−s⁺) + softplus(s⁻). Throws NumericalError when a loss
/// becomes non-finite.
KgeTrainResult train_kge(const data::ZeroShotSplit& split, const KgeConfig& config, Rng& rng);

/// Initial tables as train_kge would draw them from `rng`.
KgEmbeddingTable init_kge(const data::ZeroShotSplit& split, KgeKind kind, std::size_t dim, Rng& rng);

}  // namespace zskg::kge
