#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "zskg/dataset.hpp"
#include "zskg/rng.hpp"
#include "zskg/textrep.hpp"

namespace zskg::data {

/// Desk-scale zero-shot dataset recipe.
///
/// Entities belong to latent types. Each relation links one head type to one
/// tail type (distinct type pairs per relation), and its latent cluster
/// vector is the concatenation of the two type vectors. Descriptions mix
/// relation-specific signal words, whose vectors are a fixed random
/// projection of the cluster vector, with Zipf-distributed noise words shared
/// across relations and a few stop-words.
struct SyntheticSpec {
  std::size_t relations = 20;
  std::size_t entities = 500;
  std::size_t triples_per_relation = 40;
  std::size_t vocab = 200;
  double noise_ratio = 0.5;  ///< fraction of retained description words that are noise
  double validation_fraction = 0.1;
  double unseen_fraction = 0.2;
  std::size_t entity_types = 10;
  std::size_t latent_dim = 16;
  std::size_t word_dim = 50;
  std::size_t signal_words = 3;
  std::size_t candidates_per_query = 40;
  double entity_noise = 0.1;
  double word_noise = 0.2;
};

struct SyntheticDataset {
  ZeroShotSplit split;
  text::WordVectorTable word_vectors;
  std::vector<std::string> stopwords;  ///< connector words used in descriptions
  std::vector<std::vector<double>> relation_latent;  ///< cluster vector per relation
  std::vector<std::vector<double>> entity_latent;
  std::vector<std::size_t> entity_type;
  std::vector<std::vector<std::string>> signal_words;      ///< per relation
  std::vector<std::vector<double>> signal_vector_sum;       ///< Σ signal word vectors per relation
  /// Accuracy of classifying every fact by the nearest relation cluster to
  /// the concatenated (head, tail) entity latents.
  double nearest_cluster_accuracy = 0.0;
};

/// Throws DataError for an infeasible spec (too many triples for the
/// available entity pairs, vocabulary too small, empty roles, ...).
SyntheticDataset generate_synthetic(const SyntheticSpec& spec, Rng& rng);

/// Dataset files plus word_vectors.txt, stopwords.txt and latent.json.
void save_synthetic(const SyntheticDataset& dataset, const std::filesystem::path& root);

}  // namespace zskg::data
