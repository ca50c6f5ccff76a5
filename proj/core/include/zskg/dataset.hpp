#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "zskg/rng.hpp"

namespace zskg::data {

using EntityId = std::size_t;
using RelationId = std::size_t;

enum class RelationRole { seen, validation, unseen };

std::string to_string(RelationRole role);
/// Throws DataError for anything but "seen" | "validation" | "unseen".
RelationRole parse_role(const std::string& text);

struct Relation {
  RelationId id = 0;
  std::string name;
  RelationRole role = RelationRole::seen;
  std::string description;
};

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

/// Query (head, relation) with its ground-truth tail and the entities it is
/// ranked against. The ground truth is always one of the candidates.
struct CandidateSet {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId ground_truth = 0;
  std::vector<EntityId> candidates;
};

struct SplitStats {
  std::size_t entities = 0;
  std::size_t triples = 0;
  std::size_t seen_relations = 0;
  std::size_t validation_relations = 0;
  std::size_t unseen_relations = 0;
};

/// A zero-shot dataset: facts partitioned by relation role. The background
/// graph is the training set (seen relations only).
class ZeroShotSplit {
 public:
  std::vector<std::string> entities;  // id → symbol
  std::vector<Relation> relations;    // id → relation
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;
  std::vector<CandidateSet> valid_candidates;
  std::vector<CandidateSet> test_candidates;

  std::span<const Triple> background_graph() const { return train; }

  /// Rebuilds the symbol lookup tables; call after filling the vectors.
  void reindex();
  /// Throws DataError describing the first violated invariant.
  void validate() const;

  std::size_t entity_count() const { return entities.size(); }
  EntityId entity_id(const std::string& name) const;       // DataError if unknown
  RelationId relation_id(const std::string& name) const;   // DataError if unknown
  bool has_entity(const std::string& name) const { return entity_index_.count(name) != 0; }
  bool has_relation(const std::string& name) const { return relation_index_.count(name) != 0; }

  std::vector<RelationId> relations_with_role(RelationRole role) const;
  /// Training triples of one relation, in file order.
  std::vector<Triple> train_triples_of(RelationId relation) const;
  SplitStats stats() const;

 private:
  std::unordered_map<std::string, EntityId> entity_index_;
  std::unordered_map<std::string, RelationId> relation_index_;
};

struct DatasetConfig {
  /// Candidate files are required for any split that has triples.
  bool require_candidates = true;
};

/// Reads the on-disk layout:
///   entities.txt, relations.json, triples.{train,valid,test}.tsv,
///   candidates.{valid,test}.json
/// Throws DataError on a missing file, unknown symbol (with file and line),
/// malformed line, duplicate triple, role violation or empty triple file.
ZeroShotSplit load_dataset(const std::filesystem::path& root, const DatasetConfig& config = {});

/// Writes the layout read by load_dataset. Output is byte-deterministic.
void save_dataset(const ZeroShotSplit& split, const std::filesystem::path& root);

struct Neighbor {
  RelationId relation = 0;
  EntityId entity = 0;

  friend auto operator<=>(const Neighbor&, const Neighbor&) = default;
};

/// One-hop outgoing neighbors of every entity over the background graph.
class NeighborIndex {
 public:
  NeighborIndex() = default;

  /// Neighbors are sorted; entities with more than `max_neighbors` keep a
  /// uniform sample drawn from a stream keyed by (seed, entity id).
  static NeighborIndex build(const ZeroShotSplit& split, std::size_t max_neighbors,
                             std::uint64_t seed);

  std::span<const Neighbor> neighbors(EntityId entity) const { return lists_.at(entity); }
  std::size_t entity_count() const { return lists_.size(); }
  std::size_t max_neighbors() const { return max_neighbors_; }

 private:
  std::vector<std::vector<Neighbor>> lists_;
  std::size_t max_neighbors_ = 0;
};

struct TaskBatch {
  std::vector<Triple> references;
  std::vector<Triple> positives;
  std::vector<Triple> negatives;  // negatives[i] pollutes positives[i]
};

/// Samples reference/positive/negative triples of seen relations.
class TripleSampler {
 public:
  explicit TripleSampler(const ZeroShotSplit& split);

  /// k_ref distinct references, `batch` positives from the remaining triples
  /// (without replacement while enough remain) and one tail-polluted
  /// negative per positive. Throws DataError if the relation has fewer than
  /// k_ref + 1 training triples.
  TaskBatch sample_task_batch(RelationId relation, std::size_t k_ref, std::size_t batch,
                              Rng& rng) const;

  /// (head, relation, e) with e drawn uniformly from all entities such that
  /// the triple is not a training fact.
  Triple pollute_tail(const Triple& positive, Rng& rng) const;

  const std::vector<Triple>& triples_of(RelationId relation) const { return by_relation_.at(relation); }
  bool is_train_fact(const Triple& t) const { return known_.count(t) != 0; }

 private:
  std::size_t entity_count_ = 0;
  std::vector<std::vector<Triple>> by_relation_;
  std::set<Triple> known_;
  std::vector<std::string> relation_names_;
};

}  // namespace zskg::data
