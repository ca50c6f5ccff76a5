#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zskg/dataset.hpp"

namespace zskg::eval {

/// Rank of scores[truth] among all scores: 1 + #strictly greater + #ties
/// (the ground truth is placed after every candidate it ties with).
/// Throws std::invalid_argument if `truth` is out of range.
std::size_t rank_candidates(std::span<const double> scores, std::size_t truth);

/// Overload locating the ground truth inside a candidate list. Throws
/// DataError when it is missing.
std::size_t rank_candidates(std::span<const data::EntityId> candidates,
                            std::span<const double> scores, data::EntityId ground_truth);

struct RankingResult {
  data::CandidateSet query;
  std::size_t rank = 0;
  std::vector<double> scores;
};

struct RelationMetrics {
  std::string relation;
  data::RelationId relation_id = 0;
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits5 = 0.0;
  double hits10 = 0.0;
  std::size_t query_count = 0;
  double candidate_count_mean = 0.0;
};

struct MetricsReport {
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits5 = 0.0;
  double hits10 = 0.0;
  std::size_t query_count = 0;
  std::vector<RelationMetrics> per_relation;  // ordered by relation id
};

/// MRR and Hits@{1,5,10}, overall and per relation. Relation names are
/// filled from `relation_names` when it covers the ids, else left as ids.
/// Throws std::invalid_argument on empty input or a zero rank.
MetricsReport compute_metrics(std::span<const RankingResult> results,
                              std::span<const std::string> relation_names = {});

nlohmann::json to_json(const MetricsReport& report);
/// Throws DataError when a required field is missing or mistyped.
MetricsReport metrics_from_json(const nlohmann::json& doc);

/// Expected reciprocal rank of the ground truth under continuous uniformly
/// random scores, averaged over queries: mean of H(|C|)/|C|.
double random_ranking_mrr(std::span<const data::CandidateSet> queries);

}  // namespace zskg::eval
