#include "zskg/metrics.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "zskg/error.hpp"

namespace zskg::eval {

std::size_t rank_candidates(std::span<const double> scores, std::size_t truth) {
  if (truth >= scores.size()) throw std::invalid_argument("rank_candidates: ground truth out of range");
  const double s = scores[truth];
  std::size_t rank = 1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i == truth) continue;
    if (scores[i] >= s) ++rank;
  }
  return rank;
}

std::size_t rank_candidates(std::span<const data::EntityId> candidates,
                            std::span<const double> scores, data::EntityId ground_truth) {
  if (candidates.size() != scores.size()) {
    throw std::invalid_argument("rank_candidates: one score per candidate required");
  }
  auto it = std::find(candidates.begin(), candidates.end(), ground_truth);
  if (it == candidates.end()) throw DataError("rank_candidates: ground truth is not a candidate");
  return rank_candidates(scores, static_cast<std::size_t>(it - candidates.begin()));
}

namespace {

struct Accumulator {
  double rr = 0.0, h1 = 0.0, h5 = 0.0, h10 = 0.0, cands = 0.0;
  std::size_t n = 0;

  void add(std::size_t rank, std::size_t candidates) {
    rr += 1.0 / static_cast<double>(rank);
    h1 += rank <= 1 ? 1.0 : 0.0;
    h5 += rank <= 5 ? 1.0 : 0.0;
    h10 += rank <= 10 ? 1.0 : 0.0;
    cands += static_cast<double>(candidates);
    ++n;
  }
};

}  // namespace

MetricsReport compute_metrics(std::span<const RankingResult> results,
                              std::span<const std::string> relation_names) {
  if (results.empty()) throw std::invalid_argument("compute_metrics: no results");
  Accumulator all;
  std::map<data::RelationId, Accumulator> by_relation;
  for (const auto& r : results) {
    if (r.rank == 0) throw std::invalid_argument("compute_metrics: rank must be >= 1");
    all.add(r.rank, r.query.candidates.size());
    by_relation[r.query.relation].add(r.rank, r.query.candidates.size());
  }
  MetricsReport report;
  const double n = static_cast<double>(all.n);
  report.mrr = all.rr / n;
  report.hits1 = all.h1 / n;
  report.hits5 = all.h5 / n;
  report.hits10 = all.h10 / n;
  report.query_count = all.n;
  for (const auto& [id, acc] : by_relation) {
    RelationMetrics m;
    m.relation_id = id;
    m.relation = id < relation_names.size() ? relation_names[id] : std::to_string(id);
    const double k = static_cast<double>(acc.n);
    m.mrr = acc.rr / k;
    m.hits1 = acc.h1 / k;
    m.hits5 = acc.h5 / k;
    m.hits10 = acc.h10 / k;
    m.query_count = acc.n;
    m.candidate_count_mean = acc.cands / k;
    report.per_relation.push_back(std::move(m));
  }
  return report;
}

nlohmann::json to_json(const MetricsReport& report) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& m : report.per_relation) {
    per.push_back({{"relation", m.relation},
                   {"mrr", m.mrr},
                   {"hits1", m.hits1},
                   {"hits5", m.hits5},
                   {"hits10", m.hits10},
                   {"query_count", m.query_count},
                   {"candidate_count_mean", m.candidate_count_mean}});
  }
  return {{"mrr", report.mrr},
          {"hits1", report.hits1},
          {"hits5", report.hits5},
          {"hits10", report.hits10},
          {"query_count", report.query_count},
          {"per_relation", per}};
}

MetricsReport metrics_from_json(const nlohmann::json& doc) {
  auto number = [](const nlohmann::json& obj, const char* key) {
    if (!obj.is_object() || !obj.contains(key) || !obj.at(key).is_number()) {
      throw DataError(std::string("report: missing numeric field '") + key + "'");
    }
    return obj.at(key).get<double>();
  };
  MetricsReport report;
  report.mrr = number(doc, "mrr");
  report.hits1 = number(doc, "hits1");
  report.hits5 = number(doc, "hits5");
  report.hits10 = number(doc, "hits10");
  if (doc.contains("query_count")) report.query_count = static_cast<std::size_t>(number(doc, "query_count"));
  if (doc.contains("per_relation")) {
    if (!doc.at("per_relation").is_array()) throw DataError("report: per_relation must be an array");
    for (const auto& item : doc.at("per_relation")) {
      RelationMetrics m;
      if (!item.contains("relation") || !item.at("relation").is_string()) {
        throw DataError("report: per_relation entry without a relation name");
      }
      m.relation = item.at("relation").get<std::string>();
      m.mrr = number(item, "mrr");
      m.hits10 = number(item, "hits10");
      m.query_count = static_cast<std::size_t>(number(item, "query_count"));
      m.candidate_count_mean = number(item, "candidate_count_mean");
      if (item.contains("hits1")) m.hits1 = number(item, "hits1");
      if (item.contains("hits5")) m.hits5 = number(item, "hits5");
      report.per_relation.push_back(std::move(m));
    }
  }
  return report;
}

double random_ranking_mrr(std::span<const data::CandidateSet> queries) {
  if (queries.empty()) throw std::invalid_argument("random_ranking_mrr: no queries");
  double total = 0.0;
  for (const auto& q : queries) {
    const std::size_t n = q.candidates.size();
    double harmonic = 0.0;
    for (std::size_t k = 1; k <= n; ++k) harmonic += 1.0 / static_cast<double>(k);
    total += harmonic / static_cast<double>(n);
  }
  return total / static_cast<double>(queries.size());
}

}  // namespace zskg::eval
