#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "zskg/dataset.hpp"
#include "zskg/encoder.hpp"
#include "zskg/gan.hpp"
#include "zskg/metrics.hpp"
#include "zskg/rng.hpp"
#include "zskg/textrep.hpp"

namespace zskg::eval {

/// Text embeddings indexed by relation id.
using TextTable = std::vector<std::vector<double>>;

TextTable text_table(std::span<const text::TextEmbedding> embeddings, std::size_t relation_count);

/// score(e) = (1/N) Σᵢ cos(G(T_r, zᵢ), x(head, e)) for every candidate e,
/// with z₁..z_N drawn from `rng` once and shared by all candidates.
/// Throws DataError when the relation has no text embedding.
std::vector<double> score_query(const data::CandidateSet& query, const gan::Generator& generator,
                                const TextTable& texts, const enc::FrozenEncoder& encoder,
                                std::size_t n_test, Rng& rng);

struct Evaluation {
  MetricsReport report;
  std::vector<RankingResult> results;  // query order
};

/// Ranks every query. Query i draws its noise from the stream
/// derive(seed, "eval-noise", {i}), so results do not depend on `threads`.
Evaluation evaluate_generator(std::span<const data::CandidateSet> queries, const gan::Generator& generator,
                              const TextTable& texts, const enc::FrozenEncoder& encoder,
                              std::size_t n_test, std::uint64_t seed, std::span<const std::string> names,
                              std::size_t threads = 1);

/// Runs fn(i) for i in [0, n) on up to `threads` threads. Exceptions from
/// workers are rethrown on the caller's thread.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace zskg::eval
