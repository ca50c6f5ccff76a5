#include "zskg/eval.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "zskg/error.hpp"

namespace zskg::eval {

TextTable text_table(std::span<const text::TextEmbedding> embeddings, std::size_t relation_count) {
  TextTable table(relation_count);
  for (const auto& e : embeddings) {
    if (e.relation >= relation_count) throw DataError("text embedding for an unknown relation");
    table[e.relation] = e.vector;
  }
  return table;
}

std::vector<double> score_query(const data::CandidateSet& query, const gan::Generator& generator,
                                const TextTable& texts, const enc::FrozenEncoder& encoder,
                                std::size_t n_test, Rng& rng) {
  if (query.relation >= texts.size() || texts[query.relation].empty()) {
    throw DataError("no text embedding for relation " + std::to_string(query.relation));
  }
  if (n_test == 0) throw ConfigError("n_test must be positive");
  const auto& text = texts[query.relation];
  Tensor generated;
  {
    ad::NoGradGuard no_grad;
    Tensor t(n_test, text.size());
    for (std::size_t i = 0; i < n_test; ++i) std::copy(text.begin(), text.end(), t.row(i).begin());
    Tensor z = gan::sample_noise(n_test, generator.noise_dim(), rng);
    generated = generator.forward(ad::Var::constant(std::move(t)), ad::Var::constant(std::move(z))).value();
  }
  if (generated.cols() != encoder.fact_dim()) throw DataError("generator output width differs from the fact width");
  std::vector<double> scores;
  scores.reserve(query.candidates.size());
  std::vector<double> x(encoder.fact_dim());
  for (auto c : query.candidates) {
    encoder.fact_into(query.head, c, x);
    double sum = 0.0;
    for (std::size_t i = 0; i < n_test; ++i) sum += kernels::cosine_or_zero(generated.row(i), x);
    scores.push_back(sum / static_cast<double>(n_test));
  }
  return scores;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      try {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

Evaluation evaluate_generator(std::span<const data::CandidateSet> queries, const gan::Generator& generator,
                              const TextTable& texts, const enc::FrozenEncoder& encoder,
                              std::size_t n_test, std::uint64_t seed, std::span<const std::string> names,
                              std::size_t threads) {
  Evaluation out;
  out.results.resize(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t i) {
    Rng rng = Rng::derive(seed, "eval-noise", {i});
    auto& r = out.results[i];
    r.query = queries[i];
    r.scores = score_query(queries[i], generator, texts, encoder, n_test, rng);
    r.rank = rank_candidates(queries[i].candidates, r.scores, queries[i].ground_truth);
  });
  out.report = compute_metrics(out.results, names);
  return out;
}

}  // namespace zskg::eval
