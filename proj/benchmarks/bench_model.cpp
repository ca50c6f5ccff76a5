#include <benchmark/benchmark.h>

#include <memory>

#include "zskg/encoder.hpp"
#include "zskg/eval.hpp"
#include "zskg/gan_train.hpp"
#include "zskg/kge.hpp"
#include "zskg/synthetic.hpp"

using namespace zskg;

namespace {

constexpr std::size_t kDim = 32;
constexpr std::size_t kTextDim = 50;

// Untrained tables are fine here: timings do not depend on the values.
struct World {
  data::SyntheticDataset dataset;
  kge::KgEmbeddingTable table;
  data::NeighborIndex index;
  enc::FeatureEncoder features;
  enc::FeatureEncoderParams params;
  enc::FrozenEncoder frozen;
  eval::TextTable texts;
  gan::CenterTable centers;

  World() {
    Rng rng(11);
    dataset = data::generate_synthetic({}, rng);
    const auto& split = dataset.split;
    table = kge::init_kge(split, kge::KgeKind::distmult, kDim, rng);
    index = data::NeighborIndex::build(split, 50, 1);
    features = enc::FeatureEncoder(table.view(kge::TableSource::distmult), index);
    params = enc::FeatureEncoderParams::init(kDim, rng);
    frozen = enc::FrozenEncoder(features, params);
    for (std::size_t r = 0; r < split.relations.size(); ++r) {
      std::vector<double> t(kTextDim);
      for (double& v : t) v = rng.normal();
      texts.push_back(std::move(t));
    }
    for (const auto& c : enc::compute_relation_centers(split, frozen)) centers[c.relation] = c.center;
  }
};

const World& world() {
  static const auto w = std::make_unique<World>();
  return *w;
}

void BM_EncodeFacts(benchmark::State& state) {
  const auto& w = world();
  const auto& train = w.dataset.split.train;
  const auto batch = std::min<std::size_t>(static_cast<std::size_t>(state.range(0)), train.size());
  const std::span<const data::Triple> triples(train.data(), batch);
  for (auto _ : state) benchmark::DoNotOptimize(w.features.encode_triples(triples, w.params).value()[0]);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_EncodeFacts)->Arg(64)->Arg(256);

void BM_GanGeneratorStep(benchmark::State& state) {
  const auto& w = world();
  gan::GanConfig cfg;
  cfg.steps = 1u << 30;
  cfg.eval_every = 0;
  cfg.critic_iters = static_cast<std::size_t>(state.range(0));
  Rng rng(12);
  gan::GanTrainer trainer(w.dataset.split, w.frozen, w.texts, w.centers, cfg, rng);
  for (auto _ : state) trainer.train(1);
}
BENCHMARK(BM_GanGeneratorStep)->Arg(1)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_ScoreQuery(benchmark::State& state) {
  const auto& w = world();
  Rng rng(13);
  const gan::Generator g(kTextDim, 15, 8 * kDim, 4 * kDim, 0.2, true, rng);
  const auto& query = w.dataset.split.test_candidates.front();
  const auto n_test = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(eval::score_query(query, g, w.texts, w.frozen, n_test, rng));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(query.candidates.size()));
}
BENCHMARK(BM_ScoreQuery)->Arg(1)->Arg(20);

void BM_EvaluateTestSplit(benchmark::State& state) {
  const auto& w = world();
  Rng rng(14);
  const gan::Generator g(kTextDim, 15, 8 * kDim, 4 * kDim, 0.2, true, rng);
  const std::vector<std::string> names;
  const auto threads = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        eval::evaluate_generator(w.dataset.split.test_candidates, g, w.texts, w.frozen, 20, 3, names, threads));
  }
}
BENCHMARK(BM_EvaluateTestSplit)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
