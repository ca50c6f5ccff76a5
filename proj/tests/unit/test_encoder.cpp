#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "zskg/encoder.hpp"
#include "zskg/error.hpp"
#include "zskg/kge.hpp"
#include "zskg/synthetic.hpp"

using namespace zskg;
using namespace zskg::enc;
using namespace zskg::testing;
using data::EntityId;

namespace {

using Pair = std::pair<EntityId, EntityId>;

kge::EmbeddingView random_view(const data::ZeroShotSplit& s, std::size_t d, Rng& rng) {
  return {random_tensor(s.entity_count(), d, rng), random_tensor(s.relations.size(), d, rng)};
}

FeatureEncoderParams random_params(std::size_t d, Rng& rng) {
  auto p = FeatureEncoderParams::init(d, rng);
  for (auto* t : p.parameters()) t->value() = random_tensor(t->value().rows(), t->value().cols(), rng);
  return p;
}

// u_e by a direct loop over the neighbor list: f1 per neighbor, averaged.
std::vector<double> brute_u(EntityId e, const data::NeighborIndex& index, const kge::EmbeddingView& v,
                            const FeatureEncoderParams& p) {
  const std::size_t d = p.dim();
  const Tensor& w1 = p.w1.value();
  const Tensor& b1 = p.b1.value();
  std::vector<double> acc(d, 0.0);
  const auto nb = index.neighbors(e);
  for (const auto& n : nb) {
    for (std::size_t i = 0; i < d; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < d; ++j) s += w1(i, j) * v.relations(n.relation, j);
      for (std::size_t j = 0; j < d; ++j) s += w1(i, d + j) * v.entities(n.entity, j);
      acc[i] += s;
    }
  }
  std::vector<double> u(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double mean = nb.empty() ? 0.0 : acc[i] / static_cast<double>(nb.size());
    u[i] = std::tanh(mean + b1[i]);
  }
  return u;
}

std::vector<double> brute_f2(EntityId e, const kge::EmbeddingView& v, const FeatureEncoderParams& p) {
  const std::size_t d = p.dim();
  std::vector<double> out(d);
  for (std::size_t i = 0; i < d; ++i) {
    double s = p.b2.value()[i];
    for (std::size_t j = 0; j < d; ++j) s += p.w2.value()(i, j) * v.entities(e, j);
    out[i] = std::tanh(s);
  }
  return out;
}

}  // namespace

TEST(Encoder, ZeroParametersGiveZeroVectors) {
  const auto split = toy_split();
  Rng rng(1);
  const auto view = random_view(split, 3, rng);
  const auto index = data::NeighborIndex::build(split, 50, 1);
  const FeatureEncoder enc(view, index);
  const auto zero = FeatureEncoderParams::zeros(3);
  const std::vector<EntityId> ids{0, 1, 7};
  const Tensor u = enc.encode_neighbors(ids, zero).value();
  for (double v : u.values()) EXPECT_EQ(v, 0.0);
  const std::vector<Pair> pairs{{0, 1}, {2, 3}};
  const Tensor ep = enc.encode_entity_pairs(pairs, zero).value();
  EXPECT_EQ(ep.cols(), 6u);
  for (double v : ep.values()) EXPECT_EQ(v, 0.0);
  const Tensor facts = enc.encode_facts(pairs, zero).value();
  EXPECT_EQ(facts.cols(), 12u);
  for (double v : facts.values()) EXPECT_EQ(v, 0.0);
}

TEST(Encoder, SingleNeighborClosedForm) {
  data::ZeroShotSplit s;
  s.entities = {"a", "b"};
  s.relations = {{0, "r", data::RelationRole::seen, "x"}};
  s.train = {{0, 0, 1}};
  s.reindex();
  const kge::EmbeddingView view{Tensor(2, 1, std::vector<double>{0.9, 0.25}), Tensor(1, 1, 0.5)};
  const auto index = data::NeighborIndex::build(s, 50, 1);
  const FeatureEncoder enc(view, index);
  auto p = FeatureEncoderParams::zeros(1);
  p.w1.value() = Tensor(1, 2, std::vector<double>{1, 1});
  const std::vector<EntityId> ids{0};
  EXPECT_NEAR(enc.encode_neighbors(ids, p).value()[0], std::tanh(0.75), 1e-15);
  EXPECT_NEAR(std::tanh(0.75), 0.63515, 1e-5);
  // The isolated entity falls back to tanh(b1).
  p.b1.value()[0] = 0.4;
  const std::vector<EntityId> lone{1};
  EXPECT_NEAR(enc.encode_neighbors(lone, p).value()[0], std::tanh(0.4), 1e-15);
}

TEST(Encoder, EntityPairClosedFormAndSymmetry) {
  data::ZeroShotSplit s;
  s.entities = {"a", "b"};
  s.relations = {{0, "r", data::RelationRole::seen, "x"}};
  s.train = {{0, 0, 1}};
  s.reindex();
  const kge::EmbeddingView view{Tensor(2, 1, std::vector<double>{0.3, -0.3}), Tensor(1, 1, 0.0)};
  const FeatureEncoder enc(view, data::NeighborIndex::build(s, 50, 1));
  auto p = FeatureEncoderParams::zeros(1);
  p.w2.value()[0] = 1.0;
  const std::vector<Pair> ab{{0, 1}}, ba{{1, 0}};
  const Tensor x = enc.encode_entity_pairs(ab, p).value();
  EXPECT_NEAR(x[0], 0.29131, 1e-5);
  EXPECT_NEAR(x[1], -0.29131, 1e-5);
  const Tensor y = enc.encode_entity_pairs(ba, p).value();
  EXPECT_EQ(x[0], y[1]);
  EXPECT_EQ(x[1], y[0]);
}

TEST(Encoder, MatchesBruteForceLoops) {
  const auto split = toy_split();
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d = 1 + rng.index(5);
    const auto view = random_view(split, d, rng);
    const auto index = data::NeighborIndex::build(split, 1 + rng.index(3), rng.next_u64());
    const FeatureEncoder enc(view, index);
    const auto p = random_params(d, rng);
    std::vector<Pair> pairs;
    for (int i = 0; i < 5; ++i) pairs.push_back({rng.index(8), rng.index(8)});
    const Tensor facts = enc.encode_facts(pairs, p).value();
    const FrozenEncoder frozen(enc, p);
    ASSERT_EQ(facts.cols(), 4 * d);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto [h, t] = pairs[i];
      std::vector<double> want = brute_u(h, index, view, p);
      for (double v : brute_f2(h, view, p)) want.push_back(v);
      for (double v : brute_f2(t, view, p)) want.push_back(v);
      for (double v : brute_u(t, index, view, p)) want.push_back(v);
      const auto cached = frozen.fact(h, t);
      for (std::size_t j = 0; j < want.size(); ++j) {
        ASSERT_NEAR(facts(i, j), want[j], 1e-12);
        ASSERT_NEAR(cached[j], want[j], 1e-12);
      }
    }
  }
}

TEST(Encoder, Width100GivesFactWidth400) {
  const auto split = toy_split();
  Rng rng(2);
  const auto view = random_view(split, 100, rng);
  const FeatureEncoder enc(view, data::NeighborIndex::build(split, 50, 1));
  EXPECT_EQ(enc.fact_dim(), 400u);
  const std::vector<Pair> pairs{{0, 1}};
  EXPECT_EQ(enc.encode_facts(pairs, FeatureEncoderParams::init(100, rng)).value().cols(), 400u);
}

TEST(Encoder, PureFunctionOfInputs) {
  const auto split = toy_split();
  Rng rng(9);
  const auto view = random_view(split, 4, rng);
  const FeatureEncoder enc(view, data::NeighborIndex::build(split, 50, 1));
  const auto p = random_params(4, rng);
  const std::vector<Pair> pairs{{3, 4}, {0, 7}};
  const Tensor a = enc.encode_facts(pairs, p).value();
  const std::vector<Pair> other{{1, 1}};
  (void)enc.encode_facts(other, p);
  EXPECT_EQ(enc.encode_facts(pairs, p).value(), a);
}

TEST(MarginRankLoss, Examples) {
  const ad::Var ref = ad::Var::constant(Tensor::row_vector({1, 0}));
  const ad::Var same = ad::Var::constant(Tensor::row_vector({2, 0}));
  EXPECT_NEAR(margin_rank_loss(ref, same, same, 10.0).item(), 10.0, 1e-15);
  const ad::Var opposite = ad::Var::constant(Tensor::row_vector({-1, 0}));
  EXPECT_EQ(margin_rank_loss(ref, same, opposite, 1.0).item(), 0.0);
}

TEST(MarginRankLoss, MeanOfHandHinges) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.index(5);
    const Tensor ref = random_tensor(1, n, rng), pos = random_tensor(3, n, rng), neg = random_tensor(3, n, rng);
    const double margin = rng.uniform(0.0, 2.0);
    double want = 0;
    for (std::size_t i = 0; i < 3; ++i) {
      want += brute_hinge(margin, brute_cosine(ref.row(0), pos.row(i)), brute_cosine(ref.row(0), neg.row(i)));
    }
    want /= 3;
    const double got = margin_rank_loss(ad::Var::constant(ref), ad::Var::constant(pos), ad::Var::constant(neg), margin).item();
    ASSERT_NEAR(got, want, 1e-12);
  }
}

TEST(MarginRankLoss, ReferenceOrderDoesNotMatter) {
  const auto split = toy_split();
  Rng rng(4);
  const auto view = random_view(split, 3, rng);
  const FeatureEncoder enc(view, data::NeighborIndex::build(split, 50, 1));
  const auto p = random_params(3, rng);
  std::vector<data::Triple> refs{split.train[0], split.train[1], split.train[2], split.train[11]};
  const std::vector<data::Triple> pos{split.train[3]}, neg{{2, 0, 6}};
  auto loss = [&] {
    return margin_rank_loss(ad::mean_rows(enc.encode_triples(refs, p)), enc.encode_triples(pos, p),
                            enc.encode_triples(neg, p), 10.0)
        .item();
  };
  const double base = loss();
  for (int t = 0; t < 20; ++t) {
    rng.shuffle(refs);
    EXPECT_NEAR(loss(), base, 1e-13);
  }
}

TEST(MarginRankLoss, ZeroRowThrows) {
  const ad::Var ref = ad::Var::constant(Tensor::row_vector({0, 0}));
  const ad::Var x = ad::Var::constant(Tensor::row_vector({1, 0}));
  EXPECT_THROW(margin_rank_loss(ref, x, x, 1.0), NumericalError);
}

TEST(Centers, SingleTripleAndBruteMean) {
  const auto split = toy_split();
  Rng rng(6);
  const auto view = random_view(split, 3, rng);
  const FeatureEncoder enc(view, data::NeighborIndex::build(split, 50, 1));
  const FrozenEncoder frozen(enc, random_params(3, rng));
  const std::vector<data::Triple> one{split.train[7]};
  const std::vector<data::RelationId> r2{2};
  EXPECT_EQ(relation_centers(one, r2, frozen)[0].center, frozen.fact(6, 7));

  const auto centers = compute_relation_centers(split, frozen);
  ASSERT_EQ(centers.size(), 3u);
  for (const auto& c : centers) {
    const auto triples = split.train_triples_of(c.relation);
    EXPECT_EQ(c.support, triples.size());
    std::vector<double> sum(12, 0.0);
    for (const auto& t : triples) {
      const auto f = frozen.fact(t.head, t.tail);
      for (std::size_t i = 0; i < 12; ++i) sum[i] += f[i];
    }
    for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(c.center[i], sum[i] / static_cast<double>(triples.size()), 1e-12);
  }
  const auto back = centers_from_json(centers_to_json(centers));
  ASSERT_EQ(back.size(), centers.size());
  EXPECT_EQ(back[1].center, centers[1].center);
}

TEST(Centers, OppositeFactsCancel) {
  // Isolated entities with u_e = tanh(0) = 0, so x(b, a) = −x(a, b).
  data::ZeroShotSplit s;
  s.entities = {"a", "b", "c"};
  s.relations = {{0, "r", data::RelationRole::seen, "x"}};
  s.train = {{2, 0, 2}};
  s.reindex();
  const kge::EmbeddingView view{Tensor(3, 1, std::vector<double>{0.3, -0.3, 1.0}), Tensor(1, 1, 0.2)};
  const FeatureEncoder enc(view, data::NeighborIndex::build(s, 50, 1));
  auto p = FeatureEncoderParams::zeros(1);
  p.w2.value()[0] = 1.0;
  p.w1.value() = Tensor(1, 2, 0.5);
  const FrozenEncoder frozen(enc, p);
  const std::vector<data::Triple> pair{{0, 0, 1}, {1, 0, 0}};
  const std::vector<data::RelationId> rel{0};
  const auto centers = relation_centers(pair, rel, frozen);
  for (double v : centers[0].center) EXPECT_EQ(v, 0.0);
  const std::vector<data::RelationId> missing{1};
  EXPECT_THROW(relation_centers(pair, missing, frozen), DataError);
}

TEST(Pretrain, ZeroStepsReturnsInitialization) {
  Rng gen(7);
  data::SyntheticSpec spec;
  spec.entities = 200;
  const auto ds = data::generate_synthetic(spec, gen);
  Rng rng(3);
  const auto view = random_view(ds.split, 8, rng);
  const auto index = data::NeighborIndex::build(ds.split, 50, 2);
  EncoderConfig cfg;
  cfg.steps = 0;
  cfg.k_ref = 10;
  Rng a(42), b(42);
  const auto result = pretrain_encoder(ds.split, index, view, cfg, a);
  const auto init = FeatureEncoderParams::init(8, b);
  EXPECT_EQ(result.params.w1.value(), init.w1.value());
  EXPECT_EQ(result.params.b2.value(), init.b2.value());
  EXPECT_EQ(result.best_step, 0u);
}

TEST(Pretrain, FixedSeedIsDeterministic) {
  Rng gen(7);
  data::SyntheticSpec spec;
  spec.entities = 200;
  const auto ds = data::generate_synthetic(spec, gen);
  Rng rng(3);
  const auto view = random_view(ds.split, 8, rng);
  const auto index = data::NeighborIndex::build(ds.split, 50, 2);
  EncoderConfig cfg;
  cfg.steps = 40;
  cfg.eval_every = 10;
  cfg.k_ref = 10;
  cfg.batch_size = 16;
  Rng a(42), b(42);
  const auto x = pretrain_encoder(ds.split, index, view, cfg, a);
  const auto y = pretrain_encoder(ds.split, index, view, cfg, b);
  ASSERT_EQ(x.log.size(), y.log.size());
  for (std::size_t i = 0; i < x.log.size(); ++i) EXPECT_EQ(to_json(x.log[i]), to_json(y.log[i]));
  EXPECT_EQ(x.params.w1.value(), y.params.w1.value());
  EXPECT_EQ(x.params.w2.value(), y.params.w2.value());
  EXPECT_TRUE(x.best_valid_hits10.has_value());
}

TEST(Pretrain, RejectsUnusableConfigs) {
  const auto split = toy_split();
  Rng rng(1);
  const auto view = random_view(split, 2, rng);
  const auto index = data::NeighborIndex::build(split, 50, 1);
  EncoderConfig cfg;
  cfg.k_ref = 30;
  EXPECT_THROW(pretrain_encoder(split, index, view, cfg, rng), DataError);
  cfg.k_ref = 2;
  cfg.margin = 0;
  EXPECT_THROW(pretrain_encoder(split, index, view, cfg, rng), ConfigError);
}

TEST(EncoderParams, CheckpointRoundTrip) {
  Rng rng(8);
  const auto p = random_params(5, rng);
  const auto q = FeatureEncoderParams::from_checkpoint(p.to_checkpoint());
  EXPECT_EQ(q.w1.value(), p.w1.value());
  EXPECT_EQ(q.b1.value(), p.b1.value());
  EXPECT_EQ(q.w2.value(), p.w2.value());
  EXPECT_EQ(q.b2.value(), p.b2.value());
}
