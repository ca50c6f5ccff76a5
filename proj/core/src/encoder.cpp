#include "zskg/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "zskg/error.hpp"
#include "zskg/layers.hpp"
#include "zskg/optim.hpp"

namespace zskg::enc {

FeatureEncoderParams FeatureEncoderParams::init(std::size_t dim, Rng& rng) {
  if (dim == 0) throw ConfigError("encoder dimension must be positive");
  FeatureEncoderParams p;
  p.w1 = ad::Parameter("W1", uniform_init(dim, 2 * dim, 2 * dim, rng));
  p.b1 = ad::Parameter("b1", uniform_init(1, dim, 2 * dim, rng));
  p.w2 = ad::Parameter("W2", uniform_init(dim, dim, dim, rng));
  p.b2 = ad::Parameter("b2", uniform_init(1, dim, dim, rng));
  return p;
}

FeatureEncoderParams FeatureEncoderParams::zeros(std::size_t dim) {
  FeatureEncoderParams p;
  p.w1 = ad::Parameter("W1", Tensor(dim, 2 * dim));
  p.b1 = ad::Parameter("b1", Tensor(1, dim));
  p.w2 = ad::Parameter("W2", Tensor(dim, dim));
  p.b2 = ad::Parameter("b2", Tensor(1, dim));
  return p;
}

Checkpoint FeatureEncoderParams::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.kind = "encoder";
  ckpt.config = {{"dim", dim()}};
  ckpt.tensors["W1"] = w1.value();
  ckpt.tensors["b1"] = b1.value();
  ckpt.tensors["W2"] = w2.value();
  ckpt.tensors["b2"] = b2.value();
  return ckpt;
}

FeatureEncoderParams FeatureEncoderParams::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "encoder") throw DataError("checkpoint of kind '" + ckpt.kind + "' is not an encoder");
  const Tensor& w2 = ckpt.tensor("W2");
  const std::size_t d = w2.rows();
  const Tensor& w1 = ckpt.tensor("W1");
  const Tensor& b1 = ckpt.tensor("b1");
  const Tensor& b2 = ckpt.tensor("b2");
  if (w2.cols() != d || w1.rows() != d || w1.cols() != 2 * d || b1.rows() != 1 || b1.cols() != d ||
      b2.rows() != 1 || b2.cols() != d) {
    throw DataError("encoder checkpoint: inconsistent parameter shapes");
  }
  FeatureEncoderParams p;
  p.w1 = ad::Parameter("W1", w1);
  p.b1 = ad::Parameter("b1", b1);
  p.w2 = ad::Parameter("W2", w2);
  p.b2 = ad::Parameter("b2", b2);
  return p;
}

FeatureEncoder::FeatureEncoder(const kge::EmbeddingView& tables, const data::NeighborIndex& index)
    : entity_table_(tables.entities) {
  const std::size_t d = tables.entities.cols();
  if (tables.relations.cols() != d) throw DataError("encoder: entity and relation widths differ");
  if (index.entity_count() != tables.entities.rows()) {
    throw DataError("encoder: neighbor index and embedding table disagree on the entity count");
  }
  neighbor_mean_ = Tensor(entity_table_.rows(), 2 * d);
  has_neighbors_.assign(entity_table_.rows(), 0);
  for (data::EntityId e = 0; e < entity_table_.rows(); ++e) {
    const auto neighbors = index.neighbors(e);
    if (neighbors.empty()) continue;
    auto row = neighbor_mean_.row(e);
    for (const auto& n : neighbors) {
      if (n.relation >= tables.relations.rows()) throw DataError("encoder: relation id outside the table");
      auto vr = tables.relations.row(n.relation);
      auto ve = entity_table_.row(n.entity);
      for (std::size_t i = 0; i < d; ++i) {
        row[i] += vr[i];
        row[d + i] += ve[i];
      }
    }
    const double inv = 1.0 / static_cast<double>(neighbors.size());
    for (double& v : row) v *= inv;
    has_neighbors_[e] = 1;
  }
}

namespace {

Tensor gather(const Tensor& table, std::span<const data::EntityId> ids) {
  Tensor out(ids.size(), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= table.rows()) throw DataError("encoder: entity id out of range");
    std::copy(table.row(ids[i]).begin(), table.row(ids[i]).end(), out.row(i).begin());
  }
  return out;
}

using Pair = std::pair<data::EntityId, data::EntityId>;

std::vector<Pair> pairs_of(std::span<const data::Triple> triples) {
  std::vector<Pair> out;
  out.reserve(triples.size());
  for (const auto& t : triples) out.emplace_back(t.head, t.tail);
  return out;
}

}  // namespace

ad::Var FeatureEncoder::encode_neighbors(std::span<const data::EntityId> entities,
                                         const FeatureEncoderParams& params) const {
  ad::Var means = ad::Var::constant(gather(neighbor_mean_, entities));
  return ad::tanh(ad::linear(means, params.w1.var(), params.b1.var()));
}

ad::Var FeatureEncoder::encode_entity_pairs(std::span<const Pair> pairs,
                                            const FeatureEncoderParams& params) const {
  std::vector<data::EntityId> heads, tails;
  heads.reserve(pairs.size());
  tails.reserve(pairs.size());
  for (const auto& [h, t] : pairs) {
    heads.push_back(h);
    tails.push_back(t);
  }
  ad::Var vh = ad::Var::constant(gather(entity_table_, heads));
  ad::Var vt = ad::Var::constant(gather(entity_table_, tails));
  std::vector<ad::Var> parts{ad::linear(vh, params.w2.var(), params.b2.var()),
                             ad::linear(vt, params.w2.var(), params.b2.var())};
  return ad::tanh(ad::concat_cols(parts));
}

ad::Var FeatureEncoder::encode_facts(std::span<const Pair> pairs, const FeatureEncoderParams& params) const {
  std::vector<data::EntityId> heads, tails;
  for (const auto& [h, t] : pairs) {
    heads.push_back(h);
    tails.push_back(t);
  }
  std::vector<ad::Var> parts{encode_neighbors(heads, params), encode_entity_pairs(pairs, params),
                             encode_neighbors(tails, params)};
  return ad::concat_cols(parts);
}

ad::Var FeatureEncoder::encode_triples(std::span<const data::Triple> triples,
                                       const FeatureEncoderParams& params) const {
  const auto pairs = pairs_of(triples);
  return encode_facts(pairs, params);
}

FrozenEncoder::FrozenEncoder(const FeatureEncoder& encoder, const FeatureEncoderParams& params)
    : dim_(encoder.dim()) {
  if (params.dim() != dim_) throw DataError("encoder parameters do not match the embedding width");
  ad::NoGradGuard no_grad;
  ad::Var u = ad::tanh(ad::linear(ad::Var::constant(encoder.neighbor_means()), params.w1.var(),
                                  params.b1.var()));
  ad::Var f = ad::tanh(ad::linear(ad::Var::constant(encoder.entity_table()), params.w2.var(),
                                  params.b2.var()));
  features_ = Tensor(encoder.entity_count(), 2 * dim_);
  for (std::size_t e = 0; e < features_.rows(); ++e) {
    auto row = features_.row(e);
    std::copy(u.value().row(e).begin(), u.value().row(e).end(), row.begin());
    std::copy(f.value().row(e).begin(), f.value().row(e).end(), row.begin() + dim_);
  }
}

void FrozenEncoder::fact_into(data::EntityId head, data::EntityId tail, std::span<double> out) const {
  if (head >= features_.rows() || tail >= features_.rows()) throw DataError("encoder: entity id out of range");
  const std::size_t d = dim_;
  auto h = features_.row(head);
  auto t = features_.row(tail);
  std::copy(h.begin(), h.begin() + d, out.begin());                // u_e1
  std::copy(h.begin() + d, h.end(), out.begin() + d);              // f2(e1)
  std::copy(t.begin() + d, t.end(), out.begin() + 2 * d);          // f2(e2)
  std::copy(t.begin(), t.begin() + d, out.begin() + 3 * d);        // u_e2
}

std::vector<double> FrozenEncoder::fact(data::EntityId head, data::EntityId tail) const {
  std::vector<double> out(fact_dim());
  fact_into(head, tail, out);
  return out;
}

Tensor FrozenEncoder::facts(std::span<const data::Triple> triples) const {
  Tensor out(triples.size(), fact_dim());
  for (std::size_t i = 0; i < triples.size(); ++i) fact_into(triples[i].head, triples[i].tail, out.row(i));
  return out;
}

ad::Var margin_rank_loss(const ad::Var& reference, const ad::Var& positives, const ad::Var& negatives,
                         double margin) {
  using namespace ad;
  Var ref = broadcast_rows(reference, positives.rows());
  Var hinge = relu(add_scalar(cosine_rows(ref, negatives) - cosine_rows(ref, positives), margin));
  return mean_all(hinge);
}

std::vector<RelationCenter> relation_centers(std::span<const data::Triple> triples,
                                             std::span<const data::RelationId> relations,
                                             const FrozenEncoder& encoder) {
  std::map<data::RelationId, RelationCenter> acc;
  for (auto r : relations) {
    acc[r].relation = r;
    acc[r].center.assign(encoder.fact_dim(), 0.0);
  }
  std::vector<double> x(encoder.fact_dim());
  for (const auto& t : triples) {
    auto it = acc.find(t.relation);
    if (it == acc.end()) continue;
    encoder.fact_into(t.head, t.tail, x);
    for (std::size_t i = 0; i < x.size(); ++i) it->second.center[i] += x[i];
    ++it->second.support;
  }
  std::vector<RelationCenter> out;
  for (auto& [r, c] : acc) {
    if (c.support == 0) throw DataError("relation " + std::to_string(r) + " has no triples for a center");
    const double inv = 1.0 / static_cast<double>(c.support);
    for (double& v : c.center) v *= inv;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<RelationCenter> compute_relation_centers(const data::ZeroShotSplit& split,
                                                     const FrozenEncoder& encoder) {
  const auto seen = split.relations_with_role(data::RelationRole::seen);
  return relation_centers(split.train, seen, encoder);
}

nlohmann::json centers_to_json(std::span<const RelationCenter> centers) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : centers) {
    out.push_back({{"relation", c.relation}, {"support", c.support}, {"center", c.center}});
  }
  return out;
}

std::vector<RelationCenter> centers_from_json(const nlohmann::json& doc) {
  std::vector<RelationCenter> out;
  try {
    for (const auto& item : doc) {
      RelationCenter c;
      c.relation = item.at("relation").get<data::RelationId>();
      c.support = item.at("support").get<std::size_t>();
      c.center = item.at("center").get<std::vector<double>>();
      out.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed relation centers: ") + e.what());
  }
  return out;
}

nlohmann::json to_json(const EncoderLogEntry& entry) {
  nlohmann::json j{{"step", entry.step}};
  if (entry.loss) j["loss"] = *entry.loss;
  if (entry.valid_hits10) j["valid_hits10"] = *entry.valid_hits10;
  if (entry.valid_mrr) j["valid_mrr"] = *entry.valid_mrr;
  return j;
}

std::optional<eval::MetricsReport> reference_validation(const data::ZeroShotSplit& split,
                                                        const FrozenEncoder& encoder) {
  std::map<data::RelationId, std::vector<data::Triple>> by_relation;
  for (const auto& t : split.valid) by_relation[t.relation].push_back(t);
  std::map<data::RelationId, std::vector<double>> sums;
  std::vector<double> x(encoder.fact_dim());
  for (const auto& [r, triples] : by_relation) {
    auto& s = sums[r];
    s.assign(encoder.fact_dim(), 0.0);
    for (const auto& t : triples) {
      encoder.fact_into(t.head, t.tail, x);
      for (std::size_t i = 0; i < x.size(); ++i) s[i] += x[i];
    }
  }
  std::vector<eval::RankingResult> results;
  std::vector<double> ref(encoder.fact_dim());
  for (const auto& q : split.valid_candidates) {
    auto it = by_relation.find(q.relation);
    if (it == by_relation.end()) continue;
    const auto& triples = it->second;
    const bool own = std::find(triples.begin(), triples.end(),
                               data::Triple{q.head, q.relation, q.ground_truth}) != triples.end();
    const std::size_t others = triples.size() - (own ? 1 : 0);
    if (others == 0) continue;
    const auto& s = sums.at(q.relation);
    if (own) {
      encoder.fact_into(q.head, q.ground_truth, x);
      for (std::size_t i = 0; i < ref.size(); ++i) ref[i] = (s[i] - x[i]) / static_cast<double>(others);
    } else {
      for (std::size_t i = 0; i < ref.size(); ++i) ref[i] = s[i] / static_cast<double>(others);
    }
    eval::RankingResult result;
    result.query = q;
    result.scores.reserve(q.candidates.size());
    for (auto c : q.candidates) {
      encoder.fact_into(q.head, c, x);
      result.scores.push_back(kernels::cosine_or_zero(ref, x));
    }
    result.rank = eval::rank_candidates(q.candidates, result.scores, q.ground_truth);
    results.push_back(std::move(result));
  }
  if (results.empty()) return std::nullopt;
  std::vector<std::string> names;
  for (const auto& r : split.relations) names.push_back(r.name);
  return eval::compute_metrics(results, names);
}

PretrainResult pretrain_encoder(const data::ZeroShotSplit& split, const data::NeighborIndex& index,
                                const kge::EmbeddingView& tables, const EncoderConfig& config,
                                Rng& rng) {
  if (config.k_ref == 0 || config.batch_size == 0) throw ConfigError("encoder k_ref and batch size must be positive");
  if (config.margin <= 0.0) throw ConfigError("encoder margin must be positive");
  if (config.learning_rate <= 0.0) throw ConfigError("encoder learning rate must be positive");
  const FeatureEncoder encoder(tables, index);
  const data::TripleSampler sampler(split);
  std::vector<data::RelationId> eligible;
  for (auto r : split.relations_with_role(data::RelationRole::seen)) {
    if (sampler.triples_of(r).size() >= config.k_ref + 1) eligible.push_back(r);
  }
  if (eligible.empty()) {
    throw DataError("no seen relation has the " + std::to_string(config.k_ref + 1) +
                    " training triples pretraining needs");
  }

  PretrainResult result;
  FeatureEncoderParams params = FeatureEncoderParams::init(encoder.dim(), rng);
  result.params = params;
  std::pair<double, double> best{-1.0, -1.0};  // (hits10, mrr)

  auto validate = [&](EncoderLogEntry& entry) {
    const auto report = reference_validation(split, FrozenEncoder(encoder, params));
    if (!report) return;
    entry.valid_hits10 = report->hits10;
    entry.valid_mrr = report->mrr;
    const std::pair<double, double> score{report->hits10, report->mrr};
    if (score > best) {
      best = score;
      result.params = params;
      result.best_step = entry.step;
      result.best_valid_hits10 = report->hits10;
    }
  };

  EncoderLogEntry initial;
  validate(initial);
  result.log.push_back(initial);
  const bool has_validation = result.best_valid_hits10.has_value();

  auto param_ptrs = params.parameters();
  Adam adam(AdamConfig{config.learning_rate}, param_ptrs);
  for (std::size_t step = 1; step <= config.steps; ++step) {
    const auto relation = eligible[rng.index(eligible.size())];
    const auto batch = sampler.sample_task_batch(relation, config.k_ref, config.batch_size, rng);
    ad::Var reference = ad::mean_rows(encoder.encode_triples(batch.references, params));
    ad::Var positives = encoder.encode_triples(batch.positives, params);
    ad::Var negatives = encoder.encode_triples(batch.negatives, params);
    ad::Var loss = margin_rank_loss(reference, positives, negatives, config.margin);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw NumericalError("encoder pretraining diverged at step " + std::to_string(step));
    }
    adam.zero_grad();
    ad::backward(loss, param_ptrs);
    adam.step();

    EncoderLogEntry entry;
    entry.step = step;
    entry.loss = value;
    if (has_validation && config.eval_every > 0 && (step % config.eval_every == 0 || step == config.steps)) {
      validate(entry);
    }
    result.log.push_back(entry);
  }
  if (!has_validation) {
    result.params = params;
    result.best_step = config.steps;
  }
  return result;
}

}  // namespace zskg::enc
