#include "zskg/baselines.hpp"

#include <cmath>
#include <map>

#include "zskg/error.hpp"
#include "zskg/optim.hpp"

namespace zskg::kge {

TextRelationHead::TextRelationHead(std::size_t text_dim, std::size_t hidden, std::size_t out_dim,
                                   double leaky_slope, Rng& rng)
    : net_(text_dim, 0, hidden, out_dim, leaky_slope, /*spectral=*/false, rng) {}

ad::Var TextRelationHead::forward(const ad::Var& text) const { return net_.forward(text, ad::Var()); }

std::vector<double> TextRelationHead::embed(std::span<const double> text) const {
  return net_.generate(text, {});
}

eval::Evaluation evaluate_zs(std::span<const data::CandidateSet> queries, const KgEmbeddingTable& table,
                             const TextRelationHead& head, const eval::TextTable& texts,
                             std::span<const std::string> names) {
  eval::Evaluation out;
  std::map<data::RelationId, std::vector<double>> relation_cache;
  for (const auto& q : queries) {
    if (q.relation >= texts.size() || texts[q.relation].empty()) {
      throw DataError("no text embedding for relation " + std::to_string(q.relation));
    }
    auto it = relation_cache.find(q.relation);
    if (it == relation_cache.end()) it = relation_cache.emplace(q.relation, head.embed(texts[q.relation])).first;
    const auto h = table.entity(q.head);
    eval::RankingResult r;
    r.query = q;
    for (auto c : q.candidates) r.scores.push_back(score_triple(table.kind, h, it->second, table.entity(c)));
    r.rank = eval::rank_candidates(q.candidates, r.scores, q.ground_truth);
    out.results.push_back(std::move(r));
  }
  out.report = eval::compute_metrics(out.results, names);
  return out;
}

ZsBaselineResult zs_baseline(const data::ZeroShotSplit& split, const eval::TextTable& texts,
                             const KgEmbeddingTable& pretrained, const ZsBaselineConfig& config, Rng& rng) {
  if (config.batch_size == 0 || config.learning_rate <= 0.0) {
    throw ConfigError("baseline batch size and learning rate must be positive");
  }
  if (split.train.empty()) throw DataError("baseline training needs training triples");
  if (split.test_candidates.empty()) throw DataError("baseline evaluation needs test queries");
  const KgeKind kind = pretrained.kind;
  const bool complex = kind == KgeKind::complex;
  std::size_t text_dim = 0;
  for (const auto& t : texts) text_dim = std::max(text_dim, t.size());
  for (const auto& t : split.train) {
    if (t.relation >= texts.size() || texts[t.relation].size() != text_dim) {
      throw DataError("relation '" + split.relations[t.relation].name + "' has no text embedding");
    }
  }
  const std::size_t out_dim = complex ? 2 * pretrained.dim() : pretrained.dim();
  ZsBaselineResult result;
  TextRelationHead head(text_dim, config.hidden == 0 ? 2 * out_dim : config.hidden, out_dim,
                        config.leaky_slope, rng);
  ad::Parameter ent("entities", pretrained.entities);
  ad::Parameter ent_im("entities_im", complex ? pretrained.entities_im : Tensor(1, 1));
  std::vector<ad::Parameter*> params = head.parameters();
  params.push_back(&ent);
  if (complex) params.push_back(&ent_im);
  Adam adam(AdamConfig{config.learning_rate}, params);
  data::TripleSampler sampler(split);
  std::vector<std::string> names;
  for (const auto& r : split.relations) names.push_back(r.name);

  auto snapshot = [&] {
    KgEmbeddingTable t = pretrained;
    t.entities = ent.value();
    if (complex) t.entities_im = ent_im.value();
    return t;
  };
  auto lookup = [&](std::span<const std::size_t> ids) {
    ad::Var part = ad::gather_rows(ent.var(), ids);
    if (!complex) return part;
    std::vector<ad::Var> both{part, ad::gather_rows(ent_im.var(), ids)};
    return ad::concat_cols(both);
  };

  result.entities = pretrained;
  result.head = head;
  double best = -1.0;
  auto select = [&](std::size_t step) {
    if (split.valid_candidates.empty()) return;
    const KgEmbeddingTable current = snapshot();
    auto ev = evaluate_zs(split.valid_candidates, current, head, texts, names);
    if (ev.report.mrr > best) {
      best = ev.report.mrr;
      result.valid = ev.report;
      result.entities = current;
      result.head = head;
      result.best_step = step;
    }
  };
  select(0);

  const std::size_t n = config.batch_size;
  std::vector<std::size_t> heads(n), tails(n), negs(n);
  Tensor text(n, text_dim);
  for (std::size_t step = 1; step <= config.steps; ++step) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& t = split.train[rng.index(split.train.size())];
      heads[i] = t.head;
      tails[i] = t.tail;
      negs[i] = sampler.pollute_tail(t, rng).tail;
      std::copy(texts[t.relation].begin(), texts[t.relation].end(), text.row(i).begin());
    }
    ad::Var r = head.forward(ad::Var::constant(text));
    ad::Var h = lookup(heads);
    ad::Var pos = score_rows(kind, h, r, lookup(tails), 1e-12);
    ad::Var neg = score_rows(kind, h, r, lookup(negs), 1e-12);
    ad::Var loss = kge_loss(kind, pos, neg, config.base.margin);
    const double value = loss.item();
    if (!std::isfinite(value)) throw NumericalError("baseline training diverged at step " + std::to_string(step));
    result.losses.push_back(value);
    adam.zero_grad();
    ad::backward(loss, params);
    adam.step();
    if (kind == KgeKind::transe) {
      Tensor& e = ent.value();
      for (std::size_t row = 0; row < e.rows(); ++row) {
        auto v = e.row(row);
        const double norm = kernels::l2_norm(v);
        if (norm > 0.0) for (double& x : v) x /= norm;
      }
    }
    if (config.eval_every > 0 && (step % config.eval_every == 0 || step == config.steps)) select(step);
  }
  if (split.valid_candidates.empty()) {
    result.entities = snapshot();
    result.head = head;
    result.best_step = config.steps;
  }
  result.test = evaluate_zs(split.test_candidates, result.entities, result.head, texts, names).report;
  return result;
}

ZsBaselineResult zs_baseline(const data::ZeroShotSplit& split, const eval::TextTable& texts,
                             const ZsBaselineConfig& config, Rng& rng) {
  const auto base = train_kge(split, config.base, rng);
  return zs_baseline(split, texts, base.table, config, rng);
}

}  // namespace zskg::kge
