#include "zskg/kge.hpp"

#include <cmath>
#include <stdexcept>

#include "zskg/error.hpp"
#include "zskg/layers.hpp"
#include "zskg/optim.hpp"

namespace zskg::kge {

std::string to_string(KgeKind kind) {
  switch (kind) {
    case KgeKind::transe: return "transe";
    case KgeKind::distmult: return "distmult";
    case KgeKind::complex: return "complex";
  }
  return "?";
}

KgeKind parse_kind(const std::string& text) {
  if (text == "transe") return KgeKind::transe;
  if (text == "distmult") return KgeKind::distmult;
  if (text == "complex") return KgeKind::complex;
  throw ConfigError("unknown KGE kind '" + text + "' (expected transe, distmult or complex)");
}

std::string to_string(TableSource source) {
  switch (source) {
    case TableSource::transe: return "transe";
    case TableSource::distmult: return "distmult";
    case TableSource::complex_real: return "complex-real";
    case TableSource::complex_imag: return "complex-imag";
  }
  return "?";
}

TableSource parse_source(const std::string& text) {
  if (text == "transe") return TableSource::transe;
  if (text == "distmult") return TableSource::distmult;
  if (text == "complex-real") return TableSource::complex_real;
  if (text == "complex-imag") return TableSource::complex_imag;
  throw ConfigError("unknown embedding source '" + text +
                    "' (expected transe, distmult, complex-real or complex-imag)");
}

TableSource default_source(KgeKind kind) {
  switch (kind) {
    case KgeKind::transe: return TableSource::transe;
    case KgeKind::distmult: return TableSource::distmult;
    case KgeKind::complex: return TableSource::complex_real;
  }
  return TableSource::transe;
}

namespace {

std::vector<double> joined(const Tensor& re, const Tensor* im, std::size_t row) {
  std::vector<double> out(re.row(row).begin(), re.row(row).end());
  if (im) out.insert(out.end(), im->row(row).begin(), im->row(row).end());
  return out;
}

}  // namespace

std::vector<double> KgEmbeddingTable::entity(data::EntityId e) const {
  return joined(entities, kind == KgeKind::complex ? &entities_im : nullptr, e);
}

std::vector<double> KgEmbeddingTable::relation(data::RelationId r) const {
  return joined(relations, kind == KgeKind::complex ? &relations_im : nullptr, r);
}

EmbeddingView KgEmbeddingTable::view(TableSource source) const {
  const bool complex_source =
      source == TableSource::complex_real || source == TableSource::complex_imag;
  const bool ok = complex_source ? kind == KgeKind::complex
                                 : default_source(kind) == source;
  if (!ok) {
    throw ConfigError("embedding source '" + to_string(source) + "' does not match a " +
                      to_string(kind) + " table");
  }
  if (source == TableSource::complex_imag) return {entities_im, relations_im};
  return {entities, relations};
}

Checkpoint KgEmbeddingTable::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.kind = "kge";
  ckpt.config = {{"kind", to_string(kind)}, {"dim", dim()}};
  ckpt.tensors["entities"] = entities;
  ckpt.tensors["relations"] = relations;
  if (kind == KgeKind::complex) {
    ckpt.tensors["entities_im"] = entities_im;
    ckpt.tensors["relations_im"] = relations_im;
  }
  return ckpt;
}

KgEmbeddingTable KgEmbeddingTable::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "kge") throw DataError("checkpoint of kind '" + ckpt.kind + "' is not a KGE table");
  if (!ckpt.config.contains("kind") || !ckpt.config.at("kind").is_string()) {
    throw DataError("KGE checkpoint does not record its model kind");
  }
  KgEmbeddingTable table;
  try {
    table.kind = parse_kind(ckpt.config.at("kind").get<std::string>());
  } catch (const ConfigError& e) {
    throw DataError(e.what());
  }
  table.entities = ckpt.tensor("entities");
  table.relations = ckpt.tensor("relations");
  if (table.relations.cols() != table.entities.cols()) {
    throw DataError("KGE checkpoint: entity and relation widths differ");
  }
  if (table.kind == KgeKind::complex) {
    table.entities_im = ckpt.tensor("entities_im");
    table.relations_im = ckpt.tensor("relations_im");
    if (!table.entities_im.same_shape(table.entities) || !table.relations_im.same_shape(table.relations)) {
      throw DataError("KGE checkpoint: imaginary tables do not match the real ones");
    }
  }
  return table;
}

void KgEmbeddingTable::save(const std::filesystem::path& path) const { to_checkpoint().save(path); }

KgEmbeddingTable KgEmbeddingTable::load(const std::filesystem::path& path) {
  return from_checkpoint(Checkpoint::load(path));
}

double score_triple(KgeKind kind, std::span<const double> h, std::span<const double> r,
                    std::span<const double> t) {
  if (h.size() != r.size() || h.size() != t.size()) {
    throw std::invalid_argument("score_triple: dimension mismatch");
  }
  const std::size_t n = h.size();
  switch (kind) {
    case KgeKind::transe: {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = h[i] + r[i] - t[i];
        s += d * d;
      }
      return -std::sqrt(s);
    }
    case KgeKind::distmult: {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += h[i] * r[i] * t[i];
      return s;
    }
    case KgeKind::complex: {
      if (n % 2 != 0) throw std::invalid_argument("score_triple: ComplEx vectors need re and im halves");
      const std::size_t d = n / 2;
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double hr = h[i], hi = h[d + i], rr = r[i], ri = r[d + i], tr = t[i], ti = t[d + i];
        s += hr * rr * tr + hi * rr * ti + hr * ri * ti - hi * ri * tr;
      }
      return s;
    }
  }
  return 0.0;
}

ad::Var score_rows(KgeKind kind, const ad::Var& h, const ad::Var& r, const ad::Var& t, double eps) {
  using namespace ad;
  switch (kind) {
    case KgeKind::transe: {
      Var d = h + r - t;
      return neg(sqrt(add_scalar(sum_cols(square(d)), eps)));
    }
    case KgeKind::distmult:
      return sum_cols(h * r * t);
    case KgeKind::complex: {
      if (h.cols() % 2 != 0) throw std::invalid_argument("score_rows: ComplEx rows need re and im halves");
      const std::size_t d = h.cols() / 2;
      Var hr = slice_cols(h, 0, d), hi = slice_cols(h, d, d);
      Var rr = slice_cols(r, 0, d), ri = slice_cols(r, d, d);
      Var tr = slice_cols(t, 0, d), ti = slice_cols(t, d, d);
      return sum_cols(hr * rr * tr + hi * rr * ti + hr * ri * ti - hi * ri * tr);
    }
  }
  throw std::invalid_argument("score_rows: unknown kind");
}

ad::Var kge_loss(KgeKind kind, const ad::Var& positive, const ad::Var& negative, double margin) {
  using namespace ad;
  if (kind == KgeKind::transe) return mean_all(relu(add_scalar(negative - positive, margin)));
  return mean_all(softplus(neg(positive)) + softplus(negative));
}

KgEmbeddingTable init_kge(const data::ZeroShotSplit& split, KgeKind kind, std::size_t dim, Rng& rng) {
  if (dim == 0) throw ConfigError("KGE dimension must be positive");
  KgEmbeddingTable table;
  table.kind = kind;
  const std::size_t ne = split.entity_count();
  const std::size_t nr = split.relations.size();
  table.entities = uniform_init(ne, dim, dim, rng);
  table.relations = uniform_init(nr, dim, dim, rng);
  if (kind == KgeKind::complex) {
    table.entities_im = uniform_init(ne, dim, dim, rng);
    table.relations_im = uniform_init(nr, dim, dim, rng);
  }
  if (kind == KgeKind::transe) {
    for (std::size_t e = 0; e < ne; ++e) {
      auto row = table.entities.row(e);
      const double n = kernels::l2_norm(row);
      if (n > 0.0) for (double& v : row) v /= n;
    }
  }
  return table;
}

KgeTrainResult train_kge(const data::ZeroShotSplit& split, const KgeConfig& config, Rng& rng) {
  if (config.batch_size == 0) throw ConfigError("KGE batch size must be positive");
  if (config.learning_rate <= 0.0) throw ConfigError("KGE learning rate must be positive");
  KgeTrainResult result;
  result.table = init_kge(split, config.kind, config.dim, rng);
  const auto& train = split.train;
  if (train.empty()) throw DataError("KGE training needs at least one training triple");
  if (config.steps == 0) return result;

  const bool complex = config.kind == KgeKind::complex;
  ad::Parameter ent("entities", result.table.entities);
  ad::Parameter rel("relations", result.table.relations);
  ad::Parameter ent_im("entities_im", complex ? result.table.entities_im : Tensor(1, 1));
  ad::Parameter rel_im("relations_im", complex ? result.table.relations_im : Tensor(1, 1));
  std::vector<ad::Parameter*> params{&ent, &rel};
  if (complex) {
    params.push_back(&ent_im);
    params.push_back(&rel_im);
  }
  Adam adam(AdamConfig{config.learning_rate}, params);
  data::TripleSampler sampler(split);

  auto lookup = [&](const ad::Parameter& re, const ad::Parameter& im, std::span<const std::size_t> ids) {
    ad::Var part = ad::gather_rows(re.var(), ids);
    if (!complex) return part;
    std::vector<ad::Var> both{part, ad::gather_rows(im.var(), ids)};
    return ad::concat_cols(both);
  };

  std::vector<std::size_t> heads(config.batch_size), rels(config.batch_size), tails(config.batch_size),
      neg_tails(config.batch_size);
  result.losses.reserve(config.steps);
  for (std::size_t step = 0; step < config.steps; ++step) {
    for (std::size_t i = 0; i < config.batch_size; ++i) {
      const auto& t = train[rng.index(train.size())];
      heads[i] = t.head;
      rels[i] = t.relation;
      tails[i] = t.tail;
      neg_tails[i] = sampler.pollute_tail(t, rng).tail;
    }
    ad::Var h = lookup(ent, ent_im, heads);
    ad::Var r = lookup(rel, rel_im, rels);
    ad::Var pos = score_rows(config.kind, h, r, lookup(ent, ent_im, tails), 1e-12);
    ad::Var neg = score_rows(config.kind, h, r, lookup(ent, ent_im, neg_tails), 1e-12);
    ad::Var loss = kge_loss(config.kind, pos, neg, config.margin);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw NumericalError("KGE training diverged at step " + std::to_string(step));
    }
    result.losses.push_back(value);
    adam.zero_grad();
    ad::backward(loss, params);
    adam.step();
    if (config.kind == KgeKind::transe) {
      Tensor& e = ent.value();
      for (std::size_t row = 0; row < e.rows(); ++row) {
        auto v = e.row(row);
        const double n = kernels::l2_norm(v);
        if (n > 0.0) for (double& x : v) x /= n;
      }
    }
  }
  result.table.entities = ent.value();
  result.table.relations = rel.value();
  if (complex) {
    result.table.entities_im = ent_im.value();
    result.table.relations_im = rel_im.value();
  }
  return result;
}

}  // namespace zskg::kge
