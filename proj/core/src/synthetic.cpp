#include "zskg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

#include "zskg/checkpoint.hpp"
#include "zskg/error.hpp"
#include "zskg/tensor.hpp"

namespace zskg::data {
namespace {

const std::vector<std::string> kConnectors = {"the", "of", "a", "is", "in", "and", "to", "for", "with", "by"};

std::vector<double> random_unit(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  double norm = 0.0;
  while (norm == 0.0) {
    for (double& x : v) x = rng.normal();
    norm = kernels::l2_norm(v);
  }
  for (double& x : v) x /= norm;
  return v;
}

void normalize(std::vector<double>& v) {
  const double n = kernels::l2_norm(v);
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
}

// Consonant-vowel syllables behind a "zq" prefix: alphabetic, unique per
// index, and never an English stop-word.
std::string make_word(std::size_t index) {
  static constexpr char kConsonants[] = "bcdfghjklmnprstvwxyz";
  static constexpr char kVowels[] = "aeiou";
  std::string word = "zq";
  for (int s = 0; s < 3; ++s) {
    const std::size_t syllable = index % 100;
    index /= 100;
    word += kConsonants[syllable / 5];
    word += kVowels[syllable % 5];
  }
  return word;
}

std::string pad_name(const char* prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, i);
  return buf;
}

// Draws entities of one type in cycles over a shuffled pool, so usage is
// spread evenly across the type's members.
class TypeCycler {
 public:
  TypeCycler(std::vector<EntityId> pool, Rng& rng) : pool_(std::move(pool)), rng_(&rng) { refill(); }
  EntityId next() {
    if (cursor_ == pool_.size()) refill();
    return pool_[cursor_++];
  }
  EntityId random() const { return pool_[rng_->index(pool_.size())]; }
  std::size_t size() const { return pool_.size(); }

 private:
  void refill() {
    rng_->shuffle(pool_);
    cursor_ = 0;
  }
  std::vector<EntityId> pool_;
  std::size_t cursor_ = 0;
  Rng* rng_;
};

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticSpec& spec, Rng& rng) {
  const std::size_t R = spec.relations;
  const std::size_t T = spec.entity_types;
  if (R == 0 || spec.entities == 0 || spec.triples_per_relation == 0) {
    throw DataError("synthetic spec: relations, entities and triples per relation must be positive");
  }
  if (T == 0 || T > spec.entities) throw DataError("synthetic spec: need 1 <= entity types <= entities");
  if (T * T < R) {
    throw DataError("synthetic spec: " + std::to_string(R) + " relations need distinct type pairs but only " +
                    std::to_string(T * T) + " exist");
  }
  if (spec.noise_ratio < 0.0 || spec.noise_ratio >= 1.0) {
    throw DataError("synthetic spec: noise ratio must be in [0, 1)");
  }
  const std::size_t signal_total = R * spec.signal_words;
  const std::size_t noise_per_description =
      spec.noise_ratio == 0.0
          ? 0
          : static_cast<std::size_t>(std::lround(static_cast<double>(spec.signal_words) * spec.noise_ratio /
                                                 (1.0 - spec.noise_ratio)));
  if (spec.vocab < signal_total + (noise_per_description > 0 ? 1 : 0)) {
    throw DataError("synthetic spec: vocabulary of " + std::to_string(spec.vocab) +
                    " cannot hold " + std::to_string(signal_total) + " signal words plus noise words");
  }
  const auto n_valid = static_cast<std::size_t>(std::lround(spec.validation_fraction * static_cast<double>(R)));
  const auto n_unseen = static_cast<std::size_t>(std::lround(spec.unseen_fraction * static_cast<double>(R)));
  if (n_valid + n_unseen >= R) throw DataError("synthetic spec: no seen relations left after the split");
  if (n_unseen == 0) throw DataError("synthetic spec: unseen fraction yields no unseen relations");

  SyntheticDataset out;
  auto& split = out.split;

  // Entity types and latents.
  std::vector<std::vector<double>> type_latent(T);
  for (auto& t : type_latent) t = random_unit(spec.latent_dim, rng);
  std::vector<EntityId> order(spec.entities);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  out.entity_type.assign(spec.entities, 0);
  std::vector<std::vector<EntityId>> members(T);
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.entity_type[order[i]] = i % T;
    members[i % T].push_back(order[i]);
  }
  out.entity_latent.resize(spec.entities);
  for (EntityId e = 0; e < spec.entities; ++e) {
    auto v = type_latent[out.entity_type[e]];
    for (double& x : v) x += spec.entity_noise * rng.normal() / std::sqrt(static_cast<double>(spec.latent_dim));
    normalize(v);
    out.entity_latent[e] = std::move(v);
    split.entities.push_back(pad_name("ent_", e, 4));
  }

  // Relation type pairs, then roles such that every type used by a held-out
  // relation also occurs in the same position among seen relations.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  {
    auto picks = rng.sample_without_replacement(T * T, R);
    for (auto p : picks) pairs.emplace_back(p / T, p % T);
  }
  for (const auto& [h, t] : pairs) {
    const std::size_t heads = members[h].size();
    const std::size_t tails = members[t].size();
    const std::size_t capacity = h == t ? heads * (heads - 1) : heads * tails;
    if (capacity < spec.triples_per_relation) {
      throw DataError("synthetic spec: " + std::to_string(spec.triples_per_relation) +
                      " triples per relation exceed the " + std::to_string(capacity) +
                      " available entity pairs");
    }
  }
  std::vector<RelationRole> roles(R, RelationRole::seen);
  bool covered = false;
  for (int attempt = 0; attempt < 1000 && !covered; ++attempt) {
    std::vector<std::size_t> perm(R);
    for (std::size_t i = 0; i < R; ++i) perm[i] = i;
    rng.shuffle(perm);
    std::fill(roles.begin(), roles.end(), RelationRole::seen);
    for (std::size_t i = 0; i < n_valid; ++i) roles[perm[i]] = RelationRole::validation;
    for (std::size_t i = n_valid; i < n_valid + n_unseen; ++i) roles[perm[i]] = RelationRole::unseen;
    std::set<std::size_t> seen_heads, seen_tails;
    for (std::size_t r = 0; r < R; ++r) {
      if (roles[r] == RelationRole::seen) {
        seen_heads.insert(pairs[r].first);
        seen_tails.insert(pairs[r].second);
      }
    }
    covered = true;
    for (std::size_t r = 0; r < R; ++r) {
      if (roles[r] != RelationRole::seen &&
          (!seen_heads.count(pairs[r].first) || !seen_tails.count(pairs[r].second))) {
        covered = false;
      }
    }
  }
  if (!covered) throw DataError("synthetic spec: cannot cover held-out types with seen relations");

  out.relation_latent.resize(R);
  for (std::size_t r = 0; r < R; ++r) {
    auto c = type_latent[pairs[r].first];
    const auto& tail = type_latent[pairs[r].second];
    c.insert(c.end(), tail.begin(), tail.end());
    out.relation_latent[r] = std::move(c);
  }

  // Vocabulary: signal words first, then noise words.
  const std::size_t cluster_dim = 2 * spec.latent_dim;
  Tensor projection(spec.word_dim, cluster_dim);
  for (double& x : projection.values()) x = rng.normal() / std::sqrt(static_cast<double>(cluster_dim));
  out.word_vectors = text::WordVectorTable(spec.word_dim);
  out.signal_words.resize(R);
  out.signal_vector_sum.assign(R, std::vector<double>(spec.word_dim, 0.0));
  std::size_t word_index = 0;
  for (std::size_t r = 0; r < R; ++r) {
    auto base = kernels::matvec(projection, out.relation_latent[r]);
    normalize(base);
    for (std::size_t s = 0; s < spec.signal_words; ++s) {
      auto noise = random_unit(spec.word_dim, rng);
      std::vector<double> v(spec.word_dim);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = base[i] + spec.word_noise * noise[i];
      normalize(v);
      for (std::size_t i = 0; i < v.size(); ++i) out.signal_vector_sum[r][i] += v[i];
      std::string word = make_word(word_index++);
      out.word_vectors.add(word, std::move(v));
      out.signal_words[r].push_back(std::move(word));
    }
  }
  std::vector<std::string> noise_words;
  std::vector<double> zipf_cdf;
  {
    const std::size_t n_noise = spec.vocab - signal_total;
    double acc = 0.0;
    for (std::size_t k = 0; k < n_noise; ++k) {
      std::string word = make_word(word_index++);
      out.word_vectors.add(word, random_unit(spec.word_dim, rng));
      noise_words.push_back(std::move(word));
      acc += 1.0 / static_cast<double>(k + 1);
      zipf_cdf.push_back(acc);
    }
    for (double& c : zipf_cdf) c /= acc;
  }
  auto draw_noise_word = [&]() -> const std::string& {
    const double u = rng.uniform();
    auto it = std::lower_bound(zipf_cdf.begin(), zipf_cdf.end(), u);
    const auto k = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
        it - zipf_cdf.begin(), static_cast<std::ptrdiff_t>(zipf_cdf.size()) - 1));
    return noise_words[k];
  };

  // Relations with descriptions.
  for (std::size_t r = 0; r < R; ++r) {
    std::vector<std::string> words = out.signal_words[r];
    for (std::size_t i = 0; i < noise_per_description; ++i) words.push_back(draw_noise_word());
    if (noise_per_description > 0) {
      for (int i = 0; i < 2; ++i) words.push_back(kConnectors[rng.index(kConnectors.size())]);
    }
    rng.shuffle(words);
    std::string description;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i) description += ' ';
      description += words[i];
    }
    description += '.';
    split.relations.push_back({r, pad_name("rel_", r, 2), roles[r], description});
  }
  out.stopwords = kConnectors;

  // Triples.
  std::vector<TypeCycler> head_cycle;
  std::vector<TypeCycler> tail_cycle;
  for (std::size_t t = 0; t < T; ++t) {
    head_cycle.emplace_back(members[t], rng);
    tail_cycle.emplace_back(members[t], rng);
  }
  std::vector<std::vector<Triple>> by_relation(R);
  for (std::size_t r = 0; r < R; ++r) {
    const auto [ht, tt] = pairs[r];
    std::set<std::pair<EntityId, EntityId>> used;
    while (by_relation[r].size() < spec.triples_per_relation) {
      EntityId h = head_cycle[ht].next();
      EntityId t = tail_cycle[tt].next();
      int guard = 0;
      while ((h == t || used.count({h, t})) && guard++ < 10000) {
        h = head_cycle[ht].random();
        t = tail_cycle[tt].random();
      }
      if (h == t || used.count({h, t})) throw DataError("synthetic spec: cannot place distinct triples");
      used.insert({h, t});
      by_relation[r].push_back({h, r, t});
    }
  }
  for (std::size_t r = 0; r < R; ++r) {
    auto& target = roles[r] == RelationRole::seen         ? split.train
                   : roles[r] == RelationRole::validation ? split.valid
                                                          : split.test;
    target.insert(target.end(), by_relation[r].begin(), by_relation[r].end());
  }

  // Candidate sets: the ground truth plus distractors that are not true
  // tails of the query.
  auto build_candidates = [&](const std::vector<Triple>& triples) {
    std::vector<CandidateSet> sets;
    for (const auto& q : triples) {
      std::set<EntityId> truths;
      for (const auto& t : by_relation[q.relation]) {
        if (t.head == q.head) truths.insert(t.tail);
      }
      const std::size_t available = spec.entities - truths.size();
      const std::size_t distractors = std::min(spec.candidates_per_query - 1, available);
      CandidateSet c{q.head, q.relation, q.tail, {q.tail}};
      std::set<EntityId> picked;
      while (picked.size() < distractors) {
        EntityId e = rng.index(spec.entities);
        if (truths.count(e) || !picked.insert(e).second) continue;
        c.candidates.push_back(e);
      }
      rng.shuffle(c.candidates);
      sets.push_back(std::move(c));
    }
    return sets;
  };
  split.valid_candidates = build_candidates(split.valid);
  split.test_candidates = build_candidates(split.test);
  split.reindex();
  split.validate();

  // Separability oracle: nearest cluster to the concatenated pair latents.
  std::size_t correct = 0, total = 0;
  for (const auto& triples : by_relation) {
    for (const auto& t : triples) {
      auto feature = out.entity_latent[t.head];
      feature.insert(feature.end(), out.entity_latent[t.tail].begin(), out.entity_latent[t.tail].end());
      std::size_t best = 0;
      double best_cos = -2.0;
      for (std::size_t r = 0; r < R; ++r) {
        const double c = kernels::cosine(feature, out.relation_latent[r]);
        if (c > best_cos) {
          best_cos = c;
          best = r;
        }
      }
      correct += best == t.relation ? 1 : 0;
      ++total;
    }
  }
  out.nearest_cluster_accuracy = static_cast<double>(correct) / static_cast<double>(total);
  return out;
}

void save_synthetic(const SyntheticDataset& dataset, const std::filesystem::path& root) {
  save_dataset(dataset.split, root);
  dataset.word_vectors.save(root / "word_vectors.txt");
  std::string stop;
  for (const auto& w : dataset.stopwords) stop += w + "\n";
  write_text_file(root / "stopwords.txt", stop);
  nlohmann::json latent = {{"relation_latent", dataset.relation_latent},
                           {"entity_type", dataset.entity_type},
                           {"signal_words", dataset.signal_words},
                           {"nearest_cluster_accuracy", dataset.nearest_cluster_accuracy}};
  write_text_file(root / "latent.json", latent.dump(1) + "\n");
}

}  // namespace zskg::data
