#include "zskg/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "zskg/checkpoint.hpp"
#include "zskg/error.hpp"

namespace zskg::data {
namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(RelationRole role) {
  switch (role) {
    case RelationRole::seen:
      return "seen";
    case RelationRole::validation:
      return "validation";
    case RelationRole::unseen:
      return "unseen";
  }
  return "seen";
}

RelationRole parse_role(const std::string& text) {
  if (text == "seen") return RelationRole::seen;
  if (text == "validation") return RelationRole::validation;
  if (text == "unseen") return RelationRole::unseen;
  throw DataError("unknown relation role '" + text + "'");
}

void ZeroShotSplit::reindex() {
  entity_index_.clear();
  relation_index_.clear();
  for (EntityId i = 0; i < entities.size(); ++i) entity_index_.emplace(entities[i], i);
  for (RelationId i = 0; i < relations.size(); ++i) relation_index_.emplace(relations[i].name, i);
}

EntityId ZeroShotSplit::entity_id(const std::string& name) const {
  auto it = entity_index_.find(name);
  if (it == entity_index_.end()) throw DataError("unknown entity '" + name + "'");
  return it->second;
}

RelationId ZeroShotSplit::relation_id(const std::string& name) const {
  auto it = relation_index_.find(name);
  if (it == relation_index_.end()) throw DataError("unknown relation '" + name + "'");
  return it->second;
}

std::vector<RelationId> ZeroShotSplit::relations_with_role(RelationRole role) const {
  std::vector<RelationId> out;
  for (const auto& r : relations) {
    if (r.role == role) out.push_back(r.id);
  }
  return out;
}

std::vector<Triple> ZeroShotSplit::train_triples_of(RelationId relation) const {
  std::vector<Triple> out;
  for (const auto& t : train) {
    if (t.relation == relation) out.push_back(t);
  }
  return out;
}

SplitStats ZeroShotSplit::stats() const {
  SplitStats s;
  s.entities = entities.size();
  s.triples = train.size() + valid.size() + test.size();
  s.seen_relations = relations_with_role(RelationRole::seen).size();
  s.validation_relations = relations_with_role(RelationRole::validation).size();
  s.unseen_relations = relations_with_role(RelationRole::unseen).size();
  return s;
}

namespace {

void check_triples(const ZeroShotSplit& split, const std::vector<Triple>& triples,
                   RelationRole role, const std::string& file) {
  std::set<Triple> seen;
  for (const auto& t : triples) {
    if (t.head >= split.entities.size() || t.tail >= split.entities.size()) {
      throw DataError(file + ": dangling entity id");
    }
    if (t.relation >= split.relations.size()) throw DataError(file + ": dangling relation id");
    const auto& rel = split.relations[t.relation];
    if (rel.role != role) {
      throw DataError(file + ": relation '" + rel.name + "' has role " + to_string(rel.role) +
                      " but appears among " + to_string(role) + " triples");
    }
    if (!seen.insert(t).second) {
      throw DataError(file + ": duplicate triple (" + split.entities[t.head] + ", " + rel.name +
                      ", " + split.entities[t.tail] + ")");
    }
  }
}

void check_candidates(const ZeroShotSplit& split, const std::vector<Triple>& triples,
                      const std::vector<CandidateSet>& sets, const std::string& file) {
  std::set<Triple> facts(triples.begin(), triples.end());
  std::set<Triple> covered;
  for (const auto& c : sets) {
    const Triple key{c.head, c.relation, c.ground_truth};
    if (!facts.count(key)) throw DataError(file + ": candidate set for a triple not in the split");
    if (!covered.insert(key).second) throw DataError(file + ": repeated candidate set");
    if (c.candidates.empty()) throw DataError(file + ": empty candidate list");
    std::set<EntityId> unique;
    bool has_truth = false;
    for (EntityId e : c.candidates) {
      if (e >= split.entities.size()) throw DataError(file + ": dangling candidate id");
      if (!unique.insert(e).second) {
        throw DataError(file + ": duplicate candidate '" + split.entities[e] + "'");
      }
      has_truth = has_truth || e == c.ground_truth;
    }
    if (!has_truth) {
      throw DataError(file + ": ground truth '" + split.entities[c.ground_truth] +
                      "' missing from its candidates");
    }
  }
  if (covered.size() != facts.size()) {
    throw DataError(file + ": " + std::to_string(facts.size() - covered.size()) +
                    " triple(s) without a candidate set");
  }
}

}  // namespace

void ZeroShotSplit::validate() const {
  if (entity_index_.size() != entities.size()) throw DataError("entity symbols are not unique");
  if (relation_index_.size() != relations.size()) throw DataError("relation names are not unique");
  for (RelationId i = 0; i < relations.size(); ++i) {
    if (relations[i].id != i) throw DataError("relation ids are not contiguous");
  }
  check_triples(*this, train, RelationRole::seen, "triples.train.tsv");
  check_triples(*this, valid, RelationRole::validation, "triples.valid.tsv");
  check_triples(*this, test, RelationRole::unseen, "triples.test.tsv");
  if (!valid_candidates.empty() || !valid.empty()) {
    check_candidates(*this, valid, valid_candidates, "candidates.valid.json");
  }
  if (!test_candidates.empty() || !test.empty()) {
    check_candidates(*this, test, test_candidates, "candidates.test.json");
  }
}

namespace {

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing file: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

json read_json(const fs::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(path.filename().string() + ": " + e.what());
  }
}

std::vector<Triple> read_triples(const ZeroShotSplit& split, const fs::path& path) {
  const auto name = path.filename().string();
  std::vector<Triple> triples;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (line.empty()) continue;
    const std::string where = name + " line " + std::to_string(i + 1);
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() != 3) {
      throw DataError(where + ": expected head<TAB>relation<TAB>tail, got " +
                      std::to_string(fields.size()) + " field(s)");
    }
    if (!split.has_entity(fields[0])) throw DataError(where + ": unknown entity '" + fields[0] + "'");
    if (!split.has_relation(fields[1])) {
      throw DataError(where + ": unknown relation '" + fields[1] + "'");
    }
    if (!split.has_entity(fields[2])) throw DataError(where + ": unknown entity '" + fields[2] + "'");
    triples.push_back(
        {split.entity_id(fields[0]), split.relation_id(fields[1]), split.entity_id(fields[2])});
  }
  return triples;
}

std::vector<CandidateSet> read_candidates(const ZeroShotSplit& split, const fs::path& path) {
  const auto name = path.filename().string();
  const json doc = read_json(path);
  if (!doc.is_array()) throw DataError(name + ": expected a JSON array");
  std::vector<CandidateSet> sets;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& item = doc[i];
    const std::string where = name + " entry " + std::to_string(i);
    try {
      auto entity = [&](const std::string& sym) {
        if (!split.has_entity(sym)) throw DataError(where + ": unknown entity '" + sym + "'");
        return split.entity_id(sym);
      };
      CandidateSet c;
      c.head = entity(item.at("head").get<std::string>());
      const auto rel = item.at("relation").get<std::string>();
      if (!split.has_relation(rel)) throw DataError(where + ": unknown relation '" + rel + "'");
      c.relation = split.relation_id(rel);
      c.ground_truth = entity(item.at("tail").get<std::string>());
      for (const auto& sym : item.at("candidates")) c.candidates.push_back(entity(sym.get<std::string>()));
      sets.push_back(std::move(c));
    } catch (const json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return sets;
}

}  // namespace

ZeroShotSplit load_dataset(const fs::path& root, const DatasetConfig& config) {
  ZeroShotSplit split;
  {
    const auto lines = read_lines(root / "entities.txt");
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      split.entities.push_back(lines[i]);
    }
    std::set<std::string> unique(split.entities.begin(), split.entities.end());
    if (unique.size() != split.entities.size()) {
      throw DataError("entities.txt: duplicate entity symbol");
    }
  }
  {
    const json doc = read_json(root / "relations.json");
    if (!doc.is_array()) throw DataError("relations.json: expected a JSON array");
    std::map<std::string, RelationRole> roles;
    for (std::size_t i = 0; i < doc.size(); ++i) {
      const auto& item = doc[i];
      const std::string where = "relations.json entry " + std::to_string(i);
      try {
        Relation r;
        r.id = split.relations.size();
        r.name = item.at("name").get<std::string>();
        r.role = parse_role(item.at("role").get<std::string>());
        r.description = item.value("description", "");
        auto [it, inserted] = roles.emplace(r.name, r.role);
        if (!inserted) {
          if (it->second != r.role) {
            throw DataError(where + ": relation '" + r.name + "' listed with overlapping roles " +
                            to_string(it->second) + " and " + to_string(r.role));
          }
          throw DataError(where + ": duplicate relation '" + r.name + "'");
        }
        split.relations.push_back(std::move(r));
      } catch (const json::exception& e) {
        throw DataError(where + ": " + e.what());
      }
    }
  }
  split.reindex();

  split.train = read_triples(split, root / "triples.train.tsv");
  split.valid = read_triples(split, root / "triples.valid.tsv");
  split.test = read_triples(split, root / "triples.test.tsv");
  if (split.train.empty()) throw DataError("triples.train.tsv: no triples");
  if (split.test.empty()) throw DataError("triples.test.tsv: no triples");
  if (split.valid.empty() && !split.relations_with_role(RelationRole::validation).empty()) {
    throw DataError("triples.valid.tsv: no triples");
  }

  auto load_candidates = [&](const char* file, const std::vector<Triple>& triples) {
    const fs::path path = root / file;
    if (!fs::exists(path)) {
      if (config.require_candidates && !triples.empty()) throw DataError("missing file: " + path.string());
      return std::vector<CandidateSet>{};
    }
    return read_candidates(split, path);
  };
  split.valid_candidates = load_candidates("candidates.valid.json", split.valid);
  split.test_candidates = load_candidates("candidates.test.json", split.test);
  split.validate();
  return split;
}

void save_dataset(const ZeroShotSplit& split, const fs::path& root) {
  fs::create_directories(root);
  {
    std::string text;
    for (const auto& e : split.entities) text += e + "\n";
    write_text_file(root / "entities.txt", text);
  }
  {
    json doc = json::array();
    for (const auto& r : split.relations) {
      doc.push_back({{"name", r.name}, {"role", to_string(r.role)}, {"description", r.description}});
    }
    write_text_file(root / "relations.json", doc.dump(2) + "\n");
  }
  auto write_triples = [&](const char* file, const std::vector<Triple>& triples) {
    std::string text;
    for (const auto& t : triples) {
      text += split.entities[t.head] + "\t" + split.relations[t.relation].name + "\t" +
              split.entities[t.tail] + "\n";
    }
    write_text_file(root / file, text);
  };
  write_triples("triples.train.tsv", split.train);
  write_triples("triples.valid.tsv", split.valid);
  write_triples("triples.test.tsv", split.test);
  auto write_candidates = [&](const char* file, const std::vector<CandidateSet>& sets) {
    std::string text = "[\n";
    for (std::size_t i = 0; i < sets.size(); ++i) {
      const auto& c = sets[i];
      json item = {{"head", split.entities[c.head]},
                   {"relation", split.relations[c.relation].name},
                   {"tail", split.entities[c.ground_truth]}};
      json cands = json::array();
      for (EntityId e : c.candidates) cands.push_back(split.entities[e]);
      item["candidates"] = cands;
      text += "  " + item.dump() + (i + 1 < sets.size() ? ",\n" : "\n");
    }
    text += "]\n";
    write_text_file(root / file, text);
  };
  write_candidates("candidates.valid.json", split.valid_candidates);
  write_candidates("candidates.test.json", split.test_candidates);
}

NeighborIndex NeighborIndex::build(const ZeroShotSplit& split, std::size_t max_neighbors,
                                   std::uint64_t seed) {
  NeighborIndex index;
  index.max_neighbors_ = max_neighbors;
  index.lists_.assign(split.entities.size(), {});
  for (const auto& t : split.background_graph()) {
    index.lists_[t.head].push_back({t.relation, t.tail});
  }
  for (EntityId e = 0; e < index.lists_.size(); ++e) {
    auto& list = index.lists_[e];
    std::sort(list.begin(), list.end());
    if (list.size() > max_neighbors) {
      Rng rng = Rng::derive(seed, "neighbors", {e});
      auto picks = rng.sample_without_replacement(list.size(), max_neighbors);
      std::sort(picks.begin(), picks.end());
      std::vector<Neighbor> kept;
      kept.reserve(max_neighbors);
      for (auto i : picks) kept.push_back(list[i]);
      list = std::move(kept);
    }
  }
  return index;
}

TripleSampler::TripleSampler(const ZeroShotSplit& split)
    : entity_count_(split.entities.size()), by_relation_(split.relations.size()) {
  for (const auto& t : split.train) {
    by_relation_[t.relation].push_back(t);
    known_.insert(t);
  }
  for (const auto& r : split.relations) relation_names_.push_back(r.name);
}

Triple TripleSampler::pollute_tail(const Triple& positive, Rng& rng) const {
  // A relation whose head is linked to every entity cannot be polluted.
  for (int attempt = 0; attempt < 10000; ++attempt) {
    Triple t{positive.head, positive.relation, rng.index(entity_count_)};
    if (!known_.count(t)) return t;
  }
  throw DataError("cannot sample a negative tail for relation '" +
                  relation_names_.at(positive.relation) + "'");
}

TaskBatch TripleSampler::sample_task_batch(RelationId relation, std::size_t k_ref,
                                           std::size_t batch, Rng& rng) const {
  const auto& triples = by_relation_.at(relation);
  if (triples.size() < k_ref + 1) {
    throw DataError("relation '" + relation_names_.at(relation) + "' has " +
                    std::to_string(triples.size()) + " training triples; need at least " +
                    std::to_string(k_ref + 1));
  }
  std::vector<std::size_t> order(triples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  TaskBatch out;
  for (std::size_t i = 0; i < k_ref; ++i) out.references.push_back(triples[order[i]]);
  const std::size_t rest = triples.size() - k_ref;
  for (std::size_t i = 0; i < batch; ++i) {
    const std::size_t pick = i < rest ? i : rng.index(rest);
    out.positives.push_back(triples[order[k_ref + pick]]);
  }
  for (const auto& p : out.positives) out.negatives.push_back(pollute_tail(p, rng));
  return out;
}

}  // namespace zskg::data
