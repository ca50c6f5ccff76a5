#include "zskg/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "zskg/digest.hpp"
#include "zskg/error.hpp"
#include "zskg/gan_train.hpp"

namespace zskg {

ExperimentConfig::ExperimentConfig() { kge.kind = kge::KgeKind::distmult; }

void ExperimentConfig::apply(const KeyValues& values) {
  for (const auto& [key, value] : values) {
    if (key == "data") data = value;
    else if (key == "out") out = value;
    else if (key == "seed") seed = parse_u64(key, value);
    else if (key == "threads") threads = parse_count(key, value);
    else if (key == "dim") dim = parse_count(key, value);
    else if (key == "word_vectors") word_vectors = value;
    else if (key == "stopwords") stopwords = value;
    else if (key == "embedding_source") embedding_source = value;
    else if (key == "kge.kind") kge.kind = kge::parse_kind(value);
    else if (key == "kge.steps") kge.steps = parse_count(key, value);
    else if (key == "kge.batch_size") kge.batch_size = parse_count(key, value);
    else if (key == "kge.learning_rate") kge.learning_rate = parse_real(key, value);
    else if (key == "kge.margin") kge.margin = parse_real(key, value);
    else if (key == "encoder.k_ref") encoder.k_ref = parse_count(key, value);
    else if (key == "encoder.batch_size") encoder.batch_size = parse_count(key, value);
    else if (key == "encoder.margin") encoder.margin = parse_real(key, value);
    else if (key == "encoder.learning_rate") encoder.learning_rate = parse_real(key, value);
    else if (key == "encoder.steps") encoder.steps = parse_count(key, value);
    else if (key == "encoder.eval_every") encoder.eval_every = parse_count(key, value);
    else if (key == "encoder.max_neighbors") encoder.max_neighbors = parse_count(key, value);
    else if (key.rfind("gan.", 0) == 0) gan.apply({{key.substr(4), value}});
    else throw ConfigError("unknown config key '" + key + "'");
  }
  kge.dim = dim;
}

KeyValues ExperimentConfig::to_key_values() const {
  KeyValues kv{{"data", data.string()},
               {"out", out.string()},
               {"seed", std::to_string(seed)},
               {"threads", std::to_string(threads)},
               {"dim", std::to_string(dim)},
               {"word_vectors", word_vectors},
               {"stopwords", stopwords},
               {"embedding_source", embedding_source},
               {"kge.kind", kge::to_string(kge.kind)},
               {"kge.steps", std::to_string(kge.steps)},
               {"kge.batch_size", std::to_string(kge.batch_size)},
               {"kge.learning_rate", format_real(kge.learning_rate)},
               {"kge.margin", format_real(kge.margin)},
               {"encoder.k_ref", std::to_string(encoder.k_ref)},
               {"encoder.batch_size", std::to_string(encoder.batch_size)},
               {"encoder.margin", format_real(encoder.margin)},
               {"encoder.learning_rate", format_real(encoder.learning_rate)},
               {"encoder.steps", std::to_string(encoder.steps)},
               {"encoder.eval_every", std::to_string(encoder.eval_every)},
               {"encoder.max_neighbors", std::to_string(encoder.max_neighbors)}};
  for (const auto& [k, v] : gan.to_key_values()) kv.emplace_back("gan." + k, v);
  return kv;
}

void ExperimentConfig::validate() const {
  if (dim == 0) throw ConfigError("dim must be positive");
  if (threads == 0) throw ConfigError("threads must be at least 1");
  if (kge.batch_size == 0 || kge.learning_rate <= 0.0) throw ConfigError("kge batch size and learning rate must be positive");
  if (encoder.k_ref == 0 || encoder.batch_size == 0 || encoder.margin <= 0.0 || encoder.learning_rate <= 0.0) {
    throw ConfigError("encoder k_ref, batch size, margin and learning rate must be positive");
  }
  if (!embedding_source.empty()) {
    const auto source = kge::parse_source(embedding_source);
    const bool complex_source =
        source == kge::TableSource::complex_real || source == kge::TableSource::complex_imag;
    if (complex_source != (kge.kind == kge::KgeKind::complex) ||
        (!complex_source && kge::default_source(kge.kind) != source)) {
      throw ConfigError("embedding_source '" + embedding_source + "' does not match kge.kind");
    }
  }
  gan.validate();
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  ExperimentConfig config;
  config.apply(load_key_values(path));
  return config;
}

StageSeeds StageSeeds::derive(std::uint64_t root) {
  StageSeeds s;
  s.kge = Rng::derive(root, "kge").next_u64();
  s.neighbors = Rng::derive(root, "neighbors").next_u64();
  s.encoder = Rng::derive(root, "encoder").next_u64();
  s.gan = Rng::derive(root, "gan").next_u64();
  s.eval = Rng::derive(root, "eval").next_u64();
  return s;
}

nlohmann::json StageSeeds::to_json() const {
  return {{"kge", kge}, {"neighbors", neighbors}, {"encoder", encoder}, {"gan", gan}, {"eval", eval}};
}

void RunManifest::add_input(const std::filesystem::path& path) { inputs[path.string()] = sha256_file(path); }

void RunManifest::add_artifact(const std::string& name, const std::filesystem::path& path) {
  artifacts[name] = {path.string(), sha256_file(path)};
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json cfg = nlohmann::json::array();
  for (const auto& [k, v] : config) cfg.push_back(nlohmann::json::array({k, v}));
  nlohmann::json arts = nlohmann::json::object();
  for (const auto& [name, a] : artifacts) arts[name] = {{"path", a.path}, {"sha256", a.sha256}};
  nlohmann::json times = nlohmann::json::array();
  for (const auto& [stage, secs] : timings) times.push_back({{"stage", stage}, {"seconds", secs}});
  return {{"toolkit", "zskg"},  {"version", version}, {"command", command}, {"config", cfg},
          {"seeds", seeds},     {"inputs", inputs},   {"artifacts", arts},  {"timings", times},
          {"resumed", resumed}};
}

RunManifest RunManifest::from_json(const nlohmann::json& doc) {
  RunManifest m;
  try {
    m.command = doc.at("command").get<std::string>();
    m.version = doc.value("version", std::string(kToolkitVersion));
    for (const auto& pair : doc.at("config")) {
      m.config.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<std::string>());
    }
    m.seeds = doc.value("seeds", nlohmann::json::object());
    m.inputs = doc.value("inputs", std::map<std::string, std::string>{});
    const auto artifacts = doc.value("artifacts", nlohmann::json::object());
    for (const auto& [name, a] : artifacts.items()) {
      m.artifacts[name] = {a.at("path").get<std::string>(), a.at("sha256").get<std::string>()};
    }
    for (const auto& t : doc.value("timings", nlohmann::json::array())) {
      m.timings.emplace_back(t.at("stage").get<std::string>(), t.at("seconds").get<double>());
    }
    m.resumed = doc.value("resumed", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed run manifest: ") + e.what());
  }
  return m;
}

void RunManifest::save(const std::filesystem::path& path) const { write_text_file(path, dump_json(to_json())); }

RunManifest RunManifest::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string dump_json(const nlohmann::json& doc) { return doc.dump(2) + "\n"; }

std::filesystem::path shipped_stopwords_path() {
  return std::filesystem::path(ZSKG_DATA_DIR) / "stopwords.txt";
}

TextInputs build_text_inputs(const data::ZeroShotSplit& split, const std::filesystem::path& data_dir,
                             const std::string& word_vectors, const std::string& stopwords) {
  TextInputs out;
  const std::filesystem::path wv = word_vectors.empty() ? data_dir / "word_vectors.txt" : std::filesystem::path(word_vectors);
  const auto table = text::WordVectorTable::load(wv);
  out.files.push_back(wv);
  text::StopWords stop;
  if (stopwords.empty()) {
    const auto shipped = shipped_stopwords_path();
    stop = text::load_stopwords(shipped);
    out.files.push_back(shipped);
    const auto local = data_dir / "stopwords.txt";
    if (std::filesystem::exists(local)) {
      auto extra = text::load_stopwords(local);
      stop.insert(extra.begin(), extra.end());
      out.files.push_back(local);
    }
  } else {
    stop = text::load_stopwords(stopwords);
    out.files.push_back(stopwords);
  }
  out.embeddings = text::embed_relations(split, table, stop);
  return out;
}

void save_texts(const std::filesystem::path& path, std::span<const text::TextEmbedding> texts,
                const std::string& stage_key) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& t : texts) {
    items.push_back({{"relation", t.relation}, {"vector", t.vector}, {"weights", t.weights}});
  }
  write_text_file(path, nlohmann::json{{"stage_key", stage_key}, {"texts", items}}.dump() + "\n");
}

std::vector<text::TextEmbedding> load_texts(const std::filesystem::path& path, std::string* stage_key) {
  std::vector<text::TextEmbedding> out;
  try {
    const auto doc = nlohmann::json::parse(read_text_file(path));
    if (stage_key) *stage_key = doc.value("stage_key", "");
    for (const auto& item : doc.at("texts")) {
      text::TextEmbedding t;
      t.relation = item.at("relation").get<data::RelationId>();
      t.vector = item.at("vector").get<std::vector<double>>();
      t.weights = item.at("weights").get<std::map<std::string, double>>();
      out.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return out;
}

Checkpoint EncoderArtifact::to_checkpoint() const {
  Checkpoint ckpt = params.to_checkpoint();
  ckpt.config["max_neighbors"] = max_neighbors;
  ckpt.config["neighbor_seed"] = neighbor_seed;
  ckpt.config["source"] = kge::to_string(source);
  return ckpt;
}

EncoderArtifact EncoderArtifact::from_checkpoint(const Checkpoint& ckpt) {
  EncoderArtifact a;
  a.params = enc::FeatureEncoderParams::from_checkpoint(ckpt);
  try {
    a.max_neighbors = ckpt.config.at("max_neighbors").get<std::size_t>();
    a.neighbor_seed = ckpt.config.at("neighbor_seed").get<std::uint64_t>();
    a.source = kge::parse_source(ckpt.config.at("source").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("encoder checkpoint lacks its neighbor settings: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(e.what());
  }
  return a;
}

enc::FrozenEncoder rebuild_encoder(const data::ZeroShotSplit& split, const kge::KgEmbeddingTable& table,
                                   const EncoderArtifact& artifact) {
  if (table.entities.rows() != split.entity_count()) {
    throw DataError("KGE table has " + std::to_string(table.entities.rows()) + " entities, dataset has " +
                    std::to_string(split.entity_count()));
  }
  const auto index = data::NeighborIndex::build(split, artifact.max_neighbors, artifact.neighbor_seed);
  const enc::FeatureEncoder encoder(table.view(artifact.source), index);
  return enc::FrozenEncoder(encoder, artifact.params);
}

namespace {

std::vector<std::string> relation_names(const data::ZeroShotSplit& split) {
  std::vector<std::string> names;
  for (const auto& r : split.relations) names.push_back(r.name);
  return names;
}

Checkpoint generator_checkpoint(const gan::GanTrainer& trainer) {
  Checkpoint ckpt;
  ckpt.kind = "generator";
  trainer.best_generator().store(ckpt, "generator");
  ckpt.config["best_step"] = trainer.best_step();
  if (trainer.best_valid_mrr()) ckpt.config["best_valid_mrr"] = *trainer.best_valid_mrr();
  return ckpt;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::vector<std::string> lines;
  if (!std::filesystem::exists(path)) return lines;
  std::istringstream in(read_text_file(path));
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

}  // namespace

eval::Evaluation evaluate_model_dir(const data::ZeroShotSplit& split, const std::filesystem::path& model_dir,
                                    const std::string& which, std::size_t n_test, std::uint64_t eval_seed,
                                    std::size_t threads) {
  if (which != "test" && which != "valid") throw ConfigError("split must be test or valid, not '" + which + "'");
  const auto& queries = which == "test" ? split.test_candidates : split.valid_candidates;
  if (queries.empty()) throw DataError("the " + which + " split has no queries");
  const auto table = kge::KgEmbeddingTable::load(model_dir / ModelFiles::kge);
  const auto artifact = EncoderArtifact::from_checkpoint(Checkpoint::load(model_dir / ModelFiles::encoder));
  const auto frozen = rebuild_encoder(split, table, artifact);
  const auto texts = eval::text_table(load_texts(model_dir / ModelFiles::texts), split.relations.size());
  const auto ckpt = Checkpoint::load(model_dir / ModelFiles::generator);
  if (ckpt.kind != "generator") throw DataError("generator.json holds a '" + ckpt.kind + "' checkpoint");
  const auto generator = gan::Generator::restore(ckpt, "generator");
  const auto names = relation_names(split);
  return eval::evaluate_generator(queries, generator, texts, frozen, n_test, eval_seed, names, threads);
}

void train_gan_into(const data::ZeroShotSplit& split, const enc::FrozenEncoder& encoder,
                    const eval::TextTable& texts, const std::vector<enc::RelationCenter>& centers,
                    const gan::GanConfig& config, std::uint64_t seed, const std::filesystem::path& out,
                    const std::string& stage_key, RunManifest& manifest) {
  gan::CenterTable table;
  for (const auto& c : centers) table[c.relation] = c.center;
  Rng rng(seed);
  gan::GanTrainer trainer(split, encoder, texts, table, config, rng);
  const auto state_path = out / ModelFiles::gan_state;
  const auto log_path = out / ModelFiles::train_log;
  std::vector<std::string> log_lines;
  if (!stage_key.empty() && std::filesystem::exists(state_path)) {
    const auto state = Checkpoint::load(state_path);
    if (state.config.value("stage_key", "") == stage_key) {
      trainer.load_state(state);
      for (const auto& line : read_lines(log_path)) {
        const auto entry = nlohmann::json::parse(line, nullptr, false);
        if (!entry.is_discarded() && entry.value("step", std::size_t{0}) <= trainer.step()) {
          log_lines.push_back(line);
        }
      }
      manifest.resumed.push_back("train_gan");
    }
  }
  const std::size_t chunk = config.eval_every > 0 ? config.eval_every : 100;
  auto persist = [&] {
    Checkpoint state = trainer.save_state();
    state.config["stage_key"] = stage_key;
    state.save(state_path);
    write_text_file(log_path, join_lines(log_lines));
  };
  while (trainer.step() < config.steps) {
    const std::size_t before = trainer.log().size();
    trainer.train(chunk);
    for (std::size_t i = before; i < trainer.log().size(); ++i) log_lines.push_back(gan::to_json(trainer.log()[i]).dump());
    persist();
  }
  if (!std::filesystem::exists(state_path)) persist();
  generator_checkpoint(trainer).save(out / ModelFiles::generator);
  manifest.add_artifact("generator", out / ModelFiles::generator);
  manifest.add_artifact("gan_state", state_path);
  manifest.add_artifact("train_log", log_path);
}

namespace {

template <typename Fn>
void run_stage(const std::string& name, RunManifest& manifest, std::ostream* progress, Fn&& fn) {
  if (progress) *progress << "[" << name << "] running\n" << std::flush;
  const auto start = std::chrono::steady_clock::now();
  try {
    fn();
  } catch (const NumericalError& e) {
    throw NumericalError("stage " + name + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError("stage " + name + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError("stage " + name + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error("stage " + name + ": " + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  manifest.timings.emplace_back(name, secs);
}

std::string checkpoint_stage_key(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return {};
  try {
    return Checkpoint::load(path).config.value("stage_key", "");
  } catch (const Error&) {
    return {};
  }
}

}  // namespace

RunManifest run_pipeline(const ExperimentConfig& config_in, std::ostream* progress) {
  ExperimentConfig config = config_in;
  config.kge.dim = config.dim;
  config.validate();
  if (config.data.empty()) throw ConfigError("pipeline needs a dataset directory (data)");
  if (config.out.empty()) throw ConfigError("pipeline needs an output directory (out)");
  const auto out = config.out;
  std::filesystem::create_directories(out);
  const auto seeds = StageSeeds::derive(config.seed);

  RunManifest manifest;
  manifest.command = "pipeline";
  manifest.config = config.to_key_values();
  manifest.seeds = seeds.to_json();
  manifest.seeds["root"] = config.seed;

  data::ZeroShotSplit split;
  run_stage("dataset", manifest, progress, [&] {
    split = data::load_dataset(config.data);
    for (const auto& entry : std::filesystem::directory_iterator(config.data)) {
      const auto name = entry.path().filename().string();
      if (name == "entities.txt" || name == "relations.json" || name.rfind("triples.", 0) == 0 ||
          name.rfind("candidates.", 0) == 0) {
        manifest.add_input(entry.path());
      }
    }
  });

  std::vector<text::TextEmbedding> texts;
  run_stage("textrep", manifest, progress, [&] {
    auto inputs = build_text_inputs(split, config.data, config.word_vectors, config.stopwords);
    for (const auto& f : inputs.files) manifest.add_input(f);
    texts = std::move(inputs.embeddings);
  });

  // Everything downstream is a function of the config and these inputs.
  KeyValues keyed;
  for (const auto& kv : manifest.config) {
    if (kv.first != "out" && kv.first != "threads") keyed.push_back(kv);
  }
  std::string key_material = format_key_values(keyed);
  for (const auto& [path, digest] : manifest.inputs) key_material += digest + "\n";
  const std::string stage_key = sha256_hex(key_material);
  save_texts(out / ModelFiles::texts, texts, stage_key);
  manifest.add_artifact("texts", out / ModelFiles::texts);

  kge::KgEmbeddingTable table;
  run_stage("train_kge", manifest, progress, [&] {
    const auto path = out / ModelFiles::kge;
    if (checkpoint_stage_key(path) == stage_key) {
      table = kge::KgEmbeddingTable::load(path);
      manifest.resumed.push_back("train_kge");
    } else {
      Rng rng(seeds.kge);
      table = kge::train_kge(split, config.kge, rng).table;
      Checkpoint ckpt = table.to_checkpoint();
      ckpt.config["stage_key"] = stage_key;
      ckpt.save(path);
    }
    manifest.add_artifact("kge", path);
  });

  EncoderArtifact encoder;
  run_stage("pretrain_encoder", manifest, progress, [&] {
    const auto path = out / ModelFiles::encoder;
    if (checkpoint_stage_key(path) == stage_key) {
      encoder = EncoderArtifact::from_checkpoint(Checkpoint::load(path));
      manifest.resumed.push_back("pretrain_encoder");
    } else {
      encoder.max_neighbors = config.encoder.max_neighbors;
      encoder.neighbor_seed = seeds.neighbors;
      encoder.source = config.embedding_source.empty() ? kge::default_source(table.kind)
                                                       : kge::parse_source(config.embedding_source);
      const auto index = data::NeighborIndex::build(split, encoder.max_neighbors, encoder.neighbor_seed);
      Rng rng(seeds.encoder);
      auto result = enc::pretrain_encoder(split, index, table.view(encoder.source), config.encoder, rng);
      encoder.params = std::move(result.params);
      std::string log;
      for (const auto& e : result.log) log += enc::to_json(e).dump() + "\n";
      write_text_file(out / ModelFiles::encoder_log, log);
      Checkpoint ckpt = encoder.to_checkpoint();
      ckpt.config["stage_key"] = stage_key;
      ckpt.config["best_step"] = result.best_step;
      ckpt.save(path);
    }
    manifest.add_artifact("encoder", path);
  });

  enc::FrozenEncoder frozen;
  std::vector<enc::RelationCenter> centers;
  run_stage("centers", manifest, progress, [&] {
    frozen = rebuild_encoder(split, table, encoder);
    centers = enc::compute_relation_centers(split, frozen);
    write_text_file(out / ModelFiles::centers, enc::centers_to_json(centers).dump() + "\n");
    manifest.add_artifact("centers", out / ModelFiles::centers);
  });

  run_stage("train_gan", manifest, progress, [&] {
    const auto text_rows = eval::text_table(texts, split.relations.size());
    train_gan_into(split, frozen, text_rows, centers, config.gan, seeds.gan, out, stage_key, manifest);
  });

  run_stage("eval", manifest, progress, [&] {
    const auto evaluation =
        evaluate_model_dir(split, out, "test", config.gan.n_test, seeds.eval, config.threads);
    write_text_file(out / ModelFiles::report, dump_json(eval::to_json(evaluation.report)));
    manifest.add_artifact("report", out / ModelFiles::report);
  });

  manifest.save(out / ModelFiles::manifest);
  return manifest;
}

std::vector<ReportRow> load_reports(std::span<const std::filesystem::path> paths) {
  if (paths.empty()) throw ConfigError("report needs at least one report file");
  std::vector<ReportRow> rows;
  for (const auto& p : paths) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(read_text_file(p));
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(p.string() + ": " + e.what());
    }
    try {
      rows.push_back({p.string(), eval::metrics_from_json(doc)});
    } catch (const DataError& e) {
      throw DataError(p.string() + ": " + e.what());
    }
  }
  return rows;
}

namespace {

struct Column {
  const char* title;
  const char* key;
  double eval::MetricsReport::*field;
  bool percent;
};

constexpr Column kColumns[] = {{"MRR", "mrr", &eval::MetricsReport::mrr, false},
                               {"Hits@10", "hits10", &eval::MetricsReport::hits10, true},
                               {"Hits@5", "hits5", &eval::MetricsReport::hits5, true},
                               {"Hits@1", "hits1", &eval::MetricsReport::hits1, true}};

std::vector<double> column_best(std::span<const ReportRow> rows) {
  std::vector<double> best;
  for (const auto& c : kColumns) {
    double b = -1.0;
    for (const auto& r : rows) b = std::max(b, r.metrics.*(c.field));
    best.push_back(b);
  }
  return best;
}

}  // namespace

std::string format_report_table(std::span<const ReportRow> rows) {
  const auto best = column_best(rows);
  std::size_t name_width = 5;
  for (const auto& r : rows) name_width = std::max(name_width, r.name.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(name_width)) << "Model";
  for (const auto& c : kColumns) out << "  " << std::right << std::setw(9) << c.title;
  out << '\n';
  for (const auto& r : rows) {
    out << std::left << std::setw(static_cast<int>(name_width)) << r.name;
    for (std::size_t i = 0; i < std::size(kColumns); ++i) {
      const auto& c = kColumns[i];
      const double v = r.metrics.*(c.field);
      char cell[32];
      std::snprintf(cell, sizeof cell, c.percent ? "%.1f" : "%.3f", c.percent ? 100.0 * v : v);
      std::string text = cell;
      text += v == best[i] ? "*" : " ";
      out << "  " << std::right << std::setw(9) << text;
    }
    out << '\n';
  }
  return out.str();
}

nlohmann::json report_table_json(std::span<const ReportRow> rows) {
  const auto best = column_best(rows);
  nlohmann::json columns = nlohmann::json::array();
  for (const auto& c : kColumns) columns.push_back(c.key);
  nlohmann::json items = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json item{{"name", r.name}};
    nlohmann::json marks = nlohmann::json::array();
    for (std::size_t i = 0; i < std::size(kColumns); ++i) {
      const double v = r.metrics.*(kColumns[i].field);
      item[kColumns[i].key] = v;
      if (v == best[i]) marks.push_back(kColumns[i].key);
    }
    item["best"] = marks;
    items.push_back(item);
  }
  return {{"columns", columns}, {"rows", items}};
}

}  // namespace zskg
