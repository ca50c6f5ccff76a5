// zskg: zero-shot knowledge-graph completion toolkit.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "zskg/baselines.hpp"
#include "zskg/checkpoint.hpp"
#include "zskg/digest.hpp"
#include "zskg/error.hpp"
#include "zskg/pipeline.hpp"
#include "zskg/synthetic.hpp"

namespace fs = std::filesystem;
using namespace zskg;

namespace {

fs::path sidecar(const fs::path& file, const std::string& suffix) {
  fs::path p = file;
  p += suffix;
  return p;
}

void add_dataset_inputs(RunManifest& manifest, const fs::path& dir) {
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name == "entities.txt" || name == "relations.json" || name.rfind("triples.", 0) == 0 ||
        name.rfind("candidates.", 0) == 0) {
      manifest.add_input(entry.path());
    }
  }
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct SynthArgs {
  data::SyntheticSpec spec;
  std::uint64_t seed = 1;
  fs::path out;
};

int run_synth(const SynthArgs& a) {
  Timer timer;
  Rng rng = Rng::derive(a.seed, "synth");
  const auto dataset = data::generate_synthetic(a.spec, rng);
  data::save_synthetic(dataset, a.out);
  RunManifest m;
  m.command = "synth";
  m.config = {{"relations", std::to_string(a.spec.relations)},
              {"entities", std::to_string(a.spec.entities)},
              {"triples_per_relation", std::to_string(a.spec.triples_per_relation)},
              {"vocab", std::to_string(a.spec.vocab)},
              {"noise_ratio", format_real(a.spec.noise_ratio)},
              {"seed", std::to_string(a.seed)}};
  m.seeds = {{"root", a.seed}};
  for (const auto& entry : fs::directory_iterator(a.out)) {
    if (entry.path().filename() != ModelFiles::manifest) m.add_artifact(entry.path().filename().string(), entry.path());
  }
  m.timings.emplace_back("synth", timer.seconds());
  m.save(a.out / ModelFiles::manifest);
  const auto stats = dataset.split.stats();
  std::cout << "wrote " << a.out.string() << ": " << stats.entities << " entities, " << stats.triples
            << " triples, " << stats.seen_relations << "/" << stats.validation_relations << "/"
            << stats.unseen_relations << " seen/validation/unseen relations\n";
  return 0;
}

struct KgeArgs {
  fs::path data;
  std::string kind = "distmult";
  std::size_t dim = 100;
  std::size_t steps = 2000;
  std::size_t batch_size = 128;
  double learning_rate = 0.01;
  double margin = 1.0;
  std::uint64_t seed = 1;
  fs::path out;
};

int run_train_kge(const KgeArgs& a) {
  Timer timer;
  const auto split = data::load_dataset(a.data);
  kge::KgeConfig config;
  config.kind = kge::parse_kind(a.kind);
  config.dim = a.dim;
  config.steps = a.steps;
  config.batch_size = a.batch_size;
  config.learning_rate = a.learning_rate;
  config.margin = a.margin;
  const auto seeds = StageSeeds::derive(a.seed);
  Rng rng(seeds.kge);
  const auto result = kge::train_kge(split, config, rng);
  result.table.save(a.out);
  RunManifest m;
  m.command = "train-kge";
  m.config = {{"data", a.data.string()},         {"kind", a.kind},
              {"dim", std::to_string(a.dim)},     {"steps", std::to_string(a.steps)},
              {"batch_size", std::to_string(a.batch_size)},
              {"learning_rate", format_real(a.learning_rate)},
              {"margin", format_real(a.margin)}, {"seed", std::to_string(a.seed)}};
  m.seeds = {{"root", a.seed}, {"kge", seeds.kge}};
  add_dataset_inputs(m, a.data);
  m.add_artifact("kge", a.out);
  m.timings.emplace_back("train_kge", timer.seconds());
  m.save(sidecar(a.out, ".manifest.json"));
  std::cout << "final loss " << (result.losses.empty() ? 0.0 : result.losses.back()) << "\n";
  return 0;
}

struct EncoderArgs {
  fs::path data;
  fs::path kge;
  std::size_t dim = 100;
  std::size_t steps = 2000;
  std::uint64_t seed = 1;
  fs::path out;
  std::string config;
  std::string source;
};

enc::EncoderConfig encoder_config_from(const std::string& path, std::size_t steps) {
  ExperimentConfig exp;
  if (!path.empty()) {
    KeyValues prefixed;
    for (const auto& [k, v] : load_key_values(path)) prefixed.emplace_back("encoder." + k, v);
    exp.apply(prefixed);
  }
  exp.encoder.steps = steps;
  return exp.encoder;
}

int run_pretrain_encoder(const EncoderArgs& a) {
  Timer timer;
  const auto split = data::load_dataset(a.data);
  const auto table = kge::KgEmbeddingTable::load(a.kge);
  if (table.dim() != a.dim) {
    throw ConfigError("--dim " + std::to_string(a.dim) + " does not match the KGE table width " +
                      std::to_string(table.dim()));
  }
  const auto config = encoder_config_from(a.config, a.steps);
  const auto seeds = StageSeeds::derive(a.seed);
  EncoderArtifact artifact;
  artifact.max_neighbors = config.max_neighbors;
  artifact.neighbor_seed = seeds.neighbors;
  artifact.source = a.source.empty() ? kge::default_source(table.kind) : kge::parse_source(a.source);
  const auto index = data::NeighborIndex::build(split, artifact.max_neighbors, artifact.neighbor_seed);
  Rng rng(seeds.encoder);
  auto result = enc::pretrain_encoder(split, index, table.view(artifact.source), config, rng);
  artifact.params = std::move(result.params);
  Checkpoint ckpt = artifact.to_checkpoint();
  ckpt.config["best_step"] = result.best_step;
  ckpt.save(a.out);
  std::string log;
  for (const auto& e : result.log) log += enc::to_json(e).dump() + "\n";
  write_text_file(sidecar(a.out, ".log.jsonl"), log);

  RunManifest m;
  m.command = "pretrain-encoder";
  m.config = {{"data", a.data.string()},      {"kge", a.kge.string()},
              {"dim", std::to_string(a.dim)}, {"steps", std::to_string(a.steps)},
              {"seed", std::to_string(a.seed)}, {"config", a.config},
              {"source", kge::to_string(artifact.source)}};
  m.seeds = {{"root", a.seed}, {"neighbors", seeds.neighbors}, {"encoder", seeds.encoder}};
  add_dataset_inputs(m, a.data);
  m.add_input(a.kge);
  if (!a.config.empty()) m.add_input(a.config);
  m.add_artifact("encoder", a.out);
  m.add_artifact("encoder_log", sidecar(a.out, ".log.jsonl"));
  m.timings.emplace_back("pretrain_encoder", timer.seconds());
  m.save(sidecar(a.out, ".manifest.json"));
  if (result.best_valid_hits10) {
    std::cout << "best validation Hits@10 " << *result.best_valid_hits10 << " at step " << result.best_step
              << "\n";
  }
  return 0;
}

struct GanArgs {
  fs::path data;
  fs::path encoder;
  fs::path kge;
  std::string config;
  std::uint64_t seed = 1;
  fs::path out;
  std::string word_vectors;
  std::string stopwords;
};

int run_train_gan(const GanArgs& a) {
  Timer timer;
  const auto split = data::load_dataset(a.data);
  gan::GanConfig config;
  if (!a.config.empty()) config.apply(load_key_values(a.config));
  config.validate();
  const auto table = kge::KgEmbeddingTable::load(a.kge);
  const auto encoder = EncoderArtifact::from_checkpoint(Checkpoint::load(a.encoder));
  const auto inputs = build_text_inputs(split, a.data, a.word_vectors, a.stopwords);
  const auto seeds = StageSeeds::derive(a.seed);

  RunManifest m;
  m.command = "train-gan";
  m.config = {{"data", a.data.string()},   {"encoder", a.encoder.string()}, {"kge", a.kge.string()},
              {"config", a.config},        {"seed", std::to_string(a.seed)},
              {"word_vectors", a.word_vectors}, {"stopwords", a.stopwords}};
  for (const auto& [k, v] : config.to_key_values()) m.config.emplace_back("gan." + k, v);
  m.seeds = {{"root", a.seed}, {"gan", seeds.gan}};
  add_dataset_inputs(m, a.data);
  m.add_input(a.kge);
  m.add_input(a.encoder);
  if (!a.config.empty()) m.add_input(a.config);
  for (const auto& f : inputs.files) m.add_input(f);

  std::string key_material = format_key_values(m.config);
  for (const auto& [path, digest] : m.inputs) key_material += digest + "\n";
  const std::string stage_key = sha256_hex(key_material);

  fs::create_directories(a.out);
  // The model directory is self-contained for `zskg eval`.
  table.save(a.out / ModelFiles::kge);
  encoder.to_checkpoint().save(a.out / ModelFiles::encoder);
  save_texts(a.out / ModelFiles::texts, inputs.embeddings, stage_key);
  const auto frozen = rebuild_encoder(split, table, encoder);
  const auto centers = enc::compute_relation_centers(split, frozen);
  write_text_file(a.out / ModelFiles::centers, enc::centers_to_json(centers).dump() + "\n");
  const auto texts = eval::text_table(inputs.embeddings, split.relations.size());
  train_gan_into(split, frozen, texts, centers, config, seeds.gan, a.out, stage_key, m);
  for (const char* f : {ModelFiles::kge, ModelFiles::encoder, ModelFiles::texts, ModelFiles::centers}) {
    m.add_artifact(fs::path(f).stem().string(), a.out / f);
  }
  m.timings.emplace_back("train_gan", timer.seconds());
  m.save(a.out / ModelFiles::manifest);
  return 0;
}

struct EvalArgs {
  fs::path data;
  fs::path model;
  std::string split = "test";
  std::size_t n_test = 20;
  std::uint64_t seed = 1;
  fs::path report;
};

int run_eval(const EvalArgs& a, std::size_t threads) {
  Timer timer;
  const auto split = data::load_dataset(a.data);
  const auto seeds = StageSeeds::derive(a.seed);
  const auto evaluation = evaluate_model_dir(split, a.model, a.split, a.n_test, seeds.eval, threads);
  write_text_file(a.report, dump_json(eval::to_json(evaluation.report)));
  RunManifest m;
  m.command = "eval";
  m.config = {{"data", a.data.string()}, {"model", a.model.string()}, {"split", a.split},
              {"n_test", std::to_string(a.n_test)}, {"seed", std::to_string(a.seed)}};
  m.seeds = {{"root", a.seed}, {"eval", seeds.eval}};
  add_dataset_inputs(m, a.data);
  for (const char* f : {ModelFiles::kge, ModelFiles::encoder, ModelFiles::texts, ModelFiles::generator}) {
    m.add_input(a.model / f);
  }
  m.add_artifact("report", a.report);
  m.timings.emplace_back("eval", timer.seconds());
  m.save(sidecar(a.report, ".manifest.json"));
  std::cout << "MRR " << evaluation.report.mrr << "  Hits@10 " << evaluation.report.hits10 << "  Hits@5 "
            << evaluation.report.hits5 << "  Hits@1 " << evaluation.report.hits1 << "  ("
            << evaluation.report.query_count << " queries)\n";
  return 0;
}

struct BaselineArgs {
  fs::path data;
  std::string kind = "distmult";
  std::size_t dim = 100;
  std::uint64_t seed = 1;
  fs::path report;
  std::string config;
  std::string kge;
  std::string word_vectors;
  std::string stopwords;
};

int run_zs_baseline(const BaselineArgs& a) {
  Timer timer;
  const auto split = data::load_dataset(a.data);
  kge::ZsBaselineConfig config;
  config.base.kind = kge::parse_kind(a.kind);
  config.base.dim = a.dim;
  if (!a.config.empty()) {
    for (const auto& [key, value] : load_key_values(a.config)) {
      if (key == "kge.steps") config.base.steps = parse_count(key, value);
      else if (key == "kge.batch_size") config.base.batch_size = parse_count(key, value);
      else if (key == "kge.learning_rate") config.base.learning_rate = parse_real(key, value);
      else if (key == "kge.margin") config.base.margin = parse_real(key, value);
      else if (key == "steps") config.steps = parse_count(key, value);
      else if (key == "batch_size") config.batch_size = parse_count(key, value);
      else if (key == "learning_rate") config.learning_rate = parse_real(key, value);
      else if (key == "hidden") config.hidden = parse_count(key, value);
      else if (key == "leaky_slope") config.leaky_slope = parse_real(key, value);
      else if (key == "eval_every") config.eval_every = parse_count(key, value);
      else throw ConfigError("unknown baseline config key '" + key + "'");
    }
  }
  const auto inputs = build_text_inputs(split, a.data, a.word_vectors, a.stopwords);
  const auto texts = eval::text_table(inputs.embeddings, split.relations.size());
  const auto seeds = StageSeeds::derive(a.seed);
  Rng rng(Rng::derive(a.seed, "zs-baseline").next_u64());
  kge::ZsBaselineResult result;
  if (a.kge.empty()) {
    Rng kge_rng(seeds.kge);
    const auto base = kge::train_kge(split, config.base, kge_rng);
    result = kge::zs_baseline(split, texts, base.table, config, rng);
  } else {
    const auto table = kge::KgEmbeddingTable::load(a.kge);
    if (table.kind != config.base.kind) throw ConfigError("--kge table kind differs from --kind");
    result = kge::zs_baseline(split, texts, table, config, rng);
  }
  write_text_file(a.report, dump_json(eval::to_json(result.test)));
  RunManifest m;
  m.command = "zs-baseline";
  m.config = {{"data", a.data.string()},     {"kind", a.kind}, {"dim", std::to_string(a.dim)},
              {"seed", std::to_string(a.seed)}, {"config", a.config}, {"kge", a.kge}};
  m.seeds = {{"root", a.seed}, {"kge", seeds.kge}};
  add_dataset_inputs(m, a.data);
  for (const auto& f : inputs.files) m.add_input(f);
  if (!a.config.empty()) m.add_input(a.config);
  if (!a.kge.empty()) m.add_input(a.kge);
  m.add_artifact("report", a.report);
  m.timings.emplace_back("zs_baseline", timer.seconds());
  m.save(sidecar(a.report, ".manifest.json"));
  std::cout << "ZS-" << a.kind << " MRR " << result.test.mrr << "  Hits@10 " << result.test.hits10 << "\n";
  return 0;
}

struct PipelineArgs {
  std::string config;
  std::string from_manifest;
  std::string data;
  std::string out;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

int run_pipeline_cmd(const PipelineArgs& a, std::size_t threads, bool threads_given) {
  ExperimentConfig config;
  if (!a.from_manifest.empty()) {
    const auto manifest = RunManifest::load(a.from_manifest);
    if (manifest.command != "pipeline") throw ConfigError("manifest was not written by the pipeline command");
    config.apply(manifest.config);
  }
  if (!a.config.empty()) config.apply(load_key_values(a.config));
  KeyValues overrides;
  for (const auto& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  if (!a.data.empty()) overrides.emplace_back("data", a.data);
  if (!a.out.empty()) overrides.emplace_back("out", a.out);
  if (a.seed_given) overrides.emplace_back("seed", std::to_string(a.seed));
  if (threads_given) overrides.emplace_back("threads", std::to_string(threads));
  config.apply(overrides);
  const auto manifest = run_pipeline(config, &std::cerr);
  const auto report = eval::metrics_from_json(nlohmann::json::parse(read_text_file(config.out / ModelFiles::report)));
  std::cout << "test MRR " << report.mrr << "  Hits@10 " << report.hits10 << "  Hits@5 " << report.hits5
            << "  Hits@1 " << report.hits1 << "\n";
  if (!manifest.resumed.empty()) {
    std::cout << "resumed:";
    for (const auto& s : manifest.resumed) std::cout << ' ' << s;
    std::cout << "\n";
  }
  return 0;
}

int run_report(const std::vector<std::string>& paths, const std::string& json_out) {
  std::vector<fs::path> files(paths.begin(), paths.end());
  const auto rows = load_reports(files);
  std::cout << format_report_table(rows);
  if (!json_out.empty()) write_text_file(json_out, dump_json(report_table_json(rows)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot knowledge graph completion from relation descriptions"};
  app.require_subcommand(1);
  std::size_t threads = 1;
  auto* threads_opt = app.add_option("--threads", threads, "Worker threads for evaluation")->check(CLI::PositiveNumber);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic zero-shot dataset");
  c_synth->add_option("--relations", synth.spec.relations)->capture_default_str();
  c_synth->add_option("--entities", synth.spec.entities)->capture_default_str();
  c_synth->add_option("--triples-per-relation", synth.spec.triples_per_relation)->capture_default_str();
  c_synth->add_option("--vocab", synth.spec.vocab)->capture_default_str();
  c_synth->add_option("--noise-ratio", synth.spec.noise_ratio)->capture_default_str();
  c_synth->add_option("--seed", synth.seed)->capture_default_str();
  c_synth->add_option("--out", synth.out)->required();

  KgeArgs kge_args;
  auto* c_kge = app.add_subcommand("train-kge", "Train TransE, DistMult or ComplEx embeddings");
  c_kge->add_option("--data", kge_args.data)->required();
  c_kge->add_option("--kind", kge_args.kind)->check(CLI::IsMember({"transe", "distmult", "complex"}))->capture_default_str();
  c_kge->add_option("--dim", kge_args.dim)->capture_default_str();
  c_kge->add_option("--steps", kge_args.steps)->capture_default_str();
  c_kge->add_option("--batch-size", kge_args.batch_size)->capture_default_str();
  c_kge->add_option("--learning-rate", kge_args.learning_rate)->capture_default_str();
  c_kge->add_option("--margin", kge_args.margin, "TransE margin")->capture_default_str();
  c_kge->add_option("--seed", kge_args.seed)->capture_default_str();
  c_kge->add_option("--out", kge_args.out)->required();

  EncoderArgs enc_args;
  auto* c_enc = app.add_subcommand("pretrain-encoder", "Pretrain the neighbor feature encoder");
  c_enc->add_option("--data", enc_args.data)->required();
  c_enc->add_option("--kge", enc_args.kge)->required();
  c_enc->add_option("--dim", enc_args.dim)->capture_default_str();
  c_enc->add_option("--steps", enc_args.steps)->capture_default_str();
  c_enc->add_option("--seed", enc_args.seed)->capture_default_str();
  c_enc->add_option("--out", enc_args.out)->required();
  c_enc->add_option("--config", enc_args.config, "key = value file with encoder settings");
  c_enc->add_option("--source", enc_args.source, "transe | distmult | complex-real | complex-imag");

  GanArgs gan_args;
  auto* c_gan = app.add_subcommand("train-gan", "Adversarially train the relation-embedding generator");
  c_gan->add_option("--data", gan_args.data)->required();
  c_gan->add_option("--encoder", gan_args.encoder)->required();
  c_gan->add_option("--kge", gan_args.kge)->required();
  c_gan->add_option("--config", gan_args.config, "key = value file mirroring the GAN settings");
  c_gan->add_option("--seed", gan_args.seed)->capture_default_str();
  c_gan->add_option("--out", gan_args.out)->required();
  c_gan->add_option("--word-vectors", gan_args.word_vectors);
  c_gan->add_option("--stopwords", gan_args.stopwords);

  EvalArgs eval_args;
  auto* c_eval = app.add_subcommand("eval", "Rank candidate tails for unseen-relation queries");
  c_eval->add_option("--data", eval_args.data)->required();
  c_eval->add_option("--model", eval_args.model)->required();
  c_eval->add_option("--split", eval_args.split)->check(CLI::IsMember({"test", "valid"}))->capture_default_str();
  c_eval->add_option("--n-test", eval_args.n_test)->check(CLI::PositiveNumber)->capture_default_str();
  c_eval->add_option("--seed", eval_args.seed)->capture_default_str();
  c_eval->add_option("--report", eval_args.report)->required();

  BaselineArgs base_args;
  auto* c_base = app.add_subcommand("zs-baseline", "Train and evaluate a ZS-TransE/DistMult/ComplEx baseline");
  c_base->add_option("--data", base_args.data)->required();
  c_base->add_option("--kind", base_args.kind)->check(CLI::IsMember({"transe", "distmult", "complex"}))->capture_default_str();
  c_base->add_option("--dim", base_args.dim)->capture_default_str();
  c_base->add_option("--seed", base_args.seed)->capture_default_str();
  c_base->add_option("--report", base_args.report)->required();
  c_base->add_option("--config", base_args.config);
  c_base->add_option("--kge", base_args.kge, "Start from this pretrained table");
  c_base->add_option("--word-vectors", base_args.word_vectors);
  c_base->add_option("--stopwords", base_args.stopwords);

  PipelineArgs pipe_args;
  auto* c_pipe = app.add_subcommand("pipeline", "Run textrep, KGE, encoder, GAN and evaluation end to end");
  c_pipe->add_option("--config", pipe_args.config, "Experiment key = value file");
  c_pipe->add_option("--from-manifest", pipe_args.from_manifest, "Re-run the config recorded in a manifest");
  c_pipe->add_option("--data", pipe_args.data);
  c_pipe->add_option("--out", pipe_args.out);
  auto* seed_opt = c_pipe->add_option("--seed", pipe_args.seed);
  c_pipe->add_option("--set", pipe_args.sets, "Override a config key (key=value)");

  std::vector<std::string> report_paths;
  std::string report_json;
  auto* c_report = app.add_subcommand("report", "Compare report files in one table");
  c_report->add_option("reports", report_paths)->required()->check(CLI::ExistingFile);
  c_report->add_option("--json", report_json, "Also write the table as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (c_synth->parsed()) return run_synth(synth);
    if (c_kge->parsed()) return run_train_kge(kge_args);
    if (c_enc->parsed()) return run_pretrain_encoder(enc_args);
    if (c_gan->parsed()) return run_train_gan(gan_args);
    if (c_eval->parsed()) return run_eval(eval_args, threads);
    if (c_base->parsed()) return run_zs_baseline(base_args);
    if (c_pipe->parsed()) {
      pipe_args.seed_given = seed_opt->count() > 0;
      return run_pipeline_cmd(pipe_args, threads, threads_opt->count() > 0);
    }
    if (c_report->parsed()) return run_report(report_paths, report_json);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
