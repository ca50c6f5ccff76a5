#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "zskg/dataset.hpp"
#include "zskg/encoder.hpp"
#include "zskg/eval.hpp"
#include "zskg/gan.hpp"
#include "zskg/kge.hpp"
#include "zskg/kv.hpp"
#include "zskg/metrics.hpp"
#include "zskg/textrep.hpp"

namespace zskg {

inline constexpr const char* kToolkitVersion = "0.1.0";

/// Every knob of an end-to-end run. Flat `key = value` text; module keys are
/// prefixed with kge., encoder. and gan. (the gan. keys mirror GanConfig).
struct ExperimentConfig {
  std::filesystem::path data;
  std::filesystem::path out;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::size_t dim = 100;
  std::string word_vectors;      // empty: <data>/word_vectors.txt
  std::string stopwords;         // empty: shipped list plus <data>/stopwords.txt when present
  std::string embedding_source;  // empty: the KGE kind's default
  kge::KgeConfig kge;
  enc::EncoderConfig encoder;
  gan::GanConfig gan;

  ExperimentConfig();

  /// Throws ConfigError on an unknown key or a bad value.
  void apply(const KeyValues& values);
  KeyValues to_key_values() const;
  void validate() const;

  static ExperimentConfig load(const std::filesystem::path& path);
};

/// Named sub-stream seeds derived from the root seed.
struct StageSeeds {
  std::uint64_t kge = 0;
  std::uint64_t neighbors = 0;
  std::uint64_t encoder = 0;
  std::uint64_t gan = 0;
  std::uint64_t eval = 0;

  static StageSeeds derive(std::uint64_t root);
  nlohmann::json to_json() const;
};

struct ArtifactRecord {
  std::string path;
  std::string sha256;
};

/// Record of one command: what ran, with which inputs, producing what.
struct RunManifest {
  std::string command;
  KeyValues config;
  nlohmann::json seeds = nlohmann::json::object();
  std::map<std::string, std::string> inputs;  // path → sha256
  std::map<std::string, ArtifactRecord> artifacts;
  std::vector<std::pair<std::string, double>> timings;  // stage → seconds
  std::vector<std::string> resumed;
  std::string version = kToolkitVersion;

  void add_input(const std::filesystem::path& path);
  void add_artifact(const std::string& name, const std::filesystem::path& path);

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& doc);
  void save(const std::filesystem::path& path) const;
  static RunManifest load(const std::filesystem::path& path);
};

/// Relation text embeddings for a dataset directory.
struct TextInputs {
  std::vector<text::TextEmbedding> embeddings;
  std::vector<std::filesystem::path> files;  // inputs read
};

std::filesystem::path shipped_stopwords_path();

/// Word vectors and stop-words per the config's defaults.
TextInputs build_text_inputs(const data::ZeroShotSplit& split, const std::filesystem::path& data_dir,
                             const std::string& word_vectors, const std::string& stopwords);


/// Encoder checkpoint plus the settings needed to rebuild its neighbor index.
struct EncoderArtifact {
  enc::FeatureEncoderParams params;
  std::size_t max_neighbors = 50;
  std::uint64_t neighbor_seed = 0;
  kge::TableSource source = kge::TableSource::distmult;

  Checkpoint to_checkpoint() const;
  static EncoderArtifact from_checkpoint(const Checkpoint& ckpt);
};

/// Frozen encoder rebuilt from the KGE table and encoder artifact.
enc::FrozenEncoder rebuild_encoder(const data::ZeroShotSplit& split, const kge::KgEmbeddingTable& table,
                                   const EncoderArtifact& artifact);

/// A trained zero-shot model directory:
///   kge.json, encoder.json, texts.json, centers.json, generator.json,
///   gan_state.json, train_log.jsonl
struct ModelFiles {
  static constexpr const char* kge = "kge.json";
  static constexpr const char* encoder = "encoder.json";
  static constexpr const char* encoder_log = "encoder_log.jsonl";
  static constexpr const char* texts = "texts.json";
  static constexpr const char* centers = "centers.json";
  static constexpr const char* generator = "generator.json";
  static constexpr const char* gan_state = "gan_state.json";
  static constexpr const char* train_log = "train_log.jsonl";
  static constexpr const char* report = "report.json";
  static constexpr const char* manifest = "manifest.json";
};

/// Evaluates a model directory on the split's valid or test queries.
eval::Evaluation evaluate_model_dir(const data::ZeroShotSplit& split, const std::filesystem::path& model_dir,
                                    const std::string& which, std::size_t n_test, std::uint64_t eval_seed,
                                    std::size_t threads);

/// Trains a GAN into `out` on frozen fact embeddings, resuming from
/// out/gan_state.json when that state carries the same non-empty
/// `stage_key`. Writes the selected generator, the training state (after
/// every validation round) and the training log.
void train_gan_into(const data::ZeroShotSplit& split, const enc::FrozenEncoder& encoder,
                    const eval::TextTable& texts, const std::vector<enc::RelationCenter>& centers,
                    const gan::GanConfig& config, std::uint64_t seed, const std::filesystem::path& out,
                    const std::string& stage_key, RunManifest& manifest);

/// texts.json: {"stage_key": ..., "texts": [...]}.
void save_texts(const std::filesystem::path& path, std::span<const text::TextEmbedding> texts,
                const std::string& stage_key = "");
std::vector<text::TextEmbedding> load_texts(const std::filesystem::path& path, std::string* stage_key = nullptr);

/// textrep → train_kge → pretrain_encoder → centers → train_gan → eval(test).
/// Each stage persists its artifacts in config.out and is skipped on rerun
/// when they were produced by the same config and inputs. A failing stage
/// is reported as "stage <name>: <reason>" with the original error class.
RunManifest run_pipeline(const ExperimentConfig& config, std::ostream* progress = nullptr);

struct ReportRow {
  std::string name;
  eval::MetricsReport metrics;
};

/// Loads each report; throws DataError on a schema mismatch.
std::vector<ReportRow> load_reports(std::span<const std::filesystem::path> paths);

/// Columns MRR, Hits@10, Hits@5, Hits@1; the best value of each column is
/// marked with '*'.
std::string format_report_table(std::span<const ReportRow> rows);
nlohmann::json report_table_json(std::span<const ReportRow> rows);

/// Renders a JSON value with fixed formatting, one trailing newline.
std::string dump_json(const nlohmann::json& doc);

}  // namespace zskg
