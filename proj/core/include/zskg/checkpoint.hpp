#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "zskg/layers.hpp"
#include "zskg/optim.hpp"
#include "zskg/tensor.hpp"

namespace zskg {

/// On-disk model state: one JSON document holding named tensors plus
/// optional optimizer state, rng state and an echo of the producing config.
///
///   {"format_version": 1, "kind": "...",
///    "parameters": {name: {"shape": [r, c], "values": [...]}, ...},
///    "optimizer": {...} | null, "rng": {...} | null, "config": {...}}
///
/// Doubles are written with round-trip precision, so save/load is lossless.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  std::string kind;
  std::map<std::string, Tensor> tensors;
  nlohmann::json optimizer;
  nlohmann::json rng;
  nlohmann::json config = nlohmann::json::object();

  /// Throws DataError naming the tensor when absent.
  const Tensor& tensor(const std::string& name) const;
  bool has(const std::string& name) const { return tensors.count(name) != 0; }

  nlohmann::json to_json() const;
  static Checkpoint from_json(const nlohmann::json& doc);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

nlohmann::json adam_to_json(const AdamState& state);
AdamState adam_from_json(const nlohmann::json& doc);

/// Stores weight, bias and (when present) the power-iteration vectors of a
/// Dense layer under `prefix`.
void store_dense(Checkpoint& ckpt, const std::string& prefix, const Dense& layer);
void restore_dense(const Checkpoint& ckpt, const std::string& prefix, Dense& layer);

/// Write `text` to `path` atomically enough for our purposes (temp + rename).
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace zskg
