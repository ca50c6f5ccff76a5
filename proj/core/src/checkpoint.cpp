#include "zskg/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "zskg/error.hpp"

namespace zskg {
namespace {

nlohmann::json tensor_to_json(const Tensor& t) {
  return {{"shape", {t.rows(), t.cols()}}, {"values", t.storage()}};
}

Tensor tensor_from_json(const std::string& name, const nlohmann::json& doc) {
  try {
    const auto shape = doc.at("shape").get<std::vector<std::size_t>>();
    auto values = doc.at("values").get<std::vector<double>>();
    if (shape.size() != 2) throw DataError("tensor '" + name + "': shape must have two entries");
    return Tensor(shape[0], shape[1], std::move(values));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("tensor '" + name + "': " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError("tensor '" + name + "': " + e.what());
  }
}

}  // namespace

const Tensor& Checkpoint::tensor(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw DataError("checkpoint is missing tensor '" + name + "'");
  return it->second;
}

nlohmann::json Checkpoint::to_json() const {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, t] : tensors) params[name] = tensor_to_json(t);
  return {{"format_version", kFormatVersion},
          {"kind", kind},
          {"parameters", params},
          {"optimizer", optimizer},
          {"rng", rng},
          {"config", config}};
}

Checkpoint Checkpoint::from_json(const nlohmann::json& doc) {
  Checkpoint ckpt;
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kFormatVersion) {
      throw DataError("unsupported checkpoint format_version " + std::to_string(version));
    }
    ckpt.kind = doc.value("kind", "");
    for (const auto& [name, t] : doc.at("parameters").items()) {
      ckpt.tensors.emplace(name, tensor_from_json(name, t));
    }
    ckpt.optimizer = doc.value("optimizer", nlohmann::json());
    ckpt.rng = doc.value("rng", nlohmann::json());
    ckpt.config = doc.value("config", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
  return ckpt;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  write_text_file(path, to_json().dump() + "\n");
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return from_json(doc);
}

nlohmann::json adam_to_json(const AdamState& state) {
  nlohmann::json first = nlohmann::json::array();
  nlohmann::json second = nlohmann::json::array();
  for (const auto& m : state.first_moment) first.push_back(tensor_to_json(m));
  for (const auto& v : state.second_moment) second.push_back(tensor_to_json(v));
  return {{"learning_rate", state.config.learning_rate},
          {"beta1", state.config.beta1},
          {"beta2", state.config.beta2},
          {"epsilon", state.config.epsilon},
          {"step", state.step},
          {"first_moment", first},
          {"second_moment", second}};
}

AdamState adam_from_json(const nlohmann::json& doc) {
  AdamState state;
  try {
    state.config.learning_rate = doc.at("learning_rate").get<double>();
    state.config.beta1 = doc.at("beta1").get<double>();
    state.config.beta2 = doc.at("beta2").get<double>();
    state.config.epsilon = doc.at("epsilon").get<double>();
    state.step = doc.at("step").get<std::uint64_t>();
    for (const auto& m : doc.at("first_moment")) {
      state.first_moment.push_back(tensor_from_json("adam.m", m));
    }
    for (const auto& v : doc.at("second_moment")) {
      state.second_moment.push_back(tensor_from_json("adam.v", v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed optimizer state: ") + e.what());
  }
  return state;
}

void store_dense(Checkpoint& ckpt, const std::string& prefix, const Dense& layer) {
  ckpt.tensors[prefix + ".weight"] = layer.weight.value();
  ckpt.tensors[prefix + ".bias"] = layer.bias.value();
  if (layer.spectral) {
    ckpt.tensors[prefix + ".sn_u"] = layer.spectral->u();
    ckpt.tensors[prefix + ".sn_v"] = layer.spectral->v();
  }
}

void restore_dense(const Checkpoint& ckpt, const std::string& prefix, Dense& layer) {
  const Tensor& w = ckpt.tensor(prefix + ".weight");
  const Tensor& b = ckpt.tensor(prefix + ".bias");
  if (!w.same_shape(layer.weight.value()) || !b.same_shape(layer.bias.value())) {
    throw DataError("checkpoint tensor '" + prefix + "' has an unexpected shape");
  }
  layer.weight.value() = w;
  layer.bias.value() = b;
  if (layer.spectral) {
    layer.spectral->set_vectors(ckpt.tensor(prefix + ".sn_u"), ckpt.tensor(prefix + ".sn_v"));
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace zskg
