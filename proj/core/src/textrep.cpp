#include "zskg/textrep.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "zskg/checkpoint.hpp"
#include "zskg/error.hpp"

namespace zskg::text {
namespace {

bool is_letter(unsigned char c) {
  // Non-ASCII bytes are kept so UTF-8 words stay whole.
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

bool parse_double(std::string_view token, double& out) {
  // from_chars for double is available in libstdc++ 11.
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

std::string to_lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

WordVectorTable WordVectorTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing file: " + path.string());
  WordVectorTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = split_spaces(line);
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2) {
      double a = 0, b = 0;
      if (parse_double(fields[0], a) && parse_double(fields[1], b)) continue;  // header
    }
    if (fields.size() < 2) {
      throw DataError(path.filename().string() + " line " + std::to_string(line_no) +
                      ": expected a word followed by its vector");
    }
    std::vector<double> vec;
    vec.reserve(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      double v = 0;
      if (!parse_double(fields[i], v)) {
        throw DataError(path.filename().string() + " line " + std::to_string(line_no) +
                        ": bad number '" + std::string(fields[i]) + "'");
      }
      vec.push_back(v);
    }
    if (table.dimension_ == 0) table.dimension_ = vec.size();
    if (vec.size() != table.dimension_) {
      throw DataError(path.filename().string() + " line " + std::to_string(line_no) +
                      ": vector has " + std::to_string(vec.size()) + " entries, expected " +
                      std::to_string(table.dimension_));
    }
    table.add(fields[0], std::move(vec));
  }
  if (table.size() == 0) throw DataError(path.filename().string() + ": no word vectors");
  return table;
}

void WordVectorTable::save(const std::filesystem::path& path) const {
  std::ostringstream out;
  out.precision(17);
  out << words_.size() << ' ' << dimension_ << '\n';
  for (const auto& w : words_) {
    out << w;
    for (double v : vectors_.at(w)) out << ' ' << v;
    out << '\n';
  }
  write_text_file(path, out.str());
}

void WordVectorTable::add(std::string_view word, std::vector<double> vector) {
  if (dimension_ == 0) dimension_ = vector.size();
  if (vector.size() != dimension_) throw std::invalid_argument("WordVectorTable: dimension mismatch");
  std::string key = to_lower(word);
  if (vectors_.count(key)) return;
  vectors_.emplace(key, std::move(vector));
  words_.push_back(std::move(key));
}

const std::vector<double>* WordVectorTable::find(std::string_view word) const {
  auto it = vectors_.find(to_lower(word));
  return it == vectors_.end() ? nullptr : &it->second;
}

StopWords load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing file: " + path.string());
  StopWords words;
  std::string line;
  while (std::getline(in, line)) {
    for (auto token : split_spaces(line)) words.insert(to_lower(token));
  }
  return words;
}

std::vector<std::string> tokenize_and_filter(std::string_view description, const StopWords& stopwords) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < description.size()) {
    while (i < description.size() && !is_letter(static_cast<unsigned char>(description[i]))) ++i;
    std::size_t j = i;
    while (j < description.size() && is_letter(static_cast<unsigned char>(description[j]))) ++j;
    if (j > i) {
      std::string token = to_lower(description.substr(i, j - i));
      if (!stopwords.count(token)) tokens.push_back(std::move(token));
    }
    i = j;
  }
  return tokens;
}

CorpusStats CorpusStats::build(std::span<const std::vector<std::string>> documents) {
  CorpusStats stats;
  stats.document_count = documents.size();
  for (const auto& doc : documents) {
    std::unordered_set<std::string> distinct(doc.begin(), doc.end());
    for (const auto& w : distinct) ++stats.document_frequency[w];
  }
  return stats;
}

std::size_t CorpusStats::df(const std::string& word) const {
  auto it = document_frequency.find(word);
  return it == document_frequency.end() ? 1 : it->second;
}

std::map<std::string, double> tfidf_weights(std::span<const std::string> tokens,
                                            const CorpusStats& stats) {
  if (tokens.empty()) throw DataError("empty description after filtering");
  std::map<std::string, double> counts;
  for (const auto& t : tokens) counts[t] += 1.0;
  const double n = static_cast<double>(std::max<std::size_t>(stats.document_count, 1));
  double norm2 = 0.0;
  for (auto& [word, weight] : counts) {
    const double df = static_cast<double>(std::min(stats.df(word), static_cast<std::size_t>(n)));
    weight *= std::log(n / df);
    norm2 += weight * weight;
  }
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& [word, weight] : counts) weight *= inv;
  }
  return counts;
}

TextEmbedding embed_description(data::RelationId relation, const std::string& relation_name,
                                std::string_view description, const WordVectorTable& table,
                                const CorpusStats& stats, const StopWords& stopwords) {
  std::vector<std::string> known;
  for (auto& token : tokenize_and_filter(description, stopwords)) {
    if (table.find(token)) known.push_back(std::move(token));
  }
  if (known.empty()) {
    throw DataError("relation '" + relation_name +
                    "': no description word has a word vector");
  }
  TextEmbedding out;
  out.relation = relation;
  out.weights = tfidf_weights(known, stats);
  out.vector.assign(table.dimension(), 0.0);
  for (const auto& [word, weight] : out.weights) {
    const auto& v = *table.find(word);
    for (std::size_t i = 0; i < v.size(); ++i) out.vector[i] += weight * v[i];
  }
  return out;
}

std::vector<TextEmbedding> embed_relations(const data::ZeroShotSplit& split,
                                           const WordVectorTable& table,
                                           const StopWords& stopwords) {
  std::vector<std::vector<std::string>> docs;
  docs.reserve(split.relations.size());
  for (const auto& r : split.relations) docs.push_back(tokenize_and_filter(r.description, stopwords));
  const CorpusStats stats = CorpusStats::build(docs);
  std::vector<TextEmbedding> out;
  out.reserve(split.relations.size());
  for (const auto& r : split.relations) {
    out.push_back(embed_description(r.id, r.name, r.description, table, stats, stopwords));
  }
  return out;
}

}  // namespace zskg::text
