#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "zskg/dataset.hpp"

namespace zskg::text {

using StopWords = std::unordered_set<std::string>;

/// Pretrained word vectors keyed by lowercased word.
class WordVectorTable {
 public:
  WordVectorTable() = default;
  explicit WordVectorTable(std::size_t dimension) : dimension_(dimension) {}

  /// `word v1 ... vd` per line; an optional leading `count dim` header is
  /// skipped. Throws DataError on ragged rows or unparsable numbers.
  static WordVectorTable load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Keeps the first vector for a word. Throws on a dimension mismatch.
  void add(std::string_view word, std::vector<double> vector);
  const std::vector<double>* find(std::string_view word) const;

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::size_t dimension_ = 0;
  std::vector<std::string> words_;  // insertion order
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

/// One word per line; blank lines ignored.
StopWords load_stopwords(const std::filesystem::path& path);

std::string to_lower(std::string_view text);

/// Lowercased alphabetic tokens in order, with stop-words removed. Any
/// character that is not a letter separates tokens.
std::vector<std::string> tokenize_and_filter(std::string_view description, const StopWords& stopwords);

/// Document frequencies over a corpus of token lists.
struct CorpusStats {
  std::size_t document_count = 0;
  std::unordered_map<std::string, std::size_t> document_frequency;

  static CorpusStats build(std::span<const std::vector<std::string>> documents);
  std::size_t df(const std::string& word) const;  // 1 when unseen
};

/// raw(w) = tf(w) · ln(N / df(w)), L2-normalized over the distinct words.
/// A description whose raw weights are all zero keeps all-zero weights.
/// Throws DataError("empty description after filtering") on no tokens.
std::map<std::string, double> tfidf_weights(std::span<const std::string> tokens,
                                            const CorpusStats& stats);

struct TextEmbedding {
  data::RelationId relation = 0;
  std::vector<double> vector;
  std::map<std::string, double> weights;
};

/// TF-IDF weighted sum of word vectors. Out-of-vocabulary tokens are dropped
/// before weighting; throws DataError naming the relation if none remain.
TextEmbedding embed_description(data::RelationId relation, const std::string& relation_name,
                                std::string_view description, const WordVectorTable& table,
                                const CorpusStats& stats, const StopWords& stopwords);

/// Embeds every relation of the split; IDF is computed over all relation
/// descriptions (every role).
std::vector<TextEmbedding> embed_relations(const data::ZeroShotSplit& split,
                                           const WordVectorTable& table,
                                           const StopWords& stopwords);

}  // namespace zskg::text
