#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "slcnn/dataset.hpp"

namespace slcnn {

using TokenId = std::uint32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr std::string_view kPadToken = "<pad>";

// Default words-per-sentence threshold; four horizontal blocks collapse a
// 46-wide sentence to exactly one column.
inline constexpr std::size_t kDefaultSentenceThreshold = 46;

// A document after cleaning, sentence splitting and word tokenization.
using TokenizedDocument = std::vector<std::vector<std::string>>;

TokenizedDocument preprocess(const RawDocument& doc);

// Token interning. Id 0 is always the pad marker.
class Vocabulary {
 public:
  Vocabulary();

  TokenId intern(std::string_view token);
  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  std::size_t size() const noexcept { return tokens_.size(); }
  std::span<const std::string> tokens() const noexcept { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

// A document cropped/padded to exactly T_d x T_s token ids. Padding only
// ever forms suffixes: trailing cells of a row and trailing rows.
class TokenGrid {
 public:
  TokenGrid() = default;
  TokenGrid(std::size_t doc_threshold, std::size_t sentence_threshold);

  std::size_t doc_threshold() const noexcept { return rows_; }
  std::size_t sentence_threshold() const noexcept { return cols_; }

  TokenId at(std::size_t sentence, std::size_t word) const { return cells_[sentence * cols_ + word]; }
  bool is_pad(std::size_t sentence, std::size_t word) const { return at(sentence, word) == kPadId; }
  std::span<const TokenId> cells() const noexcept { return cells_; }

  std::size_t real_sentence_count() const noexcept { return real_sentences_; }
  std::span<const std::size_t> real_word_counts() const noexcept { return real_words_; }

  // Rebuilds a grid from raw cells; counts are recovered from the pad
  // suffixes. Throws FormatError if padding is not suffix-shaped.
  static TokenGrid from_cells(std::size_t doc_threshold, std::size_t sentence_threshold,
                              std::vector<TokenId> cells);

  bool operator==(const TokenGrid&) const = default;

 private:
  friend TokenGrid crop_pad(const TokenizedDocument&, std::size_t, std::size_t, Vocabulary&);

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<TokenId> cells_;
  std::size_t real_sentences_ = 0;
  std::vector<std::size_t> real_words_;
};

struct LabeledGrid {
  std::size_t label = 0;
  TokenGrid grid;
};

// Keeps the first T_d sentences and the first T_s words of each; pads the
// rest with kPadId.
TokenGrid crop_pad(const TokenizedDocument& doc, std::size_t doc_threshold, std::size_t sentence_threshold,
                   Vocabulary& vocab);

// T_d = ceil(mu + 1.5 sigma) over per-document sentence counts, with sigma the
// population standard deviation. Values within 1e-9 of an integer snap to it
// before the ceiling. Never below 1. Throws on an empty list.
std::size_t compute_doc_threshold(std::span<const std::size_t> sentence_counts);

struct CorpusStats {
  std::size_t num_documents = 0;
  std::size_t num_sentences = 0;
  double pct_cropped_sentences = 0;
  double pct_cropped_documents = 0;
  double pct_docs_with_cropped_sentences = 0;
  std::size_t max_sentences_per_doc = 0;
  std::size_t max_words_per_sentence = 0;
  std::size_t vocab_size = 0;
  double mean_sentences_per_doc = 0;
  double stddev_sentences_per_doc = 0;
  std::size_t derived_doc_threshold = 0;
  // Threshold used for pct_cropped_documents (derived unless overridden).
  std::size_t doc_threshold_used = 0;
  std::size_t sentence_threshold = kDefaultSentenceThreshold;

  nlohmann::json to_json() const;
};

// Associative fold behind corpus_stats. Accumulators built over disjoint
// document ranges can be merged in any grouping with identical results.
class CorpusStatsAccumulator {
 public:
  explicit CorpusStatsAccumulator(std::size_t sentence_threshold = kDefaultSentenceThreshold)
      : sentence_threshold_(sentence_threshold) {}

  void add(const TokenizedDocument& doc);
  void merge(const CorpusStatsAccumulator& other);

  // Throws if no documents were added.
  CorpusStats finish(std::optional<std::size_t> doc_threshold_override = std::nullopt) const;

  std::size_t documents() const noexcept { return documents_; }

 private:
  std::size_t sentence_threshold_;
  std::size_t documents_ = 0;
  std::size_t sentences_ = 0;
  std::size_t cropped_sentences_ = 0;
  std::size_t docs_with_cropped_sentences_ = 0;
  std::size_t max_words_ = 0;
  // sentence count -> number of documents with that count
  std::unordered_map<std::size_t, std::size_t> histogram_;
  std::unordered_set<std::string> vocab_;
};

CorpusStats corpus_stats(std::span<const RawDocument> docs, std::size_t sentence_threshold = kDefaultSentenceThreshold,
                         std::optional<std::size_t> doc_threshold_override = std::nullopt);

}  // namespace slcnn
