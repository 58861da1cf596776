#include "slcnn/corpus.hpp"

#include <algorithm>
#include <cmath>

#include "slcnn/error.hpp"
#include "slcnn/text.hpp"

namespace slcnn {

TokenizedDocument preprocess(const RawDocument& doc) { return tokenize_document(join_fields(doc.fields)); }

Vocabulary::Vocabulary() {
  tokens_.emplace_back(kPadToken);
  ids_.emplace(std::string(kPadToken), kPadId);
}

TokenId Vocabulary::intern(std::string_view token) {
  std::string key(token);
  if (auto it = ids_.find(key); it != ids_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(key);
  ids_.emplace(std::move(key), id);
  return id;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  if (auto it = ids_.find(std::string(token)); it != ids_.end()) return it->second;
  return std::nullopt;
}

TokenGrid::TokenGrid(std::size_t doc_threshold, std::size_t sentence_threshold)
    : rows_(doc_threshold),
      cols_(sentence_threshold),
      cells_(doc_threshold * sentence_threshold, kPadId),
      real_words_(doc_threshold, 0) {
  if (doc_threshold == 0 || sentence_threshold == 0) {
    throw ConfigError("token grid thresholds must be >= 1");
  }
}

TokenGrid TokenGrid::from_cells(std::size_t doc_threshold, std::size_t sentence_threshold,
                                std::vector<TokenId> cells) {
  TokenGrid grid(doc_threshold, sentence_threshold);
  if (cells.size() != grid.cells_.size()) throw FormatError("token grid has the wrong number of cells");
  grid.cells_ = std::move(cells);
  bool pad_rows_started = false;
  for (std::size_t i = 0; i < doc_threshold; ++i) {
    std::size_t words = 0;
    while (words < sentence_threshold && grid.at(i, words) != kPadId) ++words;
    for (std::size_t j = words; j < sentence_threshold; ++j) {
      if (grid.at(i, j) != kPadId) throw FormatError("token grid has interior padding");
    }
    if (words == 0) {
      pad_rows_started = true;
    } else if (pad_rows_started) {
      throw FormatError("token grid has an interior pad row");
    } else {
      ++grid.real_sentences_;
    }
    grid.real_words_[i] = words;
  }
  return grid;
}

TokenGrid crop_pad(const TokenizedDocument& doc, std::size_t doc_threshold, std::size_t sentence_threshold,
                   Vocabulary& vocab) {
  TokenGrid grid(doc_threshold, sentence_threshold);
  const auto rows = std::min(doc.size(), doc_threshold);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto words = std::min(doc[i].size(), sentence_threshold);
    for (std::size_t j = 0; j < words; ++j) {
      grid.cells_[i * sentence_threshold + j] = vocab.intern(doc[i][j]);
    }
    grid.real_words_[i] = words;
  }
  grid.real_sentences_ = rows;
  return grid;
}

namespace {

__extension__ typedef unsigned __int128 UInt128;

// ceil(mean + 1.5 sd) from exact integer moments.
std::size_t threshold_from_moments(std::size_t n, UInt128 sum, UInt128 sum_squares,
                                   double& mean, double& sd) {
  const auto nn = static_cast<UInt128>(n);
  // n^2 * variance = n * sum(x^2) - sum(x)^2, exact in 128-bit integers.
  const UInt128 scaled_variance = nn * sum_squares - sum * sum;
  mean = static_cast<double>(sum) / static_cast<double>(n);
  sd = std::sqrt(static_cast<double>(scaled_variance)) / static_cast<double>(n);
  const double value = mean + 1.5 * sd;
  const double nearest = std::round(value);
  const double snapped = std::abs(value - nearest) < 1e-9 ? nearest : std::ceil(value);
  return std::max<std::size_t>(1, static_cast<std::size_t>(snapped));
}

}  // namespace

std::size_t compute_doc_threshold(std::span<const std::size_t> sentence_counts) {
  if (sentence_counts.empty()) throw Error("compute_doc_threshold: empty sentence-count list");
  UInt128 sum = 0;
  UInt128 sum_squares = 0;
  for (const auto c : sentence_counts) {
    sum += c;
    sum_squares += static_cast<UInt128>(c) * c;
  }
  double mean = 0;
  double sd = 0;
  return threshold_from_moments(sentence_counts.size(), sum, sum_squares, mean, sd);
}

void CorpusStatsAccumulator::add(const TokenizedDocument& doc) {
  ++documents_;
  sentences_ += doc.size();
  ++histogram_[doc.size()];
  bool cropped = false;
  for (const auto& sentence : doc) {
    max_words_ = std::max(max_words_, sentence.size());
    if (sentence.size() > sentence_threshold_) {
      ++cropped_sentences_;
      cropped = true;
    }
    for (const auto& word : sentence) vocab_.insert(word);
  }
  if (cropped) ++docs_with_cropped_sentences_;
}

void CorpusStatsAccumulator::merge(const CorpusStatsAccumulator& other) {
  if (other.sentence_threshold_ != sentence_threshold_) {
    throw ConfigError("cannot merge corpus statistics computed with different sentence thresholds");
  }
  documents_ += other.documents_;
  sentences_ += other.sentences_;
  cropped_sentences_ += other.cropped_sentences_;
  docs_with_cropped_sentences_ += other.docs_with_cropped_sentences_;
  max_words_ = std::max(max_words_, other.max_words_);
  for (const auto& [count, docs] : other.histogram_) histogram_[count] += docs;
  vocab_.insert(other.vocab_.begin(), other.vocab_.end());
}

CorpusStats CorpusStatsAccumulator::finish(std::optional<std::size_t> doc_threshold_override) const {
  if (documents_ == 0) throw Error("corpus_stats: empty dataset");
  CorpusStats s;
  s.num_documents = documents_;
  s.num_sentences = sentences_;
  s.sentence_threshold = sentence_threshold_;
  s.max_words_per_sentence = max_words_;
  s.vocab_size = vocab_.size();

  UInt128 sum = 0;
  UInt128 sum_squares = 0;
  for (const auto& [count, docs] : histogram_) {
    sum += static_cast<UInt128>(count) * docs;
    sum_squares += static_cast<UInt128>(count) * count * docs;
    s.max_sentences_per_doc = std::max(s.max_sentences_per_doc, count);
  }
  s.derived_doc_threshold =
      threshold_from_moments(documents_, sum, sum_squares, s.mean_sentences_per_doc, s.stddev_sentences_per_doc);
  s.doc_threshold_used = doc_threshold_override.value_or(s.derived_doc_threshold);

  std::size_t cropped_docs = 0;
  for (const auto& [count, docs] : histogram_) {
    if (count > s.doc_threshold_used) cropped_docs += docs;
  }
  const auto pct = [](std::size_t part, std::size_t whole) {
    return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
  };
  s.pct_cropped_sentences = pct(cropped_sentences_, sentences_);
  s.pct_cropped_documents = pct(cropped_docs, documents_);
  s.pct_docs_with_cropped_sentences = pct(docs_with_cropped_sentences_, documents_);
  return s;
}

CorpusStats corpus_stats(std::span<const RawDocument> docs, std::size_t sentence_threshold,
                         std::optional<std::size_t> doc_threshold_override) {
  CorpusStatsAccumulator acc(sentence_threshold);
  for (const auto& doc : docs) acc.add(preprocess(doc));
  return acc.finish(doc_threshold_override);
}

nlohmann::json CorpusStats::to_json() const {
  return {
      {"schema", "slcnn.corpus_stats/1"},
      {"num_documents", num_documents},
      {"num_sentences", num_sentences},
      {"pct_cropped_sentences", pct_cropped_sentences},
      {"pct_cropped_documents", pct_cropped_documents},
      {"pct_docs_with_cropped_sentences", pct_docs_with_cropped_sentences},
      {"max_sentences_per_doc", max_sentences_per_doc},
      {"max_words_per_sentence", max_words_per_sentence},
      {"vocab_size", vocab_size},
      {"mean_sentences_per_doc", mean_sentences_per_doc},
      {"stddev_sentences_per_doc", stddev_sentences_per_doc},
      {"t_d", derived_doc_threshold},
      {"t_d_used", doc_threshold_used},
      {"t_s", sentence_threshold},
  };
}

}  // namespace slcnn
