#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace slcnn {

// Decodes HTML entities, removes markup tags and collapses whitespace,
// repeating until nothing changes, so clean_text is idempotent.
// Sentence punctuation is left in place for split_sentences.
std::string clean_text(std::string_view raw);

// Rule-based splitter. A boundary is a run of '.', '!' or '?' (plus any
// closing quotes/brackets) followed by whitespace and then an uppercase
// letter or digit. A lone '.' after a known abbreviation or a single-letter
// initial does not end a sentence.
std::vector<std::string> split_sentences(std::string_view text);

// Lowercased word tokens. Apostrophes and hyphens are kept only between
// word characters; everything else that is not a letter or digit separates
// tokens and is dropped.
std::vector<std::string> tokenize_words(std::string_view sentence);

// Abbreviations recognised by split_sentences, lowercase, without the final
// period.
std::span<const std::string_view> sentence_abbreviations();

// Joins the text fields of a record into one text. Non-empty fields are
// separated by ". ", or by a single space if the previous field already ends
// in sentence punctuation.
std::string join_fields(std::span<const std::string> fields);

// Full pipeline for one text: clean, split, tokenize. Sentences that have
// no word tokens are dropped.
std::vector<std::vector<std::string>> tokenize_document(std::string_view text);

}  // namespace slcnn
