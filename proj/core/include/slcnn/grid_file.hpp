#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "slcnn/corpus.hpp"

namespace slcnn {

// A preprocessed corpus: every document as a T_d x T_s grid over one
// vocabulary.
struct GridCorpus {
  std::size_t doc_threshold = 0;
  std::size_t sentence_threshold = kDefaultSentenceThreshold;
  Vocabulary vocab;
  std::vector<LabeledGrid> docs;
};

// Packed binary layout, all integers little-endian:
//   "SLCG" | u8 version (1) | u32 T_d | u32 T_s | u64 num_docs
//   | u32 vocab_size | vocab_size x (u32 byte_length, bytes)
//   | num_docs x (u32 label, T_d*T_s x u32 token id)
inline constexpr std::uint8_t kGridFileVersion = 1;

void write_grid_file(const std::filesystem::path& path, const GridCorpus& corpus);
GridCorpus read_grid_file(const std::filesystem::path& path);

}  // namespace slcnn
