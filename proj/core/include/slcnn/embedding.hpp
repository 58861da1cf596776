#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "slcnn/corpus.hpp"
#include "slcnn/feature_map.hpp"

namespace slcnn {

inline constexpr std::size_t kDefaultEmbeddingDim = 100;
inline constexpr std::uint64_t kDefaultOovSeed = 42;
inline constexpr float kOovRange = 0.01f;

// Frozen word vectors. Immutable after loading except for the OOV cache,
// which is an insert-once map safe for concurrent lookups.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = kDefaultEmbeddingDim, std::uint64_t oov_seed = kDefaultOovSeed);
  ~EmbeddingTable();
  EmbeddingTable(EmbeddingTable&&) noexcept;
  EmbeddingTable& operator=(EmbeddingTable&&) noexcept;

  // GloVe text format: a token and `dim` decimals per line. Any line with a
  // different field count is an error naming that line. Duplicate tokens
  // keep their first vector.
  static EmbeddingTable load_glove(const std::filesystem::path& path, std::size_t dim,
                                   std::uint64_t oov_seed = kDefaultOovSeed);

  // Vocabulary-slice cache:
  //   "SLCV" | u32 dim | u32 count | count x (u32 len, bytes, dim x f32)
  void save_slice(const std::filesystem::path& path, const Vocabulary& vocab) const;
  static EmbeddingTable load_slice(const std::filesystem::path& path, std::uint64_t oov_seed = kDefaultOovSeed);

  // Returns false if the token was already present.
  bool add(std::string_view token, std::span<const float> vector);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return index_.size(); }
  std::uint64_t oov_seed() const noexcept { return oov_seed_; }
  bool contains(std::string_view token) const;

  // Stored vector, zeros for the pad marker, otherwise the cached OOV draw.
  // The span stays valid for the table's lifetime.
  std::span<const float> lookup(std::string_view token) const;

  // The OOV vector for a token: SplitMix64 seeded with
  // fnv1a64(token) ^ seed, one draw per component mapped to
  // [-0.01, 0.01]. Independent of lookup order.
  static std::vector<float> oov_vector(std::string_view token, std::size_t dim, std::uint64_t seed);

 private:
  struct OovCache;

  std::size_t dim_;
  std::uint64_t oov_seed_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<float> matrix_;
  std::vector<float> zeros_;
  std::unique_ptr<OovCache> oov_;
};

// Label plus the T_d x T_s x d tensor of a document.
struct DocTensor {
  FeatureMap tensor;
  std::size_t label = 0;
};

// One embedding row per vocabulary id, resolved once so that building a
// DocTensor is a pure copy. Row kPadId is all zeros.
class VocabEmbeddings {
 public:
  VocabEmbeddings() = default;
  VocabEmbeddings(const Vocabulary& vocab, const EmbeddingTable& table);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return dim_ == 0 ? 0 : rows_.size() / dim_; }
  std::span<const float> row(TokenId id) const { return {rows_.data() + std::size_t{id} * dim_, dim_}; }

 private:
  std::size_t dim_ = 0;
  std::vector<float> rows_;
};

DocTensor tensorize(const TokenGrid& grid, const Vocabulary& vocab, const EmbeddingTable& table,
                    std::size_t label = 0);
DocTensor tensorize(const TokenGrid& grid, const VocabEmbeddings& embeddings, std::size_t label = 0);

// Writes the tensor of `grid` into `out`, which must already have shape
// T_d x T_s x d.
void tensorize_into(const TokenGrid& grid, const VocabEmbeddings& embeddings, FeatureMap& out);

}  // namespace slcnn
