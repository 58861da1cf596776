#include "slcnn/embedding.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <mutex>
#include <shared_mutex>

#include "slcnn/binary_io.hpp"
#include "slcnn/error.hpp"
#include "slcnn/rng.hpp"

namespace slcnn {

struct EmbeddingTable::OovCache {
  std::shared_mutex mutex;
  // Node-based: element addresses survive rehashing.
  std::unordered_map<std::string, std::vector<float>> vectors;
};

EmbeddingTable::EmbeddingTable(std::size_t dim, std::uint64_t oov_seed)
    : dim_(dim), oov_seed_(oov_seed), zeros_(dim, 0.0f), oov_(std::make_unique<OovCache>()) {
  if (dim == 0) throw ConfigError("embedding dimension must be >= 1");
}

EmbeddingTable::~EmbeddingTable() = default;
EmbeddingTable::EmbeddingTable(EmbeddingTable&&) noexcept = default;
EmbeddingTable& EmbeddingTable::operator=(EmbeddingTable&&) noexcept = default;

bool EmbeddingTable::add(std::string_view token, std::span<const float> vector) {
  if (vector.size() != dim_) {
    throw ShapeError("embedding vector has " + std::to_string(vector.size()) + " components, expected " +
                     std::to_string(dim_));
  }
  const auto [it, inserted] = index_.try_emplace(std::string(token), index_.size());
  if (!inserted) return false;
  matrix_.insert(matrix_.end(), vector.begin(), vector.end());
  return true;
}

bool EmbeddingTable::contains(std::string_view token) const { return index_.contains(std::string(token)); }

std::vector<float> EmbeddingTable::oov_vector(std::string_view token, std::size_t dim, std::uint64_t seed) {
  SplitMix64 gen(fnv1a64(token) ^ seed);
  std::vector<float> v(dim);
  for (auto& x : v) {
    const double u = gen.uniform();
    x = static_cast<float>(-0.01 + 0.02 * u);
  }
  return v;
}

std::span<const float> EmbeddingTable::lookup(std::string_view token) const {
  if (token == kPadToken) return zeros_;
  std::string key(token);
  if (auto it = index_.find(key); it != index_.end()) {
    return {matrix_.data() + it->second * dim_, dim_};
  }
  {
    std::shared_lock lock(oov_->mutex);
    if (auto it = oov_->vectors.find(key); it != oov_->vectors.end()) return it->second;
  }
  auto vec = oov_vector(token, dim_, oov_seed_);
  std::unique_lock lock(oov_->mutex);
  // try_emplace keeps the first insertion if another thread won the race;
  // both computed the same vector anyway.
  const auto [it, inserted] = oov_->vectors.try_emplace(std::move(key), std::move(vec));
  return it->second;
}

EmbeddingTable EmbeddingTable::load_glove(const std::filesystem::path& path, std::size_t dim,
                                          std::uint64_t oov_seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embeddings " + path.string());
  EmbeddingTable table(dim, oov_seed);
  std::string line;
  std::vector<float> values(dim);
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string_view rest(line);
    const auto token_end = rest.find(' ');
    if (token_end == 0 || token_end == std::string_view::npos) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) + ": expected a token and " +
                        std::to_string(dim) + " values");
    }
    const auto token = rest.substr(0, token_end);
    rest.remove_prefix(token_end);
    std::size_t count = 0;
    for (;;) {
      while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
      if (rest.empty()) break;
      float v = 0;
      const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), v);
      if (ec != std::errc{} || (ptr != rest.data() + rest.size() && *ptr != ' ')) {
        throw FormatError(path.string() + ": line " + std::to_string(line_no) + ": invalid number");
      }
      if (count < dim) values[count] = v;
      ++count;
      rest.remove_prefix(static_cast<std::size_t>(ptr - rest.data()));
    }
    if (count != dim) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                        " values, found " + std::to_string(count));
    }
    table.add(token, values);
  }
  return table;
}

void EmbeddingTable::save_slice(const std::filesystem::path& path, const Vocabulary& vocab) const {
  ByteWriter w;
  w.put_bytes(std::string_view("SLCV"));
  w.put_u32(static_cast<std::uint32_t>(dim_));
  std::vector<const std::string*> kept;
  for (const auto& token : vocab.tokens()) {
    if (index_.contains(token)) kept.push_back(&token);
  }
  w.put_u32(static_cast<std::uint32_t>(kept.size()));
  for (const auto* token : kept) {
    w.put_u32(static_cast<std::uint32_t>(token->size()));
    w.put_bytes(*token);
    for (const float v : lookup(*token)) w.put_f32(v);
  }
  write_file_bytes(path, w.bytes());
}

EmbeddingTable EmbeddingTable::load_slice(const std::filesystem::path& path, std::uint64_t oov_seed) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes, "embedding slice " + path.string());
  if (r.get_string(4) != "SLCV") throw FormatError(path.string() + ": not an embedding slice (bad magic)");
  const auto dim = r.get_u32();
  const auto count = r.get_u32();
  EmbeddingTable table(dim, oov_seed);
  std::vector<float> values(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto token = r.get_string(r.get_u32());
    r.get_f32_array(values);
    table.add(token, values);
  }
  if (r.remaining() != 0) throw FormatError(path.string() + ": trailing bytes");
  return table;
}

VocabEmbeddings::VocabEmbeddings(const Vocabulary& vocab, const EmbeddingTable& table) : dim_(table.dim()) {
  rows_.reserve(vocab.size() * dim_);
  for (const auto& token : vocab.tokens()) {
    const auto v = table.lookup(token);
    rows_.insert(rows_.end(), v.begin(), v.end());
  }
}

void tensorize_into(const TokenGrid& grid, const VocabEmbeddings& embeddings, FeatureMap& out) {
  if (out.rows() != grid.doc_threshold() || out.cols() != grid.sentence_threshold() ||
      out.channels() != embeddings.dim()) {
    throw ShapeError("tensorize: output tensor does not match grid x embedding dimensions");
  }
  for (std::size_t i = 0; i < grid.doc_threshold(); ++i) {
    for (std::size_t j = 0; j < grid.sentence_threshold(); ++j) {
      const auto id = grid.at(i, j);
      if (id >= embeddings.size()) throw ShapeError("tensorize: token id outside the resolved vocabulary");
      std::ranges::copy(embeddings.row(id), out.at(i, j).begin());
    }
  }
}

DocTensor tensorize(const TokenGrid& grid, const VocabEmbeddings& embeddings, std::size_t label) {
  DocTensor doc{FeatureMap(grid.doc_threshold(), grid.sentence_threshold(), embeddings.dim()), label};
  tensorize_into(grid, embeddings, doc.tensor);
  return doc;
}

DocTensor tensorize(const TokenGrid& grid, const Vocabulary& vocab, const EmbeddingTable& table, std::size_t label) {
  DocTensor doc{FeatureMap(grid.doc_threshold(), grid.sentence_threshold(), table.dim()), label};
  for (std::size_t i = 0; i < grid.doc_threshold(); ++i) {
    for (std::size_t j = 0; j < grid.sentence_threshold(); ++j) {
      std::ranges::copy(table.lookup(vocab.token(grid.at(i, j))), doc.tensor.at(i, j).begin());
    }
  }
  return doc;
}

}  // namespace slcnn
