#include "inputs.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <numeric>
#include <ostream>

#include "slcnn/binary_io.hpp"
#include "slcnn/rng.hpp"
#include "slcnn/text.hpp"

namespace slcnn::cli {
namespace {

bool has_magic(const std::filesystem::path& path, std::string_view magic) {
  std::ifstream f(path, std::ios::binary);
  std::array<char, 4> buf{};
  return f.read(buf.data(), buf.size()) && std::string_view(buf.data(), buf.size()) == magic;
}

}  // namespace

std::filesystem::path resolve_input(const std::string& path, const std::string& data_dir) {
  namespace fs = std::filesystem;
  const fs::path p(path);
  if (fs::exists(p)) return fs::absolute(p);
  if (p.is_relative() && !data_dir.empty() && fs::exists(fs::path(data_dir) / p)) {
    return fs::absolute(fs::path(data_dir) / p);
  }
  std::string msg = "input not found: " + path;
  if (p.is_relative()) {
    msg += data_dir.empty() ? " (no data directory set)" : " (also looked in " + data_dir + ")";
  }
  throw UsageError(msg);
}

std::size_t Source::max_label() const {
  std::size_t m = 0;
  for (std::size_t i = 0; i < size(); ++i) m = std::max(m, label(i));
  return m;
}

bool is_grid_file(const std::filesystem::path& path) { return has_magic(path, "SLCG"); }

Source read_source(const std::filesystem::path& path, const ReadOptions& options, std::ostream& log) {
  Source s;
  s.path = path;
  if (is_grid_file(path)) {
    s.grids = read_grid_file(path);
    return s;
  }
  LoadOptions lo;
  lo.format = options.format;
  lo.policy = options.strict ? MalformedPolicy::kAbort : MalformedPolicy::kSkip;
  lo.schema.text_fields = options.text_fields;
  LoadSummary summary;
  s.raw = load_dataset(path, lo, &summary);
  if (summary.skipped > 0) {
    log << "warning: " << path.string() << ": skipped " << summary.skipped << " malformed record(s)\n";
    for (const auto& m : summary.messages) log << "  " << m << '\n';
  }
  if (s.raw.empty()) throw FormatError(path.string() + ": no usable records");
  return s;
}

std::vector<std::size_t> sentence_counts(const Source& source) {
  std::vector<std::size_t> counts;
  if (source.grids) {
    for (const auto& d : source.grids->docs) counts.push_back(d.grid.real_sentence_count());
    return counts;
  }
  counts.reserve(source.raw.size());
  for (const auto& d : source.raw) counts.push_back(preprocess(d).size());
  return counts;
}

std::vector<std::size_t> select_subset(std::size_t size, std::optional<std::size_t> n, std::uint64_t seed) {
  std::vector<std::size_t> order(size);
  std::iota(order.begin(), order.end(), 0);
  if (!n || *n >= size) return order;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  order.resize(*n);
  return order;
}

std::vector<LabeledGrid> build_grids(const Source& source, const std::vector<std::size_t>& indices,
                                     std::size_t doc_threshold, std::size_t sentence_threshold, Vocabulary& vocab) {
  std::vector<LabeledGrid> out;
  out.reserve(indices.size());
  if (source.grids) {
    const auto& g = *source.grids;
    if (g.doc_threshold != doc_threshold || g.sentence_threshold != sentence_threshold) {
      throw ConfigError(source.path.string() + " holds " + std::to_string(g.doc_threshold) + "x" +
                        std::to_string(g.sentence_threshold) + " grids, expected " + std::to_string(doc_threshold) +
                        "x" + std::to_string(sentence_threshold));
    }
    // Re-intern into the shared vocabulary.
    std::vector<TokenId> remap(g.vocab.size());
    for (TokenId id = 0; id < g.vocab.size(); ++id) remap[id] = vocab.intern(g.vocab.token(id));
    for (const auto i : indices) {
      const auto& doc = g.docs[i];
      std::vector<TokenId> cells(doc.grid.cells().begin(), doc.grid.cells().end());
      for (auto& c : cells) c = remap[c];
      out.push_back({doc.label, TokenGrid::from_cells(doc_threshold, sentence_threshold, std::move(cells))});
    }
    return out;
  }
  for (const auto i : indices) {
    const auto& doc = source.raw[i];
    out.push_back({doc.label, crop_pad(preprocess(doc), doc_threshold, sentence_threshold, vocab)});
  }
  return out;
}

LoadedEmbeddings load_embeddings(const std::string& spec, const std::string& data_dir, std::size_t dim,
                                 std::uint64_t oov_seed) {
  if (spec == "none") return {EmbeddingTable(dim, oov_seed), "none", "none"};
  const auto path = resolve_input(spec, data_dir);
  const auto digest = file_digest(path);
  if (has_magic(path, "SLCV")) {
    auto table = EmbeddingTable::load_slice(path, oov_seed);
    if (table.dim() != dim) {
      throw ConfigError("embedding slice " + path.string() + " has dimension " + std::to_string(table.dim()) +
                        ", expected " + std::to_string(dim));
    }
    return {std::move(table), path.string(), digest};
  }
  return {EmbeddingTable::load_glove(path, dim, oov_seed), path.string(), digest};
}

}  // namespace slcnn::cli
