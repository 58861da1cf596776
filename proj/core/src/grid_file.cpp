#include "slcnn/grid_file.hpp"

#include "slcnn/binary_io.hpp"
#include "slcnn/error.hpp"

namespace slcnn {

void write_grid_file(const std::filesystem::path& path, const GridCorpus& corpus) {
  ByteWriter w;
  w.put_bytes(std::string_view("SLCG"));
  w.put_u8(kGridFileVersion);
  w.put_u32(static_cast<std::uint32_t>(corpus.doc_threshold));
  w.put_u32(static_cast<std::uint32_t>(corpus.sentence_threshold));
  w.put_u64(corpus.docs.size());
  w.put_u32(static_cast<std::uint32_t>(corpus.vocab.size()));
  for (const auto& token : corpus.vocab.tokens()) {
    w.put_u32(static_cast<std::uint32_t>(token.size()));
    w.put_bytes(token);
  }
  for (const auto& doc : corpus.docs) {
    if (doc.grid.doc_threshold() != corpus.doc_threshold ||
        doc.grid.sentence_threshold() != corpus.sentence_threshold) {
      throw ShapeError("grid dimensions differ from the corpus thresholds");
    }
    w.put_u32(static_cast<std::uint32_t>(doc.label));
    for (const auto id : doc.grid.cells()) w.put_u32(id);
  }
  write_file_bytes(path, w.bytes());
}

GridCorpus read_grid_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes, "grid file " + path.string());
  if (r.get_string(4) != "SLCG") throw FormatError(path.string() + ": not a grid file (bad magic)");
  if (const auto version = r.get_u8(); version != kGridFileVersion) {
    throw FormatError(path.string() + ": unsupported grid file version " + std::to_string(version));
  }
  GridCorpus corpus;
  corpus.doc_threshold = r.get_u32();
  corpus.sentence_threshold = r.get_u32();
  const auto num_docs = r.get_u64();
  const auto vocab_size = r.get_u32();
  if (vocab_size == 0) throw FormatError(path.string() + ": empty vocabulary");
  for (std::uint32_t i = 0; i < vocab_size; ++i) {
    const auto token = r.get_string(r.get_u32());
    if (i == 0) {
      if (token != kPadToken) throw FormatError(path.string() + ": vocabulary entry 0 must be the pad marker");
      continue;
    }
    if (corpus.vocab.intern(token) != i) throw FormatError(path.string() + ": duplicate vocabulary entry");
  }
  const std::size_t cells = corpus.doc_threshold * corpus.sentence_threshold;
  if (num_docs > r.remaining() / (4 * (cells + 1))) throw FormatError(path.string() + ": truncated");
  corpus.docs.reserve(num_docs);
  for (std::uint64_t d = 0; d < num_docs; ++d) {
    LabeledGrid doc;
    doc.label = r.get_u32();
    std::vector<TokenId> ids(cells);
    for (auto& id : ids) {
      id = r.get_u32();
      if (id >= vocab_size) throw FormatError(path.string() + ": token id out of range");
    }
    doc.grid = TokenGrid::from_cells(corpus.doc_threshold, corpus.sentence_threshold, std::move(ids));
    corpus.docs.push_back(std::move(doc));
  }
  if (r.remaining() != 0) throw FormatError(path.string() + ": trailing bytes");
  return corpus;
}

}  // namespace slcnn
