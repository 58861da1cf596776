#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "slcnn/corpus.hpp"
#include "slcnn/dataset.hpp"
#include "slcnn/embedding.hpp"
#include "slcnn/grid_file.hpp"

namespace slcnn::cli {

// Bad flags or missing inputs; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Existing paths are used as given; a relative path that does not exist is
// looked up under `data_dir`. Returns an absolute path or throws UsageError.
std::filesystem::path resolve_input(const std::string& path, const std::string& data_dir);

// A labeled input set: either raw records still to be tokenized, or an
// already preprocessed grid file.
struct Source {
  std::filesystem::path path;
  std::vector<RawDocument> raw;
  std::optional<GridCorpus> grids;

  std::size_t size() const { return grids ? grids->docs.size() : raw.size(); }
  std::size_t label(std::size_t i) const { return grids ? grids->docs[i].label : raw[i].label; }
  std::size_t max_label() const;
};

struct ReadOptions {
  DatasetFormat format = DatasetFormat::kAuto;
  bool strict = false;
  std::vector<std::string> text_fields;
};

// Grid files are recognised by their magic; anything else goes through the
// dataset reader. Skipped records are reported on `log`.
Source read_source(const std::filesystem::path& path, const ReadOptions& options, std::ostream& log);

bool is_grid_file(const std::filesystem::path& path);

// Sentences per document after the full text pipeline (raw sources only).
std::vector<std::size_t> sentence_counts(const Source& source);

// The first n indices of a permutation drawn from `seed`; all indices in
// order when n is absent or not smaller than the source.
std::vector<std::size_t> select_subset(std::size_t size, std::optional<std::size_t> n, std::uint64_t seed);

// Grids for the selected documents over a shared vocabulary. Grid-file
// sources must already have the requested shape.
std::vector<LabeledGrid> build_grids(const Source& source, const std::vector<std::size_t>& indices,
                                     std::size_t doc_threshold, std::size_t sentence_threshold, Vocabulary& vocab);

struct LoadedEmbeddings {
  EmbeddingTable table;
  std::string path;    // "none" when every token is out of vocabulary
  std::string digest;  // file digest, or "none"
};

// `spec` is "none", a GloVe text file or a vocabulary-slice file.
LoadedEmbeddings load_embeddings(const std::string& spec, const std::string& data_dir, std::size_t dim,
                                 std::uint64_t oov_seed);

inline constexpr const char* kDefaultEmbeddingsFile = "glove.6B.100d.txt";

}  // namespace slcnn::cli
