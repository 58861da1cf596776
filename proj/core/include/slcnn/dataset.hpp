#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace slcnn {

// One labeled record. `label` is 0-based; files store 1-based indices.
struct RawDocument {
  std::size_t label = 0;
  std::vector<std::string> fields;
};

enum class DatasetFormat { kAuto, kCsv, kJsonLines };

enum class MalformedPolicy {
  kSkip,   // count, keep the first few messages, continue
  kAbort,  // throw RecordError
};

struct DatasetSchema {
  // CSV: when non-empty, each row must have exactly 1 + text_fields.size()
  // fields. JSON lines: the object keys holding text, in join order.
  std::vector<std::string> text_fields;
};

struct LoadOptions {
  DatasetFormat format = DatasetFormat::kAuto;
  MalformedPolicy policy = MalformedPolicy::kSkip;
  DatasetSchema schema;
  // Labels >= num_classes are malformed when set.
  std::optional<std::size_t> num_classes;
};

struct LoadSummary {
  std::size_t loaded = 0;
  std::size_t skipped = 0;
  std::vector<std::string> messages;  // first kMaxMessages record errors

  static constexpr std::size_t kMaxMessages = 20;
};

// Streams RawDocuments from a benchmark-style CSV file (class, then quoted fields)
// ("<class>","<field>",...) or a JSON-lines file ({"label": n, "text": s}).
// Literal "\n" escapes inside text become spaces.
class DatasetReader {
 public:
  DatasetReader(const std::filesystem::path& path, LoadOptions options = {});
  ~DatasetReader();
  DatasetReader(DatasetReader&&) noexcept;
  DatasetReader& operator=(DatasetReader&&) noexcept;

  std::optional<RawDocument> next();

  const LoadSummary& summary() const noexcept { return summary_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  LoadOptions options_;
  LoadSummary summary_;
};

std::vector<RawDocument> load_dataset(const std::filesystem::path& path, const LoadOptions& options = {},
                                      LoadSummary* summary = nullptr);

// Parses one CSV record (may span several physical lines). Exposed for tests.
// Returns false at end of input. `line` is advanced past the record.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line);

DatasetFormat detect_format(const std::filesystem::path& path);

}  // namespace slcnn
