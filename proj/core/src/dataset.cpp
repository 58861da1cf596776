#include "slcnn/dataset.hpp"

#include <charconv>
#include <nlohmann/json.hpp>

#include "slcnn/error.hpp"

namespace slcnn {
namespace {

std::string decode_escapes(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size() && s[i + 1] == 'n') {
      out += ' ';
      ++i;
    } else {
      out += s[i];
    }
  }
  return out;
}

bool blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
}

std::size_t parse_label(std::string_view text, std::size_t line) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || value < 1) {
    throw RecordError(line, "class index '" + std::string(text) + "' is not a positive integer");
  }
  return static_cast<std::size_t>(value - 1);
}

}  // namespace

bool read_csv_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line) {
  fields.clear();
  int c = in.get();
  if (c == EOF) return false;
  const std::size_t start_line = line + 1;
  ++line;

  std::string field;
  bool in_quotes = false;
  bool was_quoted = false;
  bool after_quote = false;
  for (;; c = in.get()) {
    if (in_quotes) {
      if (c == EOF) throw RecordError(start_line, "unterminated quoted field");
      if (c == '"') {
        if (in.peek() == '"') {
          field += '"';
          in.get();
        } else {
          in_quotes = false;
          after_quote = true;
        }
      } else {
        if (c == '\n') ++line;
        field += static_cast<char>(c);
      }
      continue;
    }
    if (c == EOF || c == '\n' || c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      was_quoted = after_quote = false;
      if (c == ',') continue;
      break;
    }
    if (c == '\r' && (in.peek() == '\n' || in.peek() == EOF)) continue;
    if (after_quote) {
      // Consume the rest of the physical line so the next record starts clean.
      std::string rest;
      std::getline(in, rest);
      throw RecordError(start_line, "unexpected character after closing quote");
    }
    if (c == '"' && field.empty() && !was_quoted) {
      in_quotes = was_quoted = true;
      continue;
    }
    field += static_cast<char>(c);
  }
  return true;
}

DatasetFormat detect_format(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".jsonl" || ext == ".ndjson" || ext == ".json") return DatasetFormat::kJsonLines;
  return DatasetFormat::kCsv;
}

struct DatasetReader::Impl {
  std::ifstream in;
  std::filesystem::path path;
  DatasetFormat format = DatasetFormat::kCsv;
  std::size_t line = 0;
  std::vector<std::string> fields;
};

DatasetReader::DatasetReader(const std::filesystem::path& path, LoadOptions options)
    : impl_(std::make_unique<Impl>()), options_(std::move(options)) {
  impl_->path = path;
  impl_->in.open(path, std::ios::binary);
  if (!impl_->in) throw IoError("cannot open dataset " + path.string());
  impl_->format = options_.format == DatasetFormat::kAuto ? detect_format(path) : options_.format;
}

DatasetReader::~DatasetReader() = default;
DatasetReader::DatasetReader(DatasetReader&&) noexcept = default;
DatasetReader& DatasetReader::operator=(DatasetReader&&) noexcept = default;

std::optional<RawDocument> DatasetReader::next() {
  auto& s = *impl_;
  for (;;) {
    try {
      RawDocument doc;
      std::size_t record_line = s.line + 1;
      if (s.format == DatasetFormat::kCsv) {
        if (!read_csv_record(s.in, s.fields, s.line)) return std::nullopt;
        if (s.fields.size() == 1 && blank(s.fields[0])) continue;
        if (s.fields.size() < 2) throw RecordError(record_line, "expected at least 2 fields");
        const auto& wanted = options_.schema.text_fields;
        if (!wanted.empty() && s.fields.size() != wanted.size() + 1) {
          throw RecordError(record_line, "expected " + std::to_string(wanted.size() + 1) + " fields, found " +
                                             std::to_string(s.fields.size()));
        }
        doc.label = parse_label(s.fields[0], record_line);
        for (std::size_t i = 1; i < s.fields.size(); ++i) doc.fields.push_back(decode_escapes(s.fields[i]));
      } else {
        std::string text;
        if (!std::getline(s.in, text)) return std::nullopt;
        ++s.line;
        if (blank(text)) continue;
        nlohmann::json obj;
        try {
          obj = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
          throw RecordError(record_line, std::string("invalid JSON: ") + e.what());
        }
        if (!obj.is_object() || !obj.contains("label") || !obj["label"].is_number_integer()) {
          throw RecordError(record_line, "expected an object with an integer \"label\"");
        }
        const auto label = obj["label"].get<long long>();
        if (label < 1) throw RecordError(record_line, "label must be a positive integer");
        doc.label = static_cast<std::size_t>(label - 1);
        static const std::vector<std::string> kDefaultKeys{"text"};
        const auto& keys = options_.schema.text_fields.empty() ? kDefaultKeys : options_.schema.text_fields;
        for (const auto& key : keys) {
          if (!obj.contains(key) || !obj[key].is_string()) {
            throw RecordError(record_line, "missing string field \"" + key + "\"");
          }
          doc.fields.push_back(decode_escapes(obj[key].get<std::string>()));
        }
      }
      if (options_.num_classes && doc.label >= *options_.num_classes) {
        throw RecordError(record_line, "label " + std::to_string(doc.label + 1) + " exceeds " +
                                           std::to_string(*options_.num_classes) + " classes");
      }
      bool any_text = false;
      for (const auto& f : doc.fields) any_text = any_text || !blank(f);
      if (!any_text) throw RecordError(record_line, "empty document");
      ++summary_.loaded;
      return doc;
    } catch (const RecordError& e) {
      if (options_.policy == MalformedPolicy::kAbort) throw;
      ++summary_.skipped;
      if (summary_.messages.size() < LoadSummary::kMaxMessages) summary_.messages.emplace_back(e.what());
    }
  }
}

std::vector<RawDocument> load_dataset(const std::filesystem::path& path, const LoadOptions& options,
                                      LoadSummary* summary) {
  DatasetReader reader(path, options);
  std::vector<RawDocument> docs;
  while (auto doc = reader.next()) docs.push_back(std::move(*doc));
  if (summary) *summary = reader.summary();
  return docs;
}

}  // namespace slcnn
