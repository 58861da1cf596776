#include <gtest/gtest.h>

#include <sstream>

#include "slcnn/dataset.hpp"
#include "slcnn/error.hpp"
#include "test_support.hpp"

namespace slcnn {
namespace {

using slcnn::testing::TempDir;
using slcnn::testing::write_text;
using Strings = std::vector<std::string>;

TEST(CsvRecord, QuotedFieldsWithEscapesAndNewlines) {
  std::istringstream in("\"3\",\"Wall St. Bears\",\"Short-sellers, \"\"quoted\"\"\nsecond line\"\n\"1\",x\n");
  std::vector<std::string> fields;
  std::size_t line = 0;
  ASSERT_TRUE(read_csv_record(in, fields, line));
  EXPECT_EQ(fields, (Strings{"3", "Wall St. Bears", "Short-sellers, \"quoted\"\nsecond line"}));
  EXPECT_EQ(line, 2u);
  ASSERT_TRUE(read_csv_record(in, fields, line));
  EXPECT_EQ(fields, (Strings{"1", "x"}));
  EXPECT_EQ(line, 3u);
  EXPECT_FALSE(read_csv_record(in, fields, line));
}

TEST(LoadDataset, BenchmarkCsvLayout) {
  TempDir dir;
  write_text(dir / "ag.csv", "\"3\",\"Wall St. Bears\",\"Short-sellers, ...\"\n\"1\",\"T\",\"a\\nb\"\r\n");
  const auto docs = load_dataset(dir / "ag.csv");
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_EQ(docs[0].label, 2u);
  EXPECT_EQ(docs[0].fields, (Strings{"Wall St. Bears", "Short-sellers, ..."}));
  EXPECT_EQ(docs[1].label, 0u);
  EXPECT_EQ(docs[1].fields, (Strings{"T", "a b"}));
}

TEST(LoadDataset, EmptyTextIsARecordError) {
  TempDir dir;
  write_text(dir / "d.csv", "\"1\",\"\"\n\"2\",\"fine\"\n");
  LoadSummary summary;
  const auto docs = load_dataset(dir / "d.csv", {}, &summary);
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_EQ(summary.skipped, 1u);
  ASSERT_EQ(summary.messages.size(), 1u);
  EXPECT_NE(summary.messages[0].find("line 1"), std::string::npos);

  LoadOptions strict;
  strict.policy = MalformedPolicy::kAbort;
  try {
    load_dataset(dir / "d.csv", strict);
    FAIL() << "expected RecordError";
  } catch (const RecordError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(LoadDataset, MalformedRowsAreCountedWithLineNumbers) {
  TempDir dir;
  write_text(dir / "d.csv", "\"1\",\"ok\"\n\"zero\",\"bad label\"\n\"0\",\"bad\"\nonlyone\n\"2\",\"x\"junk\n\"2\",\"ok\"\n");
  LoadSummary summary;
  const auto docs = load_dataset(dir / "d.csv", {}, &summary);
  EXPECT_EQ(docs.size(), 2u);
  EXPECT_EQ(summary.skipped, 4u);
  EXPECT_NE(summary.messages[0].find("line 2"), std::string::npos);
  EXPECT_NE(summary.messages[3].find("line 5"), std::string::npos);
}

TEST(LoadDataset, NumClassesBound) {
  TempDir dir;
  write_text(dir / "d.csv", "\"1\",\"a\"\n\"5\",\"b\"\n");
  LoadOptions o;
  o.num_classes = 4;
  LoadSummary summary;
  EXPECT_EQ(load_dataset(dir / "d.csv", o, &summary).size(), 1u);
  EXPECT_EQ(summary.skipped, 1u);
}

TEST(LoadDataset, SchemaFixesFieldCount) {
  TempDir dir;
  write_text(dir / "d.csv", "\"1\",\"title\",\"body\"\n\"1\",\"only title\"\n");
  LoadOptions o;
  o.schema.text_fields = {"title", "body"};
  LoadSummary summary;
  EXPECT_EQ(load_dataset(dir / "d.csv", o, &summary).size(), 1u);
  EXPECT_EQ(summary.skipped, 1u);
}

TEST(LoadDataset, JsonLines) {
  TempDir dir;
  write_text(dir / "d.jsonl",
             "{\"label\": 2, \"text\": \"Hello there.\"}\n\n{\"label\": 1, \"title\": \"T\", \"text\": \"x\\\\ny\"}\n"
             "{\"label\": 0, \"text\": \"bad\"}\nnot json\n");
  LoadSummary summary;
  const auto docs = load_dataset(dir / "d.jsonl", {}, &summary);
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_EQ(docs[0].label, 1u);
  EXPECT_EQ(docs[0].fields, (Strings{"Hello there."}));
  EXPECT_EQ(docs[1].fields, (Strings{"x y"}));
  EXPECT_EQ(summary.skipped, 2u);

  LoadOptions o;
  o.schema.text_fields = {"title", "text"};
  const auto two = load_dataset(dir / "d.jsonl", o);
  ASSERT_EQ(two.size(), 1u);
  EXPECT_EQ(two[0].fields, (Strings{"T", "x y"}));
}

TEST(LoadDataset, UnreadableFileIsFatal) {
  EXPECT_THROW(load_dataset("/nonexistent/file.csv"), IoError);
}

TEST(LoadDataset, DetectFormat) {
  EXPECT_EQ(detect_format("a.jsonl"), DatasetFormat::kJsonLines);
  EXPECT_EQ(detect_format("a.csv"), DatasetFormat::kCsv);
  EXPECT_EQ(detect_format("train"), DatasetFormat::kCsv);
}

}  // namespace
}  // namespace slcnn
