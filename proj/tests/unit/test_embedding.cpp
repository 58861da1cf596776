#include <gtest/gtest.h>

#include <cmath>
#include <thread>

#include "slcnn/corpus.hpp"
#include "slcnn/embedding.hpp"
#include "slcnn/error.hpp"
#include "test_support.hpp"

namespace slcnn {
namespace {

using slcnn::testing::TempDir;
using slcnn::testing::write_text;

TEST(Glove, ParsesToyFile) {
  TempDir dir;
  write_text(dir / "toy.txt", "a 1.0 2.0\nb 3.0 4.0\n");
  const auto t = EmbeddingTable::load_glove(dir / "toy.txt", 2);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.dim(), 2u);
  const auto a = t.lookup("a");
  EXPECT_EQ(a[0], 1.0f);
  EXPECT_EQ(a[1], 2.0f);
}

TEST(Glove, ArityErrorNamesTheLine) {
  TempDir dir;
  write_text(dir / "bad.txt", "x 1.0\n");
  try {
    EmbeddingTable::load_glove(dir / "bad.txt", 2);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos) << e.what();
  }
  write_text(dir / "bad2.txt", "a 1 2\nb 1 2 3\n");
  try {
    EmbeddingTable::load_glove(dir / "bad2.txt", 2);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  write_text(dir / "bad3.txt", "a 1 zz\n");
  EXPECT_THROW(EmbeddingTable::load_glove(dir / "bad3.txt", 2), FormatError);
}

TEST(Glove, DimensionMismatchIsFatal) {
  TempDir dir;
  write_text(dir / "toy.txt", "a 1.0 2.0 3.0\n");
  EXPECT_THROW(EmbeddingTable::load_glove(dir / "toy.txt", 2), FormatError);
}

TEST(Glove, FirstDuplicateWins) {
  TempDir dir;
  write_text(dir / "dup.txt", "a 1 1\na 2 2\n");
  const auto t = EmbeddingTable::load_glove(dir / "dup.txt", 2);
  EXPECT_EQ(t.size(), 1u);
  EXPECT_EQ(t.lookup("a")[0], 1.0f);
}

TEST(Glove, MissingFile) { EXPECT_THROW(EmbeddingTable::load_glove("/nonexistent/glove.txt", 2), IoError); }

TEST(Lookup, PadIsZeroAndStoredRowsAreExact) {
  EmbeddingTable t(3);
  const float v[] = {0.1f, -2.5f, 3.25f};
  ASSERT_TRUE(t.add("word", v));
  EXPECT_FALSE(t.add("word", v));
  for (float x : t.lookup(kPadToken)) EXPECT_EQ(x, 0.0f);
  const auto w = t.lookup("word");
  EXPECT_TRUE(std::equal(w.begin(), w.end(), std::begin(v)));
  EXPECT_THROW(t.add("short", std::vector<float>{1.0f}), ShapeError);
}

TEST(Lookup, OovVectorsAreSeededAndBounded) {
  EmbeddingTable t(100, 42);
  const auto first = std::vector<float>(t.lookup("qzxv").begin(), t.lookup("qzxv").end());
  const auto again = t.lookup("qzxv");
  EXPECT_TRUE(std::equal(first.begin(), first.end(), again.begin()));

  Rng rng(1);
  float lo = 1, hi = -1;
  for (int i = 0; i < 1000; ++i) {
    std::string token;
    for (std::size_t k = 0; k < 3 + rng.below(8); ++k) token += static_cast<char>('a' + rng.below(26));
    const auto a = t.lookup(token);
    const auto b = EmbeddingTable::oov_vector(token, 100, 42);
    ASSERT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
    for (float x : a) {
      ASSERT_GE(x, -kOovRange);
      ASSERT_LE(x, kOovRange);
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  // The draws actually span the range.
  EXPECT_LT(lo, -0.0099f);
  EXPECT_GT(hi, 0.0099f);
}

TEST(Lookup, OovDependsOnSeedNotOrder) {
  EmbeddingTable a(8, 42), b(8, 42), c(8, 43);
  a.lookup("x");
  a.lookup("y");
  b.lookup("y");
  b.lookup("x");
  const auto ax = a.lookup("x"), bx = b.lookup("x"), cx = c.lookup("x");
  EXPECT_TRUE(std::equal(ax.begin(), ax.end(), bx.begin()));
  EXPECT_FALSE(std::equal(ax.begin(), ax.end(), cx.begin()));
}

TEST(Lookup, ConcurrentOovLookupsAgree) {
  EmbeddingTable t(16, 7);
  std::vector<std::vector<float>> seen(8);
  {
    std::vector<std::jthread> threads;
    for (std::size_t k = 0; k < seen.size(); ++k) {
      threads.emplace_back([&, k] {
        for (int i = 0; i < 200; ++i) t.lookup("tok" + std::to_string(i));
        const auto v = t.lookup("shared");
        seen[k].assign(v.begin(), v.end());
      });
    }
  }
  for (const auto& v : seen) EXPECT_EQ(v, seen[0]);
}

TEST(Slice, RoundTripKeepsOnlyVocabularyRows) {
  TempDir dir;
  EmbeddingTable t(2, 5);
  t.add("a", std::vector<float>{1, 2});
  t.add("b", std::vector<float>{3, 4});
  t.add("c", std::vector<float>{5, 6});
  Vocabulary v;
  v.intern("c");
  v.intern("a");
  v.intern("oov");
  t.save_slice(dir / "s.slcv", v);
  const auto s = EmbeddingTable::load_slice(dir / "s.slcv", 5);
  EXPECT_EQ(s.size(), 2u);
  EXPECT_TRUE(s.contains("a"));
  EXPECT_FALSE(s.contains("b"));
  EXPECT_EQ(s.lookup("c")[1], 6.0f);
  const auto o1 = s.lookup("oov"), o2 = t.lookup("oov");
  EXPECT_TRUE(std::equal(o1.begin(), o1.end(), o2.begin()));
}

TEST(Tensorize, AllPadGridIsZero) {
  Vocabulary v;
  EmbeddingTable t(5);
  const auto doc = tensorize(TokenGrid(4, 46), v, t, 2);
  EXPECT_EQ(doc.label, 2u);
  EXPECT_EQ(doc.tensor.rows(), 4u);
  EXPECT_EQ(doc.tensor.cols(), 46u);
  EXPECT_EQ(doc.tensor.channels(), 5u);
  for (float x : doc.tensor.data()) EXPECT_EQ(x, 0.0f);
}

TEST(Tensorize, SingleTokenFillsOneSlot) {
  Vocabulary v;
  EmbeddingTable t(3);
  t.add("hi", std::vector<float>{1, -1, 2});
  const auto grid = crop_pad({{"hi"}}, 2, 4, v);
  const auto doc = tensorize(grid, v, t);
  std::size_t nonzero_slots = 0;
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      const auto s = doc.tensor.at(i, j);
      if (std::any_of(s.begin(), s.end(), [](float x) { return x != 0; })) ++nonzero_slots;
    }
  }
  EXPECT_EQ(nonzero_slots, 1u);
  EXPECT_EQ(doc.tensor(0, 0, 2), 2.0f);
}

TEST(Tensorize, L1MassMatchesRealTokens) {
  Rng rng(12);
  EmbeddingTable t(10, 99);
  for (int i = 0; i < 20; ++i) {
    std::vector<float> row(10);
    for (auto& x : row) x = static_cast<float>(rng.uniform(-1, 1));
    t.add("known" + std::to_string(i), row);
  }
  for (int trial = 0; trial < 50; ++trial) {
    TokenizedDocument d(rng.below(6));
    for (auto& s : d) {
      s.resize(1 + rng.below(8));
      for (auto& w : s) w = (rng.uniform() < 0.5 ? "known" : "unk") + std::to_string(rng.below(20));
    }
    Vocabulary v;
    const auto grid = crop_pad(d, 4, 6, v);
    const auto doc = tensorize(grid, v, t);
    double tensor_l1 = 0, oracle_l1 = 0;
    for (float x : doc.tensor.data()) tensor_l1 += std::abs(x);
    for (std::size_t i = 0; i < std::min<std::size_t>(4, d.size()); ++i) {
      for (std::size_t j = 0; j < std::min<std::size_t>(6, d[i].size()); ++j) {
        for (float x : t.lookup(d[i][j])) oracle_l1 += std::abs(x);
      }
    }
    ASSERT_NEAR(tensor_l1, oracle_l1, 1e-9 * std::max(1.0, oracle_l1));

    // The resolved-row path builds the identical tensor.
    const VocabEmbeddings rows(v, t);
    ASSERT_EQ(tensorize(grid, rows).tensor, doc.tensor);
  }
}

TEST(Tensorize, ZeroExactlyAtPadPositions) {
  Vocabulary v;
  EmbeddingTable t(4, 3);
  const auto grid = crop_pad({{"a", "b", "c"}, {"d"}}, 3, 5, v);
  const auto doc = tensorize(grid, v, t);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      const auto s = doc.tensor.at(i, j);
      const bool zero = std::all_of(s.begin(), s.end(), [](float x) { return x == 0; });
      EXPECT_EQ(zero, grid.is_pad(i, j)) << i << "," << j;
    }
  }
}

TEST(Tensorize, ShapeMismatchThrows) {
  Vocabulary v;
  EmbeddingTable t(4);
  const VocabEmbeddings rows(v, t);
  FeatureMap wrong(2, 2, 3);
  EXPECT_THROW(tensorize_into(TokenGrid(2, 2), rows, wrong), ShapeError);
}

}  // namespace
}  // namespace slcnn
