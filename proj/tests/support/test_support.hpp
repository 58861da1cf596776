#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "slcnn/corpus.hpp"
#include "slcnn/dataset.hpp"
#include "slcnn/embedding.hpp"
#include "slcnn/feature_map.hpp"
#include "slcnn/layers.hpp"
#include "slcnn/rng.hpp"

namespace slcnn::testing {

// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "slcnn-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

template <typename T>
void fill_uniform(std::span<T> values, Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (auto& v : values) v = static_cast<T>(rng.uniform(lo, hi));
}

template <typename T>
BasicFeatureMap<T> random_map(std::size_t r, std::size_t c, std::size_t ch, Rng& rng, double lo = -1.0,
                              double hi = 1.0) {
  BasicFeatureMap<T> m(r, c, ch);
  fill_uniform(m.data(), rng, lo, hi);
  return m;
}

template <typename T>
ConvFilterBank<T> random_bank(std::size_t k, std::size_t h, std::size_t w, std::size_t d, Rng& rng) {
  ConvFilterBank<T> bank(k, h, w, d);
  fill_uniform(std::span<T>(bank.weights), rng, -0.5, 0.5);
  fill_uniform(std::span<T>(bank.biases), rng, -0.5, 0.5);
  return bank;
}

// Direct six-loop evaluation of a valid convolution in double precision.
template <typename T>
BasicFeatureMap<double> naive_conv(const BasicFeatureMap<T>& x, const ConvFilterBank<T>& f, Activation act) {
  const std::size_t m = x.rows() - f.height + 1;
  const std::size_t n = x.cols() - f.width + 1;
  BasicFeatureMap<double> out(m, n, f.filters);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t q = 0; q < f.filters; ++q) {
        double s = 0;
        for (std::size_t a = 0; a < f.height; ++a) {
          for (std::size_t b = 0; b < f.width; ++b) {
            for (std::size_t ch = 0; ch < f.depth; ++ch) {
              s += static_cast<double>(f.weight(q, a, b, ch)) * static_cast<double>(x(i + a, j + b, ch));
            }
          }
        }
        s += static_cast<double>(f.biases[q]);
        out(i, j, q) = act == Activation::kRelu ? std::max(0.0, s) : s;
      }
    }
  }
  return out;
}

// Brute-force size-2 max-pool by explicit comparison of each pair.
template <typename T>
BasicFeatureMap<T> naive_pool(const BasicFeatureMap<T>& x, PoolAxis axis) {
  const bool h = axis == PoolAxis::kHorizontal;
  const std::size_t r = h ? x.rows() : x.rows() / 2;
  const std::size_t c = h ? x.cols() / 2 : x.cols();
  BasicFeatureMap<T> out(r, c, x.channels());
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      for (std::size_t ch = 0; ch < x.channels(); ++ch) {
        const T a = h ? x(i, 2 * j, ch) : x(2 * i, j, ch);
        const T b = h ? x(i, 2 * j + 1, ch) : x(2 * i + 1, j, ch);
        out(i, j, ch) = a >= b ? a : b;
      }
    }
  }
  return out;
}

inline double relative_error(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Labeled documents whose class is carried by topic words. Every document
// has a title and a body of 1..max_sentences sentences mixing topic words
// with shared filler, so the classes are separable only through the topic
// tokens.
inline std::vector<RawDocument> synthetic_documents(std::size_t count, std::size_t classes, std::uint64_t seed,
                                                    std::size_t max_sentences = 4) {
  static const char* const kFiller[] = {"the", "a", "report", "said", "on", "monday", "after", "new", "people",
                                        "week", "year", "plans", "market", "city", "officials", "group"};
  Rng rng(seed);
  auto topic_word = [&](std::size_t c) {
    return "topic" + std::to_string(c) + "w" + std::to_string(rng.below(12));
  };
  auto sentence = [&](std::size_t c) {
    const std::size_t words = 4 + rng.below(10);
    std::string s;
    for (std::size_t w = 0; w < words; ++w) {
      std::string word = rng.uniform() < 0.35 ? topic_word(c) : kFiller[rng.below(std::size(kFiller))];
      if (w == 0) word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
      s += (w ? " " : "") + word;
    }
    return s + ".";
  };
  std::vector<RawDocument> docs;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t label = i % classes;
    std::string body;
    const std::size_t n = 1 + rng.below(max_sentences);
    for (std::size_t s = 0; s < n; ++s) body += (s ? " " : "") + sentence(label);
    std::string title = sentence(label);
    title.pop_back();
    docs.push_back({label, {title, body}});
  }
  return docs;
}

inline std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Benchmark CSV layout: 1-based class, then quoted fields.
inline void write_csv(const std::filesystem::path& path, const std::vector<RawDocument>& docs) {
  std::ofstream f(path);
  for (const auto& d : docs) {
    f << csv_quote(std::to_string(d.label + 1));
    for (const auto& field : d.fields) f << ',' << csv_quote(field);
    f << '\n';
  }
}

// Full text pipeline plus crop/pad for each document.
inline std::vector<LabeledGrid> make_grids(const std::vector<RawDocument>& docs, std::size_t doc_threshold,
                                           Vocabulary& vocab) {
  std::vector<LabeledGrid> grids;
  for (const auto& d : docs) grids.push_back({d.label, crop_pad(preprocess(d), doc_threshold, 46, vocab)});
  return grids;
}

// Random word vectors at roughly the scale of 100-d GloVe (component
// standard deviation about 0.4) for every non-pad vocabulary token.
inline EmbeddingTable synthetic_vectors(const Vocabulary& vocab, std::uint64_t seed, std::size_t dim = 100) {
  EmbeddingTable table(dim);
  Rng rng(seed);
  std::vector<float> v(dim);
  for (std::size_t id = 1; id < vocab.size(); ++id) {
    fill_uniform(std::span<float>(v), rng, -0.7, 0.7);
    table.add(vocab.token(static_cast<TokenId>(id)), v);
  }
  return table;
}

// The same vectors as a GloVe-format text file.
inline void write_glove(const std::filesystem::path& path, const Vocabulary& vocab, std::uint64_t seed,
                        std::size_t dim = 100) {
  const auto table = synthetic_vectors(vocab, seed, dim);
  std::ofstream f(path);
  for (std::size_t id = 1; id < vocab.size(); ++id) {
    const auto& token = vocab.token(static_cast<TokenId>(id));
    f << token;
    for (float x : table.lookup(token)) f << ' ' << x;
    f << '\n';
  }
}

}  // namespace slcnn::testing
