#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slcnn/embedding.hpp"
#include "slcnn/feature_map.hpp"
#include "slcnn/layers.hpp"

namespace slcnn {

enum class Variant {
  kSlcnn,   // four horizontal blocks
  kSlcnnV,  // plus a vertical block mixing adjacent sentences
};

inline constexpr std::size_t kSmallFcUnits = 512;
inline constexpr std::size_t kLargeFcUnits = 1024;
inline constexpr std::size_t kDefaultFilters = 128;

std::string to_string(Variant v);
Variant parse_variant(std::string_view s);

struct ModelConfig {
  Variant variant = Variant::kSlcnn;
  std::size_t fc_units = kSmallFcUnits;
  std::size_t num_filters = kDefaultFilters;
  std::size_t doc_threshold = 4;                               // T_d
  std::size_t sentence_threshold = kDefaultSentenceThreshold;  // T_s
  // Required to use any T_s other than 46; the number of horizontal blocks
  // is then recomputed so the width still collapses to 1.
  bool custom_sentence_threshold = false;
  std::size_t embed_dim = kDefaultEmbeddingDim;
  std::size_t num_classes = 4;
  std::uint64_t seed = 1;
  double learning_rate = 1e-3;
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  double dropout = 0.5;
  // Embedding provenance, needed to rebuild identical inputs at inference.
  std::uint64_t oov_seed = kDefaultOovSeed;
  std::string embedding_digest;

  // Throws ConfigError describing the first violated invariant.
  void validate() const;

  std::size_t horizontal_blocks() const;
  // Rows reaching the dense layers: T_d, or floor((T_d - 2) / 2) with the VCB.
  std::size_t flatten_rows() const;
  std::size_t flatten_size() const { return flatten_rows() * num_filters; }

  bool same_architecture(const ModelConfig& other) const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// Width after one horizontal block: two 1x2 valid convs then pool 2.
constexpr std::size_t hcb_output_width(std::size_t width) { return (width - 2) / 2; }
// Rows after the vertical block: two 2x1 valid convs then pool 2.
constexpr std::size_t vcb_output_rows(std::size_t rows) { return (rows - 2) / 2; }

// A flat view of one parameter tensor.
template <typename T>
struct ParameterView {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<T> values;
};

template <typename T>
struct ModelParameters {
  // Two per horizontal block in order, then two for the vertical block.
  std::vector<ConvFilterBank<T>> convs;
  DenseLayer<T> fc1;
  DenseLayer<T> fc2;
  DenseLayer<T> output;

  // Declaration order: each conv (weight, bias), fc1, fc2, output.
  std::vector<ParameterView<T>> views(const ModelConfig& config);
  std::vector<ParameterView<const T>> views(const ModelConfig& config) const;

  std::size_t parameter_count() const;
  void fill(T value);
};

// The layer shapes for a configuration, with all parameters zero.
template <typename T>
ModelParameters<T> make_parameters(const ModelConfig& config);

// Exact trainable-scalar count for a configuration. Embeddings are frozen
// and not counted.
std::size_t count_parameters(const ModelConfig& config);

template <typename T>
class BasicModel {
 public:
  using Parameters = ModelParameters<T>;

  BasicModel(ModelConfig config, Parameters parameters);

  // Glorot-uniform weights drawn from Rng(config.seed) in declaration order;
  // zero biases.
  static BasicModel build(const ModelConfig& config);

  const ModelConfig& config() const noexcept { return config_; }
  Parameters& parameters() noexcept { return params_; }
  const Parameters& parameters() const noexcept { return params_; }

  Parameters zero_gradients() const { return make_parameters<T>(config_); }

  // Logits for one T_d x T_s x d document. Train mode applies dropout with
  // masks drawn from SplitMix64(dropout_seed).
  std::vector<T> logits(const BasicFeatureMap<T>& doc, Mode mode = Mode::kEval,
                        std::uint64_t dropout_seed = 0) const;

  struct Step {
    T loss{};
    std::vector<T> logits;
  };

  // Softmax cross-entropy for one document; adds its parameter gradients
  // into `grads`.
  Step forward_backward(const BasicFeatureMap<T>& doc, std::size_t label, Mode mode, std::uint64_t dropout_seed,
                        Parameters& grads) const;

  // Fingerprint of the linear piece the network is in at this input: the
  // on/off state of every ReLU and the winner of every max-pool window.
  // Equal fingerprints at two nearby parameter settings mean no kink or
  // tie lies between them (up to 64-bit hash collisions).
  std::uint64_t activation_pattern(const BasicFeatureMap<T>& doc, Mode mode = Mode::kEval,
                                   std::uint64_t dropout_seed = 0) const;

  // Output of the horizontal blocks (T_d x 1 x k), before any VCB.
  BasicFeatureMap<T> sentence_features(const BasicFeatureMap<T>& doc) const;
  // The map that is flattened into the dense layers.
  BasicFeatureMap<T> pre_flatten(const BasicFeatureMap<T>& doc) const;

  template <typename U>
  BasicModel<U> cast() const;

 private:
  struct Trace;
  void run_forward(const BasicFeatureMap<T>& doc, Mode mode, std::uint64_t dropout_seed, Trace& trace) const;
  void check_input(const BasicFeatureMap<T>& doc) const;

  ModelConfig config_;
  Parameters params_;
};

// Instantiated for float (training), double (gradient-check shadow) and
// long double (extended-precision reference losses).
using Model = BasicModel<float>;

template <typename T>
std::size_t count_parameters(const BasicModel<T>& model) {
  return model.parameters().parameter_count();
}

// Per-document logits (eval mode).
std::vector<std::vector<float>> forward(const Model& model, std::span<const DocTensor> batch);

// argmax with ties going to the lowest index.
template <typename T>
std::size_t argmax(std::span<const T> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace slcnn
