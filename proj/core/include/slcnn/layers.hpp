#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "slcnn/error.hpp"
#include "slcnn/feature_map.hpp"
#include "slcnn/rng.hpp"

namespace slcnn {

enum class Activation { kIdentity, kRelu };
enum class PoolAxis { kHorizontal, kVertical };
enum class Mode { kTrain, kEval };

// k filters of extent height x width over `depth` input channels.
// Weights are laid out k x height x width x depth.
template <typename T>
struct ConvFilterBank {
  std::size_t filters = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t depth = 0;
  std::vector<T> weights;
  std::vector<T> biases;

  ConvFilterBank() = default;
  ConvFilterBank(std::size_t filters, std::size_t height, std::size_t width, std::size_t depth);

  std::size_t window_size() const noexcept { return height * width * depth; }
  std::size_t parameter_count() const noexcept { return weights.size() + biases.size(); }
  T& weight(std::size_t q, std::size_t a, std::size_t b, std::size_t ch) {
    return weights[((q * height + a) * width + b) * depth + ch];
  }
  const T& weight(std::size_t q, std::size_t a, std::size_t b, std::size_t ch) const {
    return weights[((q * height + a) * width + b) * depth + ch];
  }
};

template <typename T>
struct ConvGradients {
  BasicFeatureMap<T> input;
  std::vector<T> weights;
  std::vector<T> biases;
};

// Valid convolution, stride 1:
//   out(i, j, q) = act(sum_{a,b,ch} w(q,a,b,ch) * x(i+a, j+b, ch) + bias(q)).
// Each output sums its window terms in (a, b, ch) order starting from zero,
// then adds the bias.
template <typename T>
BasicFeatureMap<T> conv2d_forward(const BasicFeatureMap<T>& x, const ConvFilterBank<T>& bank, Activation act);

// `output` is the forward result (needed for the ReLU mask); `upstream` is
// dLoss/dOutput.
template <typename T>
ConvGradients<T> conv2d_backward(const BasicFeatureMap<T>& x, const ConvFilterBank<T>& bank,
                                 const BasicFeatureMap<T>& output, const BasicFeatureMap<T>& upstream,
                                 Activation act);

// Adds weight/bias gradients into the given buffers and, if grad_input is
// non-null, overwrites it with dLoss/dx. Output positions are visited in
// row-major order and filters in ascending order.
template <typename T>
void conv2d_backward_accumulate(const BasicFeatureMap<T>& x, const ConvFilterBank<T>& bank,
                                const BasicFeatureMap<T>& output, const BasicFeatureMap<T>& upstream,
                                Activation act, std::span<T> grad_weights, std::span<T> grad_biases,
                                BasicFeatureMap<T>* grad_input);

// Flat input index of the maximum behind each pooled output element.
struct PoolRecord {
  PoolAxis axis = PoolAxis::kHorizontal;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t channels = 0;
  std::vector<std::uint32_t> argmax;
};

template <typename T>
struct PoolResult {
  BasicFeatureMap<T> output;
  PoolRecord record;
};

// Non-overlapping max-pool of size 2 along one axis. The pooled length is
// floor(len / 2); an odd trailing element is dropped. Ties keep the earlier
// element.
template <typename T>
PoolResult<T> maxpool_forward(const BasicFeatureMap<T>& x, PoolAxis axis);

template <typename T>
BasicFeatureMap<T> maxpool_backward(const PoolRecord& record, const BasicFeatureMap<T>& upstream);

// Fully-connected layer; weights are outputs x inputs, row-major.
template <typename T>
struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<T> weights;
  std::vector<T> biases;

  DenseLayer() = default;
  DenseLayer(std::size_t inputs, std::size_t outputs);

  std::size_t parameter_count() const noexcept { return weights.size() + biases.size(); }
};

template <typename T>
struct DenseGradients {
  std::vector<T> input;
  std::vector<T> weights;
  std::vector<T> biases;
};

template <typename T>
std::vector<T> dense_forward(std::span<const T> x, const DenseLayer<T>& layer, Activation act);

template <typename T>
DenseGradients<T> dense_backward(std::span<const T> x, const DenseLayer<T>& layer, std::span<const T> output,
                                 std::span<const T> upstream, Activation act);

// Accumulating form; grad_input (if non-empty) is overwritten.
template <typename T>
void dense_backward_accumulate(std::span<const T> x, const DenseLayer<T>& layer, std::span<const T> output,
                               std::span<const T> upstream, Activation act, std::span<T> grad_weights,
                               std::span<T> grad_biases, std::span<T> grad_input);

template <typename T>
std::vector<T> softmax(std::span<const T> logits);

template <typename T>
struct LossResult {
  T loss{};
  std::vector<T> grad_logits;
};

// -log softmax(logits)[label] with max subtraction; gradient is
// softmax(logits) - onehot(label). Throws NumericError on non-finite logits.
template <typename T>
LossResult<T> softmax_cross_entropy(std::span<const T> logits, std::size_t label);

struct DropoutMask {
  std::vector<std::uint8_t> keep;
  double scale = 1.0;
};

template <typename T>
struct DropoutResult {
  std::vector<T> output;
  DropoutMask mask;
};

// Inverted dropout. Train mode zeroes each element with probability `rate`
// (one generator uniform() draw per element, dropped when the draw is
// < rate) and scales survivors by 1 / (1 - rate). Eval mode is the identity.
// `Generator` is Rng or SplitMix64.
template <typename T, typename Generator>
DropoutResult<T> dropout(std::span<const T> x, double rate, Mode mode, Generator& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1)");
  DropoutResult<T> result{std::vector<T>(x.begin(), x.end()), DropoutMask{std::vector<std::uint8_t>(x.size(), 1), 1.0}};
  if (mode == Mode::kEval || rate == 0.0) return result;
  result.mask.scale = 1.0 / (1.0 - rate);
  const auto scale = static_cast<T>(result.mask.scale);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool keep = rng.uniform() >= rate;
    result.mask.keep[i] = keep ? 1 : 0;
    result.output[i] = keep ? x[i] * scale : T{0};
  }
  return result;
}

template <typename T>
std::vector<T> dropout_backward(std::span<const T> upstream, const DropoutMask& mask);

}  // namespace slcnn
