#include "slcnn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "slcnn/error.hpp"

namespace slcnn {
namespace {

// Dot product with eight fixed accumulation lanes: lane l sums the terms
// i = l (mod 8) in ascending i, the tail goes to lanes 0.., and the lanes are
// combined as ((0+1)+(2+3))+((4+5)+(6+7)). Same order on every call.
template <typename T>
T lane_dot(const T* __restrict a, const T* __restrict b, std::size_t n) {
  T lanes[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) lanes[l] += a[i + l] * b[i + l];
  }
  for (std::size_t l = 0; i < n; ++i, ++l) lanes[l] += a[i] * b[i];
  return ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
}

template <typename T>
void axpy(T alpha, const T* __restrict x, T* __restrict y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
T activate(T v, Activation act) {
  return act == Activation::kRelu ? (v > T{0} ? v : T{0}) : v;
}

// dLoss/dPreactivation from dLoss/dOutput.
template <typename T>
T activation_grad(T upstream, T output, Activation act) {
  return act == Activation::kRelu && !(output > T{0}) ? T{0} : upstream;
}

std::string dims(std::size_t r, std::size_t c, std::size_t ch) {
  return std::to_string(r) + "x" + std::to_string(c) + "x" + std::to_string(ch);
}

template <typename T>
void check_conv_shapes(const BasicFeatureMap<T>& x, const ConvFilterBank<T>& bank) {
  if (bank.filters == 0 || bank.height == 0 || bank.width == 0 || bank.depth == 0) {
    throw ShapeError("conv2d: empty filter bank");
  }
  if (bank.weights.size() != bank.filters * bank.window_size() || bank.biases.size() != bank.filters) {
    throw ShapeError("conv2d: filter bank storage does not match its shape");
  }
  if (x.channels() != bank.depth) {
    throw ShapeError("conv2d: input has " + std::to_string(x.channels()) + " channels, filters expect " +
                     std::to_string(bank.depth));
  }
  if (x.rows() < bank.height || x.cols() < bank.width) {
    throw ShapeError("conv2d: input " + dims(x.rows(), x.cols(), x.channels()) + " smaller than filter " +
                     std::to_string(bank.height) + "x" + std::to_string(bank.width));
  }
}

}  // namespace

template <typename T>
ConvFilterBank<T>::ConvFilterBank(std::size_t filters, std::size_t height, std::size_t width, std::size_t depth)
    : filters(filters),
      height(height),
      width(width),
      depth(depth),
      weights(filters * height * width * depth, T{0}),
      biases(filters, T{0}) {}

template <typename T>
BasicFeatureMap<T> conv2d_forward(const BasicFeatureMap<T>& x, const ConvFilterBank<T>& bank, Activation act) {
  check_conv_shapes(x, bank);
  const std::size_t k = bank.filters;
  const std::size_t window = bank.window_size();
  // One filter row (a) spans width * depth contiguous input elements.
  const std::size_t row_span = bank.width * bank.depth;

  // Transposed weights, window-major, so the inner loop runs over filters.
  std::vector<T> wt(window * k);
  for (std::size_t q = 0; q < k; ++q) {
    for (std::size_t e = 0; e < window; ++e) wt[e * k + q] = bank.weights[q * window + e];
  }

  BasicFeatureMap<T> out(x.rows() - bank.height + 1, x.cols() - bank.width + 1, k);
  const T* __restrict w = wt.data();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) {
      T* __restrict acc = out.at(i, j).data();
      for (std::size_t a = 0; a < bank.height; ++a) {
        const T* xs = x.at(i + a, j).data();
        const T* wa = w + a * row_span * k;
        for (std::size_t e = 0; e < row_span; ++e) {
          const T xv = xs[e];
          if (xv == T{0}) continue;  // padding; contributes nothing
          axpy(xv, wa + e * k, acc, k);
        }
      }
      for (std::size_t q = 0; q < k; ++q) acc[q] = activate(acc[q] + bank.biases[q], act);
    }
  }
  return out;
}

template <typename T>
void conv2d_backward_accumulate(const BasicFeatureMap<T>& x, const ConvFilterBank<T>& bank,
                                const BasicFeatureMap<T>& output, const BasicFeatureMap<T>& upstream,
                                Activation act, std::span<T> grad_weights, std::span<T> grad_biases,
                                BasicFeatureMap<T>* grad_input) {
  check_conv_shapes(x, bank);
  const std::size_t out_rows = x.rows() - bank.height + 1;
  const std::size_t out_cols = x.cols() - bank.width + 1;
  const std::size_t k = bank.filters;
  if (upstream.rows() != out_rows || upstream.cols() != out_cols || upstream.channels() != k ||
      !output.same_shape(upstream)) {
    throw ShapeError("conv2d_backward: upstream gradient is " +
                     dims(upstream.rows(), upstream.cols(), upstream.channels()) + ", expected " +
                     dims(out_rows, out_cols, k));
  }
  if (grad_weights.size() != bank.weights.size() || grad_biases.size() != k) {
    throw ShapeError("conv2d_backward: gradient buffers do not match the filter bank");
  }
  if (grad_input) {
    if (!grad_input->same_shape(x)) *grad_input = BasicFeatureMap<T>(x.rows(), x.cols(), x.channels());
    std::ranges::fill(grad_input->data(), T{0});
  }
  const std::size_t window = bank.window_size();
  const std::size_t row_span = bank.width * bank.depth;

  for (std::size_t i = 0; i < out_rows; ++i) {
    for (std::size_t j = 0; j < out_cols; ++j) {
      const auto g = upstream.at(i, j);
      const auto o = output.at(i, j);
      for (std::size_t q = 0; q < k; ++q) {
        const T gq = activation_grad(g[q], o[q], act);
        if (gq == T{0}) continue;
        grad_biases[q] += gq;
        for (std::size_t a = 0; a < bank.height; ++a) {
          const std::size_t offset = q * window + a * row_span;
          axpy(gq, x.at(i + a, j).data(), grad_weights.data() + offset, row_span);
          if (grad_input) axpy(gq, bank.weights.data() + offset, grad_input->at(i + a, j).data(), row_span);
        }
      }
    }
  }
}

template <typename T>
ConvGradients<T> conv2d_backward(const BasicFeatureMap<T>& x, const ConvFilterBank<T>& bank,
                                 const BasicFeatureMap<T>& output, const BasicFeatureMap<T>& upstream,
                                 Activation act) {
  ConvGradients<T> grads{BasicFeatureMap<T>(x.rows(), x.cols(), x.channels()),
                         std::vector<T>(bank.weights.size(), T{0}), std::vector<T>(bank.filters, T{0})};
  conv2d_backward_accumulate(x, bank, output, upstream, act, std::span<T>(grads.weights),
                             std::span<T>(grads.biases), &grads.input);
  return grads;
}

template <typename T>
PoolResult<T> maxpool_forward(const BasicFeatureMap<T>& x, PoolAxis axis) {
  const bool horizontal = axis == PoolAxis::kHorizontal;
  const std::size_t pooled = horizontal ? x.cols() : x.rows();
  if (pooled < 2) {
    throw ShapeError(std::string("maxpool: ") + (horizontal ? "width" : "height") + " " + std::to_string(pooled) +
                     " is below the pool size 2");
  }
  const std::size_t out_rows = horizontal ? x.rows() : x.rows() / 2;
  const std::size_t out_cols = horizontal ? x.cols() / 2 : x.cols();
  const std::size_t c = x.channels();

  PoolResult<T> result{BasicFeatureMap<T>(out_rows, out_cols, c), PoolRecord{axis, x.rows(), x.cols(), c, {}}};
  result.record.argmax.resize(result.output.size());
  auto out = result.output.data();
  const auto in = x.data();
  for (std::size_t i = 0; i < out_rows; ++i) {
    for (std::size_t j = 0; j < out_cols; ++j) {
      const std::size_t first = horizontal ? x.index(i, 2 * j, 0) : x.index(2 * i, j, 0);
      const std::size_t second = horizontal ? x.index(i, 2 * j + 1, 0) : x.index(2 * i + 1, j, 0);
      const std::size_t dst = result.output.index(i, j, 0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const bool take_second = in[second + ch] > in[first + ch];
        const std::size_t src = take_second ? second + ch : first + ch;
        out[dst + ch] = in[src];
        result.record.argmax[dst + ch] = static_cast<std::uint32_t>(src);
      }
    }
  }
  return result;
}

template <typename T>
BasicFeatureMap<T> maxpool_backward(const PoolRecord& record, const BasicFeatureMap<T>& upstream) {
  const bool horizontal = record.axis == PoolAxis::kHorizontal;
  const std::size_t out_rows = horizontal ? record.rows : record.rows / 2;
  const std::size_t out_cols = horizontal ? record.cols / 2 : record.cols;
  if (upstream.rows() != out_rows || upstream.cols() != out_cols || upstream.channels() != record.channels ||
      record.argmax.size() != upstream.size()) {
    throw ShapeError("maxpool_backward: upstream " + dims(upstream.rows(), upstream.cols(), upstream.channels()) +
                     " does not match the pool record " + dims(out_rows, out_cols, record.channels));
  }
  BasicFeatureMap<T> grad(record.rows, record.cols, record.channels);
  auto g = grad.data();
  const auto u = upstream.data();
  for (std::size_t idx = 0; idx < u.size(); ++idx) g[record.argmax[idx]] += u[idx];
  return grad;
}

template <typename T>
DenseLayer<T>::DenseLayer(std::size_t inputs, std::size_t outputs)
    : inputs(inputs), outputs(outputs), weights(inputs * outputs, T{0}), biases(outputs, T{0}) {}

template <typename T>
std::vector<T> dense_forward(std::span<const T> x, const DenseLayer<T>& layer, Activation act) {
  if (x.size() != layer.inputs) {
    throw ShapeError("dense: input length " + std::to_string(x.size()) + ", layer expects " +
                     std::to_string(layer.inputs));
  }
  std::vector<T> out(layer.outputs);
  for (std::size_t o = 0; o < layer.outputs; ++o) {
    const T z = lane_dot(layer.weights.data() + o * layer.inputs, x.data(), layer.inputs) + layer.biases[o];
    out[o] = activate(z, act);
  }
  return out;
}

template <typename T>
void dense_backward_accumulate(std::span<const T> x, const DenseLayer<T>& layer, std::span<const T> output,
                               std::span<const T> upstream, Activation act, std::span<T> grad_weights,
                               std::span<T> grad_biases, std::span<T> grad_input) {
  if (x.size() != layer.inputs || output.size() != layer.outputs || upstream.size() != layer.outputs) {
    throw ShapeError("dense_backward: input/output/upstream lengths do not match the layer");
  }
  if (grad_weights.size() != layer.weights.size() || grad_biases.size() != layer.outputs ||
      (!grad_input.empty() && grad_input.size() != layer.inputs)) {
    throw ShapeError("dense_backward: gradient buffers do not match the layer");
  }
  std::ranges::fill(grad_input, T{0});
  for (std::size_t o = 0; o < layer.outputs; ++o) {
    const T g = activation_grad(upstream[o], output[o], act);
    if (g == T{0}) continue;
    grad_biases[o] += g;
    axpy(g, x.data(), grad_weights.data() + o * layer.inputs, layer.inputs);
    if (!grad_input.empty()) axpy(g, layer.weights.data() + o * layer.inputs, grad_input.data(), layer.inputs);
  }
}

template <typename T>
DenseGradients<T> dense_backward(std::span<const T> x, const DenseLayer<T>& layer, std::span<const T> output,
                                 std::span<const T> upstream, Activation act) {
  DenseGradients<T> grads{std::vector<T>(layer.inputs, T{0}), std::vector<T>(layer.weights.size(), T{0}),
                          std::vector<T>(layer.outputs, T{0})};
  dense_backward_accumulate(x, layer, output, upstream, act, std::span<T>(grads.weights),
                            std::span<T>(grads.biases), std::span<T>(grads.input));
  return grads;
}

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  if (logits.empty()) throw ShapeError("softmax: empty logits");
  const T peak = *std::ranges::max_element(logits);
  std::vector<T> p(logits.size());
  T sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - peak);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

template <typename T>
LossResult<T> softmax_cross_entropy(std::span<const T> logits, std::size_t label) {
  if (logits.size() < 2) throw ShapeError("softmax_cross_entropy: need at least 2 classes");
  if (label >= logits.size()) throw ShapeError("softmax_cross_entropy: label out of range");
  for (const T v : logits) {
    if (!std::isfinite(v)) throw NumericError("softmax_cross_entropy: non-finite logit");
  }
  const T peak = *std::ranges::max_element(logits);
  T sum = 0;
  std::vector<T> grad(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    grad[i] = std::exp(logits[i] - peak);
    sum += grad[i];
  }
  LossResult<T> r;
  r.loss = std::log(sum) - (logits[label] - peak);
  for (auto& g : grad) g /= sum;
  grad[label] -= T{1};
  r.grad_logits = std::move(grad);
  return r;
}

template <typename T>
std::vector<T> dropout_backward(std::span<const T> upstream, const DropoutMask& mask) {
  if (upstream.size() != mask.keep.size()) throw ShapeError("dropout_backward: mask length mismatch");
  std::vector<T> grad(upstream.size());
  const auto scale = static_cast<T>(mask.scale);
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = mask.keep[i] ? upstream[i] * scale : T{0};
  return grad;
}

#define SLCNN_INSTANTIATE_LAYERS(T)                                                                             \
  template struct ConvFilterBank<T>;                                                                            \
  template struct DenseLayer<T>;                                                                                \
  template BasicFeatureMap<T> conv2d_forward(const BasicFeatureMap<T>&, const ConvFilterBank<T>&, Activation);  \
  template ConvGradients<T> conv2d_backward(const BasicFeatureMap<T>&, const ConvFilterBank<T>&,                \
                                            const BasicFeatureMap<T>&, const BasicFeatureMap<T>&, Activation);  \
  template void conv2d_backward_accumulate(const BasicFeatureMap<T>&, const ConvFilterBank<T>&,                 \
                                           const BasicFeatureMap<T>&, const BasicFeatureMap<T>&, Activation,    \
                                           std::span<T>, std::span<T>, BasicFeatureMap<T>*);                    \
  template PoolResult<T> maxpool_forward(const BasicFeatureMap<T>&, PoolAxis);                                  \
  template BasicFeatureMap<T> maxpool_backward(const PoolRecord&, const BasicFeatureMap<T>&);                   \
  template std::vector<T> dense_forward(std::span<const T>, const DenseLayer<T>&, Activation);                  \
  template DenseGradients<T> dense_backward(std::span<const T>, const DenseLayer<T>&, std::span<const T>,       \
                                            std::span<const T>, Activation);                                    \
  template void dense_backward_accumulate(std::span<const T>, const DenseLayer<T>&, std::span<const T>,         \
                                          std::span<const T>, Activation, std::span<T>, std::span<T>,           \
                                          std::span<T>);                                                        \
  template std::vector<T> softmax(std::span<const T>);                                                          \
  template LossResult<T> softmax_cross_entropy(std::span<const T>, std::size_t);                                \
  template std::vector<T> dropout_backward(std::span<const T>, const DropoutMask&);

SLCNN_INSTANTIATE_LAYERS(float)
SLCNN_INSTANTIATE_LAYERS(double)
SLCNN_INSTANTIATE_LAYERS(long double)

#undef SLCNN_INSTANTIATE_LAYERS

}  // namespace slcnn
