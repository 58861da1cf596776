#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <type_traits>
#include <vector>

#include "slcnn/grad_check.hpp"
#include "slcnn/layers.hpp"
#include "slcnn/model.hpp"
#include "slcnn/rng.hpp"
#include "test_support.hpp"

// Randomized finite-difference trials for each backward op. Every trial
// builds a random instance, computes the analytic gradient with the kernels
// at precision T and compares it with central differences of a float64
// shadow of the same values. The loss is sum(r * out) for a random r.
namespace slcnn::testing {

struct TrialSettings {
  double epsilon;
  double tolerance;
};

// Float trials probe the float64 shadow with epsilon 1e-3. Double trials
// use 1e-4; the layer losses are piecewise linear, so that costs no
// truncation error and keeps rounding noise far below small gradients.
template <typename T>
constexpr TrialSettings kTrialSettings = std::is_same_v<T, float> ? TrialSettings{1e-3, 1e-3} : TrialSettings{1e-4, 1e-6};

inline constexpr std::size_t kTrials = 100;

template <typename To, typename From>
BasicFeatureMap<To> cast_map(const BasicFeatureMap<From>& m) {
  BasicFeatureMap<To> out(m.rows(), m.cols(), m.channels());
  std::transform(m.data().begin(), m.data().end(), out.data().begin(), [](From v) { return static_cast<To>(v); });
  return out;
}

template <typename To, typename From>
ConvFilterBank<To> cast_bank(const ConvFilterBank<From>& b) {
  ConvFilterBank<To> out(b.filters, b.height, b.width, b.depth);
  std::transform(b.weights.begin(), b.weights.end(), out.weights.begin(), [](From v) { return static_cast<To>(v); });
  std::transform(b.biases.begin(), b.biases.end(), out.biases.begin(), [](From v) { return static_cast<To>(v); });
  return out;
}

template <typename T>
std::vector<double> widen(std::span<const T> v) {
  return {v.begin(), v.end()};
}

template <typename A, typename B>
double weighted_sum(std::span<const A> out, std::span<const B> r) {
  double s = 0;
  for (std::size_t i = 0; i < out.size(); ++i) s += static_cast<double>(out[i]) * static_cast<double>(r[i]);
  return s;
}

// Piecewise-linear losses: one-sided slopes agree to rounding except across
// a kink, so the kink test runs at the target tolerance.
inline GradCheckOptions piecewise_linear_options(const TrialSettings& s) {
  GradCheckOptions o;
  o.epsilon = s.epsilon;
  o.kink_tolerance = s.tolerance;
  return o;
}

// Random shapes including 1x2 (horizontal) and 2x1 (vertical) filters.
template <typename T>
GradCheckResult conv_backward_trial(Rng& rng) {
  const std::size_t h = 1 + rng.below(2), w = 1 + rng.below(2);
  const std::size_t m = h + rng.below(4), n = w + rng.below(6), c = 1 + rng.below(5), k = 1 + rng.below(4);
  const auto act = rng.uniform() < 0.5 ? Activation::kRelu : Activation::kIdentity;
  const auto x = random_map<T>(m, n, c, rng);
  const auto f = random_bank<T>(k, h, w, c, rng);
  const auto r = random_map<T>(m - h + 1, n - w + 1, k, rng);
  const auto y = conv2d_forward(x, f, act);
  const auto g = conv2d_backward(x, f, y, r, act);

  auto xs = cast_map<double>(x);
  auto fs = cast_bank<double>(f);
  const auto rs = cast_map<double>(r);
  const auto loss = [&] { return weighted_sum<double, double>(conv2d_forward(xs, fs, act).data(), rs.data()); };
  const auto gi = widen<T>(g.input.data()), gw = widen<T>(g.weights), gb = widen<T>(g.biases);
  const GradCheckBlock blocks[] = {{"input", xs.data(), gi}, {"weights", fs.weights, gw}, {"biases", fs.biases, gb}};
  return grad_check(loss, blocks, piecewise_linear_options(kTrialSettings<T>));
}

template <typename T>
GradCheckResult pool_backward_trial(Rng& rng, std::size_t trial) {
  const auto axis = trial % 2 ? PoolAxis::kHorizontal : PoolAxis::kVertical;
  const auto x = random_map<T>(2 + rng.below(5), 2 + rng.below(5), 1 + rng.below(4), rng);
  const auto pooled = maxpool_forward(x, axis);
  const auto r = random_map<T>(pooled.output.rows(), pooled.output.cols(), x.channels(), rng);
  const auto g = maxpool_backward(pooled.record, r);

  auto xs = cast_map<double>(x);
  const auto rs = cast_map<double>(r);
  const auto loss = [&] { return weighted_sum<double, double>(maxpool_forward(xs, axis).output.data(), rs.data()); };
  const auto gi = widen<T>(g.data());
  const GradCheckBlock blocks[] = {{"input", xs.data(), gi}};
  // Pairs closer than the probe step are ties at this resolution; the kink
  // test drops them.
  return grad_check(loss, blocks, piecewise_linear_options(kTrialSettings<T>));
}

template <typename T>
GradCheckResult dense_backward_trial(Rng& rng) {
  const std::size_t in = 1 + rng.below(40), out = 1 + rng.below(12);
  const auto act = rng.uniform() < 0.5 ? Activation::kRelu : Activation::kIdentity;
  DenseLayer<T> layer(in, out);
  fill_uniform(std::span<T>(layer.weights), rng);
  fill_uniform(std::span<T>(layer.biases), rng);
  std::vector<T> x(in), r(out);
  fill_uniform(std::span<T>(x), rng);
  fill_uniform(std::span<T>(r), rng);
  const auto y = dense_forward(std::span<const T>(x), layer, act);
  const auto g = dense_backward(std::span<const T>(x), layer, std::span<const T>(y), std::span<const T>(r), act);

  auto xs = widen<T>(x);
  DenseLayer<double> shadow(in, out);
  shadow.weights = widen<T>(layer.weights);
  shadow.biases = widen<T>(layer.biases);
  const auto rs = widen<T>(r);
  const auto loss = [&] {
    return weighted_sum<double, double>(dense_forward(std::span<const double>(xs), shadow, act), rs);
  };
  const auto gi = widen<T>(g.input), gw = widen<T>(g.weights), gb = widen<T>(g.biases);
  const GradCheckBlock blocks[] = {{"input", xs, gi}, {"weights", shadow.weights, gw}, {"biases", shadow.biases, gb}};
  return grad_check(loss, blocks, piecewise_linear_options(kTrialSettings<T>));
}

// Dropout under a fixed mask is linear in its input.
template <typename T>
GradCheckResult dropout_backward_trial(Rng& rng) {
  std::vector<T> x(1 + rng.below(64)), r(x.size());
  fill_uniform(std::span<T>(x), rng);
  fill_uniform(std::span<T>(r), rng);
  const double rate = rng.uniform(0.0, 0.9);
  const std::uint64_t seed = rng.next_u64();
  SplitMix64 gen(seed);
  const auto fwd = dropout(std::span<const T>(x), rate, Mode::kTrain, gen);
  const auto g = dropout_backward(std::span<const T>(r), fwd.mask);

  auto xs = widen<T>(x);
  const auto rs = widen<T>(r);
  const auto loss = [&] {
    SplitMix64 same(seed);
    return weighted_sum<double, double>(dropout(std::span<const double>(xs), rate, Mode::kTrain, same).output, rs);
  };
  const auto gi = widen<T>(g);
  const GradCheckBlock blocks[] = {{"input", xs, gi}};
  return grad_check(loss, blocks, piecewise_linear_options(kTrialSettings<T>));
}

// Softmax cross-entropy is smooth, so there is nothing to exclude. Its
// third derivative along each logit is bounded by that logit's gradient,
// so the relative truncation error is about epsilon^2 / 6.
template <typename T>
GradCheckResult softmax_ce_trial(Rng& rng) {
  std::vector<T> logits(2 + rng.below(13));
  fill_uniform(std::span<T>(logits), rng, -5, 5);
  const auto label = static_cast<std::size_t>(rng.below(logits.size()));
  const auto analytic = widen<T>(softmax_cross_entropy(std::span<const T>(logits), label).grad_logits);
  auto xs = widen<T>(logits);
  const auto loss = [&] { return softmax_cross_entropy(std::span<const double>(xs), label).loss; };
  GradCheckOptions o;
  o.epsilon = 1e-4;
  o.kink_tolerance = std::numeric_limits<double>::infinity();
  const GradCheckBlock blocks[] = {{"logits", xs, analytic}};
  return grad_check(loss, blocks, o);
}

// A double model with small positive biases (most ReLUs active) and a
// random document; the check covers every parameter block.
struct EndToEndCase {
  BasicModel<double> model;
  BasicFeatureMap<double> doc;
  std::size_t label;
  std::uint64_t dropout_seed;
};

inline EndToEndCase end_to_end_case(const ModelConfig& cfg, std::uint64_t seed) {
  auto model = BasicModel<float>::build(cfg).cast<double>();
  Rng rng(seed);
  for (auto& view : model.parameters().views(cfg)) {
    if (view.name.ends_with(".bias")) fill_uniform(view.values, rng, 0.0, 0.1);
  }
  auto doc = random_map<double>(cfg.doc_threshold, cfg.sentence_threshold, cfg.embed_dim, rng, -0.5, 0.5);
  return {std::move(model), std::move(doc), static_cast<std::size_t>(rng.below(cfg.num_classes)), seed * 31 + 1};
}

inline GradCheckResult end_to_end_check(const EndToEndCase& e, Mode mode) {
  return grad_check_model(e.model, e.doc, e.label, mode, e.dropout_seed);
}

}  // namespace slcnn::testing
