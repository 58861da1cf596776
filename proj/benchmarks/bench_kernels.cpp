#include <benchmark/benchmark.h>

#include <vector>

#include "slcnn/layers.hpp"
#include "slcnn/model.hpp"
#include "slcnn/rng.hpp"

namespace {

using slcnn::Activation;
using slcnn::FeatureMap;

FeatureMap random_map(std::size_t r, std::size_t c, std::size_t ch, std::uint64_t seed) {
  FeatureMap m(r, c, ch);
  slcnn::Rng rng(seed);
  for (float& v : m.data()) v = static_cast<float>(rng.uniform(-1, 1));
  return m;
}

slcnn::ConvFilterBank<float> random_bank(std::size_t k, std::size_t h, std::size_t w, std::size_t d) {
  slcnn::ConvFilterBank<float> bank(k, h, w, d);
  slcnn::Rng rng(7);
  for (float& v : bank.weights) v = static_cast<float>(rng.uniform(-0.1, 0.1));
  return bank;
}

// First layer of an AG-shaped document: 4x46x100 -> 4x45x128.
void BM_ConvForwardFirst(benchmark::State& state) {
  const auto x = random_map(4, 46, 100, 1);
  const auto bank = random_bank(128, 1, 2, 100);
  for (auto _ : state) benchmark::DoNotOptimize(slcnn::conv2d_forward(x, bank, Activation::kRelu));
  state.SetItemsProcessed(state.iterations() * 4 * 45 * 128 * 200);
}
BENCHMARK(BM_ConvForwardFirst);

void BM_ConvForwardDeep(benchmark::State& state) {
  const auto x = random_map(4, 45, 128, 2);
  const auto bank = random_bank(128, 1, 2, 128);
  for (auto _ : state) benchmark::DoNotOptimize(slcnn::conv2d_forward(x, bank, Activation::kRelu));
  state.SetItemsProcessed(state.iterations() * 4 * 44 * 128 * 256);
}
BENCHMARK(BM_ConvForwardDeep);

void BM_ConvBackwardDeep(benchmark::State& state) {
  const auto x = random_map(4, 45, 128, 3);
  const auto bank = random_bank(128, 1, 2, 128);
  const auto out = slcnn::conv2d_forward(x, bank, Activation::kRelu);
  const auto up = random_map(out.rows(), out.cols(), out.channels(), 4);
  std::vector<float> gw(bank.weights.size()), gb(bank.biases.size());
  FeatureMap gx(x.rows(), x.cols(), x.channels());
  for (auto _ : state) {
    slcnn::conv2d_backward_accumulate(x, bank, out, up, Activation::kRelu, std::span<float>(gw),
                                      std::span<float>(gb), &gx);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_ConvBackwardDeep);

void BM_MaxPoolHorizontal(benchmark::State& state) {
  const auto x = random_map(4, 44, 128, 5);
  for (auto _ : state) benchmark::DoNotOptimize(slcnn::maxpool_forward(x, slcnn::PoolAxis::kHorizontal));
}
BENCHMARK(BM_MaxPoolHorizontal);

// One document's forward and backward pass through the full AG-shaped
// model; multiply by docs x epochs to estimate a training run.
void BM_TrainStep(benchmark::State& state) {
  slcnn::ModelConfig config;
  config.variant = state.range(0) ? slcnn::Variant::kSlcnnV : slcnn::Variant::kSlcnn;
  config.doc_threshold = 4;
  config.num_classes = 4;
  const auto model = slcnn::Model::build(config);
  auto grads = model.zero_gradients();
  const auto doc = random_map(4, 46, 100, 6);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward_backward(doc, 1, slcnn::Mode::kTrain, ++seed, grads));
  }
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Logits(benchmark::State& state) {
  slcnn::ModelConfig config;
  const auto model = slcnn::Model::build(config);
  const auto doc = random_map(4, 46, 100, 8);
  for (auto _ : state) benchmark::DoNotOptimize(model.logits(doc));
}
BENCHMARK(BM_Logits)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
