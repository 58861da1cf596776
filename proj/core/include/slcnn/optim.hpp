#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace slcnn {

// A named parameter tensor and its gradient, viewed flat.
template <typename T>
struct ParameterBlock {
  std::string name;
  std::span<T> values;
  std::span<const T> grads;
};

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  AdamOptions options;
  std::uint64_t step = 0;
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;
};

// One Adam update over all blocks:
//   t += 1; m = b1 m + (1 - b1) g; v = b2 v + (1 - b2) g^2;
//   theta -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps).
// Moments are created on the first call and must keep their shapes after.
// A non-finite gradient throws NumericError naming its block, before any
// parameter is modified.
template <typename T>
void adam_step(std::span<const ParameterBlock<T>> blocks, AdamState<T>& state);

}  // namespace slcnn
