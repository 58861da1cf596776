#include "slcnn/optim.hpp"

#include <cmath>

#include "slcnn/error.hpp"

namespace slcnn {

template <typename T>
void adam_step(std::span<const ParameterBlock<T>> blocks, AdamState<T>& state) {
  if (state.first_moment.empty()) {
    for (const auto& b : blocks) {
      state.first_moment.emplace_back(b.values.size(), T{0});
      state.second_moment.emplace_back(b.values.size(), T{0});
    }
  }
  if (state.first_moment.size() != blocks.size()) throw ShapeError("adam: number of parameter blocks changed");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    if (b.values.size() != b.grads.size() || state.first_moment[i].size() != b.values.size()) {
      throw ShapeError("adam: shape mismatch in block " + b.name);
    }
    for (const T g : b.grads) {
      if (!std::isfinite(g)) throw NumericError("adam: non-finite gradient in block " + b.name);
    }
  }

  const auto& o = state.options;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const auto beta1 = static_cast<T>(o.beta1);
  const auto beta2 = static_cast<T>(o.beta2);
  const auto one_minus_beta1 = static_cast<T>(1.0 - o.beta1);
  const auto one_minus_beta2 = static_cast<T>(1.0 - o.beta2);
  const auto correction1 = static_cast<T>(1.0 - std::pow(o.beta1, t));
  const auto correction2 = static_cast<T>(1.0 - std::pow(o.beta2, t));
  const auto lr = static_cast<T>(o.learning_rate);
  const auto eps = static_cast<T>(o.epsilon);

  for (std::size_t i = 0; i < blocks.size(); ++i) {
    auto values = blocks[i].values;
    const auto grads = blocks[i].grads;
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const T g = grads[j];
      m[j] = beta1 * m[j] + one_minus_beta1 * g;
      v[j] = beta2 * v[j] + one_minus_beta2 * g * g;
      const T m_hat = m[j] / correction1;
      const T v_hat = v[j] / correction2;
      values[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template void adam_step(std::span<const ParameterBlock<float>>, AdamState<float>&);
template void adam_step(std::span<const ParameterBlock<double>>, AdamState<double>&);

}  // namespace slcnn
