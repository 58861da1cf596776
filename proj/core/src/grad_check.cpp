#include "slcnn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "slcnn/layers.hpp"

namespace slcnn {

GradCheckResult grad_check(const std::function<double()>& loss, std::span<const GradCheckBlock> blocks,
                           const GradCheckOptions& options) {
  GradCheckResult result;
  const double eps = options.epsilon;
  const double base = loss();
  const std::uint64_t base_region = options.region ? options.region() : 0;
  for (const auto& block : blocks) {
    const std::size_t n = block.values.size();
    const std::size_t stride =
        options.max_per_block == 0 || n <= options.max_per_block ? 1 : (n + options.max_per_block - 1) / options.max_per_block;
    for (std::size_t i = 0; i < n; i += stride) {
      double& x = block.values[i];
      const double saved = x;
      x = saved + eps;
      const double plus = loss();
      const bool plus_same = !options.region || options.region() == base_region;
      x = saved - eps;
      const double minus = loss();
      const bool minus_same = !options.region || options.region() == base_region;
      x = saved;

      bool kink = !plus_same || !minus_same;
      if (!options.region) {
        const double forward_slope = (plus - base) / eps;
        const double backward_slope = (base - minus) / eps;
        const double slope_scale = std::max({std::abs(forward_slope), std::abs(backward_slope), 1e-6});
        kink = std::abs(forward_slope - backward_slope) > options.kink_tolerance * slope_scale;
      }
      if (kink) {
        ++result.excluded;
        continue;
      }
      const double numeric = (plus - minus) / (2 * eps);
      const double analytic = block.analytic[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
      const double err = std::abs(analytic - numeric) / denom;
      ++result.checked;
      if (result.checked == 1 || err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_block = block.name;
        result.worst_index = i;
        result.worst_analytic = analytic;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

GradCheckResult grad_check_model(BasicModel<double> model, const BasicFeatureMap<double>& doc, std::size_t label,
                                 Mode mode, std::uint64_t dropout_seed, GradCheckOptions options) {
  const auto& cfg = model.config();
  auto grads = model.zero_gradients();
  model.forward_backward(doc, label, mode, dropout_seed, grads);

  auto wide = model.cast<long double>();
  BasicFeatureMap<long double> wide_doc(doc.rows(), doc.cols(), doc.channels());
  std::ranges::copy(doc.data(), wide_doc.data().begin());
  auto values = model.parameters().views(cfg);
  auto wide_values = wide.parameters().views(cfg);
  const auto sync = [&] {
    for (std::size_t i = 0; i < values.size(); ++i) std::ranges::copy(values[i].values, wide_values[i].values.begin());
  };
  const auto wide_loss = [&] {
    sync();
    const auto logits = wide.logits(wide_doc, mode, dropout_seed);
    return softmax_cross_entropy(std::span<const long double>(logits), label).loss;
  };
  const long double origin = wide_loss();
  const auto loss = [&] { return static_cast<double>(wide_loss() - origin); };

  const auto analytic = std::as_const(grads).views(cfg);
  std::vector<GradCheckBlock> blocks;
  for (std::size_t i = 0; i < values.size(); ++i) {
    blocks.push_back({values[i].name, values[i].values, analytic[i].values});
  }
  if (!options.region) {
    options.region = [&] {
      sync();
      return wide.activation_pattern(wide_doc, mode, dropout_seed);
    };
  }
  return grad_check(loss, blocks, options);
}

nlohmann::json GradCheckResult::to_json() const {
  return {
      {"schema", "slcnn.grad_check/1"},
      {"max_relative_error", max_relative_error},
      {"worst_block", worst_block},
      {"worst_index", worst_index},
      {"worst_analytic", worst_analytic},
      {"worst_numeric", worst_numeric},
      {"checked", checked},
      {"excluded", excluded},
  };
}

}  // namespace slcnn
