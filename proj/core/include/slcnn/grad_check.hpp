#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slcnn/feature_map.hpp"
#include "slcnn/model.hpp"

namespace slcnn {

// A parameter (or input) tensor under check: `values` is perturbed in
// place, `analytic` holds the backward pass result for it.
struct GradCheckBlock {
  std::string name;
  std::span<double> values;
  std::span<const double> analytic;
};

struct GradCheckOptions {
  // Large enough that double rounding in the loss (about 1e-16 |L| / epsilon)
  // stays well below small gradient components; truncation error is zero
  // for piecewise-linear losses and O(epsilon^2) otherwise.
  double epsilon = 1e-4;
  // Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double floor = 1e-8;
  // Coordinates where the loss is not smooth at the probe scale (a ReLU
  // kink or a max-pool tie crossed by the perturbation) are excluded: the
  // two one-sided slopes must agree to this relative tolerance. A partly
  // crossed kink biases the central difference by about half the slope
  // gap, so this bounds the error such a crossing can leave behind.
  double kink_tolerance = 1e-3;
  // When set, replaces the slope test: a coordinate is excluded if the key
  // at x + epsilon or x - epsilon differs from the key at x. For a network
  // the key is its activation pattern, so exclusion means exactly that the
  // perturbation crossed a ReLU kink or changed a max-pool winner.
  std::function<std::uint64_t()> region;
  // Check at most this many coordinates per block (evenly strided); 0 = all.
  std::size_t max_per_block = 0;
};

struct GradCheckResult {
  double max_relative_error = 0;
  std::string worst_block;
  std::size_t worst_index = 0;
  double worst_analytic = 0;
  double worst_numeric = 0;
  std::size_t checked = 0;
  std::size_t excluded = 0;

  nlohmann::json to_json() const;
};

// Central differences (L(x + e) - L(x - e)) / 2e for every checked
// coordinate against the analytic gradient. `loss` must read the current
// contents of the blocks' value spans.
GradCheckResult grad_check(const std::function<double()>& loss, std::span<const GradCheckBlock> blocks,
                           const GradCheckOptions& options = {});

// Whole-network check on one document. The analytic gradient is the double
// model's backward pass. The numeric side evaluates the same parameters in
// long double and differences L(x) - L(x0), so it is not limited by
// rounding of L itself (gradient components can be as small as 1e-9).
// Unless the caller sets `region`, coordinates whose probe changes the
// activation pattern straddle a tie and are excluded.
GradCheckResult grad_check_model(BasicModel<double> model, const BasicFeatureMap<double>& doc, std::size_t label,
                                 Mode mode, std::uint64_t dropout_seed, GradCheckOptions options = {});

}  // namespace slcnn
