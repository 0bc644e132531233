#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "beetag/nn/layers.hpp"

namespace beetag::nn {

struct GradCheckResult {
  double max_rel = 0.0;
  size_t checked = 0;
};

// Central-difference gradient verification. `loss(with_grad)` must run the
// forward pass (training mode, so the normalization matches what backward
// differentiates), run backward only when with_grad is true, and return
// the scalar loss. Dropout layers must have freeze_mask set, otherwise each
// evaluation sees a different network. Use the double instantiation of the
// network; float forward passes are too noisy for eps this small.
template <typename T, typename LossFn>
GradCheckResult grad_check(std::vector<ParamRef<T>>& params, LossFn&& loss,
                           double eps = 1e-4, double rel_floor = 1e-4) {
  for (auto& pr : params) std::fill(pr.g->begin(), pr.g->end(), T(0));
  loss(true);
  std::vector<std::vector<T>> analytic;
  analytic.reserve(params.size());
  for (auto& pr : params) analytic.push_back(*pr.g);

  GradCheckResult r;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& w = *params[pi].w;
    for (size_t j = 0; j < w.size(); ++j) {
      T orig = w[j];
      w[j] = orig + T(eps);
      double lp = double(loss(false));
      w[j] = orig - T(eps);
      double lm = double(loss(false));
      w[j] = orig;
      double num = (lp - lm) / (2.0 * eps);
      double ana = double(analytic[pi][j]);
      double rel = std::abs(ana - num) /
                   std::max({std::abs(ana), std::abs(num), rel_floor});
      r.max_rel = std::max(r.max_rel, rel);
      ++r.checked;
    }
  }
  return r;
}

}  // namespace beetag::nn
