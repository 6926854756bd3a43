// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#include "uniecs/weighting/weighting.hpp"

#include <cmath>

namespace uniecs {

double LossWeightState::sum() const noexcept {
  double s = 0.0;
  for (double l : lambdas) s += l;
  return s;
}

void LossWeightState::validate() const {
  bool any = false;
  for (double l : lambdas) {
    if (!std::isfinite(l) || l < 0.0) throw ConfigError("loss weights must be finite and non-negative");
    any = any || l > 0.0;
  }
  if (!any) throw ConfigError("at least one loss weight must be positive");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("weighting beta must lie in [0, 1]");
}

LossVector gradient_shares(const LossVector& norms) {
  double total = 0.0;
  for (double n : norms) {
    if (!std::isfinite(n) || n < 0.0) throw NumericalError("gradient norms must be finite and non-negative");
    total += n;
  }
  LossVector g{};
  if (total == 0.0) {
    g.fill(1.0 / static_cast<double>(kLossTermCount));
    return g;
  }
  for (std::size_t i = 0; i < kLossTermCount; ++i) g[i] = norms[i] / total;
  return g;
}

LossWeightState update_weights(const LossWeightState& state, const LossVector& shares) {
  state.validate();
  LossVector scaled{};
  double z = 0.0;
  for (std::size_t i = 0; i < kLossTermCount; ++i) {
    scaled[i] = state.lambdas[i] * std::exp(shares[i]);
    z += scaled[i];
  }
  LossWeightState next = state;
  for (std::size_t i = 0; i < kLossTermCount; ++i) {
    next.lambdas[i] = state.beta * (scaled[i] / z) + (1.0 - state.beta) * state.lambdas[i];
  }
  ++next.step;
  return next;
}

}  // namespace uniecs
