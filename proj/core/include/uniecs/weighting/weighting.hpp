// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "uniecs/losses/losses.hpp"

namespace uniecs {

struct LossWeightState {
  LossVector lambdas{1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  double beta = 0.5;
  std::uint64_t step = 0;

  double sum() const noexcept;
  /// Throws ConfigError unless every weight is finite and non-negative, at
  /// least one is positive, and beta lies in [0, 1].
  void validate() const;
  bool operator==(const LossWeightState&) const = default;
};

/// Share of each term in the summed gradient norms. All-zero norms give
/// uniform shares.
LossVector gradient_shares(const LossVector& norms);

/// lambda_i <- beta * lambda_i e^{g_i} / sum_k lambda_k e^{g_k} + (1 - beta) lambda_i
LossWeightState update_weights(const LossWeightState& state, const LossVector& shares);

}  // namespace uniecs
