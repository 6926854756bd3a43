// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "uniecs/numerics/parameters.hpp"

namespace uniecs {

struct AdamWConfig {
  double learning_rate = 1e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

/// First and second moment estimates, aligned with the parameter store.
template <typename T>
struct AdamWState {
  ParameterStore<T> m;
  ParameterStore<T> v;
  std::uint64_t step = 0;

  static AdamWState zeros_like(const ParameterStore<T>& params) { return {params.zeros_like(), params.zeros_like(), 0}; }
  bool operator==(const AdamWState&) const = default;
};

/// One AdamW update. Decay is decoupled: p <- p - lr*wd*p happens before the
/// bias-corrected moment step. Throws NumericalError naming the parameter if
/// a gradient is not finite, leaving params and state untouched.
template <typename T>
void optimizer_step(ParameterStore<T>& params, const ParameterStore<T>& grads, AdamWState<T>& state,
                    const AdamWConfig& config);

}  // namespace uniecs
