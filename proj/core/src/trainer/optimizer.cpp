// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#include "uniecs/trainer/optimizer.hpp"

#include <cmath>

#include "uniecs/error.hpp"

namespace uniecs {

void AdamWConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw ConfigError("weight_decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("moment decays must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("optimizer eps must be positive");
}

template <typename T>
void optimizer_step(ParameterStore<T>& params, const ParameterStore<T>& grads, AdamWState<T>& state,
                    const AdamWConfig& config) {
  const auto n = params.size();
  if (grads.size() != n || state.m.size() != n || state.v.size() != n) {
    throw ShapeError("optimizer stores have different parameter counts");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = params.entries()[i];
    const auto& g = grads.entries()[i];
    if (g.name != p.name || g.value.shape() != p.value.shape() || state.m.entries()[i].value.shape() != p.value.shape() ||
        state.v.entries()[i].value.shape() != p.value.shape()) {
      throw ShapeError("optimizer: gradient for " + p.name + " does not match the parameter");
    }
    for (T x : g.value.values()) {
      if (!std::isfinite(x)) throw NumericalError("non-finite gradient for parameter " + p.name);
    }
  }

  const std::uint64_t t = state.step + 1;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  const double decay = config.learning_rate * config.weight_decay;
  for (std::size_t i = 0; i < n; ++i) {
    auto& p = params.entries()[i].value;
    const auto& g = grads.entries()[i].value;
    auto& m = state.m.entries()[i].value;
    auto& v = state.v.entries()[i].value;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g[j];
      double pj = static_cast<double>(p[j]);
      pj -= decay * pj;
      const double mj = config.beta1 * static_cast<double>(m[j]) + (1.0 - config.beta1) * gj;
      const double vj = config.beta2 * static_cast<double>(v[j]) + (1.0 - config.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      pj -= config.learning_rate * (mj / c1) / (std::sqrt(vj / c2) + config.eps);
      p[j] = static_cast<T>(pj);
    }
  }
  state.step = t;
}

template void optimizer_step(ParameterStore<float>&, const ParameterStore<float>&, AdamWState<float>&,
                             const AdamWConfig&);
template void optimizer_step(ParameterStore<double>&, const ParameterStore<double>&, AdamWState<double>&,
                             const AdamWConfig&);

}  // namespace uniecs
