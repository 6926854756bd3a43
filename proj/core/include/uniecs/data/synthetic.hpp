// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uniecs/data/dataset.hpp"

namespace uniecs {

/// Parameters of the correlated-pair generator.
///
/// `seed` drives the pair latents, token noise and modality dropping.
/// `world_seed` drives the fixed modality maps, so corpora generated with
/// different seeds but the same world_seed share one feature space (for
/// example a train and an eval split).
struct SyntheticSpec {
  std::size_t pairs = 1000;
  std::size_t latent_dim = 16;
  std::size_t tokens_v = 4;
  std::size_t tokens_t = 6;
  std::size_t dim_v = 32;
  std::size_t dim_t = 32;
  double pair_noise = 0.1;
  double token_noise = 0.1;
  double missing_rate = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t world_seed = 0;
  std::string id_prefix = "p";

  void validate() const;
};

/// Unit latents of one generated pair.
struct PairLatents {
  std::vector<double> trigger;
  std::vector<double> recall;
};

/// The latents `generate` lifts into features, in record order.
std::vector<PairLatents> synthetic_latents(const SyntheticSpec& spec);

Dataset generate(const SyntheticSpec& spec);

}  // namespace uniecs
