// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

namespace uniecs {

struct ModelConfig {
  std::size_t dim_v = 32;        // visual token feature width
  std::size_t dim_t = 32;        // textual token feature width
  std::size_t width = 64;        // common width after projection
  std::size_t heads = 4;
  std::size_t ff_width = 0;      // 0 means 4 * width
  std::size_t embed_dim = 256;
  std::size_t gated_layers = 1;
  std::size_t fusion_blocks = 3;
  /// Replaces the gated mix with the attended features alone.
  bool disable_gating = false;
  double layer_norm_eps = 1e-5;

  std::size_t feed_forward_width() const noexcept { return ff_width == 0 ? 4 * width : ff_width; }
  /// Throws ConfigError.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace uniecs
