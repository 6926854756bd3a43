// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "uniecs/numerics/tensor.hpp"

namespace uniecs {

/// Token features of one modality of one product. Rows whose mask entry is
/// false are padding and must be zero.
struct TokenFeatureMatrix {
  Tensor<float> tokens;        // [N, D]
  std::vector<std::uint8_t> mask;  // N entries, 1 = valid

  std::size_t count() const noexcept { return tokens.rows(); }
  std::size_t valid_count() const;

  /// All rows valid.
  static TokenFeatureMatrix dense(Tensor<float> tokens);

  bool operator==(const TokenFeatureMatrix&) const = default;
};

/// A product's inputs. An indicator of 0 marks the modality as absent even if
/// a matrix is attached, which is how explicit zeroing is expressed.
struct ModalityBundle {
  std::optional<TokenFeatureMatrix> visual;
  std::optional<TokenFeatureMatrix> textual;
  float indicator_v = 0.0f;
  float indicator_t = 0.0f;

  bool has_visual() const noexcept { return visual.has_value() && indicator_v != 0.0f; }
  bool has_textual() const noexcept { return textual.has_value() && indicator_t != 0.0f; }

  static ModalityBundle make(std::optional<TokenFeatureMatrix> visual, std::optional<TokenFeatureMatrix> textual);
};

/// Throws DataError on a malformed bundle.
void validate_bundle(const ModalityBundle& bundle, std::size_t dim_v, std::size_t dim_t);

/// Unit-norm global embeddings of one product. `v` and `t` are empty when
/// the corresponding modality was absent.
struct EmbeddingTriple {
  std::optional<std::vector<float>> v;
  std::optional<std::vector<float>> t;
  std::vector<float> f;

  bool operator==(const EmbeddingTriple&) const = default;
};

}  // namespace uniecs
