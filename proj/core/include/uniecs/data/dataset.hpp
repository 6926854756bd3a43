// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "uniecs/model/types.hpp"
#include "uniecs/numerics/tensor.hpp"

namespace uniecs {

/// Pre-extracted features of one product. Each payload is [tokens, dim].
struct ProductFeatures {
  std::optional<Tensor<float>> text;
  std::optional<Tensor<float>> image;

  bool empty() const noexcept { return !text && !image; }
  /// Encoder input with every token valid.
  ModalityBundle bundle() const;

  bool operator==(const ProductFeatures&) const = default;
};

/// A trigger product and the similar recall product retrieved for it.
struct ProductPairRecord {
  std::string pair_id;
  ProductFeatures trigger;
  ProductFeatures recall;

  bool operator==(const ProductPairRecord&) const = default;
};

/// Records plus the feature widths shared by the whole corpus. A width of 0
/// means no record carries that modality.
struct Dataset {
  std::size_t dim_v = 0;
  std::size_t dim_t = 0;
  std::vector<ProductPairRecord> records;

  std::size_t size() const noexcept { return records.size(); }

  /// Throws DataError on duplicate ids, empty sides, non-finite values or
  /// payload widths that disagree with dim_v/dim_t.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

/// Checks one record against the corpus widths, declaring a width when it
/// is still 0. Errors name the pair id.
void check_record(const ProductPairRecord& record, std::size_t& dim_v, std::size_t& dim_t);

}  // namespace uniecs
