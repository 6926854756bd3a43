// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#include "uniecs/data/dataset.hpp"

#include <cmath>
#include <unordered_set>

#include "uniecs/error.hpp"

namespace uniecs {

ModalityBundle ProductFeatures::bundle() const {
  std::optional<TokenFeatureMatrix> visual, textual;
  if (image) visual = TokenFeatureMatrix::dense(*image);
  if (text) textual = TokenFeatureMatrix::dense(*text);
  return ModalityBundle::make(std::move(visual), std::move(textual));
}

namespace {

void check_payload(const std::optional<Tensor<float>>& payload, std::size_t& dim, const std::string& id,
                   const char* field) {
  if (!payload) return;
  const auto fail = [&](const std::string& what) {
    throw DataError("pair " + id + ": " + field + " " + what);
  };
  if (payload->rank() != 2 || payload->rows() == 0 || payload->cols() == 0) fail("must be a non-empty token matrix");
  if (dim == 0) dim = payload->cols();
  if (payload->cols() != dim) {
    fail("has width " + std::to_string(payload->cols()) + " but the corpus width is " + std::to_string(dim));
  }
  for (float x : payload->values()) {
    if (!std::isfinite(x)) fail("contains a non-finite value");
  }
}

}  // namespace

void check_record(const ProductPairRecord& record, std::size_t& dim_v, std::size_t& dim_t) {
  if (record.pair_id.empty()) throw DataError("record with an empty pair_id");
  if (record.trigger.empty()) throw DataError("pair " + record.pair_id + ": trigger has no modality");
  if (record.recall.empty()) throw DataError("pair " + record.pair_id + ": recall has no modality");
  check_payload(record.trigger.text, dim_t, record.pair_id, "trigger_text_feat");
  check_payload(record.trigger.image, dim_v, record.pair_id, "trigger_image_feat");
  check_payload(record.recall.text, dim_t, record.pair_id, "recall_text_feat");
  check_payload(record.recall.image, dim_v, record.pair_id, "recall_image_feat");
}

void Dataset::validate() const {
  std::size_t v = dim_v, t = dim_t;
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    check_record(r, v, t);
    if (!seen.insert(r.pair_id).second) throw DataError("duplicate pair_id " + r.pair_id);
  }
}

}  // namespace uniecs
