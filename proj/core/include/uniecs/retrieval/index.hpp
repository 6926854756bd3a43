// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "uniecs/numerics/tensor.hpp"

namespace uniecs {

/// Which global representation of a product is used: visual-only,
/// textual-only, or the fused multimodal one.
enum class View { kVisual, kTextual, kMultimodal };

/// "v", "t" or "vt".
std::string_view view_tag(View view);
View parse_view(std::string_view tag);

/// Unit-norm embedding rows keyed by product id.
struct EmbeddingCorpus {
  View view = View::kMultimodal;
  std::vector<std::string> ids;
  Tensor<float> matrix;  // [ids.size(), dim]

  std::size_t size() const noexcept { return ids.size(); }
  std::size_t dim() const noexcept { return matrix.cols(); }

  /// Rows unit-norm within 1e-5, ids unique, shapes consistent.
  void validate() const;

  bool operator==(const EmbeddingCorpus&) const = default;
};

struct Hit {
  std::size_t row;
  double score;
};

/// Exact maximum-inner-product search over an immutable corpus.
class Index {
 public:
  /// Throws DataError on an empty corpus, a duplicate id or a non-unit row.
  explicit Index(EmbeddingCorpus corpus);

  /// The `k` best rows by dot product, descending; equal scores are ordered
  /// by id. Returns min(k, size()) hits. Throws DataError if the query's
  /// norm is off by more than 1e-3.
  std::vector<Hit> topk(std::span<const float> query, std::size_t k) const;

  const std::string& id(std::size_t row) const { return corpus_.ids[row]; }
  bool contains(const std::string& id) const;
  std::size_t size() const noexcept { return corpus_.size(); }
  std::size_t dim() const noexcept { return corpus_.dim(); }
  const EmbeddingCorpus& corpus() const noexcept { return corpus_; }

 private:
  EmbeddingCorpus corpus_;
  std::vector<std::size_t> id_rank_;  // position of each row in id order
  std::unordered_map<std::string, std::size_t> row_of_;
};

/// Fraction of queries whose ground-truth id is among its first `k` hits.
/// Throws DataError when a ground truth is not in the index.
double recall_at_k(const Index& index, std::span<const std::vector<Hit>> results,
                   std::span<const std::string> ground_truth, std::size_t k);

}  // namespace uniecs
