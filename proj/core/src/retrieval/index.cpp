// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#include "uniecs/retrieval/index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "uniecs/error.hpp"

namespace uniecs {

std::string_view view_tag(View view) {
  switch (view) {
    case View::kVisual:
      return "v";
    case View::kTextual:
      return "t";
    case View::kMultimodal:
      return "vt";
  }
  return "?";
}

View parse_view(std::string_view tag) {
  if (tag == "v") return View::kVisual;
  if (tag == "t") return View::kTextual;
  if (tag == "vt") return View::kMultimodal;
  throw ConfigError("unknown view '" + std::string(tag) + "' (expected v, t or vt)");
}

namespace {

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

}  // namespace

void EmbeddingCorpus::validate() const {
  if (matrix.rows() != ids.size() || (!ids.empty() && matrix.rank() != 2)) {
    throw DataError("embedding corpus has " + std::to_string(ids.size()) + " ids but matrix shape " +
                    to_string(matrix.shape()));
  }
  std::unordered_set<std::string_view> seen;
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (!seen.insert(ids[r]).second) throw DataError("duplicate embedding id " + ids[r]);
    const double n = std::sqrt(dot(matrix.row(r), matrix.row(r)));
    if (!(std::abs(n - 1.0) <= 1e-5)) throw DataError("embedding " + ids[r] + " is not unit-norm");
  }
}

Index::Index(EmbeddingCorpus corpus) : corpus_(std::move(corpus)) {
  if (corpus_.size() == 0) throw DataError("cannot index an empty corpus");
  corpus_.validate();
  std::vector<std::size_t> order(corpus_.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return corpus_.ids[a] < corpus_.ids[b]; });
  id_rank_.resize(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) id_rank_[order[i]] = i;
  for (std::size_t r = 0; r < corpus_.size(); ++r) row_of_.emplace(corpus_.ids[r], r);
}

bool Index::contains(const std::string& id) const {
  return row_of_.contains(id);
}

std::vector<Hit> Index::topk(std::span<const float> query, std::size_t k) const {
  if (k == 0) throw ConfigError("top-k needs k >= 1");
  if (query.size() != dim()) {
    throw DataError("query width " + std::to_string(query.size()) + " does not match index width " +
                    std::to_string(dim()));
  }
  const double norm = std::sqrt(dot(query, query));
  if (!(std::abs(norm - 1.0) <= 1e-3)) throw DataError("query is not unit-norm");
  std::vector<Hit> hits(size());
  for (std::size_t r = 0; r < size(); ++r) hits[r] = {r, dot(query, corpus_.matrix.row(r))};
  k = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(),
                    [&](const Hit& a, const Hit& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return id_rank_[a.row] < id_rank_[b.row];
                    });
  hits.resize(k);
  return hits;
}

double recall_at_k(const Index& index, std::span<const std::vector<Hit>> results,
                   std::span<const std::string> ground_truth, std::size_t k) {
  if (results.size() != ground_truth.size()) throw DataError("one ground truth is needed per query");
  if (results.empty()) throw DataError("recall needs at least one query");
  if (k == 0) throw ConfigError("recall needs k >= 1");
  std::size_t found = 0;
  for (std::size_t q = 0; q < results.size(); ++q) {
    if (!index.contains(ground_truth[q])) throw DataError("ground truth " + ground_truth[q] + " is not in the corpus");
    const auto& hits = results[q];
    const std::size_t n = std::min(k, hits.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (index.id(hits[i].row) == ground_truth[q]) {
        ++found;
        break;
      }
    }
  }
  return static_cast<double>(found) / static_cast<double>(results.size());
}

}  // namespace uniecs
