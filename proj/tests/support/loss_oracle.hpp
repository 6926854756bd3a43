// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

// Direct-summation loss oracles written from the formulas, independent of
// the graph engine, plus random embedding batches to feed them.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "test_util.hpp"
#include "uniecs/losses/losses.hpp"

namespace uniecs::oracle {

using Vec = std::vector<double>;

inline Vec as_double(const std::vector<float>& v) { return Vec(v.begin(), v.end()); }
inline double dot(const Vec& a, const Vec& b) { return testing::dot(a, b); }

inline double info_nce(const std::vector<Vec>& a, const std::vector<Vec>& b, double tau) {
  const std::size_t n = a.size();
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(dot(a[i], b[j]) / tau);
    total += -std::log(std::exp(dot(a[i], b[i]) / tau) / z);
  }
  return total / static_cast<double>(n);
}

// Indices of the k largest values, skipping `self`, ties to the lower index.
inline std::vector<std::size_t> top_k(const Vec& scores, std::size_t self, std::size_t k) {
  std::vector<std::size_t> idx;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (j != self) idx.push_back(j);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

struct Intra {
  std::vector<Vec> v, t, f;
};

inline Intra intra_of(const PairBatch& batch, bool both) {
  Intra s;
  auto take = [&](const std::vector<EmbeddingTriple>& side) {
    for (const auto& e : side) {
      if (e.v && e.t) {
        s.v.push_back(as_double(*e.v));
        s.t.push_back(as_double(*e.t));
        s.f.push_back(as_double(e.f));
      }
    }
  };
  take(batch.side1);
  if (both) take(batch.side2);
  return s;
}

inline double oracle_v2t(const PairBatch& batch, const LossConfig& cfg) {
  Intra s = intra_of(batch, cfg.use_both_sides_intra);
  double l = info_nce(s.v, s.t, cfg.tau);
  if (cfg.symmetric_v2t) l = 0.5 * (l + info_nce(s.t, s.v, cfg.tau));
  return l;
}

inline double oracle_pml(const PairBatch& batch, const LossConfig& cfg) {
  std::vector<Vec> f1, f2, v1, vf2, t1, tf2;
  for (std::size_t i = 0; i < batch.side1.size(); ++i) {
    f1.push_back(as_double(batch.side1[i].f));
    f2.push_back(as_double(batch.side2[i].f));
    if (batch.side1[i].v) {
      v1.push_back(as_double(*batch.side1[i].v));
      vf2.push_back(f2.back());
    }
    if (batch.side1[i].t) {
      t1.push_back(as_double(*batch.side1[i].t));
      tf2.push_back(f2.back());
    }
  }
  double l = info_nce(f1, f2, cfg.tau);
  if (!v1.empty()) l += info_nce(v1, vf2, cfg.tau);
  if (!t1.empty()) l += info_nce(t1, tf2, cfg.tau);
  return l;
}

inline double oracle_pdc(const PairBatch& batch, const LossConfig& cfg) {
  Intra s = intra_of(batch, cfg.use_both_sides_intra);
  const std::size_t n = s.f.size();
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double m = dot(s.f[i], s.f[j]);
      total += std::max(0.0, cfg.alpha2 + m - dot(s.v[i], s.f[i]));
      total += std::max(0.0, cfg.alpha2 + m - dot(s.t[i], s.f[i]));
    }
  }
  return total / static_cast<double>(n);
}

inline double oracle_plc(const PairBatch& batch, const LossConfig& cfg) {
  Intra s = intra_of(batch, cfg.use_both_sides_intra);
  const std::size_t n = s.f.size();
  const std::size_t k = std::min(cfg.k, n - 1);
  if (k == 0) return 0.0;
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Vec m(n);
    for (std::size_t j = 0; j < n; ++j) m[j] = dot(s.f[i], s.f[j]);
    for (std::size_t j : top_k(m, i, k)) {
      const double vm = dot(s.v[i], s.f[j]), tm = dot(s.t[i], s.f[j]);
      total += std::max(0.0, -cfg.alpha3 + (vm - m[j]) * (vm - m[j]));
      total += std::max(0.0, -cfg.alpha3 + (tm - m[j]) * (tm - m[j]));
      total += std::max(0.0, -cfg.alpha3 + (vm - tm) * (vm - tm));
    }
  }
  return total / static_cast<double>(n * k);
}

inline double oracle_v2v(const PairBatch& batch, const LossConfig& cfg) {
  std::vector<Vec> a, b;
  for (std::size_t i = 0; i < batch.side1.size(); ++i) {
    if (batch.side1[i].v && batch.side2[i].v) {
      a.push_back(as_double(*batch.side1[i].v));
      b.push_back(as_double(*batch.side2[i].v));
    }
  }
  const std::size_t n = a.size();
  double l = info_nce(a, b, cfg.tau_v);
  const std::size_t k = std::min(cfg.k_hard, n - 1);
  if (k == 0) return l;
  double hard = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Vec s(n);
    for (std::size_t j = 0; j < n; ++j) s[j] = dot(a[i], b[j]);
    for (std::size_t j : top_k(s, i, k)) hard += std::max(0.0, cfg.alpha4 + s[j] - s[i]);
  }
  return l + hard / static_cast<double>(n * k);
}

inline double oracle_t2t(const PairBatch& batch, const LossConfig& cfg) {
  std::vector<Vec> a, b;
  for (std::size_t i = 0; i < batch.side1.size(); ++i) {
    if (batch.side1[i].t && batch.side2[i].t) {
      a.push_back(as_double(*batch.side1[i].t));
      b.push_back(as_double(*batch.side2[i].t));
    }
  }
  return info_nce(a, b, cfg.tau_t);
}

inline std::vector<float> unit(std::size_t d, std::mt19937_64& rng) {
  auto r = testing::random_unit_rows(1, d, rng).front();
  return std::vector<float>(r.begin(), r.end());
}

inline EmbeddingTriple random_triple(std::size_t d, std::mt19937_64& rng, int kind) {
  EmbeddingTriple e;
  e.f = unit(d, rng);
  if (kind != 2) e.v = unit(d, rng);
  if (kind != 1) e.t = unit(d, rng);
  return e;
}

inline PairBatch random_batch(std::size_t n, std::size_t d, std::mt19937_64& rng, bool allow_missing) {
  PairBatch b;
  std::uniform_int_distribution<int> kind(0, allow_missing ? 2 : 0);
  for (std::size_t i = 0; i < n; ++i) {
    // The first pair always has every view so each term is defined.
    b.side1.push_back(random_triple(d, rng, i == 0 ? 0 : kind(rng)));
    b.side2.push_back(random_triple(d, rng, i == 0 ? 0 : kind(rng)));
  }
  return b;
}

inline PairBatch constant_batch(std::size_t n) {
  EmbeddingTriple e{std::vector<float>{1, 0, 0}, std::vector<float>{1, 0, 0}, std::vector<float>{1, 0, 0}};
  return PairBatch{std::vector<EmbeddingTriple>(n, e), std::vector<EmbeddingTriple>(n, e)};
}

}  // namespace uniecs::oracle
