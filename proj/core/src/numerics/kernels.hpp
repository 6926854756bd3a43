// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

// Dense kernels with a fixed per-element summation order: every output
// element is c0 + a0*b0 + a1*b1 + ... added left to right over the inner
// dimension, so each output row depends on its own input row alone and
// results do not change with the number of rows stacked into a batch.

#pragma once

#include <cstddef>
#include <vector>

namespace uniecs::kernels {

/// c[m,n] (+)= a[m,k] * b[k,n]
template <typename T>
void gemm_nn(const T* __restrict a, const T* __restrict b, T* __restrict c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    T* __restrict crow = c + i * n;
    if (!accumulate) {
      for (std::size_t j = 0; j < n; ++j) crow[j] = T{0};
    }
    const T* __restrict arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* __restrict brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

/// out[n,m] = in[m,n]^T
template <typename T>
void transpose(const T* __restrict in, T* __restrict out, std::size_t m, std::size_t n) {
  constexpr std::size_t B = 16;
  for (std::size_t i0 = 0; i0 < m; i0 += B) {
    for (std::size_t j0 = 0; j0 < n; j0 += B) {
      const std::size_t i1 = i0 + B < m ? i0 + B : m, j1 = j0 + B < n ? j0 + B : n;
      for (std::size_t i = i0; i < i1; ++i) {
        for (std::size_t j = j0; j < j1; ++j) out[j * m + i] = in[i * n + j];
      }
    }
  }
}

/// c[m,n] (+)= a[m,k] * b[n,k]^T, via an explicit transpose of b.
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate,
             std::vector<T>& scratch) {
  scratch.resize(k * n);
  transpose(b, scratch.data(), n, k);
  gemm_nn(a, scratch.data(), c, m, k, n, accumulate);
}

/// c[k,n] (+)= a[m,k]^T * b[m,n], summing over the m rows in order.
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate,
             std::vector<T>& scratch) {
  scratch.resize(m * k);
  transpose(a, scratch.data(), m, k);
  gemm_nn(scratch.data(), b, c, k, m, n, accumulate);
}

}  // namespace uniecs::kernels
