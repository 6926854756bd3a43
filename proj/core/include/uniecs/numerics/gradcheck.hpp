// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "uniecs/numerics/graph.hpp"

namespace uniecs {

struct GradcheckOptions {
  double eps = 1e-5;
  double tol = 1e-4;
  std::uint64_t seed = 0;
  /// Coordinates sampled per parameter tensor; smaller tensors are checked in full.
  std::size_t coords_per_tensor = 64;
  /// Re-evaluate in long double the coordinates whose double-precision
  /// difference is inconclusive. In double the rounding of f itself (about
  /// ulp(f) / 2eps) swamps gradients below roughly 1e-6 when f is of order 10.
  bool extended_precision = true;
  /// Applied to the analytic gradients before comparison. Lets tests verify
  /// that a broken backward rule is actually caught.
  std::function<void(ParameterStore<double>&)> corrupt;
};

struct CoordinateMismatch {
  std::string parameter;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradcheckReport {
  double max_rel_err = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t coordinates_checked = 0;
  /// Coordinates whose differences were redone in long double.
  std::size_t extended_coordinates = 0;
  /// Coordinates whose error exceeded the tolerance, worst first.
  std::vector<CoordinateMismatch> failures;

  bool passed() const noexcept { return failures.empty(); }
  std::string summary() const;
};

/// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

/// Compares backward() against central differences of sum_i w_i * node_i.
GradcheckReport gradcheck(const Graph& graph, std::span<const Seed<double>> outputs,
                          const ParameterStore<double>& params, const TensorMap<double>& inputs,
                          const GradcheckOptions& options);

inline GradcheckReport gradcheck(const Graph& graph, NodeId output, const ParameterStore<double>& params,
                                 const TensorMap<double>& inputs, const GradcheckOptions& options) {
  const Seed<double> seed{output, 1.0};
  return gradcheck(graph, std::span<const Seed<double>>(&seed, 1), params, inputs, options);
}

}  // namespace uniecs
