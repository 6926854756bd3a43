// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#include "uniecs/numerics/gradcheck.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace uniecs {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

std::string GradcheckReport::summary() const {
  std::ostringstream os;
  os << "checked " << coordinates_checked << " coordinates, max_rel_err " << max_rel_err;
  if (!worst_parameter.empty()) os << " at " << worst_parameter << "[" << worst_index << "]";
  if (!failures.empty()) {
    os << "; " << failures.size() << " over tolerance:";
    const std::size_t shown = std::min<std::size_t>(failures.size(), 8);
    for (std::size_t i = 0; i < shown; ++i) {
      const auto& f = failures[i];
      os << "\n  " << f.parameter << "[" << f.index << "] analytic " << f.analytic << " numeric " << f.numeric
         << " rel " << f.rel_err;
    }
  }
  return os.str();
}

namespace {

template <typename T>
T objective(const Graph& graph, std::span<const Seed<double>> outputs, const ParameterStore<T>& params,
            const TensorMap<T>& inputs) {
  const Evaluation<T> ev = forward(graph, params, inputs);
  T total = 0;
  for (const auto& s : outputs) total += static_cast<T>(s.weight) * ev.scalar(s.node);
  return total;
}

template <typename T>
TensorMap<T> cast_inputs(const TensorMap<double>& inputs) {
  TensorMap<T> out;
  for (const auto& [name, value] : inputs) out.emplace(name, value.template cast<T>());
  return out;
}

struct Coordinate {
  std::size_t param;
  std::size_t index;
};

struct Difference {
  double numeric;
  /// Bound on the rounding error of `numeric` from representing f in T.
  double noise;
};

// Central differences of the objective in precision T.
template <typename T>
std::vector<Difference> differences(const Graph& graph, std::span<const Seed<double>> outputs,
                                    const ParameterStore<double>& params, const TensorMap<double>& inputs,
                                    double eps, std::span<const Coordinate> coords) {
  ParameterStore<T> probe = params.template cast<T>();
  const TensorMap<T> in = cast_inputs<T>(inputs);
  const T step = static_cast<T>(eps);
  std::vector<Difference> out;
  out.reserve(coords.size());
  for (const auto& c : coords) {
    T& x = probe.entries()[c.param].value[c.index];
    const T original = x;
    x = original + step;
    const T up = objective(graph, outputs, probe, in);
    x = original - step;
    const T down = objective(graph, outputs, probe, in);
    x = original;
    const T scale = std::max(std::abs(up), std::abs(down));
    out.push_back({static_cast<double>((up - down) / (2 * step)),
                   static_cast<double>(4 * std::numeric_limits<T>::epsilon() * scale / (2 * step))});
  }
  return out;
}

std::vector<std::size_t> sample_coordinates(std::size_t size, std::size_t wanted, std::mt19937_64& rng) {
  std::vector<std::size_t> all(size);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (size <= wanted) return all;
  // Partial Fisher-Yates; the result is sorted so the report reads naturally.
  for (std::size_t i = 0; i < wanted; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, size - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(wanted);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

GradcheckReport gradcheck(const Graph& graph, std::span<const Seed<double>> outputs,
                          const ParameterStore<double>& params, const TensorMap<double>& inputs,
                          const GradcheckOptions& options) {
  if (!(options.eps > 0.0)) throw ConfigError("gradcheck eps must be positive");
  const Evaluation<double> ev = forward(graph, params, inputs);
  Gradients<double> grads = backward(graph, ev, outputs, params);
  if (options.corrupt) options.corrupt(grads.params);

  GradcheckReport report;
  std::mt19937_64 rng(options.seed);
  std::vector<Coordinate> coords;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t idx : sample_coordinates(params.entries()[p].value.size(), options.coords_per_tensor, rng)) {
      coords.push_back({p, idx});
    }
  }
  auto analytic = [&](const Coordinate& c) { return grads.params.entries()[c.param].value[c.index]; };
  std::vector<Difference> diffs = differences<double>(graph, outputs, params, inputs, options.eps, coords);
  if (options.extended_precision) {
    // Redo in long double every coordinate double precision cannot settle.
    std::vector<std::size_t> redo;
    for (std::size_t i = 0; i < coords.size(); ++i) {
      const double a = analytic(coords[i]);
      const double denom = std::max({std::abs(a), std::abs(diffs[i].numeric), 1e-8});
      if (relative_error(a, diffs[i].numeric) > 0.5 * options.tol || diffs[i].noise > 0.1 * options.tol * denom) {
        redo.push_back(i);
      }
    }
    std::vector<Coordinate> subset;
    for (auto i : redo) subset.push_back(coords[i]);
    const auto precise = differences<long double>(graph, outputs, params, inputs, options.eps, subset);
    for (std::size_t j = 0; j < redo.size(); ++j) diffs[redo[j]] = precise[j];
    report.extended_coordinates = redo.size();
  }
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const std::string& name = params.entries()[coords[i].param].name;
    const double a = analytic(coords[i]);
    const double err = relative_error(a, diffs[i].numeric);
    ++report.coordinates_checked;
    if (err > report.max_rel_err || report.worst_parameter.empty()) {
      report.max_rel_err = std::max(report.max_rel_err, err);
      report.worst_parameter = name;
      report.worst_index = coords[i].index;
    }
    if (err > options.tol) report.failures.push_back({name, coords[i].index, a, diffs[i].numeric, err});
  }
  std::stable_sort(report.failures.begin(), report.failures.end(),
                   [](const auto& a, const auto& b) { return a.rel_err > b.rel_err; });
  return report;
}

}  // namespace uniecs
