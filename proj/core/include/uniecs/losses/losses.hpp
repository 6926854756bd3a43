// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "uniecs/model/encoder.hpp"
#include "uniecs/model/types.hpp"
#include "uniecs/numerics/graph.hpp"

namespace uniecs {

/// Order of the six weighted terms everywhere (weights, logs, breakdowns).
enum class LossTerm : std::size_t { kV2T = 0, kPML, kPDC, kPLC, kV2V, kT2T };
inline constexpr std::size_t kLossTermCount = 6;
std::string_view loss_term_name(LossTerm term);
std::string_view loss_term_name(std::size_t index);

using LossVector = std::array<double, kLossTermCount>;

struct LossConfig {
  double tau = 0.07;     // cross-modal and product matching temperature
  double tau_v = 0.07;   // visual-visual temperature
  double tau_t = 0.03;   // text-text temperature
  double alpha1 = 0.2;   // accepted for completeness; no term uses it
  double alpha2 = 0.1;   // PDC margin
  double alpha3 = 0.05;  // PLC consistency threshold
  double alpha4 = 0.2;   // hard-negative margin
  std::size_t k = 5;       // neighbours per sample in PLC
  std::size_t k_hard = 5;  // hard negatives per sample
  bool symmetric_v2t = false;
  bool use_both_sides_intra = false;

  /// Throws ConfigError.
  void validate() const;
};

/// Embeddings of trigger (side1) and recall (side2) products.
struct PairBatch {
  std::vector<EmbeddingTriple> side1;
  std::vector<EmbeddingTriple> side2;
};

/// Loss nodes added to a graph. A term without usable samples is absent.
struct LossNodes {
  std::array<std::optional<NodeId>, kLossTermCount> terms;
  /// Samples each term averaged over.
  std::array<std::size_t, kLossTermCount> samples{};
};

/// Builds the loss terms over rows of `embeddings`. Terms whose flag in
/// `enabled` is false are not built.
LossNodes build_losses(GraphBuilder& b, NodeId embeddings, std::span<const ProductRows> side1,
                       std::span<const ProductRows> side2, const LossConfig& config,
                       const std::array<bool, kLossTermCount>& enabled = {true, true, true, true, true, true});

// Value-level terms, evaluated in 64-bit. Each throws DataError when no
// sample carries the modalities it needs.
double v2t_loss(const PairBatch& batch, const LossConfig& config);
double pml_loss(const PairBatch& batch, const LossConfig& config);
double pdc_loss(const PairBatch& batch, const LossConfig& config);
double plc_loss(const PairBatch& batch, const LossConfig& config);
double v2v_loss(const PairBatch& batch, const LossConfig& config);
double t2t_loss(const PairBatch& batch, const LossConfig& config);

struct LossBreakdown {
  double total = 0.0;
  LossVector terms{};
  std::array<bool, kLossTermCount> defined{};
};

/// sum_i lambda_i * L_i. Undefined terms contribute nothing.
LossBreakdown total_loss(const PairBatch& batch, const LossConfig& config, const LossVector& lambdas);

}  // namespace uniecs
