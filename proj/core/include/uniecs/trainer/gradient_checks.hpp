// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "uniecs/losses/losses.hpp"
#include "uniecs/model/config.hpp"
#include "uniecs/numerics/gradcheck.hpp"

namespace uniecs {

/// A small batch and model on which every encoder component and every loss
/// term is active. One trigger lacks text and one recall lacks an image.
struct GradientCheckSetup {
  ModelConfig model = small_model();
  LossConfig losses = small_losses();
  std::size_t pairs = 4;

  static ModelConfig small_model();
  static LossConfig small_losses();
};

struct NamedGradcheck {
  std::string name;
  GradcheckReport report;
};

/// Random linear functional of the batch embeddings against the encoder
/// parameters.
GradcheckReport encoder_gradcheck(const GradientCheckSetup& setup, const GradcheckOptions& options);
/// The six loss terms, randomly weighted, against free unit embeddings.
GradcheckReport losses_gradcheck(const GradientCheckSetup& setup, const GradcheckOptions& options);
/// Encoder plus the six randomly weighted loss terms.
GradcheckReport end_to_end_gradcheck(const GradientCheckSetup& setup, const GradcheckOptions& options);

/// "encoder", "losses" and "end_to_end", in that order.
std::vector<NamedGradcheck> run_gradient_checks(const GradientCheckSetup& setup, const GradcheckOptions& options);

}  // namespace uniecs
