// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "uniecs/data/dataset.hpp"
#include "uniecs/losses/losses.hpp"
#include "uniecs/model/config.hpp"
#include "uniecs/numerics/graph.hpp"
#include "uniecs/trainer/optimizer.hpp"
#include "uniecs/weighting/weighting.hpp"

namespace uniecs {

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 64;
  std::uint64_t steps = 1000;
  std::uint64_t seed = 0;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  /// Zero the weights of a loss group: V2T+PML, PDC+PLC, V2V+T2T.
  bool disable_cmal = false;
  bool disable_clal = false;
  bool disable_imcl = false;
  /// Replace the gated mix by the attended features.
  bool disable_gating = false;
  /// Keep every loss weight at its initial value.
  bool fixed_weights = false;

  /// Loss weights are re-estimated every `weight_stride` steps.
  std::size_t weight_stride = 1;
  double weight_beta = 0.5;
  /// Std-dev of Gaussian noise added to input features each step; 0 is off.
  double feature_noise = 0.0;

  void validate() const;
  AdamWConfig optimizer() const;
  /// Which loss terms take part in training.
  std::array<bool, kLossTermCount> enabled_terms() const;
};

/// Model state plus everything needed to resume training exactly.
struct Checkpoint {
  ModelConfig model;
  ParameterStore<float> params;
  LossWeightState weights;
  AdamWState<float> optimizer;
  std::uint64_t step = 0;
  std::string config_hash;
  /// Canonical text of the configuration that produced the run.
  std::string config_text;

  bool operator==(const Checkpoint&) const = default;
};

/// Fresh parameters and state for a run; ablated loss weights start at 0.
Checkpoint initial_checkpoint(const ModelConfig& model, const TrainConfig& train, std::string config_hash = "",
                              std::string config_text = "");

inline constexpr char kCheckpointMagic[4] = {'U', 'E', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// Throws DataError on bad magic, version, truncation or trailing bytes.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Refuses (ConfigError) to resume a checkpoint whose config hash differs
/// from `expected` unless `force`; a forced mismatch writes a warning.
void check_resume(const Checkpoint& checkpoint, const std::string& expected, bool force, std::ostream& warnings);

/// Pair indices of every batch of one epoch. Pairs are shuffled by
/// (seed, epoch); a final batch of fewer than 2 pairs is dropped.
std::vector<std::vector<std::size_t>> make_batches(std::size_t pairs, std::size_t batch_size, std::uint64_t seed,
                                                   std::uint64_t epoch);

/// Forward pass over one pair batch with every loss term, reused by the
/// per-term and weighted backward passes.
template <typename T>
class BatchObjective {
 public:
  BatchObjective(const ModelConfig& model, const LossConfig& losses, std::span<const ModalityBundle* const> side1,
                 std::span<const ModalityBundle* const> side2, const std::array<bool, kLossTermCount>& enabled);

  void evaluate(const ParameterStore<T>& params);

  LossVector losses() const;
  std::array<bool, kLossTermCount> defined() const;
  /// Gradient of one term; zero when the term is undefined for this batch.
  ParameterStore<T> term_gradient(std::size_t term) const;
  /// Gradient of sum_i lambda_i L_i over the defined terms.
  ParameterStore<T> weighted_gradient(const LossVector& lambdas) const;

 private:
  Graph graph_;
  LossNodes nodes_;
  TensorMap<T> inputs_;
  const ParameterStore<T>* params_ = nullptr;
  Evaluation<T> eval_;
};

/// Euclidean norm over every entry of a gradient store.
template <typename T>
double gradient_norm(const ParameterStore<T>& grads);

struct StepLog {
  std::uint64_t step = 0;
  LossVector losses{};
  std::array<bool, kLossTermCount> defined{};
  /// Weights after this step's update, the ones the gradient used.
  LossVector lambdas{};
  double total = 0.0;
  bool weights_updated = false;
  double seconds = 0.0;

  /// Deterministic JSON line (no wall time).
  std::string json() const;
};

/// Raised when a loss or gradient becomes non-finite.
class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(std::uint64_t step, const std::string& what)
      : NumericalError("training diverged at step " + std::to_string(step) + ": " + what), step_(step) {}
  std::uint64_t step() const noexcept { return step_; }
  std::uint64_t last_finite_step() const noexcept { return step_ - 1; }

 private:
  std::uint64_t step_;
};

struct TrainOptions {
  /// Receives one StepLog::json() line per step.
  std::ostream* metrics = nullptr;
  /// Receives {"step", "seconds"} lines.
  std::ostream* timing = nullptr;
  std::uint64_t checkpoint_every = 0;
  std::function<void(const Checkpoint&)> on_checkpoint;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepLog> log;
};

/// Trains from `start` until `config.steps` total steps. A checkpoint taken
/// mid-run resumes to the same result bitwise.
TrainResult train(const Dataset& dataset, Checkpoint start, const TrainConfig& config, const LossConfig& losses,
                  const TrainOptions& options = {});

}  // namespace uniecs
