// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "uniecs/data/synthetic.hpp"
#include "uniecs/losses/losses.hpp"
#include "uniecs/model/config.hpp"
#include "uniecs/trainer/trainer.hpp"

namespace uniecs {

/// Every tunable of a run under one flat namespace of dotted keys:
/// "data.*" (generator), "model.*", "loss.*" and "train.*". Feature widths
/// live under data.dim_v / data.dim_t and are shared with the model.
struct RunConfig {
  SyntheticSpec data;
  ModelConfig model;
  LossConfig loss;
  TrainConfig train;
  std::uint64_t checkpoint_every = 0;

  /// Desk-scale defaults: width 64, embedding 32, batch 64.
  static RunConfig desk();
  /// The published training regime: embedding 256, batch 1024, 200k steps.
  static RunConfig paper();
  static RunConfig preset(std::string_view name);

  /// All keys, sorted.
  static std::vector<std::string> keys();

  /// Sets one key from JSON text ("0.5", "true", "\"img\""); bare strings
  /// are accepted for string keys. Throws ConfigError on unknown keys and
  /// type mismatches.
  void set(std::string_view key, std::string_view value);
  /// Applies a JSON object of dotted keys.
  void merge_json(std::string_view json, const std::string& origin = "config");
  void merge_file(const std::filesystem::path& path);

  /// Model configuration with dims and gating taken from data/train keys.
  ModelConfig model_config() const;
  /// Throws ConfigError naming the offending key.
  void validate() const;

  /// Sorted-key compact JSON of every key.
  std::string json() const;
  /// The canonical text the hash is computed over. Run length keys
  /// (train.steps, train.checkpoint_every) are left out so a run can be
  /// extended without changing its identity.
  std::string canonical_text() const;
  /// 16 hex digits of the 64-bit FNV-1a hash of canonical_text().
  std::string hash() const;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace uniecs
