// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uniecs/data/dataset.hpp"
#include "uniecs/model/config.hpp"
#include "uniecs/numerics/parameters.hpp"
#include "uniecs/retrieval/index.hpp"

namespace uniecs {

/// One query-view -> candidate-view retrieval task.
struct TaskSpec {
  View query = View::kMultimodal;
  View candidate = View::kMultimodal;

  /// Short name such as "qt2cv" or "qvt2cvt".
  std::string name() const;
  /// Display label such as "q_t -> c_v" or "(q_v,q_t) -> (c_v,c_t)".
  std::string label() const;
  static TaskSpec parse(std::string_view name);

  bool operator==(const TaskSpec&) const = default;
};

/// The nine combinations, in report row order.
std::vector<TaskSpec> all_tasks();

/// The three views of every product on one side of the pairs. Products
/// lacking a modality are absent from that view's corpus; `fused` holds
/// every product.
struct SideEmbeddings {
  EmbeddingCorpus visual;
  EmbeddingCorpus textual;
  EmbeddingCorpus fused;

  const EmbeddingCorpus& view(View v) const;
};

enum class Side { kTrigger, kRecall };
std::string_view side_name(Side side);
Side parse_side(std::string_view name);

/// Encodes one side of every pair, `chunk` products per forward pass.
SideEmbeddings embed_side(const Dataset& dataset, Side side, const ParameterStore<float>& params,
                          const ModelConfig& config, std::size_t chunk = 256);

struct TaskResult {
  TaskSpec task;
  bool defined = false;           // false when no query could be evaluated
  std::size_t queries = 0;        // evaluated queries
  std::size_t candidates = 0;     // candidate corpus size
  std::size_t skipped = 0;        // pairs lacking the query or candidate view
  std::vector<double> recall;     // one per requested K; empty when undefined

  bool operator==(const TaskResult&) const = default;
};

struct Report {
  std::vector<std::size_t> ks;
  std::vector<TaskResult> tasks;
  std::string config_hash;
  std::uint64_t checkpoint_step = 0;

  const TaskResult& task(std::string_view name) const;

  bool operator==(const Report&) const = default;
};

/// Runs each task with the trigger of every pair as the query and its
/// recall as the single ground truth. The multimodal view only admits
/// products that have both modalities.
Report run_task_matrix(const SideEmbeddings& triggers, const SideEmbeddings& recalls,
                       const std::vector<TaskSpec>& tasks = all_tasks(),
                       const std::vector<std::size_t>& ks = {1, 5, 10});

/// Writes the JSON report to `path` and the text table next to it with a
/// ".txt" extension.
void emit_report(const Report& report, const std::filesystem::path& path);
Report read_report(const std::filesystem::path& path);
std::string report_json(const Report& report);
Report parse_report(const std::string& json);
std::string format_table(const Report& report);

/// Binary embedding file: unit-norm float32 rows with their ids.
struct EmbeddingFile {
  EmbeddingCorpus corpus;
  std::string config_hash;
  std::uint64_t checkpoint_step = 0;
};
void write_embeddings(const EmbeddingFile& file, const std::filesystem::path& path);
EmbeddingFile read_embeddings(const std::filesystem::path& path);

}  // namespace uniecs
