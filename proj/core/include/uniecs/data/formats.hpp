// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>

#include "uniecs/data/dataset.hpp"

namespace uniecs {

/// One JSON object per line with keys pair_id, trigger_text_feat,
/// trigger_image_feat, recall_text_feat and recall_image_feat. Payloads are
/// arrays of token rows; an absent payload is null. Reals are written in
/// the shortest form that reads back to the same float.
void write_jsonl(const Dataset& dataset, std::ostream& out);
void write_jsonl(const Dataset& dataset, const std::filesystem::path& path);

/// Errors carry the line number and, when it was already read, the pair id.
Dataset read_jsonl(std::istream& in);
Dataset read_jsonl(const std::filesystem::path& path);

inline constexpr char kPackedMagic[4] = {'U', 'E', 'C', 'S'};
inline constexpr std::uint32_t kPackedVersion = 1;

/// Little-endian binary container, bit-exact for every float.
void write_packed(const Dataset& dataset, std::ostream& out);
void write_packed(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_packed(std::istream& in);
Dataset read_packed(const std::filesystem::path& path);

/// Picks the reader from the first bytes of the file.
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace uniecs
