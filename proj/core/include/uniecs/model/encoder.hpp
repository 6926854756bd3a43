// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uniecs/model/config.hpp"
#include "uniecs/model/types.hpp"
#include "uniecs/numerics/graph.hpp"

namespace uniecs {

/// Fresh parameters: weights uniform in +-1/sqrt(fan_in), biases and
/// layer-norm shifts zero, layer-norm scales one.
ParameterStore<float> init_parameters(const ModelConfig& config, std::uint64_t seed);

/// Rows of the encoder output that belong to one product.
struct ProductRows {
  std::optional<std::uint32_t> v;
  std::optional<std::uint32_t> t;
  std::uint32_t f = 0;
};

struct EncoderGraph {
  NodeId embeddings;  // [rows, embed_dim], unit-norm rows
  std::vector<ProductRows> products;
  /// Values for the token inputs the graph declared.
  TensorMap<float> inputs;
};

/// Adds the full encoder for a set of products to `builder`. Every product
/// is encoded three ways (fused, visual-only, textual-only) in one pass; a
/// product with a single modality gets one row that serves as both f and
/// that modality's view.
EncoderGraph build_encoder(GraphBuilder& builder, const ModelConfig& config,
                           std::span<const ModalityBundle* const> products, const std::string& input_prefix = "");

/// Token matrix in the common width, one row per token of the source.
template <typename T>
struct CommonTokens {
  Tensor<T> tokens;
  std::vector<std::uint8_t> mask;
};

template <typename T>
struct ModalityPair {
  std::optional<CommonTokens<T>> visual;
  std::optional<CommonTokens<T>> textual;
};

template <typename T>
struct GatedFusion {
  ModalityPair<T> fused;
  ModalityPair<T> attended;
  ModalityPair<T> gates;
};

/// Input projections. Masked rows stay zero.
template <typename T>
ModalityPair<T> project(const ModalityBundle& bundle, const ParameterStore<T>& params, const ModelConfig& config);

/// One gated cross-attention layer (the first unless `layer` says otherwise).
template <typename T>
GatedFusion<T> gated_cross_fuse(const ModalityPair<T>& projected, const ParameterStore<T>& params,
                                const ModelConfig& config, std::size_t layer = 0);

/// The per-modality self-attention blocks.
template <typename T>
ModalityPair<T> self_attend(const ModalityPair<T>& gated, const ParameterStore<T>& params, const ModelConfig& config);

template <typename T>
EmbeddingTriple encode(const ModalityBundle& bundle, const ParameterStore<T>& params, const ModelConfig& config);

template <typename T>
std::vector<EmbeddingTriple> encode_batch(std::span<const ModalityBundle* const> bundles,
                                          const ParameterStore<T>& params, const ModelConfig& config);

namespace layers {

/// x W + b with parameters `<prefix>.weight` [in, out] and `<prefix>.bias`.
NodeId linear(GraphBuilder& b, NodeId x, const std::string& prefix, std::size_t out, bool bias = true);
NodeId layer_norm(GraphBuilder& b, NodeId x, const std::string& prefix, double eps);
/// Multi-head attention including the output projection. The key map has no
/// bias since softmax ignores a per-query constant.
NodeId multi_head(GraphBuilder& b, const ModelConfig& config, NodeId queries, NodeId keys,
                  AttentionLayout layout, const std::string& prefix);
/// Post-norm transformer encoder block, attention restricted to each span.
NodeId transformer_block(GraphBuilder& b, const ModelConfig& config, NodeId x, const std::vector<Segment>& spans,
                         const std::string& prefix);

struct GatedLayer {
  NodeId fused;
  NodeId attended;
  NodeId gate;
};

/// Cross-attends `queries` (rows grouped into `runs`) over `keys`, where run
/// i sees key rows `key_spans[i]`. Runs with no keys get a zero context.
/// `keys` may be absent when no run has any.
GatedLayer gated_cross(GraphBuilder& b, const ModelConfig& config, NodeId queries, std::optional<NodeId> keys,
                       const std::vector<Segment>& runs, const std::vector<Segment>& key_spans,
                       const std::string& prefix);

}  // namespace layers

}  // namespace uniecs
