// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "uniecs/numerics/parameters.hpp"
#include "uniecs/numerics/tensor.hpp"

namespace uniecs {

struct NodeId {
  std::uint32_t index = 0;
  auto operator<=>(const NodeId&) const = default;
};

enum class Op : std::uint8_t {
  kInput,
  kParameter,
  kConstant,
  kMatMul,      // A[m,k] B[k,n]
  kMatMulNT,    // A[m,k] B[n,k]^T
  kTranspose,
  kAdd,
  kSub,
  kMul,
  kAddRow,      // X[m,n] + r[n] on every row
  kSubCol,      // X[m,n] - c[m] on every column
  kMulCol,      // X[m,n] * c[m] on every column
  kScale,
  kAddScalar,
  kSigmoid,
  kTanh,
  kGelu,
  kRelu,
  kSquare,
  kSoftmax,     // row-wise
  kLogSoftmax,  // row-wise
  kLayerNorm,   // row-wise, inputs (x, gamma, beta)
  kL2Normalize, // row-wise
  kConcatCols,
  kConcatRows,
  kSliceCols,
  kSliceRows,
  kGatherRows,
  kSegmentMean,
  kAttention,   // inputs (q, k, v)
  kPick,        // one column per row
  kRowDot,
  kSum,
  kMean,
  kTopKMask,    // non-differentiable 0/1 selection
};

std::string_view op_name(Op op);

/// Half-open row range.
struct Segment {
  std::uint32_t begin = 0;
  std::uint32_t end = 0;
  std::uint32_t size() const noexcept { return end - begin; }
  bool empty() const noexcept { return end <= begin; }
};

/// Queries in `query` attend over keys/values in `key`. An empty key range
/// produces an all-zero context for those query rows.
struct AttentionSpan {
  Segment query;
  Segment key;
};

struct AttentionLayout {
  std::uint32_t heads = 1;
  std::vector<AttentionSpan> spans;
};

struct Node {
  Op op = Op::kInput;
  std::string name;
  std::vector<NodeId> inputs;
  Shape shape;
  bool requires_grad = false;
  double scalar = 0.0;      // kScale, kAddScalar, kLayerNorm epsilon
  std::size_t first = 0;    // slice begin, top-k count
  std::size_t last = 0;     // slice end
  bool flag = false;        // kTopKMask: skip the diagonal
  std::uint32_t slot = 0;   // kConstant
  std::shared_ptr<const std::vector<std::uint32_t>> indices;  // kGatherRows, kPick
  std::shared_ptr<const std::vector<Segment>> segments;       // kSegmentMean
  std::shared_ptr<const AttentionLayout> attention;           // kAttention
};

class GraphBuilder;

/// Immutable computation graph. Nodes are stored in topological order, so
/// evaluation order (and every summation order) is fixed by construction.
class Graph {
 public:
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const Node& node(NodeId id) const { return nodes_.at(id.index); }
  std::size_t size() const noexcept { return nodes_.size(); }

  const std::vector<NodeId>& inputs() const noexcept { return inputs_; }
  const std::vector<NodeId>& parameters() const noexcept { return parameters_; }
  std::optional<NodeId> find_input(std::string_view name) const;
  std::optional<NodeId> find_parameter(std::string_view name) const;
  const Tensor<double>& constant(std::uint32_t slot) const { return constants_.at(slot); }

 private:
  friend class GraphBuilder;
  std::vector<Node> nodes_;
  std::vector<NodeId> inputs_;
  std::vector<NodeId> parameters_;
  std::vector<Tensor<double>> constants_;
};

/// Builds a Graph, validating shapes as each node is added. Node names are
/// derived from the current scope so shape errors point at the layer.
class GraphBuilder {
 public:
  void set_scope(std::string scope) { scope_ = std::move(scope); }
  const std::string& scope() const noexcept { return scope_; }

  NodeId input(const std::string& name, Shape shape, bool differentiable = false);
  /// Returns the existing node when the name was registered before.
  NodeId parameter(const std::string& name, Shape shape);
  NodeId constant(Tensor<double> value);

  NodeId matmul(NodeId a, NodeId b);
  NodeId matmul_nt(NodeId a, NodeId b);
  NodeId transpose(NodeId x);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId add_row(NodeId x, NodeId row);
  NodeId sub_col(NodeId x, NodeId col);
  NodeId mul_col(NodeId x, NodeId col);
  NodeId scale(NodeId x, double factor);
  NodeId add_scalar(NodeId x, double value);
  NodeId sigmoid(NodeId x);
  NodeId tanh(NodeId x);
  NodeId gelu(NodeId x);
  NodeId relu(NodeId x);
  NodeId square(NodeId x);
  NodeId softmax(NodeId x);
  NodeId log_softmax(NodeId x);
  NodeId layer_norm(NodeId x, NodeId gamma, NodeId beta, double epsilon = 1e-5);
  NodeId l2_normalize(NodeId x);
  NodeId concat_cols(std::span<const NodeId> parts);
  NodeId concat_rows(std::span<const NodeId> parts);
  NodeId slice_cols(NodeId x, std::size_t begin, std::size_t end);
  NodeId slice_rows(NodeId x, std::size_t begin, std::size_t end);
  NodeId gather_rows(NodeId x, std::vector<std::uint32_t> rows);
  /// Mean of each row segment; an empty segment yields a zero row.
  NodeId segment_mean(NodeId x, std::vector<Segment> segments);
  NodeId attention(NodeId q, NodeId k, NodeId v, AttentionLayout layout);
  /// out[r] = x[r, columns[r]].
  NodeId pick(NodeId x, std::vector<std::uint32_t> columns);
  NodeId diagonal(NodeId x);
  NodeId row_dot(NodeId a, NodeId b);
  NodeId sum(NodeId x);
  NodeId mean(NodeId x);
  /// 1 at the k largest entries of each row (lowest index wins ties), 0
  /// elsewhere. Gradients do not flow through the selection.
  NodeId topk_mask(NodeId x, std::size_t k, bool exclude_diagonal);

  const Shape& shape_of(NodeId id) const { return graph_.nodes_.at(id.index).shape; }

  Graph build() &&;

 private:
  NodeId push(Node node);
  Node make(Op op, std::vector<NodeId> inputs, Shape shape) const;
  NodeId unary(Op op, NodeId x);
  NodeId binary_same(Op op, NodeId a, NodeId b);
  [[noreturn]] void fail(Op op, const std::string& what) const;

  Graph graph_;
  std::string scope_;
  std::unordered_map<std::string, NodeId> input_index_;
  std::unordered_map<std::string, NodeId> parameter_index_;
};

/// Per-node forward values plus whatever each op keeps for its backward rule.
template <typename T>
struct Evaluation {
  std::vector<Tensor<T>> values;
  std::vector<Tensor<T>> saved;
  std::vector<Tensor<T>> saved2;

  const Tensor<T>& value(NodeId id) const { return values.at(id.index); }
  T scalar(NodeId id) const { return values.at(id.index)[0]; }
};

template <typename T>
using TensorMap = std::unordered_map<std::string, Tensor<T>>;

/// Evaluates every node. Parameters are looked up by name in `params`,
/// inputs by name in `inputs`.
template <typename T>
Evaluation<T> forward(const Graph& graph, const ParameterStore<T>& params, const TensorMap<T>& inputs);

/// A scalar node and the weight its gradient is seeded with.
template <typename T>
struct Seed {
  NodeId node;
  T weight = T{1};
};

template <typename T>
struct Gradients {
  /// Aligned with the store passed to backward(); zeros for unused entries.
  ParameterStore<T> params;
  /// Gradients of inputs declared differentiable.
  TensorMap<T> inputs;
};

/// Reverse-mode pass for sum_i weight_i * node_i. Every seed must be scalar.
template <typename T>
Gradients<T> backward(const Graph& graph, const Evaluation<T>& eval, std::span<const Seed<T>> seeds,
                      const ParameterStore<T>& params);

template <typename T>
Gradients<T> backward(const Graph& graph, const Evaluation<T>& eval, NodeId output,
                      const ParameterStore<T>& params) {
  const Seed<T> seed{output, T{1}};
  return backward(graph, eval, std::span<const Seed<T>>(&seed, 1), params);
}

}  // namespace uniecs
