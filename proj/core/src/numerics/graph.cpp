// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#include "uniecs/numerics/graph.hpp"

#include <algorithm>
#include <cmath>

namespace uniecs {

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
  for (T x : t.values()) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

template bool all_finite(const Tensor<float>&);
template bool all_finite(const Tensor<double>&);
template bool all_finite(const Tensor<long double>&);

std::string_view op_name(Op op) {
  switch (op) {
    case Op::kInput: return "input";
    case Op::kParameter: return "parameter";
    case Op::kConstant: return "constant";
    case Op::kMatMul: return "matmul";
    case Op::kMatMulNT: return "matmul_nt";
    case Op::kTranspose: return "transpose";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kAddRow: return "add_row";
    case Op::kSubCol: return "sub_col";
    case Op::kMulCol: return "mul_col";
    case Op::kScale: return "scale";
    case Op::kAddScalar: return "add_scalar";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kGelu: return "gelu";
    case Op::kRelu: return "relu";
    case Op::kSquare: return "square";
    case Op::kSoftmax: return "softmax";
    case Op::kLogSoftmax: return "log_softmax";
    case Op::kLayerNorm: return "layer_norm";
    case Op::kL2Normalize: return "l2_normalize";
    case Op::kConcatCols: return "concat_cols";
    case Op::kConcatRows: return "concat_rows";
    case Op::kSliceCols: return "slice_cols";
    case Op::kSliceRows: return "slice_rows";
    case Op::kGatherRows: return "gather_rows";
    case Op::kSegmentMean: return "segment_mean";
    case Op::kAttention: return "attention";
    case Op::kPick: return "pick";
    case Op::kRowDot: return "row_dot";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kTopKMask: return "topk_mask";
  }
  return "unknown";
}

std::optional<NodeId> Graph::find_input(std::string_view name) const {
  for (NodeId id : inputs_) {
    if (nodes_[id.index].name == name) return id;
  }
  return std::nullopt;
}

std::optional<NodeId> Graph::find_parameter(std::string_view name) const {
  for (NodeId id : parameters_) {
    if (nodes_[id.index].name == name) return id;
  }
  return std::nullopt;
}

namespace {

std::size_t rows_of(const Shape& s) { return s.size() >= 2 ? s[0] : 1; }
std::size_t cols_of(const Shape& s) { return s.back(); }
std::size_t count_of(const Shape& s) { return rows_of(s) * cols_of(s); }

}  // namespace

void GraphBuilder::fail(Op op, const std::string& what) const {
  std::string where = scope_.empty() ? std::string(op_name(op))
                                     : scope_ + "/" + std::string(op_name(op));
  where += "#" + std::to_string(graph_.nodes_.size());
  throw ShapeError("node " + where + ": " + what);
}

Node GraphBuilder::make(Op op, std::vector<NodeId> inputs, Shape shape) const {
  for (NodeId id : inputs) {
    if (id.index >= graph_.nodes_.size()) fail(op, "input refers to a node that does not exist");
  }
  Node n;
  n.op = op;
  n.name = (scope_.empty() ? std::string() : scope_ + "/") + std::string(op_name(op)) + "#" +
           std::to_string(graph_.nodes_.size());
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                [&](NodeId id) { return graph_.nodes_[id.index].requires_grad; });
  n.inputs = std::move(inputs);
  n.shape = std::move(shape);
  return n;
}

NodeId GraphBuilder::push(Node node) {
  NodeId id{static_cast<std::uint32_t>(graph_.nodes_.size())};
  graph_.nodes_.push_back(std::move(node));
  return id;
}

NodeId GraphBuilder::input(const std::string& name, Shape shape, bool differentiable) {
  if (input_index_.contains(name)) fail(Op::kInput, "duplicate input '" + name + "'");
  (void)Tensor<double>::element_count(shape);
  Node n = make(Op::kInput, {}, std::move(shape));
  n.name = name;
  n.requires_grad = differentiable;
  NodeId id = push(std::move(n));
  graph_.inputs_.push_back(id);
  input_index_.emplace(name, id);
  return id;
}

NodeId GraphBuilder::parameter(const std::string& name, Shape shape) {
  if (auto it = parameter_index_.find(name); it != parameter_index_.end()) {
    if (graph_.nodes_[it->second.index].shape != shape) {
      fail(Op::kParameter, "parameter '" + name + "' re-registered with shape " + to_string(shape));
    }
    return it->second;
  }
  (void)Tensor<double>::element_count(shape);
  Node n = make(Op::kParameter, {}, std::move(shape));
  n.name = name;
  n.requires_grad = true;
  NodeId id = push(std::move(n));
  graph_.parameters_.push_back(id);
  parameter_index_.emplace(name, id);
  return id;
}

NodeId GraphBuilder::constant(Tensor<double> value) {
  Node n = make(Op::kConstant, {}, value.shape());
  n.slot = static_cast<std::uint32_t>(graph_.constants_.size());
  graph_.constants_.push_back(std::move(value));
  return push(std::move(n));
}

NodeId GraphBuilder::matmul(NodeId a, NodeId b) {
  const Shape& sa = shape_of(a);
  const Shape& sb = shape_of(b);
  if (cols_of(sa) != rows_of(sb)) {
    fail(Op::kMatMul, "inner extents differ: " + to_string(sa) + " x " + to_string(sb));
  }
  return push(make(Op::kMatMul, {a, b}, Shape{rows_of(sa), cols_of(sb)}));
}

NodeId GraphBuilder::matmul_nt(NodeId a, NodeId b) {
  const Shape& sa = shape_of(a);
  const Shape& sb = shape_of(b);
  if (cols_of(sa) != cols_of(sb)) {
    fail(Op::kMatMulNT, "inner extents differ: " + to_string(sa) + " x " + to_string(sb) + "^T");
  }
  return push(make(Op::kMatMulNT, {a, b}, Shape{rows_of(sa), rows_of(sb)}));
}

NodeId GraphBuilder::transpose(NodeId x) {
  const Shape& s = shape_of(x);
  return push(make(Op::kTranspose, {x}, Shape{cols_of(s), rows_of(s)}));
}

NodeId GraphBuilder::binary_same(Op op, NodeId a, NodeId b) {
  const Shape& sa = shape_of(a);
  const Shape& sb = shape_of(b);
  if (rows_of(sa) != rows_of(sb) || cols_of(sa) != cols_of(sb)) {
    fail(op, "operand shapes differ: " + to_string(sa) + " vs " + to_string(sb));
  }
  return push(make(op, {a, b}, sa));
}

NodeId GraphBuilder::add(NodeId a, NodeId b) { return binary_same(Op::kAdd, a, b); }
NodeId GraphBuilder::sub(NodeId a, NodeId b) { return binary_same(Op::kSub, a, b); }
NodeId GraphBuilder::mul(NodeId a, NodeId b) { return binary_same(Op::kMul, a, b); }

NodeId GraphBuilder::add_row(NodeId x, NodeId row) {
  const Shape& sx = shape_of(x);
  if (count_of(shape_of(row)) != cols_of(sx)) {
    fail(Op::kAddRow, "row of " + to_string(shape_of(row)) + " does not fit " + to_string(sx));
  }
  return push(make(Op::kAddRow, {x, row}, sx));
}

NodeId GraphBuilder::sub_col(NodeId x, NodeId col) {
  const Shape& sx = shape_of(x);
  if (count_of(shape_of(col)) != rows_of(sx)) {
    fail(Op::kSubCol, "column of " + to_string(shape_of(col)) + " does not fit " + to_string(sx));
  }
  return push(make(Op::kSubCol, {x, col}, sx));
}

NodeId GraphBuilder::mul_col(NodeId x, NodeId col) {
  const Shape& sx = shape_of(x);
  if (count_of(shape_of(col)) != rows_of(sx)) {
    fail(Op::kMulCol, "column of " + to_string(shape_of(col)) + " does not fit " + to_string(sx));
  }
  return push(make(Op::kMulCol, {x, col}, sx));
}

NodeId GraphBuilder::scale(NodeId x, double factor) {
  Node n = make(Op::kScale, {x}, shape_of(x));
  n.scalar = factor;
  return push(std::move(n));
}

NodeId GraphBuilder::add_scalar(NodeId x, double value) {
  Node n = make(Op::kAddScalar, {x}, shape_of(x));
  n.scalar = value;
  return push(std::move(n));
}

NodeId GraphBuilder::unary(Op op, NodeId x) { return push(make(op, {x}, shape_of(x))); }
NodeId GraphBuilder::sigmoid(NodeId x) { return unary(Op::kSigmoid, x); }
NodeId GraphBuilder::tanh(NodeId x) { return unary(Op::kTanh, x); }
NodeId GraphBuilder::gelu(NodeId x) { return unary(Op::kGelu, x); }
NodeId GraphBuilder::relu(NodeId x) { return unary(Op::kRelu, x); }
NodeId GraphBuilder::square(NodeId x) { return unary(Op::kSquare, x); }
NodeId GraphBuilder::softmax(NodeId x) { return unary(Op::kSoftmax, x); }
NodeId GraphBuilder::log_softmax(NodeId x) { return unary(Op::kLogSoftmax, x); }
NodeId GraphBuilder::l2_normalize(NodeId x) { return unary(Op::kL2Normalize, x); }

NodeId GraphBuilder::layer_norm(NodeId x, NodeId gamma, NodeId beta, double epsilon) {
  const std::size_t n = cols_of(shape_of(x));
  if (count_of(shape_of(gamma)) != n || count_of(shape_of(beta)) != n) {
    fail(Op::kLayerNorm, "scale/shift must have " + std::to_string(n) + " entries");
  }
  Node node = make(Op::kLayerNorm, {x, gamma, beta}, shape_of(x));
  node.scalar = epsilon;
  return push(std::move(node));
}

NodeId GraphBuilder::concat_cols(std::span<const NodeId> parts) {
  if (parts.empty()) fail(Op::kConcatCols, "nothing to concatenate");
  const std::size_t rows = rows_of(shape_of(parts[0]));
  std::size_t cols = 0;
  for (NodeId p : parts) {
    if (rows_of(shape_of(p)) != rows) fail(Op::kConcatCols, "row counts differ");
    cols += cols_of(shape_of(p));
  }
  return push(make(Op::kConcatCols, {parts.begin(), parts.end()}, Shape{rows, cols}));
}

NodeId GraphBuilder::concat_rows(std::span<const NodeId> parts) {
  if (parts.empty()) fail(Op::kConcatRows, "nothing to concatenate");
  const std::size_t cols = cols_of(shape_of(parts[0]));
  std::size_t rows = 0;
  for (NodeId p : parts) {
    if (cols_of(shape_of(p)) != cols) fail(Op::kConcatRows, "column counts differ");
    rows += rows_of(shape_of(p));
  }
  return push(make(Op::kConcatRows, {parts.begin(), parts.end()}, Shape{rows, cols}));
}

NodeId GraphBuilder::slice_cols(NodeId x, std::size_t begin, std::size_t end) {
  const Shape& s = shape_of(x);
  if (begin >= end || end > cols_of(s)) fail(Op::kSliceCols, "bad column range for " + to_string(s));
  Node n = make(Op::kSliceCols, {x}, Shape{rows_of(s), end - begin});
  n.first = begin;
  n.last = end;
  return push(std::move(n));
}

NodeId GraphBuilder::slice_rows(NodeId x, std::size_t begin, std::size_t end) {
  const Shape& s = shape_of(x);
  if (begin >= end || end > rows_of(s)) fail(Op::kSliceRows, "bad row range for " + to_string(s));
  Node n = make(Op::kSliceRows, {x}, Shape{end - begin, cols_of(s)});
  n.first = begin;
  n.last = end;
  return push(std::move(n));
}

NodeId GraphBuilder::gather_rows(NodeId x, std::vector<std::uint32_t> rows) {
  const Shape& s = shape_of(x);
  if (rows.empty()) fail(Op::kGatherRows, "no rows to gather");
  for (auto r : rows) {
    if (r >= rows_of(s)) fail(Op::kGatherRows, "row " + std::to_string(r) + " out of range");
  }
  Node n = make(Op::kGatherRows, {x}, Shape{rows.size(), cols_of(s)});
  n.indices = std::make_shared<const std::vector<std::uint32_t>>(std::move(rows));
  return push(std::move(n));
}

NodeId GraphBuilder::segment_mean(NodeId x, std::vector<Segment> segments) {
  const Shape& s = shape_of(x);
  if (segments.empty()) fail(Op::kSegmentMean, "no segments");
  for (const auto& seg : segments) {
    if (seg.end < seg.begin || seg.end > rows_of(s)) fail(Op::kSegmentMean, "segment out of range");
  }
  Node n = make(Op::kSegmentMean, {x}, Shape{segments.size(), cols_of(s)});
  n.segments = std::make_shared<const std::vector<Segment>>(std::move(segments));
  return push(std::move(n));
}

NodeId GraphBuilder::attention(NodeId q, NodeId k, NodeId v, AttentionLayout layout) {
  const Shape& sq = shape_of(q);
  const Shape& sk = shape_of(k);
  const Shape& sv = shape_of(v);
  const std::size_t width = cols_of(sq);
  if (cols_of(sk) != width || cols_of(sv) != width || rows_of(sk) != rows_of(sv)) {
    fail(Op::kAttention, "query/key/value shapes disagree: " + to_string(sq) + ", " + to_string(sk) +
                             ", " + to_string(sv));
  }
  if (layout.heads == 0 || width % layout.heads != 0) {
    fail(Op::kAttention, "width " + std::to_string(width) + " not divisible by " +
                             std::to_string(layout.heads) + " heads");
  }
  for (const auto& span : layout.spans) {
    if (span.query.end < span.query.begin || span.query.end > rows_of(sq) || span.key.end < span.key.begin ||
        span.key.end > rows_of(sk)) {
      fail(Op::kAttention, "attention span out of range");
    }
  }
  Node n = make(Op::kAttention, {q, k, v}, sq);
  n.attention = std::make_shared<const AttentionLayout>(std::move(layout));
  return push(std::move(n));
}

NodeId GraphBuilder::pick(NodeId x, std::vector<std::uint32_t> columns) {
  const Shape& s = shape_of(x);
  if (columns.size() != rows_of(s)) fail(Op::kPick, "need one column per row");
  for (auto c : columns) {
    if (c >= cols_of(s)) fail(Op::kPick, "column " + std::to_string(c) + " out of range");
  }
  Node n = make(Op::kPick, {x}, Shape{columns.size()});
  n.indices = std::make_shared<const std::vector<std::uint32_t>>(std::move(columns));
  return push(std::move(n));
}

NodeId GraphBuilder::diagonal(NodeId x) {
  const Shape& s = shape_of(x);
  if (rows_of(s) != cols_of(s)) fail(Op::kPick, "diagonal of non-square " + to_string(s));
  std::vector<std::uint32_t> cols(rows_of(s));
  for (std::uint32_t i = 0; i < cols.size(); ++i) cols[i] = i;
  return pick(x, std::move(cols));
}

NodeId GraphBuilder::row_dot(NodeId a, NodeId b) {
  const Shape& sa = shape_of(a);
  const Shape& sb = shape_of(b);
  if (rows_of(sa) != rows_of(sb) || cols_of(sa) != cols_of(sb)) {
    fail(Op::kRowDot, "operand shapes differ: " + to_string(sa) + " vs " + to_string(sb));
  }
  return push(make(Op::kRowDot, {a, b}, Shape{rows_of(sa)}));
}

NodeId GraphBuilder::sum(NodeId x) { return push(make(Op::kSum, {x}, Shape{1})); }
NodeId GraphBuilder::mean(NodeId x) { return push(make(Op::kMean, {x}, Shape{1})); }

NodeId GraphBuilder::topk_mask(NodeId x, std::size_t k, bool exclude_diagonal) {
  const Shape& s = shape_of(x);
  if (k == 0) fail(Op::kTopKMask, "k must be positive");
  if (exclude_diagonal && rows_of(s) != cols_of(s)) fail(Op::kTopKMask, "diagonal exclusion needs a square input");
  Node n = make(Op::kTopKMask, {x}, s);
  n.first = k;
  n.flag = exclude_diagonal;
  n.requires_grad = false;
  return push(std::move(n));
}

Graph GraphBuilder::build() && { return std::move(graph_); }

}  // namespace uniecs
