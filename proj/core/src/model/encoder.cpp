// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#include "uniecs/model/encoder.hpp"

#include <cmath>
#include <random>

namespace uniecs {

std::size_t TokenFeatureMatrix::valid_count() const {
  std::size_t n = 0;
  for (auto m : mask) n += m ? 1 : 0;
  return n;
}

TokenFeatureMatrix TokenFeatureMatrix::dense(Tensor<float> tokens) {
  TokenFeatureMatrix m;
  m.mask.assign(tokens.rows(), 1);
  m.tokens = std::move(tokens);
  return m;
}

ModalityBundle ModalityBundle::make(std::optional<TokenFeatureMatrix> visual,
                                    std::optional<TokenFeatureMatrix> textual) {
  ModalityBundle b;
  b.indicator_v = visual ? 1.0f : 0.0f;
  b.indicator_t = textual ? 1.0f : 0.0f;
  b.visual = std::move(visual);
  b.textual = std::move(textual);
  return b;
}

namespace {

void validate_matrix(const TokenFeatureMatrix& m, std::size_t dim, const char* which) {
  const std::string name(which);
  if (m.tokens.rank() != 2) throw DataError(name + " tokens must be a matrix");
  if (m.tokens.cols() != dim) {
    throw DataError(name + " tokens have width " + std::to_string(m.tokens.cols()) + ", expected " +
                    std::to_string(dim));
  }
  if (m.mask.size() != m.tokens.rows()) throw DataError(name + " mask length does not match token count");
  if (m.valid_count() == 0) throw DataError(name + " modality has no valid tokens");
  for (std::size_t r = 0; r < m.tokens.rows(); ++r) {
    for (float x : m.tokens.row(r)) {
      if (!std::isfinite(x)) throw DataError(name + " tokens contain a non-finite value");
      if (!m.mask[r] && x != 0.0f) throw DataError(name + " masked token row " + std::to_string(r) + " is not zero");
    }
  }
}

}  // namespace

void validate_bundle(const ModalityBundle& bundle, std::size_t dim_v, std::size_t dim_t) {
  if (bundle.indicator_v != 0.0f && bundle.indicator_v != 1.0f) throw DataError("visual indicator must be 0 or 1");
  if (bundle.indicator_t != 0.0f && bundle.indicator_t != 1.0f) throw DataError("textual indicator must be 0 or 1");
  if (bundle.indicator_v == 1.0f && !bundle.visual) throw DataError("visual indicator set without visual tokens");
  if (bundle.indicator_t == 1.0f && !bundle.textual) throw DataError("textual indicator set without textual tokens");
  if (!bundle.has_visual() && !bundle.has_textual()) throw DataError("bundle has neither modality");
  if (bundle.has_visual()) validate_matrix(*bundle.visual, dim_v, "visual");
  if (bundle.has_textual()) validate_matrix(*bundle.textual, dim_t, "textual");
}

void ModelConfig::validate() const {
  if (dim_v == 0 || dim_t == 0) throw ConfigError("model input dims must be positive");
  if (width == 0 || heads == 0) throw ConfigError("model width and heads must be positive");
  if (width % heads != 0) {
    throw ConfigError("model width " + std::to_string(width) + " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
  if (embed_dim == 0) throw ConfigError("embedding dim must be positive");
  if (gated_layers == 0) throw ConfigError("need at least one gated layer");
  if (!(layer_norm_eps > 0.0)) throw ConfigError("layer-norm epsilon must be positive");
}

namespace layers {

NodeId linear(GraphBuilder& b, NodeId x, const std::string& prefix, std::size_t out, bool bias) {
  const std::size_t in = b.shape_of(x).back();
  NodeId y = b.matmul(x, b.parameter(prefix + ".weight", Shape{in, out}));
  if (bias) y = b.add_row(y, b.parameter(prefix + ".bias", Shape{out}));
  return y;
}

NodeId layer_norm(GraphBuilder& b, NodeId x, const std::string& prefix, double eps) {
  const std::size_t n = b.shape_of(x).back();
  return b.layer_norm(x, b.parameter(prefix + ".scale", Shape{n}), b.parameter(prefix + ".shift", Shape{n}), eps);
}

NodeId multi_head(GraphBuilder& b, const ModelConfig& config, NodeId queries, NodeId keys, AttentionLayout layout,
                  const std::string& prefix) {
  const std::size_t d = config.width;
  layout.heads = static_cast<std::uint32_t>(config.heads);
  NodeId q = linear(b, queries, prefix + ".query", d);
  NodeId k = linear(b, keys, prefix + ".key", d, false);
  NodeId v = linear(b, keys, prefix + ".value", d);
  NodeId ctx = b.attention(q, k, v, std::move(layout));
  return linear(b, ctx, prefix + ".output", d);
}

NodeId transformer_block(GraphBuilder& b, const ModelConfig& config, NodeId x, const std::vector<Segment>& spans,
                         const std::string& prefix) {
  AttentionLayout layout;
  layout.spans.reserve(spans.size());
  for (const auto& s : spans) layout.spans.push_back({s, s});
  NodeId attended = multi_head(b, config, x, x, std::move(layout), prefix + ".attn");
  NodeId h = layer_norm(b, b.add(x, attended), prefix + ".norm1", config.layer_norm_eps);
  NodeId ff = linear(b, b.gelu(linear(b, h, prefix + ".ff1", config.feed_forward_width())), prefix + ".ff2",
                     config.width);
  return layer_norm(b, b.add(h, ff), prefix + ".norm2", config.layer_norm_eps);
}

GatedLayer gated_cross(GraphBuilder& b, const ModelConfig& config, NodeId queries, std::optional<NodeId> keys,
                       const std::vector<Segment>& runs, const std::vector<Segment>& key_spans,
                       const std::string& prefix) {
  const std::size_t rows = b.shape_of(queries)[0];
  const std::size_t d = config.width;
  Tensor<double> has_keys(Shape{rows});
  AttentionLayout layout;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    layout.spans.push_back({runs[r], key_spans[r]});
    if (!key_spans[r].empty()) {
      for (std::uint32_t i = runs[r].begin; i < runs[r].end; ++i) has_keys[i] = 1.0;
    }
  }

  NodeId context;
  if (keys) {
    context = multi_head(b, config, queries, *keys, std::move(layout), prefix + ".attn");
  } else {
    // No run in this batch has keys: the context is zero before the output map.
    context = linear(b, b.constant(Tensor<double>(Shape{rows, d})), prefix + ".attn.output", d);
  }
  context = b.mul_col(context, b.constant(std::move(has_keys)));
  NodeId attended = layer_norm(b, context, prefix + ".norm", config.layer_norm_eps);

  Tensor<double> ones(Shape{rows, 1});
  ones.fill(1.0);
  const NodeId gate_parts[] = {queries, attended, b.constant(std::move(ones))};
  NodeId gate = b.sigmoid(linear(b, b.concat_cols(gate_parts), prefix + ".gate", d));
  NodeId fused = config.disable_gating ? attended : b.add(queries, b.mul(gate, b.sub(attended, queries)));
  return {fused, attended, gate};
}

}  // namespace layers

namespace {

struct Side {
  std::vector<float> stacked;  // valid token rows of every product, flattened
  std::size_t stacked_rows = 0;
  std::vector<Segment> product_tokens;  // per product, rows of `stacked`
  std::vector<std::uint32_t> gather;    // run-ordered row -> stacked row
  std::vector<Segment> runs;
  std::vector<Segment> keys;            // per run, rows of the other side's run matrix
  std::vector<std::int64_t> full_run;   // per product, run index of the fused view, -1 if absent
  std::vector<std::int64_t> solo_run;   // per product, run index of the single-modality view
  std::vector<std::size_t> run_owner;   // run -> product

  void stack(const TokenFeatureMatrix& m) {
    const std::uint32_t begin = static_cast<std::uint32_t>(stacked_rows);
    for (std::size_t r = 0; r < m.tokens.rows(); ++r) {
      if (!m.mask[r]) continue;
      const auto row = m.tokens.row(r);
      stacked.insert(stacked.end(), row.begin(), row.end());
      ++stacked_rows;
    }
    product_tokens.push_back({begin, static_cast<std::uint32_t>(stacked_rows)});
  }

  std::int64_t add_run(std::size_t product) {
    const Segment tokens = product_tokens[product];
    const auto begin = static_cast<std::uint32_t>(gather.size());
    for (std::uint32_t r = tokens.begin; r < tokens.end; ++r) gather.push_back(r);
    runs.push_back({begin, static_cast<std::uint32_t>(gather.size())});
    run_owner.push_back(product);
    return static_cast<std::int64_t>(runs.size() - 1);
  }
};

}  // namespace

EncoderGraph build_encoder(GraphBuilder& b, const ModelConfig& config,
                           std::span<const ModalityBundle* const> products, const std::string& input_prefix) {
  config.validate();
  if (products.empty()) throw DataError("nothing to encode");
  const std::size_t n = products.size();
  const std::size_t d = config.width;

  Side vis, txt;
  for (std::size_t p = 0; p < n; ++p) {
    const ModalityBundle& bundle = *products[p];
    validate_bundle(bundle, config.dim_v, config.dim_t);
    if (bundle.has_visual()) {
      vis.stack(*bundle.visual);
    } else {
      vis.product_tokens.push_back({});
    }
    if (bundle.has_textual()) {
      txt.stack(*bundle.textual);
    } else {
      txt.product_tokens.push_back({});
    }
  }

  vis.full_run.assign(n, -1);
  vis.solo_run.assign(n, -1);
  txt.full_run.assign(n, -1);
  txt.solo_run.assign(n, -1);
  for (std::size_t p = 0; p < n; ++p) {
    const bool has_v = products[p]->has_visual();
    const bool has_t = products[p]->has_textual();
    if (has_v) vis.full_run[p] = vis.add_run(p);
    if (has_v && has_t) vis.solo_run[p] = vis.add_run(p);
    if (has_t) txt.full_run[p] = txt.add_run(p);
    if (has_v && has_t) txt.solo_run[p] = txt.add_run(p);
  }
  auto link = [](Side& self, const Side& other) {
    self.keys.resize(self.runs.size());
    for (std::size_t r = 0; r < self.runs.size(); ++r) {
      const std::size_t p = self.run_owner[r];
      if (self.full_run[p] == static_cast<std::int64_t>(r) && other.full_run[p] >= 0) {
        self.keys[r] = other.runs[static_cast<std::size_t>(other.full_run[p])];
      }
    }
  };
  link(vis, txt);
  link(txt, vis);

  EncoderGraph out;
  auto project_side = [&](Side& side, const char* tag, std::size_t dim) -> std::optional<NodeId> {
    if (side.stacked_rows == 0) return std::nullopt;
    const std::string name = input_prefix + tag + "_tokens";
    Shape shape{side.stacked_rows, dim};
    NodeId x = b.input(name, shape);
    out.inputs.emplace(name, Tensor<float>(shape, std::move(side.stacked)));
    b.set_scope(std::string("proj.") + tag);
    NodeId projected = layers::linear(b, x, std::string("proj.") + (tag[0] == 'v' ? "v" : "t"), d);
    return b.gather_rows(projected, side.gather);
  };
  std::optional<NodeId> v_rows = project_side(vis, "visual", config.dim_v);
  std::optional<NodeId> t_rows = project_side(txt, "textual", config.dim_t);

  for (std::size_t layer = 0; layer < config.gated_layers; ++layer) {
    const std::string base = "gated" + std::to_string(layer);
    std::optional<NodeId> next_v, next_t;
    if (v_rows) {
      b.set_scope(base + ".v");
      next_v = layers::gated_cross(b, config, *v_rows, t_rows, vis.runs, vis.keys, base + ".v").fused;
    }
    if (t_rows) {
      b.set_scope(base + ".t");
      next_t = layers::gated_cross(b, config, *t_rows, v_rows, txt.runs, txt.keys, base + ".t").fused;
    }
    v_rows = next_v;
    t_rows = next_t;
  }

  std::vector<NodeId> pooled_parts;
  std::uint32_t v_offset = 0, t_offset = 0;
  if (v_rows) {
    b.set_scope("self.v");
    NodeId h = layers::transformer_block(b, config, *v_rows, vis.runs, "self.v");
    pooled_parts.push_back(b.segment_mean(h, vis.runs));
    t_offset = static_cast<std::uint32_t>(vis.runs.size());
  }
  if (t_rows) {
    b.set_scope("self.t");
    NodeId h = layers::transformer_block(b, config, *t_rows, txt.runs, "self.t");
    pooled_parts.push_back(b.segment_mean(h, txt.runs));
  }
  const std::uint32_t zero_row = t_offset + static_cast<std::uint32_t>(txt.runs.size());
  b.set_scope("fusion");
  pooled_parts.push_back(b.constant(Tensor<double>(Shape{1, d})));
  NodeId pooled = b.concat_rows(pooled_parts);

  // Every embedding is a two-token sequence [visual slot, textual slot].
  std::vector<std::uint32_t> sequence_rows;
  auto add_sequence = [&](std::int64_t v_run, std::int64_t t_run) {
    sequence_rows.push_back(v_run >= 0 ? v_offset + static_cast<std::uint32_t>(v_run) : zero_row);
    sequence_rows.push_back(t_run >= 0 ? t_offset + static_cast<std::uint32_t>(t_run) : zero_row);
    return static_cast<std::uint32_t>(sequence_rows.size() / 2 - 1);
  };
  out.products.resize(n);
  for (std::size_t p = 0; p < n; ++p) {
    ProductRows& rows = out.products[p];
    rows.f = add_sequence(vis.full_run[p], txt.full_run[p]);
    const bool has_v = products[p]->has_visual();
    const bool has_t = products[p]->has_textual();
    if (has_v && has_t) {
      rows.v = add_sequence(vis.solo_run[p], -1);
      rows.t = add_sequence(-1, txt.solo_run[p]);
    } else if (has_v) {
      rows.v = rows.f;
    } else {
      rows.t = rows.f;
    }
  }
  const std::size_t sequences = sequence_rows.size() / 2;
  std::vector<std::uint32_t> type_rows(sequence_rows.size());
  std::vector<Segment> spans(sequences);
  for (std::size_t s = 0; s < sequences; ++s) {
    type_rows[2 * s] = 0;
    type_rows[2 * s + 1] = 1;
    spans[s] = {static_cast<std::uint32_t>(2 * s), static_cast<std::uint32_t>(2 * s + 2)};
  }
  NodeId types = b.gather_rows(b.parameter("fusion.type_embedding", Shape{2, d}), std::move(type_rows));
  NodeId x = b.add(b.gather_rows(pooled, std::move(sequence_rows)), types);
  for (std::size_t blk = 0; blk < config.fusion_blocks; ++blk) {
    const std::string name = "fusion.block" + std::to_string(blk);
    b.set_scope(name);
    x = layers::transformer_block(b, config, x, spans, name);
  }
  b.set_scope("fusion.out");
  NodeId summary = b.segment_mean(x, spans);
  out.embeddings = b.l2_normalize(layers::linear(b, summary, "fusion.out", config.embed_dim));
  b.set_scope("");
  return out;
}

ParameterStore<float> init_parameters(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  // The layout is read off a graph that touches every parameter once.
  auto one_token = [](std::size_t dim) {
    return TokenFeatureMatrix::dense(Tensor<float>(Shape{1, dim}));
  };
  ModalityBundle both = ModalityBundle::make(one_token(config.dim_v), one_token(config.dim_t));
  const ModalityBundle* products[] = {&both};
  GraphBuilder b;
  (void)build_encoder(b, config, products);
  const Graph g = std::move(b).build();

  std::mt19937_64 rng(seed);
  ParameterStore<float> params;
  auto ends_with = [](const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  for (NodeId id : g.parameters()) {
    const Node& node = g.node(id);
    Tensor<float> value(node.shape);
    if (ends_with(node.name, ".scale")) {
      value.fill(1.0f);
    } else if (ends_with(node.name, ".bias") || ends_with(node.name, ".shift")) {
      // zeros
    } else {
      // Embedding tables are indexed, not multiplied; scale them like a width-D input.
      const std::size_t fan_in = ends_with(node.name, "embedding") ? config.width : node.shape[0];
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (std::size_t i = 0; i < value.size(); ++i) value[i] = static_cast<float>(dist(rng));
    }
    params.add(node.name, std::move(value));
  }
  return params;
}

// ---------------------------------------------------------------------------
// Value-level entry points. Each builds a small graph over the valid rows and
// scatters results back to the caller's row layout.

namespace {

template <typename T>
Tensor<T> stack_valid(const CommonTokens<T>& m) {
  std::vector<T> rows;
  std::size_t count = 0;
  for (std::size_t r = 0; r < m.tokens.rows(); ++r) {
    if (!m.mask[r]) continue;
    const auto row = m.tokens.row(r);
    rows.insert(rows.end(), row.begin(), row.end());
    ++count;
  }
  if (count == 0) throw DataError("modality has no valid tokens");
  return Tensor<T>(Shape{count, m.tokens.cols()}, std::move(rows));
}

template <typename T>
CommonTokens<T> scatter_valid(const Tensor<T>& valid, const std::vector<std::uint8_t>& mask) {
  CommonTokens<T> out{Tensor<T>(Shape{mask.size(), valid.cols()}), mask};
  std::size_t k = 0;
  for (std::size_t r = 0; r < mask.size(); ++r) {
    if (!mask[r]) continue;
    const auto src = valid.row(k++);
    std::copy(src.begin(), src.end(), out.tokens.row(r).begin());
  }
  return out;
}

template <typename T>
TensorMap<T> cast_inputs(const TensorMap<float>& inputs) {
  TensorMap<T> out;
  for (const auto& [name, value] : inputs) out.emplace(name, value.template cast<T>());
  return out;
}

template <typename T>
CommonTokens<T> to_common(const TokenFeatureMatrix& m) {
  return {m.tokens.template cast<T>(), m.mask};
}

}  // namespace

template <typename T>
ModalityPair<T> project(const ModalityBundle& bundle, const ParameterStore<T>& params, const ModelConfig& config) {
  config.validate();
  validate_bundle(bundle, config.dim_v, config.dim_t);
  GraphBuilder b;
  TensorMap<T> inputs;
  std::optional<NodeId> v_out, t_out;
  if (bundle.has_visual()) {
    Tensor<T> x = stack_valid(to_common<T>(*bundle.visual));
    v_out = layers::linear(b, b.input("visual", x.shape()), "proj.v", config.width);
    inputs.emplace("visual", std::move(x));
  }
  if (bundle.has_textual()) {
    Tensor<T> x = stack_valid(to_common<T>(*bundle.textual));
    t_out = layers::linear(b, b.input("textual", x.shape()), "proj.t", config.width);
    inputs.emplace("textual", std::move(x));
  }
  const Graph g = std::move(b).build();
  const Evaluation<T> ev = forward(g, params, inputs);
  ModalityPair<T> out;
  if (v_out) out.visual = scatter_valid(ev.value(*v_out), bundle.visual->mask);
  if (t_out) out.textual = scatter_valid(ev.value(*t_out), bundle.textual->mask);
  return out;
}

template <typename T>
GatedFusion<T> gated_cross_fuse(const ModalityPair<T>& projected, const ParameterStore<T>& params,
                                const ModelConfig& config, std::size_t layer) {
  config.validate();
  if (!projected.visual && !projected.textual) throw DataError("bundle has neither modality");
  GraphBuilder b;
  TensorMap<T> inputs;
  std::optional<NodeId> v_in, t_in;
  Segment v_run, t_run;
  if (projected.visual) {
    Tensor<T> x = stack_valid(*projected.visual);
    v_run = {0, static_cast<std::uint32_t>(x.rows())};
    v_in = b.input("visual", x.shape());
    inputs.emplace("visual", std::move(x));
  }
  if (projected.textual) {
    Tensor<T> x = stack_valid(*projected.textual);
    t_run = {0, static_cast<std::uint32_t>(x.rows())};
    t_in = b.input("textual", x.shape());
    inputs.emplace("textual", std::move(x));
  }
  const std::string base = "gated" + std::to_string(layer);
  std::optional<layers::GatedLayer> v_out, t_out;
  if (v_in) v_out = layers::gated_cross(b, config, *v_in, t_in, {v_run}, {t_run}, base + ".v");
  if (t_in) t_out = layers::gated_cross(b, config, *t_in, v_in, {t_run}, {v_run}, base + ".t");
  const Graph g = std::move(b).build();
  const Evaluation<T> ev = forward(g, params, inputs);

  GatedFusion<T> out;
  if (v_out) {
    const auto& mask = projected.visual->mask;
    out.fused.visual = scatter_valid(ev.value(v_out->fused), mask);
    out.attended.visual = scatter_valid(ev.value(v_out->attended), mask);
    out.gates.visual = scatter_valid(ev.value(v_out->gate), mask);
  }
  if (t_out) {
    const auto& mask = projected.textual->mask;
    out.fused.textual = scatter_valid(ev.value(t_out->fused), mask);
    out.attended.textual = scatter_valid(ev.value(t_out->attended), mask);
    out.gates.textual = scatter_valid(ev.value(t_out->gate), mask);
  }
  return out;
}

template <typename T>
ModalityPair<T> self_attend(const ModalityPair<T>& gated, const ParameterStore<T>& params, const ModelConfig& config) {
  config.validate();
  GraphBuilder b;
  TensorMap<T> inputs;
  std::optional<NodeId> v_out, t_out;
  if (gated.visual) {
    Tensor<T> x = stack_valid(*gated.visual);
    const Segment run{0, static_cast<std::uint32_t>(x.rows())};
    v_out = layers::transformer_block(b, config, b.input("visual", x.shape()), {run}, "self.v");
    inputs.emplace("visual", std::move(x));
  }
  if (gated.textual) {
    Tensor<T> x = stack_valid(*gated.textual);
    const Segment run{0, static_cast<std::uint32_t>(x.rows())};
    t_out = layers::transformer_block(b, config, b.input("textual", x.shape()), {run}, "self.t");
    inputs.emplace("textual", std::move(x));
  }
  const Graph g = std::move(b).build();
  const Evaluation<T> ev = forward(g, params, inputs);
  ModalityPair<T> out;
  if (v_out) out.visual = scatter_valid(ev.value(*v_out), gated.visual->mask);
  if (t_out) out.textual = scatter_valid(ev.value(*t_out), gated.textual->mask);
  return out;
}

template <typename T>
std::vector<EmbeddingTriple> encode_batch(std::span<const ModalityBundle* const> bundles,
                                          const ParameterStore<T>& params, const ModelConfig& config) {
  GraphBuilder b;
  EncoderGraph enc = build_encoder(b, config, bundles);
  const Graph g = std::move(b).build();
  const Evaluation<T> ev = forward(g, params, cast_inputs<T>(enc.inputs));
  const Tensor<T>& e = ev.value(enc.embeddings);
  auto row = [&](std::uint32_t r) {
    std::vector<float> v(e.cols());
    for (std::size_t j = 0; j < e.cols(); ++j) v[j] = static_cast<float>(e(r, j));
    return v;
  };
  std::vector<EmbeddingTriple> out(bundles.size());
  for (std::size_t p = 0; p < bundles.size(); ++p) {
    const ProductRows& rows = enc.products[p];
    out[p].f = row(rows.f);
    if (rows.v) out[p].v = row(*rows.v);
    if (rows.t) out[p].t = row(*rows.t);
  }
  return out;
}

template <typename T>
EmbeddingTriple encode(const ModalityBundle& bundle, const ParameterStore<T>& params, const ModelConfig& config) {
  const ModalityBundle* one[] = {&bundle};
  return encode_batch<T>(one, params, config).front();
}

#define UNIECS_INSTANTIATE(T)                                                                                   \
  template ModalityPair<T> project(const ModalityBundle&, const ParameterStore<T>&, const ModelConfig&);      \
  template GatedFusion<T> gated_cross_fuse(const ModalityPair<T>&, const ParameterStore<T>&, const ModelConfig&, \
                                           std::size_t);                                                        \
  template ModalityPair<T> self_attend(const ModalityPair<T>&, const ParameterStore<T>&, const ModelConfig&); \
  template EmbeddingTriple encode(const ModalityBundle&, const ParameterStore<T>&, const ModelConfig&);       \
  template std::vector<EmbeddingTriple> encode_batch(std::span<const ModalityBundle* const>,                  \
                                                     const ParameterStore<T>&, const ModelConfig&);

UNIECS_INSTANTIATE(float)
UNIECS_INSTANTIATE(double)
#undef UNIECS_INSTANTIATE

}  // namespace uniecs
