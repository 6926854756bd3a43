// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#include "uniecs/losses/losses.hpp"

#include <algorithm>
#include <cmath>

namespace uniecs {

std::string_view loss_term_name(LossTerm term) { return loss_term_name(static_cast<std::size_t>(term)); }

std::string_view loss_term_name(std::size_t index) {
  static constexpr std::string_view kNames[kLossTermCount] = {"v2t", "pml", "pdc", "plc", "v2v", "t2t"};
  if (index >= kLossTermCount) throw Error("loss term index out of range");
  return kNames[index];
}

void LossConfig::validate() const {
  for (double t : {tau, tau_v, tau_t}) {
    if (!(t > 0.0) || !std::isfinite(t)) throw ConfigError("loss temperatures must be positive");
  }
  for (double a : {alpha1, alpha2, alpha3, alpha4}) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("loss margins must be non-negative");
  }
  if (k == 0 || k_hard == 0) throw ConfigError("neighbour counts must be at least 1");
}

namespace {

using Rows = std::vector<std::uint32_t>;

// -mean_i log softmax_j(a_i . b_j / tau)[i]
NodeId info_nce(GraphBuilder& b, NodeId a, NodeId c, double tau) {
  NodeId logits = b.scale(b.matmul_nt(a, c), 1.0 / tau);
  return b.scale(b.mean(b.diagonal(b.log_softmax(logits))), -1.0);
}

NodeId zero(GraphBuilder& b) { return b.constant(Tensor<double>::scalar(0.0)); }

NodeId off_diagonal(GraphBuilder& b, std::size_t n) {
  Tensor<double> m(Shape{n, n});
  m.fill(1.0);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 0.0;
  return b.constant(std::move(m));
}

// sum of relu(x + margin) over the selected entries
NodeId hinge_sum(GraphBuilder& b, NodeId x, double margin, NodeId selection) {
  return b.sum(b.mul(b.relu(b.add_scalar(x, margin)), selection));
}

struct Intra {
  Rows v, t, f;
};

Intra intra_samples(std::span<const ProductRows> side1, std::span<const ProductRows> side2, bool both_sides) {
  Intra s;
  auto take = [&](std::span<const ProductRows> side) {
    for (const auto& p : side) {
      if (p.v && p.t) {
        s.v.push_back(*p.v);
        s.t.push_back(*p.t);
        s.f.push_back(p.f);
      }
    }
  };
  take(side1);
  if (both_sides) take(side2);
  return s;
}

}  // namespace

LossNodes build_losses(GraphBuilder& b, NodeId embeddings, std::span<const ProductRows> side1,
                       std::span<const ProductRows> side2, const LossConfig& config,
                       const std::array<bool, kLossTermCount>& enabled) {
  config.validate();
  if (side1.size() != side2.size()) throw DataError("pair batch sides differ in length");
  if (side1.empty()) throw DataError("empty pair batch");
  LossNodes out;
  auto rows = [&](const Rows& r) { return b.gather_rows(embeddings, r); };
  const Intra intra = intra_samples(side1, side2, config.use_both_sides_intra);
  const std::size_t n_intra = intra.f.size();

  if (enabled[0] && n_intra > 0) {
    b.set_scope("loss.v2t");
    NodeId v = rows(intra.v), t = rows(intra.t);
    NodeId l = info_nce(b, v, t, config.tau);
    if (config.symmetric_v2t) l = b.scale(b.add(l, info_nce(b, t, v, config.tau)), 0.5);
    out.terms[0] = l;
    out.samples[0] = n_intra;
  }

  if (enabled[1]) {
    b.set_scope("loss.pml");
    Rows f1, f2, v1, vf2, t1, tf2;
    for (std::size_t i = 0; i < side1.size(); ++i) {
      f1.push_back(side1[i].f);
      f2.push_back(side2[i].f);
      if (side1[i].v) {
        v1.push_back(*side1[i].v);
        vf2.push_back(side2[i].f);
      }
      if (side1[i].t) {
        t1.push_back(*side1[i].t);
        tf2.push_back(side2[i].f);
      }
    }
    NodeId l = info_nce(b, rows(f1), rows(f2), config.tau);
    if (!v1.empty()) l = b.add(l, info_nce(b, rows(v1), rows(vf2), config.tau));
    if (!t1.empty()) l = b.add(l, info_nce(b, rows(t1), rows(tf2), config.tau));
    out.terms[1] = l;
    out.samples[1] = side1.size();
  }

  if (enabled[2] && n_intra > 0) {
    b.set_scope("loss.pdc");
    NodeId f = rows(intra.f);
    NodeId fused = b.matmul_nt(f, f);
    NodeId sv = b.row_dot(rows(intra.v), f);
    NodeId st = b.row_dot(rows(intra.t), f);
    NodeId mask = off_diagonal(b, n_intra);
    NodeId l = b.add(hinge_sum(b, b.sub_col(fused, sv), config.alpha2, mask),
                     hinge_sum(b, b.sub_col(fused, st), config.alpha2, mask));
    out.terms[2] = b.scale(l, 1.0 / static_cast<double>(n_intra));
    out.samples[2] = n_intra;
  }

  if (enabled[3] && n_intra > 0) {
    b.set_scope("loss.plc");
    const std::size_t k = std::min(config.k, n_intra - 1);
    if (k == 0) {
      out.terms[3] = zero(b);
    } else {
      NodeId f = rows(intra.f);
      NodeId fused = b.matmul_nt(f, f);
      NodeId v2m = b.matmul_nt(rows(intra.v), f);
      NodeId t2m = b.matmul_nt(rows(intra.t), f);
      NodeId nbrs = b.topk_mask(fused, k, true);
      auto gap = [&](NodeId x, NodeId y) { return hinge_sum(b, b.square(b.sub(x, y)), -config.alpha3, nbrs); };
      NodeId l = b.add(b.add(gap(v2m, fused), gap(t2m, fused)), gap(v2m, t2m));
      out.terms[3] = b.scale(l, 1.0 / static_cast<double>(n_intra * k));
    }
    out.samples[3] = n_intra;
  }

  if (enabled[4]) {
    Rows v1, v2;
    for (std::size_t i = 0; i < side1.size(); ++i) {
      if (side1[i].v && side2[i].v) {
        v1.push_back(*side1[i].v);
        v2.push_back(*side2[i].v);
      }
    }
    if (!v1.empty()) {
      b.set_scope("loss.v2v");
      const std::size_t n = v1.size();
      NodeId a = rows(v1), c = rows(v2);
      NodeId l = info_nce(b, a, c, config.tau_v);
      const std::size_t k = std::min(config.k_hard, n - 1);
      if (k > 0) {
        NodeId sim = b.matmul_nt(a, c);
        NodeId hard = b.topk_mask(sim, k, true);
        NodeId h = hinge_sum(b, b.sub_col(sim, b.diagonal(sim)), config.alpha4, hard);
        l = b.add(l, b.scale(h, 1.0 / static_cast<double>(n * k)));
      }
      out.terms[4] = l;
      out.samples[4] = n;
    }
  }

  if (enabled[5]) {
    Rows t1, t2;
    for (std::size_t i = 0; i < side1.size(); ++i) {
      if (side1[i].t && side2[i].t) {
        t1.push_back(*side1[i].t);
        t2.push_back(*side2[i].t);
      }
    }
    if (!t1.empty()) {
      b.set_scope("loss.t2t");
      out.terms[5] = info_nce(b, rows(t1), rows(t2), config.tau_t);
      out.samples[5] = t1.size();
    }
  }
  b.set_scope("");
  return out;
}

namespace {

struct PackedBatch {
  Tensor<double> matrix;
  std::vector<ProductRows> side1, side2;
};

PackedBatch pack(const PairBatch& batch) {
  if (batch.side1.size() != batch.side2.size()) throw DataError("pair batch sides differ in length");
  if (batch.side1.empty()) throw DataError("empty pair batch");
  const std::size_t dim = batch.side1.front().f.size();
  std::vector<double> data;
  std::uint32_t next = 0;
  auto push = [&](const std::vector<float>& e) {
    if (e.size() != dim) throw DataError("embedding widths differ within the batch");
    data.insert(data.end(), e.begin(), e.end());
    return next++;
  };
  PackedBatch out;
  for (const auto* side : {&batch.side1, &batch.side2}) {
    auto& rows = side == &batch.side1 ? out.side1 : out.side2;
    for (const auto& e : *side) {
      ProductRows r;
      r.f = push(e.f);
      if (e.v) r.v = push(*e.v);
      if (e.t) r.t = push(*e.t);
      rows.push_back(r);
    }
  }
  out.matrix = Tensor<double>(Shape{next, dim}, std::move(data));
  return out;
}

std::pair<LossVector, std::array<bool, kLossTermCount>> evaluate(const PairBatch& batch, const LossConfig& config,
                                                                 const std::array<bool, kLossTermCount>& enabled) {
  PackedBatch packed = pack(batch);
  GraphBuilder b;
  NodeId e = b.input("embeddings", packed.matrix.shape());
  LossNodes nodes = build_losses(b, e, packed.side1, packed.side2, config, enabled);
  const Graph g = std::move(b).build();
  TensorMap<double> inputs;
  inputs.emplace("embeddings", std::move(packed.matrix));
  const Evaluation<double> ev = forward(g, ParameterStore<double>{}, inputs);
  LossVector values{};
  std::array<bool, kLossTermCount> defined{};
  for (std::size_t i = 0; i < kLossTermCount; ++i) {
    if (nodes.terms[i]) {
      values[i] = ev.scalar(*nodes.terms[i]);
      defined[i] = true;
    }
  }
  return {values, defined};
}

double single_term(const PairBatch& batch, const LossConfig& config, LossTerm term) {
  std::array<bool, kLossTermCount> enabled{};
  const auto i = static_cast<std::size_t>(term);
  enabled[i] = true;
  auto [values, defined] = evaluate(batch, config, enabled);
  if (!defined[i]) {
    throw DataError(std::string(loss_term_name(term)) + " loss has no samples with the modalities it needs");
  }
  return values[i];
}

}  // namespace

double v2t_loss(const PairBatch& batch, const LossConfig& config) { return single_term(batch, config, LossTerm::kV2T); }
double pml_loss(const PairBatch& batch, const LossConfig& config) { return single_term(batch, config, LossTerm::kPML); }
double pdc_loss(const PairBatch& batch, const LossConfig& config) { return single_term(batch, config, LossTerm::kPDC); }
double plc_loss(const PairBatch& batch, const LossConfig& config) { return single_term(batch, config, LossTerm::kPLC); }
double v2v_loss(const PairBatch& batch, const LossConfig& config) { return single_term(batch, config, LossTerm::kV2V); }
double t2t_loss(const PairBatch& batch, const LossConfig& config) { return single_term(batch, config, LossTerm::kT2T); }

LossBreakdown total_loss(const PairBatch& batch, const LossConfig& config, const LossVector& lambdas) {
  auto [values, defined] = evaluate(batch, config, {true, true, true, true, true, true});
  LossBreakdown out;
  out.terms = values;
  out.defined = defined;
  for (std::size_t i = 0; i < kLossTermCount; ++i) {
    if (defined[i]) out.total += lambdas[i] * values[i];
  }
  return out;
}

}  // namespace uniecs
