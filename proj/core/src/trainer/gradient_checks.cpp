// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#include "uniecs/trainer/gradient_checks.hpp"

#include <random>

#include "uniecs/data/synthetic.hpp"
#include "uniecs/model/encoder.hpp"

namespace uniecs {

ModelConfig GradientCheckSetup::small_model() {
  ModelConfig m;
  m.dim_v = 6;
  m.dim_t = 5;
  m.width = 16;
  m.heads = 2;
  m.ff_width = 24;
  m.embed_dim = 8;
  m.fusion_blocks = 2;
  return m;
}

LossConfig GradientCheckSetup::small_losses() {
  LossConfig l;
  l.k = 2;
  l.k_hard = 2;
  return l;
}

namespace {

struct Batch {
  Dataset data;
  std::vector<ModalityBundle> bundles;
  std::vector<const ModalityBundle*> side1, side2, all;
};

Batch make_batch(const GradientCheckSetup& setup, std::uint64_t seed) {
  if (setup.pairs < 3) throw ConfigError("gradient checks need at least 3 pairs");
  SyntheticSpec spec;
  spec.pairs = setup.pairs;
  spec.latent_dim = 4;
  spec.tokens_v = 2;
  spec.tokens_t = 3;
  spec.dim_v = setup.model.dim_v;
  spec.dim_t = setup.model.dim_t;
  spec.seed = seed;
  spec.world_seed = seed;
  Batch b;
  b.data = generate(spec);
  b.data.records[setup.pairs - 1].trigger.text.reset();
  b.data.records[setup.pairs - 2].recall.image.reset();
  b.bundles.reserve(2 * setup.pairs);
  for (const auto& r : b.data.records) b.bundles.push_back(r.trigger.bundle());
  for (const auto& r : b.data.records) b.bundles.push_back(r.recall.bundle());
  for (std::size_t i = 0; i < b.bundles.size(); ++i) {
    (i < setup.pairs ? b.side1 : b.side2).push_back(&b.bundles[i]);
    b.all.push_back(&b.bundles[i]);
  }
  return b;
}

std::vector<Seed<double>> weighted_terms(const LossNodes& nodes, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> weight(0.25, 1.75);
  std::vector<Seed<double>> seeds;
  for (std::size_t i = 0; i < kLossTermCount; ++i) {
    if (!nodes.terms[i]) throw Error("gradient check batch leaves loss term " + std::string(loss_term_name(i)) + " undefined");
    seeds.push_back({*nodes.terms[i], weight(rng)});
  }
  return seeds;
}

Tensor<double> gaussian(const Shape& shape, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Tensor<double> t(shape);
  for (auto& x : t.values()) x = n(rng);
  return t;
}

TensorMap<double> as_double(TensorMap<float>& inputs) {
  TensorMap<double> out;
  for (auto& [name, value] : inputs) out.emplace(name, value.cast<double>());
  return out;
}

}  // namespace

GradcheckReport encoder_gradcheck(const GradientCheckSetup& setup, const GradcheckOptions& options) {
  Batch batch = make_batch(setup, options.seed);
  std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  GraphBuilder b;
  EncoderGraph enc = build_encoder(b, setup.model, batch.all);
  NodeId out = b.sum(b.mul(enc.embeddings, b.constant(gaussian(b.shape_of(enc.embeddings), rng))));
  const Graph g = std::move(b).build();
  const auto params = init_parameters(setup.model, options.seed).cast<double>();
  return gradcheck(g, out, params, as_double(enc.inputs), options);
}

GradcheckReport losses_gradcheck(const GradientCheckSetup& setup, const GradcheckOptions& options) {
  Batch batch = make_batch(setup, options.seed);
  std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  // Row layout of the real encoder, with the rows themselves free parameters.
  GraphBuilder scratch;
  const EncoderGraph layout = build_encoder(scratch, setup.model, batch.all);
  const Shape shape = scratch.shape_of(layout.embeddings);
  GraphBuilder b;
  NodeId e = b.l2_normalize(b.parameter("embeddings", shape));
  const std::span<const ProductRows> rows(layout.products);
  LossNodes nodes = build_losses(b, e, rows.first(setup.pairs), rows.subspan(setup.pairs), setup.losses);
  const auto seeds = weighted_terms(nodes, rng);
  const Graph g = std::move(b).build();
  ParameterStore<double> params;
  params.add("embeddings", gaussian(shape, rng));
  return gradcheck(g, seeds, params, {}, options);
}

GradcheckReport end_to_end_gradcheck(const GradientCheckSetup& setup, const GradcheckOptions& options) {
  Batch batch = make_batch(setup, options.seed);
  std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  GraphBuilder b;
  EncoderGraph enc = build_encoder(b, setup.model, batch.all);
  const std::span<const ProductRows> rows(enc.products);
  LossNodes nodes = build_losses(b, enc.embeddings, rows.first(setup.pairs), rows.subspan(setup.pairs), setup.losses);
  const auto seeds = weighted_terms(nodes, rng);
  const Graph g = std::move(b).build();
  const auto params = init_parameters(setup.model, options.seed).cast<double>();
  return gradcheck(g, seeds, params, as_double(enc.inputs), options);
}

std::vector<NamedGradcheck> run_gradient_checks(const GradientCheckSetup& setup, const GradcheckOptions& options) {
  return {{"encoder", encoder_gradcheck(setup, options)},
          {"losses", losses_gradcheck(setup, options)},
          {"end_to_end", end_to_end_gradcheck(setup, options)}};
}

}  // namespace uniecs
