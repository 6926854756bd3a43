// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#include "uniecs/data/synthetic.hpp"

#include <cmath>
#include <random>

#include "uniecs/error.hpp"

namespace uniecs {

void SyntheticSpec::validate() const {
  if (pairs == 0 || latent_dim == 0 || tokens_v == 0 || tokens_t == 0 || dim_v == 0 || dim_t == 0) {
    throw ConfigError("synthetic counts and dims must be at least 1");
  }
  if (!(pair_noise >= 0.0) || !(token_noise >= 0.0) || !std::isfinite(pair_noise) || !std::isfinite(token_noise)) {
    throw ConfigError("synthetic noise levels must be finite and non-negative");
  }
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) throw ConfigError("missing_rate must lie in [0, 1)");
}

namespace {

using Rng = std::mt19937_64;

std::vector<double> unit(std::vector<double> x) {
  double n = 0;
  for (double v : x) n += v * v;
  n = std::sqrt(n);
  // A zero draw has probability 0; fall back to the first axis.
  if (n == 0.0) {
    x.assign(x.size(), 0.0);
    x[0] = 1.0;
    return x;
  }
  for (double& v : x) v /= n;
  return x;
}

std::vector<double> gaussian(Rng& rng, std::size_t n, double scale) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(n);
  for (double& v : x) v = scale * normal(rng);
  return x;
}

// One [dim x latent] map per token position.
struct ModalityMap {
  std::vector<std::vector<double>> per_token;
  std::size_t dim = 0;

  ModalityMap(Rng& rng, std::size_t tokens, std::size_t dim_, std::size_t latent) : dim(dim_) {
    for (std::size_t k = 0; k < tokens; ++k) per_token.push_back(gaussian(rng, dim * latent, 1.0));
  }

  Tensor<float> lift(const std::vector<double>& latent, double noise, Rng& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor<float> out(Shape{per_token.size(), dim});
    for (std::size_t k = 0; k < per_token.size(); ++k) {
      for (std::size_t i = 0; i < dim; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < latent.size(); ++j) s += per_token[k][i * latent.size() + j] * latent[j];
        out(k, i) = static_cast<float>(s + noise * normal(rng));
      }
    }
    return out;
  }
};

Rng stream(std::uint64_t seed, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose)};
  return Rng(seq);
}

}  // namespace

std::vector<PairLatents> synthetic_latents(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng = stream(spec.seed, 1);
  std::vector<PairLatents> out;
  out.reserve(spec.pairs);
  for (std::size_t p = 0; p < spec.pairs; ++p) {
    const std::vector<double> z = unit(gaussian(rng, spec.latent_dim, 1.0));
    auto perturb = [&] {
      std::vector<double> x = gaussian(rng, spec.latent_dim, spec.pair_noise);
      for (std::size_t j = 0; j < x.size(); ++j) x[j] += z[j];
      return unit(std::move(x));
    };
    PairLatents l;
    l.trigger = perturb();
    l.recall = perturb();
    out.push_back(std::move(l));
  }
  return out;
}

Dataset generate(const SyntheticSpec& spec) {
  const std::vector<PairLatents> latents = synthetic_latents(spec);
  Rng world = stream(spec.world_seed, 0);
  const ModalityMap image_map(world, spec.tokens_v, spec.dim_v, spec.latent_dim);
  const ModalityMap text_map(world, spec.tokens_t, spec.dim_t, spec.latent_dim);

  Rng rng = stream(spec.seed, 2);
  std::bernoulli_distribution drop(spec.missing_rate);
  std::bernoulli_distribution coin(0.5);
  auto product = [&](const std::vector<double>& latent) {
    bool keep_image = !drop(rng);
    bool keep_text = !drop(rng);
    if (!keep_image && !keep_text) (coin(rng) ? keep_image : keep_text) = true;
    ProductFeatures f;
    if (keep_image) f.image = image_map.lift(latent, spec.token_noise, rng);
    if (keep_text) f.text = text_map.lift(latent, spec.token_noise, rng);
    return f;
  };

  Dataset d;
  d.dim_v = spec.dim_v;
  d.dim_t = spec.dim_t;
  d.records.reserve(spec.pairs);
  for (std::size_t p = 0; p < spec.pairs; ++p) {
    ProductPairRecord r;
    r.pair_id = spec.id_prefix + std::to_string(p);
    r.trigger = product(latents[p].trigger);
    r.recall = product(latents[p].recall);
    d.records.push_back(std::move(r));
  }
  return d;
}

}  // namespace uniecs
