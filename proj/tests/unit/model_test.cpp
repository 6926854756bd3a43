// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "reference_model.hpp"
#include "test_util.hpp"
#include "uniecs/model/encoder.hpp"
#include "uniecs/numerics/gradcheck.hpp"

namespace uniecs {
namespace {

using testing::random_tokens;

ModelConfig small_config() {
  ModelConfig c;
  c.dim_v = 8;
  c.dim_t = 6;
  c.width = 16;
  c.heads = 2;
  c.ff_width = 32;
  c.embed_dim = 8;
  return c;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<float>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double norm(const std::vector<float>& v) {
  double s = 0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

TEST(ModelConfig, RejectsIndivisibleHeads) {
  ModelConfig c = small_config();
  c.heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Bundle, ValidationCatchesBrokenInputs) {
  std::mt19937_64 rng(0);
  EXPECT_THROW(validate_bundle(ModalityBundle{}, 8, 6), DataError);
  auto wrong_dim = ModalityBundle::make(random_tokens(2, 5, rng), std::nullopt);
  EXPECT_THROW(validate_bundle(wrong_dim, 8, 6), DataError);
  auto dirty_pad = ModalityBundle::make(random_tokens(2, 8, rng), std::nullopt);
  dirty_pad.visual->mask[1] = 0;
  EXPECT_THROW(validate_bundle(dirty_pad, 8, 6), DataError);
  auto flagged = ModalityBundle::make(std::nullopt, random_tokens(2, 6, rng));
  flagged.indicator_v = 1.0f;
  EXPECT_THROW(validate_bundle(flagged, 8, 6), DataError);
}

TEST(Init, FollowsTheStatedScheme) {
  const ModelConfig c = small_config();
  const auto p = init_parameters(c, 3);
  EXPECT_EQ(p.at("proj.v.weight").shape(), (Shape{8, 16}));
  EXPECT_EQ(p.at("gated0.v.gate.weight").shape(), (Shape{33, 16}));
  for (float x : p.at("gated0.t.gate.bias").values()) EXPECT_EQ(x, 0.0f);
  for (float x : p.at("self.v.norm1.scale").values()) EXPECT_EQ(x, 1.0f);
  const float bound = 1.0f / std::sqrt(32.0f);
  for (float x : p.at("fusion.block2.ff2.weight").values()) EXPECT_LE(std::abs(x), bound);
  EXPECT_EQ(p, init_parameters(c, 3));
  EXPECT_FALSE(p == init_parameters(c, 4));
}

TEST(Project, ZeroInputWithZeroBiasGivesZero) {
  const ModelConfig c = small_config();
  auto p = init_parameters(c, 1).cast<double>();
  auto bundle = ModalityBundle::make(TokenFeatureMatrix::dense(Tensor<float>(Shape{3, 8})), std::nullopt);
  auto out = project(bundle, p, c);
  ASSERT_TRUE(out.visual);
  EXPECT_FALSE(out.textual);
  for (double x : out.visual->tokens.values()) EXPECT_EQ(x, 0.0);
}

TEST(Project, IdentityWeightsKeepTokens) {
  ModelConfig c = small_config();
  c.dim_v = c.width;
  auto p = init_parameters(c, 1).cast<double>();
  auto& w = p.at("proj.v.weight");
  w.fill(0.0);
  for (std::size_t i = 0; i < c.width; ++i) w(i, i) = 1.0;
  std::mt19937_64 rng(5);
  auto bundle = ModalityBundle::make(random_tokens(4, c.width, rng), std::nullopt);
  auto out = project(bundle, p, c);
  EXPECT_EQ(out.visual->tokens, bundle.visual->tokens.cast<double>());
}

TEST(Project, MatchesHandMultiplyAndKeepsMaskedRowsZero) {
  const ModelConfig c = small_config();
  auto p = init_parameters(c, 2).cast<double>();
  std::mt19937_64 rng(9);
  for (auto& x : p.at("proj.v.bias").values()) x = 0.3;
  auto tokens = random_tokens(3, 8, rng);
  tokens.mask[1] = 0;
  tokens.tokens.row(1)[0] = 0;
  for (auto& x : tokens.tokens.row(1)) x = 0;
  auto out = project(ModalityBundle::make(tokens, std::nullopt), p, c);
  const auto& w = p.at("proj.v.weight");
  for (std::size_t r : {0u, 2u}) {
    for (std::size_t j = 0; j < c.width; ++j) {
      double s = 0.3;
      for (std::size_t k = 0; k < 8; ++k) s += static_cast<double>(tokens.tokens(r, k)) * w(k, j);
      EXPECT_NEAR(out.visual->tokens(r, j), s, 1e-12);
    }
  }
  for (double x : out.visual->tokens.row(1)) EXPECT_EQ(x, 0.0);
}

class GateLimits : public ::testing::TestWithParam<double> {};

TEST_P(GateLimits, SaturatedGateSelectsOneSource) {
  const ModelConfig c = small_config();
  auto p = init_parameters(c, 4).cast<double>();
  for (auto& x : p.at("gated0.v.gate.bias").values()) x = GetParam();
  std::mt19937_64 rng(8);
  auto bundle = ModalityBundle::make(random_tokens(3, 8, rng), random_tokens(2, 6, rng));
  // Small weights keep the pre-activation dominated by the bias.
  for (auto& x : p.at("gated0.v.gate.weight").values()) x *= 0.01;
  auto projected = project(bundle, p, c);
  auto g = gated_cross_fuse(projected, p, c);
  const auto& expected = GetParam() < 0 ? projected.visual->tokens : g.attended.visual->tokens;
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(g.fused.visual->tokens[i], expected[i], 1e-6);
}

INSTANTIATE_TEST_SUITE_P(ClosedAndOpen, GateLimits, ::testing::Values(-20.0, 20.0));

TEST(GatedCrossFuse, TwoTokenSingleHeadMatchesHandEvaluation) {
  ModelConfig c = small_config();
  c.heads = 1;
  auto p = init_parameters(c, 12).cast<double>();
  std::mt19937_64 rng(12);
  for (auto* name : {"gated0.v.attn.query.bias", "gated0.v.attn.value.bias", "gated0.v.attn.output.bias",
                     "gated0.v.norm.shift", "gated0.v.gate.bias"}) {
    for (auto& x : p.at(name).values()) x = std::normal_distribution<double>(0, 0.3)(rng);
  }
  auto bundle = ModalityBundle::make(random_tokens(2, 8, rng), random_tokens(2, 6, rng));
  auto projected = project(bundle, p, c);
  auto g = gated_cross_fuse(projected, p, c);

  reference::Mat vq, tk;
  for (std::size_t r = 0; r < 2; ++r) {
    vq.emplace_back(projected.visual->tokens.row(r).begin(), projected.visual->tokens.row(r).end());
    tk.emplace_back(projected.textual->tokens.row(r).begin(), projected.textual->tokens.row(r).end());
  }
  auto ref = reference::gated(vq, tk, p, "gated0.v", c);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t j = 0; j < c.width; ++j) {
      EXPECT_NEAR(g.fused.visual->tokens(r, j), ref.fused[r][j], 1e-10);
      EXPECT_NEAR(g.gates.visual->tokens(r, j), ref.gate[r][j], 1e-10);
      EXPECT_GT(g.gates.visual->tokens(r, j), 0.0);
      EXPECT_LT(g.gates.visual->tokens(r, j), 1.0);
    }
  }
}

TEST(GatedCrossFuse, MissingKeySideGivesLayerNormShift) {
  const ModelConfig c = small_config();
  auto p = init_parameters(c, 13).cast<double>();
  for (auto& x : p.at("gated0.v.norm.shift").values()) x = 0.25;
  std::mt19937_64 rng(13);
  auto projected = project(ModalityBundle::make(random_tokens(3, 8, rng), std::nullopt), p, c);
  auto g = gated_cross_fuse(projected, p, c);
  for (double x : g.attended.visual->tokens.values()) EXPECT_EQ(x, 0.25);
}

TEST(SelfAttend, SingleTokenEqualsBlockOnThatToken) {
  const ModelConfig c = small_config();
  auto p = init_parameters(c, 5).cast<double>();
  std::mt19937_64 rng(5);
  ModalityPair<double> in;
  in.visual = CommonTokens<double>{testing::random_tensor(Shape{1, c.width}, rng), {1}};
  auto out = self_attend(in, p, c);
  reference::Mat x{{in.visual->tokens.values().begin(), in.visual->tokens.values().end()}};
  // With one key every head puts all weight on it: the context is the value projection.
  auto values = reference::linear(x, p, "self.v.attn.value");
  auto h = reference::layer_norm(reference::add(x, reference::linear(values, p, "self.v.attn.output")), p,
                                 "self.v.norm1", c.layer_norm_eps);
  auto ff = reference::linear(h, p, "self.v.ff1");
  for (auto& v : ff[0]) v = reference::gelu(v);
  auto expected = reference::layer_norm(reference::add(h, reference::linear(ff, p, "self.v.ff2")), p,
                                        "self.v.norm2", c.layer_norm_eps);
  for (std::size_t j = 0; j < c.width; ++j) EXPECT_NEAR(out.visual->tokens(0, j), expected[0][j], 1e-12);
}

TEST(SelfAttend, ThreeTokensMatchDenseOracleAndPermuteEquivariantly) {
  const ModelConfig c = small_config();
  auto p = init_parameters(c, 6).cast<double>();
  std::mt19937_64 rng(6);
  ModalityPair<double> in;
  in.textual = CommonTokens<double>{testing::random_tensor(Shape{3, c.width}, rng), {1, 1, 1}};
  auto out = self_attend(in, p, c);
  reference::Mat x;
  for (std::size_t r = 0; r < 3; ++r) x.emplace_back(in.textual->tokens.row(r).begin(), in.textual->tokens.row(r).end());
  auto ref = reference::block(x, p, "self.t", c);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t j = 0; j < c.width; ++j) EXPECT_NEAR(out.textual->tokens(r, j), ref[r][j], 1e-10);
  }
  const std::size_t perm[] = {2, 0, 1};
  ModalityPair<double> permuted = in;
  for (std::size_t r = 0; r < 3; ++r) {
    auto src = in.textual->tokens.row(perm[r]);
    std::copy(src.begin(), src.end(), permuted.textual->tokens.row(r).begin());
  }
  auto out_p = self_attend(permuted, p, c);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t j = 0; j < c.width; ++j) {
      EXPECT_NEAR(out_p.textual->tokens(r, j), out.textual->tokens(perm[r], j), 1e-12);
    }
  }
}

class EncodeProperties : public ::testing::TestWithParam<int> {};

TEST_P(EncodeProperties, MatchesReferenceForEveryView) {
  const ModelConfig c = small_config();
  const auto pf = init_parameters(c, 100 + GetParam());
  const auto p = pf.cast<double>();
  std::mt19937_64 rng(GetParam());
  auto bundle = ModalityBundle::make(random_tokens(3, 8, rng), random_tokens(4, 6, rng));
  bundle.visual->mask[2] = 0;
  for (auto& x : bundle.visual->tokens.row(2)) x = 0;
  auto e = encode(bundle, p, c);
  const auto vis = reference::valid_rows(*bundle.visual);
  const auto txt = reference::valid_rows(*bundle.textual);
  EXPECT_LT(max_abs_diff(reference::embed(vis, txt, p, c), e.f), 1e-6);
  ASSERT_TRUE(e.v && e.t);
  EXPECT_LT(max_abs_diff(reference::embed(vis, {}, p, c), *e.v), 1e-6);
  EXPECT_LT(max_abs_diff(reference::embed({}, txt, p, c), *e.t), 1e-6);
  for (const auto* v : {&e.f, &*e.v, &*e.t}) EXPECT_NEAR(norm(*v), 1.0, 1e-6);
}

TEST_P(EncodeProperties, ImageOnlyEqualsExplicitlyZeroedText) {
  const ModelConfig c = small_config();
  const auto p = init_parameters(c, 7);
  std::mt19937_64 rng(50 + GetParam());
  auto image = random_tokens(3, 8, rng);
  auto only = ModalityBundle::make(image, std::nullopt);
  auto zeroed = ModalityBundle::make(image, TokenFeatureMatrix::dense(Tensor<float>(Shape{4, 6})));
  zeroed.indicator_t = 0.0f;
  auto both = ModalityBundle::make(image, random_tokens(4, 6, rng));
  auto a = encode(only, p, c);
  auto b = encode(zeroed, p, c);
  auto full = encode(both, p, c);
  EXPECT_EQ(a.f, b.f);
  EXPECT_EQ(a.v, b.v);
  EXPECT_FALSE(a.t);
  EXPECT_EQ(a.f, *a.v);
  EXPECT_EQ(a.f, *full.v);
}

TEST_P(EncodeProperties, TokenPermutationLeavesEmbeddingsUnchanged) {
  const ModelConfig c = small_config();
  const auto p = init_parameters(c, 8);
  std::mt19937_64 rng(70 + GetParam());
  auto bundle = ModalityBundle::make(random_tokens(4, 8, rng), random_tokens(5, 6, rng));
  auto shuffled = bundle;
  std::vector<std::size_t> order = {3, 1, 0, 2};
  for (std::size_t r = 0; r < 4; ++r) {
    auto src = bundle.visual->tokens.row(order[r]);
    std::copy(src.begin(), src.end(), shuffled.visual->tokens.row(r).begin());
  }
  std::vector<std::size_t> order_t = {4, 2, 3, 0, 1};
  for (std::size_t r = 0; r < 5; ++r) {
    auto src = bundle.textual->tokens.row(order_t[r]);
    std::copy(src.begin(), src.end(), shuffled.textual->tokens.row(r).begin());
  }
  auto a = encode(bundle, p, c);
  auto b = encode(shuffled, p, c);
  auto rel = [](const std::vector<float>& x, const std::vector<float>& y) {
    double d = 0, n = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      d += (x[i] - y[i]) * (x[i] - y[i]);
      n += x[i] * x[i];
    }
    return std::sqrt(d / n);
  };
  EXPECT_LE(rel(a.f, b.f), 1e-5);
  EXPECT_LE(rel(*a.v, *b.v), 1e-5);
  EXPECT_LE(rel(*a.t, *b.t), 1e-5);
}

TEST_P(EncodeProperties, BatchCompositionDoesNotChangeResults) {
  const ModelConfig c = small_config();
  const auto p = init_parameters(c, 9);
  std::mt19937_64 rng(90 + GetParam());
  std::vector<ModalityBundle> bundles;
  for (int i = 0; i < 6; ++i) {
    const int kind = i % 3;
    bundles.push_back(ModalityBundle::make(kind != 2 ? std::optional(random_tokens(1 + i % 3, 8, rng)) : std::nullopt,
                                           kind != 1 ? std::optional(random_tokens(2 + i % 2, 6, rng)) : std::nullopt));
  }
  std::vector<const ModalityBundle*> ptrs;
  for (const auto& b : bundles) ptrs.push_back(&b);
  auto batch = encode_batch<float>(ptrs, p, c);
  for (std::size_t i = 0; i < bundles.size(); ++i) EXPECT_EQ(batch[i], encode(bundles[i], p, c)) << i;
}

INSTANTIATE_TEST_SUITE_P(Seeds, EncodeProperties, ::testing::Range(0, 4));

TEST(Encode, RejectsEmptyBundle) {
  const ModelConfig c = small_config();
  EXPECT_THROW(encode(ModalityBundle{}, init_parameters(c, 1), c), DataError);
}

TEST(Encode, DisabledGatingUsesAttendedFeatures) {
  ModelConfig c = small_config();
  c.disable_gating = true;
  auto p = init_parameters(c, 10).cast<double>();
  std::mt19937_64 rng(10);
  auto bundle = ModalityBundle::make(random_tokens(2, 8, rng), random_tokens(3, 6, rng));
  auto g = gated_cross_fuse(project(bundle, p, c), p, c);
  EXPECT_EQ(g.fused.visual->tokens, g.attended.visual->tokens);
  auto e = encode(bundle, p, c);
  EXPECT_LT(max_abs_diff(reference::embed(reference::valid_rows(*bundle.visual), reference::valid_rows(*bundle.textual),
                                          p, c),
                         e.f),
            1e-6);
}

TEST(Encode, EmbeddingGradientsMatchFiniteDifferences) {
  ModelConfig c = small_config();
  c.gated_layers = 2;
  c.fusion_blocks = 1;
  auto p = init_parameters(c, 11).cast<double>();
  std::mt19937_64 rng(11);
  std::vector<ModalityBundle> bundles{ModalityBundle::make(random_tokens(2, 8, rng), random_tokens(3, 6, rng)),
                                      ModalityBundle::make(random_tokens(2, 8, rng), std::nullopt)};
  std::vector<const ModalityBundle*> ptrs{&bundles[0], &bundles[1]};
  GraphBuilder b;
  auto enc = build_encoder(b, c, ptrs);
  NodeId out = testing::random_functional(b, enc.embeddings, rng);
  Graph g = std::move(b).build();
  TensorMap<double> inputs;
  for (const auto& [k, v] : enc.inputs) inputs.emplace(k, v.cast<double>());
  GradcheckOptions opt;
  opt.seed = 11;
  opt.coords_per_tensor = 16;
  auto report = gradcheck(g, out, p, inputs, opt);
  EXPECT_TRUE(report.passed()) << report.summary();
}

}  // namespace
}  // namespace uniecs
