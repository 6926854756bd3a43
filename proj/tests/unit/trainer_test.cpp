// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "test_util.hpp"
#include "uniecs/data/synthetic.hpp"
#include "uniecs/model/encoder.hpp"
#include "uniecs/trainer/trainer.hpp"

namespace uniecs {
namespace {

ModelConfig tiny_model() {
  ModelConfig m;
  m.dim_v = 6;
  m.dim_t = 5;
  m.width = 16;
  m.heads = 2;
  m.ff_width = 32;
  m.embed_dim = 8;
  m.fusion_blocks = 1;
  return m;
}

Dataset tiny_data(std::size_t pairs, std::uint64_t seed = 1, double missing = 0.2) {
  SyntheticSpec s;
  s.pairs = pairs;
  s.latent_dim = 4;
  s.tokens_v = 2;
  s.tokens_t = 3;
  s.dim_v = 6;
  s.dim_t = 5;
  s.missing_rate = missing;
  s.seed = seed;
  return generate(s);
}

TrainConfig tiny_train(std::uint64_t steps) {
  TrainConfig t;
  t.steps = steps;
  t.batch_size = 8;
  t.learning_rate = 1e-3;
  return t;
}

std::filesystem::path temp_file(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

// --- batching ---------------------------------------------------------------

TEST(MakeBatches, SizesAndDroppedTail) {
  auto sizes = [](const auto& batches) {
    std::vector<std::size_t> s;
    for (const auto& b : batches) s.push_back(b.size());
    return s;
  };
  EXPECT_EQ(sizes(make_batches(10, 4, 0, 0)), (std::vector<std::size_t>{4, 4, 2}));
  EXPECT_EQ(sizes(make_batches(9, 4, 0, 0)), (std::vector<std::size_t>{4, 4}));
  EXPECT_EQ(sizes(make_batches(3, 64, 0, 0)), (std::vector<std::size_t>{3}));
  EXPECT_THROW(make_batches(0, 4, 0, 0), DataError);
  EXPECT_THROW(make_batches(10, 1, 0, 0), ConfigError);
}

TEST(MakeBatches, DeterministicPermutationPerSeedAndEpoch) {
  EXPECT_EQ(make_batches(100, 10, 5, 2), make_batches(100, 10, 5, 2));
  EXPECT_NE(make_batches(100, 10, 0, 0), make_batches(100, 10, 1, 0));
  EXPECT_NE(make_batches(100, 10, 0, 0), make_batches(100, 10, 0, 1));
  std::multiset<std::size_t> seen;
  for (const auto& b : make_batches(100, 10, 3, 0)) seen.insert(b.begin(), b.end());
  ASSERT_EQ(seen.size(), 100u);
  std::size_t expect = 0;
  for (auto i : seen) EXPECT_EQ(i, expect++);
}

// --- optimizer --------------------------------------------------------------

ParameterStore<double> scalar_store(double v) {
  ParameterStore<double> p;
  p.add("w", Tensor<double>::scalar(v));
  return p;
}

TEST(AdamW, ZeroGradientWithoutDecayLeavesParameters) {
  std::mt19937_64 rng(1);
  ParameterStore<double> p;
  p.add("a", testing::random_tensor(Shape{3, 4}, rng));
  p.add("b", testing::random_tensor(Shape{4}, rng));
  const auto before = p;
  auto state = AdamWState<double>::zeros_like(p);
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  for (int i = 0; i < 5; ++i) optimizer_step(p, p.zeros_like(), state, cfg);
  EXPECT_EQ(p, before);
  EXPECT_EQ(state.step, 5u);
}

TEST(AdamW, FirstStepMovesByLearningRate) {
  auto p = scalar_store(1.0);
  auto state = AdamWState<double>::zeros_like(p);
  AdamWConfig cfg{0.1, 0.0, 0.9, 0.999, 1e-8};
  optimizer_step(p, scalar_store(1.0), state, cfg);
  EXPECT_NEAR(p.at("w")[0], 0.9, 1e-8);
  EXPECT_NEAR(p.at("w")[0], 1.0 - 0.1 / (1.0 + 1e-8), 1e-15);
}

TEST(AdamW, DecayIsDecoupledFromTheMoments) {
  auto p = scalar_store(2.0);
  auto state = AdamWState<double>::zeros_like(p);
  AdamWConfig cfg{0.1, 0.5, 0.9, 0.999, 1e-8};
  optimizer_step(p, scalar_store(0.0), state, cfg);
  EXPECT_DOUBLE_EQ(p.at("w")[0], 2.0 - 0.1 * 0.5 * 2.0);
  EXPECT_EQ(state.m.at("w")[0], 0.0);
}

TEST(AdamW, MatchesHandWrittenRecurrence) {
  const std::vector<double> grads{0.3, -1.2, 0.05, 2.0, -0.7};
  AdamWConfig cfg{0.01, 0.02, 0.8, 0.95, 1e-6};
  auto p = scalar_store(0.4);
  auto state = AdamWState<double>::zeros_like(p);
  double w = 0.4, m = 0, v = 0;
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    const double g = grads[t - 1];
    w -= cfg.learning_rate * cfg.weight_decay * w;
    m = cfg.beta1 * m + (1 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
    const double mh = m / (1 - std::pow(cfg.beta1, t)), vh = v / (1 - std::pow(cfg.beta2, t));
    w -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.eps);
    optimizer_step(p, scalar_store(g), state, cfg);
    EXPECT_NEAR(p.at("w")[0], w, 1e-15) << t;
  }
}

TEST(AdamW, NonFiniteGradientNamesParameterAndChangesNothing) {
  ParameterStore<float> p;
  p.add("layer.weight", Tensor<float>(Shape{2}, {1.0f, 2.0f}));
  p.add("layer.bias", Tensor<float>(Shape{1}, {3.0f}));
  auto g = p.zeros_like();
  g.at("layer.bias")[0] = NAN;
  auto state = AdamWState<float>::zeros_like(p);
  const auto before = p;
  try {
    optimizer_step(p, g, state, AdamWConfig{});
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("layer.bias"), std::string::npos);
  }
  EXPECT_EQ(p, before);
  EXPECT_EQ(state.step, 0u);
}

TEST(AdamW, RepeatedRunsAreBitwiseIdentical) {
  auto run = [] {
    std::mt19937_64 rng(9);
    ParameterStore<float> p;
    p.add("a", testing::random_tensor_f(Shape{5, 3}, rng));
    auto state = AdamWState<float>::zeros_like(p);
    for (int i = 0; i < 100; ++i) {
      ParameterStore<float> g;
      g.add("a", testing::random_tensor_f(Shape{5, 3}, rng));
      optimizer_step(p, g, state, AdamWConfig{});
    }
    return std::make_pair(p, state);
  };
  EXPECT_EQ(run(), run());
}

// --- objective --------------------------------------------------------------

TEST(BatchObjective, WeightedGradientIsTheWeightedSumOfTermGradients) {
  const Dataset d = tiny_data(6, 4, 0.3);
  const ModelConfig m = tiny_model();
  const auto params = init_parameters(m, 2).cast<double>();
  std::vector<ModalityBundle> a, b;
  for (const auto& r : d.records) {
    a.push_back(r.trigger.bundle());
    b.push_back(r.recall.bundle());
  }
  std::vector<const ModalityBundle*> pa, pb;
  for (auto& x : a) pa.push_back(&x);
  for (auto& x : b) pb.push_back(&x);
  BatchObjective<double> obj(m, LossConfig{}, pa, pb, {true, true, true, true, true, true});
  obj.evaluate(params);
  const LossVector lambdas{0.7, 1.3, 0.2, 2.5, 0.9, 0.4};
  const auto total = obj.weighted_gradient(lambdas);
  auto sum = params.zeros_like();
  for (std::size_t i = 0; i < kLossTermCount; ++i) {
    const auto g = obj.term_gradient(i);
    for (std::size_t e = 0; e < g.size(); ++e) {
      auto& dst = sum.entries()[e].value;
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += lambdas[i] * g.entries()[e].value[j];
    }
  }
  double worst = 0;
  for (std::size_t e = 0; e < sum.size(); ++e) {
    for (std::size_t j = 0; j < sum.entries()[e].value.size(); ++j) {
      worst = std::max(worst, std::abs(sum.entries()[e].value[j] - total.entries()[e].value[j]));
    }
  }
  EXPECT_LT(worst, 1e-10);
  EXPECT_GT(gradient_norm(total), 0.0);
}

// --- training ---------------------------------------------------------------

TEST(Train, ConfigValidation) {
  TrainConfig t;
  EXPECT_NO_THROW(t.validate());
  t.batch_size = 1;
  EXPECT_THROW(t.validate(), ConfigError);
  t = {};
  t.learning_rate = 0;
  EXPECT_THROW(t.validate(), ConfigError);
  t = {};
  t.disable_cmal = t.disable_clal = t.disable_imcl = true;
  EXPECT_THROW(t.validate(), ConfigError);
  t = {};
  t.weight_stride = 0;
  EXPECT_THROW(t.validate(), ConfigError);
}

TEST(Train, OverfitsASingleBatch) {
  const Dataset d = tiny_data(8, 2, 0.0);
  TrainConfig t = tiny_train(200);
  const auto r = train(d, initial_checkpoint(tiny_model(), t), t, LossConfig{});
  ASSERT_EQ(r.log.size(), 200u);
  auto raw = [](const StepLog& s) {
    double x = 0;
    for (std::size_t i = 0; i < kLossTermCount; ++i) x += s.defined[i] ? s.losses[i] : 0.0;
    return x;
  };
  EXPECT_LT(raw(r.log.back()), 0.5 * raw(r.log.front()));
  EXPECT_LT(r.log.back().total, 0.5 * r.log.front().total);
  EXPECT_EQ(r.checkpoint.step, 200u);
}

TEST(Train, LogSatisfiesTheWeightRecurrence) {
  const Dataset d = tiny_data(20);
  TrainConfig t = tiny_train(30);
  const auto r = train(d, initial_checkpoint(tiny_model(), t), t, LossConfig{});
  double prev = 6.0;
  for (const auto& s : r.log) {
    EXPECT_TRUE(s.weights_updated);
    double sum = 0;
    for (double l : s.lambdas) {
      EXPECT_GT(l, 0.0);
      sum += l;
    }
    EXPECT_NEAR(sum, 0.5 + 0.5 * prev, 1e-12) << s.step;
    prev = sum;
  }
}

TEST(Train, FixedWeightsStayAtOne) {
  TrainConfig t = tiny_train(10);
  t.fixed_weights = true;
  const auto r = train(tiny_data(16), initial_checkpoint(tiny_model(), t), t, LossConfig{});
  for (const auto& s : r.log) {
    EXPECT_FALSE(s.weights_updated);
    for (double l : s.lambdas) EXPECT_EQ(l, 1.0);
  }
}

TEST(Train, AblationsZeroTheirGroupEveryStep) {
  TrainConfig t = tiny_train(8);
  t.disable_cmal = true;
  auto r = train(tiny_data(16), initial_checkpoint(tiny_model(), t), t, LossConfig{});
  for (const auto& s : r.log) {
    EXPECT_EQ(s.lambdas[0], 0.0);
    EXPECT_EQ(s.lambdas[1], 0.0);
    EXPECT_GT(s.lambdas[2], 0.0);
    EXPECT_FALSE(s.defined[0]);
    EXPECT_FALSE(s.defined[1]);
  }
  t = tiny_train(3);
  t.disable_gating = true;
  r = train(tiny_data(16), initial_checkpoint(tiny_model(), t), t, LossConfig{});
  EXPECT_TRUE(r.checkpoint.model.disable_gating);
  // A gated checkpoint cannot continue under an ungated config.
  TrainConfig gated = tiny_train(6);
  EXPECT_THROW(train(tiny_data(16), r.checkpoint, gated, LossConfig{}), ConfigError);
}

TEST(Train, StrideControlsWeightUpdates) {
  TrainConfig t = tiny_train(9);
  t.weight_stride = 4;
  const auto r = train(tiny_data(16), initial_checkpoint(tiny_model(), t), t, LossConfig{});
  for (const auto& s : r.log) EXPECT_EQ(s.weights_updated, (s.step - 1) % 4 == 0) << s.step;
  EXPECT_EQ(r.checkpoint.weights.step, 3u);
}

TEST(Train, RunsAreDeterministicAndResumeExactly) {
  const Dataset d = tiny_data(20);
  TrainConfig t = tiny_train(12);
  t.feature_noise = 0.05;
  std::ostringstream m1, m2;
  TrainOptions o1, o2;
  o1.metrics = &m1;
  o2.metrics = &m2;
  const auto a = train(d, initial_checkpoint(tiny_model(), t), t, LossConfig{}, o1);
  const auto b = train(d, initial_checkpoint(tiny_model(), t), t, LossConfig{}, o2);
  EXPECT_EQ(m1.str(), m2.str());
  EXPECT_EQ(a.checkpoint, b.checkpoint);

  // Stop after 7 steps (crossing an epoch boundary), persist, continue.
  TrainConfig first = t;
  first.steps = 7;
  const auto half = train(d, initial_checkpoint(tiny_model(), t), first, LossConfig{});
  const auto path = temp_file("uniecs_resume_test.ckpt");
  save_checkpoint(half.checkpoint, path);
  const auto rest = train(d, load_checkpoint(path), t, LossConfig{});
  std::filesystem::remove(path);
  EXPECT_EQ(rest.checkpoint, a.checkpoint);
  ASSERT_EQ(rest.log.size(), 5u);
  EXPECT_EQ(rest.log.back().json(), a.log.back().json());
}

TEST(Train, PeriodicCheckpointsAreOffered) {
  TrainConfig t = tiny_train(10);
  TrainOptions o;
  std::vector<std::uint64_t> steps;
  o.checkpoint_every = 4;
  o.on_checkpoint = [&](const Checkpoint& c) { steps.push_back(c.step); };
  train(tiny_data(16), initial_checkpoint(tiny_model(), t), t, LossConfig{}, o);
  EXPECT_EQ(steps, (std::vector<std::uint64_t>{4, 8}));
}

TEST(Train, DivergenceReportsTheStep) {
  TrainConfig t = tiny_train(5);
  Checkpoint c = initial_checkpoint(tiny_model(), t);
  c.params.at("proj.v.weight")[0] = NAN;
  try {
    train(tiny_data(16), c, t, LossConfig{});
    FAIL();
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.step(), 1u);
    EXPECT_EQ(e.last_finite_step(), 0u);
  }
}

TEST(Train, RejectsMismatchedData) {
  TrainConfig t = tiny_train(2);
  ModelConfig m = tiny_model();
  m.dim_v = 7;
  EXPECT_THROW(train(tiny_data(16), initial_checkpoint(m, t), t, LossConfig{}), DataError);
  EXPECT_THROW(train(tiny_data(1), initial_checkpoint(tiny_model(), t), t, LossConfig{}), DataError);
}

// --- checkpoints ------------------------------------------------------------

TEST(Checkpoint, RoundTripReproducesEmbeddingsBitwise) {
  TrainConfig t = tiny_train(4);
  t.steps = 4;
  const auto r = train(tiny_data(16), initial_checkpoint(tiny_model(), t, "abc123", "{\"x\":1}"), t, LossConfig{});
  const auto path = temp_file("uniecs_ckpt_test.ckpt");
  save_checkpoint(r.checkpoint, path);
  const Checkpoint back = load_checkpoint(path);
  EXPECT_EQ(back, r.checkpoint);
  const auto bundle = tiny_data(1, 9, 0.0).records[0].trigger.bundle();
  EXPECT_EQ(encode(bundle, back.params, back.model), encode(bundle, r.checkpoint.params, r.checkpoint.model));

  const auto size = std::filesystem::file_size(path);
  for (auto cut : {std::uintmax_t{2}, std::uintmax_t{40}, size / 2, size - 1}) {
    std::filesystem::resize_file(path, cut);
    EXPECT_THROW(load_checkpoint(path), DataError) << cut;
    save_checkpoint(r.checkpoint, path);
  }
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
  }
  EXPECT_THROW(load_checkpoint(path), DataError);
  save_checkpoint(r.checkpoint, path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    const char v = 9;
    f.write(&v, 1);
  }
  EXPECT_THROW(load_checkpoint(path), DataError);
  std::filesystem::remove(path);
}

TEST(Checkpoint, ResumeRefusesAForeignConfigUnlessForced) {
  const Checkpoint c = initial_checkpoint(tiny_model(), tiny_train(1), "aaaa");
  std::ostringstream warn;
  EXPECT_NO_THROW(check_resume(c, "aaaa", false, warn));
  EXPECT_TRUE(warn.str().empty());
  EXPECT_THROW(check_resume(c, "bbbb", false, warn), ConfigError);
  EXPECT_NO_THROW(check_resume(c, "bbbb", true, warn));
  EXPECT_NE(warn.str().find("warning"), std::string::npos);
}

}  // namespace
}  // namespace uniecs
