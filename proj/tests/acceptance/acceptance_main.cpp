// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any selected criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "loss_oracle.hpp"
#include "test_util.hpp"
#include "uniecs/data/formats.hpp"
#include "uniecs/data/synthetic.hpp"
#include "uniecs/model/encoder.hpp"
#include "uniecs/retrieval/evaluation.hpp"
#include "uniecs/trainer/gradient_checks.hpp"
#include "uniecs/trainer/trainer.hpp"
#include "uniecs/weighting/weighting.hpp"

namespace uniecs {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// --- 1: gradient fidelity ---------------------------------------------------

Outcome gradient_fidelity() {
  constexpr int kSeeds = 10;
  const auto t0 = Clock::now();
  GradcheckOptions opt;
  opt.eps = 1e-5;
  opt.tol = 1e-4;
  double worst = 0;
  std::string where;
  int failed = 0;
  for (int s = 0; s < kSeeds; ++s) {
    opt.seed = static_cast<std::uint64_t>(s);
    const auto r = end_to_end_gradcheck(GradientCheckSetup{}, opt);
    if (!r.passed()) ++failed;
    if (r.max_rel_err >= worst) {
      worst = r.max_rel_err;
      where = r.worst_parameter;
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = failed == 0 && worst < 1e-4 && secs < 120.0;
  o.detail = fmt("max_rel_err %.2e (%s) over %d seeds, %d failing, %.1f s (limits 1e-4, 120 s)", worst,
                 where.c_str(), kSeeds, failed, secs);
  return o;
}

// --- 2: adaptive-weight dynamics --------------------------------------------

Outcome weight_dynamics() {
  // Closed form under equal shares.
  LossWeightState st;
  LossVector equal;
  equal.fill(1.0 / kLossTermCount);
  double closed_err = 0;
  for (int t = 1; t <= 60; ++t) {
    st = update_weights(st, equal);
    closed_err = std::max(closed_err, std::abs(st.sum() - (1.0 + 5.0 * std::pow(0.5, t))));
  }

  // A real 500-step log with the weights re-estimated every step.
  SyntheticSpec spec;
  spec.pairs = 256;
  spec.dim_v = spec.dim_t = 16;
  spec.missing_rate = 0.2;
  spec.seed = 5;
  const Dataset d = generate(spec);
  ModelConfig m;
  m.dim_v = m.dim_t = 16;
  m.width = 16;
  m.heads = 2;
  m.embed_dim = 16;
  m.fusion_blocks = 1;
  TrainConfig tc;
  tc.steps = 500;
  tc.batch_size = 32;
  tc.weight_stride = 1;
  tc.learning_rate = 1e-3;
  const auto r = train(d, initial_checkpoint(m, tc), tc, LossConfig{});
  double rec_err = 0, min_lambda = 1e300;
  double prev = kLossTermCount;
  std::size_t updated = 0;
  for (const auto& s : r.log) {
    double sum = 0;
    for (double l : s.lambdas) {
      min_lambda = std::min(min_lambda, l);
      sum += l;
    }
    rec_err = std::max(rec_err, std::abs(sum - (0.5 + 0.5 * prev)));
    prev = sum;
    updated += s.weights_updated;
  }
  Outcome o;
  o.pass = closed_err <= 1e-12 && rec_err <= 1e-12 && min_lambda > 0.0 && r.log.size() == 500 && updated == 500;
  o.detail = fmt("closed-form error %.1e; 500-step log: recurrence error %.1e, min lambda %.2e, %zu/500 updates",
                 closed_err, rec_err, min_lambda, updated);
  return o;
}

// --- 3: loss oracles --------------------------------------------------------

Outcome loss_oracles() {
  using namespace oracle;
  std::mt19937_64 rng(2024);
  double worst = 0;
  std::size_t batches = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + trial % 3;
    const std::size_t d = 3 + trial % 6;
    LossConfig c;
    c.k = 1 + trial % 4;
    c.k_hard = 1 + (trial / 4) % 4;
    c.symmetric_v2t = trial % 5 == 0;
    c.use_both_sides_intra = trial % 7 == 0;
    const PairBatch b = random_batch(n, d, rng, trial % 2 == 1);
    const std::pair<double, double> pairs[] = {{v2t_loss(b, c), oracle_v2t(b, c)}, {pml_loss(b, c), oracle_pml(b, c)},
                                               {pdc_loss(b, c), oracle_pdc(b, c)}, {plc_loss(b, c), oracle_plc(b, c)},
                                               {v2v_loss(b, c), oracle_v2v(b, c)}, {t2t_loss(b, c), oracle_t2t(b, c)}};
    for (const auto& [impl, ref] : pairs) worst = std::max(worst, std::abs(impl - ref));
    ++batches;
  }
  // Uniform similarities: each InfoNCE is ln N.
  double uniform = 0;
  LossConfig c;
  for (std::size_t n : {2u, 3u, 4u}) {
    const PairBatch b = constant_batch(n);
    const double ln = std::log(static_cast<double>(n));
    uniform = std::max({uniform, std::abs(v2t_loss(b, c) - ln), std::abs(t2t_loss(b, c) - ln),
                        std::abs(pml_loss(b, c) - 3 * ln), std::abs(v2v_loss(b, c) - (ln + c.alpha4)),
                        std::abs(oracle_v2t(b, c) - ln), std::abs(oracle_t2t(b, c) - ln)});
  }
  // One pair: nothing to contrast against.
  double single = 0;
  const PairBatch one = random_batch(1, 5, rng, false);
  for (double v : {v2t_loss(one, c), pml_loss(one, c), pdc_loss(one, c), plc_loss(one, c), v2v_loss(one, c),
                   t2t_loss(one, c)}) {
    single = std::max(single, std::abs(v));
  }
  Outcome o;
  o.pass = worst < 1e-6 && uniform < 1e-6 && single < 1e-6;
  o.detail = fmt("max |impl - oracle| %.1e over %zu batches x 6 terms; ln N cases %.1e; N=1 cases %.1e (limit 1e-6)",
                 worst, batches, uniform, single);
  return o;
}

// --- 4: retrieval oracle ----------------------------------------------------

Outcome retrieval_oracle() {
  std::mt19937_64 rng(77);
  std::size_t mismatches = 0, monotone_violations = 0, queries = 0;
  const std::size_t ks[] = {1, 5, 10};
  for (int inst = 0; inst < 200; ++inst) {
    std::uniform_int_distribution<std::size_t> size(1, 2000), width(2, 48);
    const std::size_t n = inst < 10 ? std::size_t(1) + inst : size(rng);
    const std::size_t d = width(rng);
    EmbeddingCorpus corpus = testing::random_corpus(n, d, rng, "c");
    if (inst % 4 == 0 && n > 3) {
      // Exact ties resolved by id.
      for (std::size_t r = 1; r < n; r += 3) {
        std::copy(corpus.matrix.row(0).begin(), corpus.matrix.row(0).end(), corpus.matrix.row(r).begin());
      }
    }
    const Index index(corpus);
    const std::size_t k = ks[inst % 3];
    std::vector<std::vector<Hit>> results;
    std::vector<std::string> truth;
    const auto qs = testing::random_corpus(5, d, rng, "q");
    for (std::size_t q = 0; q < qs.size(); ++q) {
      const auto query = qs.matrix.row(q);
      // Full sort of every candidate, scores in double, ties by id.
      std::vector<std::pair<double, std::string>> all;
      for (std::size_t r = 0; r < n; ++r) {
        double s = 0;
        for (std::size_t j = 0; j < d; ++j) s += double(query[j]) * double(corpus.matrix(r, j));
        all.emplace_back(s, corpus.ids[r]);
      }
      std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
      });
      const auto hits = index.topk(query, k);
      const std::size_t expect = std::min(k, n);
      bool same = hits.size() == expect;
      for (std::size_t i = 0; same && i < expect; ++i) same = corpus.ids[hits[i].row] == all[i].second;
      mismatches += !same;
      ++queries;
      results.push_back(index.topk(query, 10));
      truth.push_back(corpus.ids[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
    }
    double last = -1;
    for (std::size_t kk : ks) {
      const double r = recall_at_k(index, results, truth, kk);
      if (r < last) ++monotone_violations;
      last = r;
    }
  }
  // Chance level over untrained random embeddings, pooled over instances.
  constexpr std::size_t kN = 500, kInstances = 8;
  std::size_t hits10 = 0;
  for (std::size_t inst = 0; inst < kInstances; ++inst) {
    const auto cand = testing::random_corpus(kN, 32, rng, "c");
    const auto qs = testing::random_corpus(kN, 32, rng, "q");
    const Index index(cand);
    std::vector<std::vector<Hit>> results;
    for (std::size_t q = 0; q < kN; ++q) results.push_back(index.topk(qs.matrix.row(q), 10));
    hits10 += static_cast<std::size_t>(std::lround(recall_at_k(index, results, cand.ids, 10) * kN));
  }
  const double p = 10.0 / kN, total = static_cast<double>(kN * kInstances);
  const double r10 = hits10 / total, sigma = std::sqrt(p * (1 - p) / total);
  Outcome o;
  o.pass = mismatches == 0 && monotone_violations == 0 && std::abs(r10 - p) <= 2 * sigma;
  o.detail = fmt("%zu/%zu top-k lists differ from full sort over 200 instances; %zu monotonicity violations; "
                 "chance R@10 %.4f vs %.4f +- %.4f (2 sigma)",
                 mismatches, queries, monotone_violations, r10, p, 2 * sigma);
  return o;
}

// --- 5 and 6: synthetic learning and ablations -------------------------------

constexpr std::uint64_t kSteps = 500;
constexpr std::size_t kWeightStride = 10;

enum class Variant { kFull, kNoGating, kNoCmal };
const char* variant_name(Variant v) {
  return v == Variant::kFull ? "full" : v == Variant::kNoGating ? "w/o Gating" : "w/o CMAL";
}

struct Corpora {
  Dataset train, eval;
};

const Corpora& corpora() {
  static const Corpora c = [] {
    SyntheticSpec s;
    s.pairs = 1000;
    s.latent_dim = 16;
    s.pair_noise = 0.1;
    s.seed = 1;
    Corpora out;
    out.train = generate(s);
    s.pairs = 500;
    s.seed = 2;
    s.id_prefix = "e";
    out.eval = generate(s);
    return out;
  }();
  return c;
}

struct Experiment {
  Report report;
  double seconds = 0;
};

const Experiment& experiment(Variant v, std::uint64_t seed) {
  static std::map<std::pair<int, std::uint64_t>, Experiment> cache;
  const auto key = std::make_pair(static_cast<int>(v), seed);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  const auto t0 = Clock::now();
  const Corpora& data = corpora();
  ModelConfig m;
  m.dim_v = m.dim_t = 32;
  m.width = 64;
  m.heads = 4;
  m.embed_dim = 32;
  TrainConfig tc;
  tc.learning_rate = 1e-4;
  tc.batch_size = 64;
  tc.steps = kSteps;
  tc.seed = seed;
  tc.weight_stride = kWeightStride;
  tc.disable_gating = v == Variant::kNoGating;
  tc.disable_cmal = v == Variant::kNoCmal;
  const auto r = train(data.train, initial_checkpoint(m, tc), tc, LossConfig{});
  const auto& ck = r.checkpoint;
  Experiment e;
  e.report = run_task_matrix(embed_side(data.eval, Side::kTrigger, ck.params, ck.model),
                             embed_side(data.eval, Side::kRecall, ck.params, ck.model));
  e.seconds = seconds_since(t0);
  std::cerr << "  [" << variant_name(v) << ", seed " << seed << ": " << fmt("%.0f s", e.seconds) << "]\n";
  return cache.emplace(key, std::move(e)).first->second;
}

double r_at(const Report& r, const char* task, std::size_t k) {
  const auto& t = r.task(task);
  const auto it = std::find(r.ks.begin(), r.ks.end(), k);
  return t.defined ? t.recall[static_cast<std::size_t>(it - r.ks.begin())] : 0.0;
}

Outcome synthetic_learning() {
  const Experiment& e = experiment(Variant::kFull, 0);
  double lowest = 1;
  std::string lowest_task;
  for (const auto& t : e.report.tasks) {
    const double r10 = t.defined ? t.recall[2] : 0.0;
    if (r10 < lowest) {
      lowest = r10;
      lowest_task = t.task.name();
    }
  }
  const double cross = r_at(e.report, "qt2cv", 10), same = r_at(e.report, "qv2cv", 10);
  Outcome o;
  o.pass = lowest >= 0.80 && std::abs(cross - same) <= 0.15 && e.seconds <= 600.0;
  o.detail = fmt("min R@10 %.3f (%s) over 9 tasks (need >= 0.80); R@10 qt2cv %.3f vs qv2cv %.3f (gap <= 0.15); "
                 "%llu steps in %.0f s (limit 600 s)",
                 lowest, lowest_task.c_str(), cross, same, static_cast<unsigned long long>(kSteps), e.seconds);
  return o;
}

Outcome ablation_directions() {
  static constexpr std::uint64_t kSeeds[] = {0, 1, 2};
  auto median = [](Variant v, const char* task, std::size_t k) {
    std::vector<double> xs;
    for (auto s : kSeeds) xs.push_back(r_at(experiment(v, s).report, task, k));
    std::sort(xs.begin(), xs.end());
    return xs[1];
  };
  const double full_vv = median(Variant::kFull, "qv2cv", 1), nog_vv = median(Variant::kNoGating, "qv2cv", 1);
  const double full_tt = median(Variant::kFull, "qt2ct", 1), nog_tt = median(Variant::kNoGating, "qt2ct", 1);
  const double full_tv = median(Variant::kFull, "qt2cv", 10), noc_tv = median(Variant::kNoCmal, "qt2cv", 10);
  // Two-sample binomial band for a difference of two R@1 estimates.
  const double q = static_cast<double>(experiment(Variant::kFull, 0).report.task("qt2ct").queries);
  const double pbar = 0.5 * (full_tt + nog_tt);
  const double band = 2 * std::sqrt(2 * pbar * (1 - pbar) / q);
  const bool gating_hurts_vv = nog_vv < full_vv;
  const bool gating_keeps_tt = std::abs(nog_tt - full_tt) <= band;
  const bool cmal_hurts_tv = noc_tv < full_tv;
  Outcome o;
  o.pass = gating_hurts_vv && gating_keeps_tt && cmal_hurts_tv;
  o.detail = fmt("medians of 3 seeds: w/o Gating qv2cv R@1 %.3f vs full %.3f [%s]; w/o Gating qt2ct R@1 %.3f vs "
                 "full %.3f, noise band %.3f [%s]; w/o CMAL qt2cv R@10 %.3f vs full %.3f [%s]",
                 nog_vv, full_vv, gating_hurts_vv ? "lower" : "NOT lower", nog_tt, full_tt, band,
                 gating_keeps_tt ? "within" : "OUTSIDE", noc_tv, full_tv, cmal_hurts_tv ? "lower" : "NOT lower");
  return o;
}

// --- 7: missing-modality contract -------------------------------------------

Outcome missing_modality() {
  ModelConfig m;
  m.dim_v = 12;
  m.dim_t = 10;
  m.width = 32;
  m.heads = 4;
  m.embed_dim = 16;
  const auto params = init_parameters(m, 3);
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> count(1, 6);
  std::size_t differing = 0;
  std::vector<ModalityBundle> image_only, zeroed;
  for (int i = 0; i < 100; ++i) {
    auto image = testing::random_tokens(count(rng), m.dim_v, rng);
    if (i % 3 == 0 && image.count() > 1) {
      // Trailing padding row.
      image.mask.back() = 0;
      auto last = image.tokens.row(image.count() - 1);
      std::fill(last.begin(), last.end(), 0.0f);
    }
    image_only.push_back(ModalityBundle::make(image, std::nullopt));
    auto z = ModalityBundle::make(image, TokenFeatureMatrix::dense(Tensor<float>(Shape{count(rng), m.dim_t})));
    z.indicator_t = 0.0f;
    zeroed.push_back(std::move(z));
    differing += !(encode(image_only.back(), params, m) == encode(zeroed.back(), params, m));
  }
  // The batched path must agree too.
  std::vector<const ModalityBundle*> a, b;
  for (std::size_t i = 0; i < image_only.size(); ++i) {
    a.push_back(&image_only[i]);
    b.push_back(&zeroed[i]);
  }
  const bool batch_same = encode_batch(a, params, m) == encode_batch(b, params, m);
  Outcome o;
  o.pass = differing == 0 && batch_same;
  o.detail = fmt("%zu/100 bundles differ bitwise (single); batched path %s", differing,
                 batch_same ? "identical" : "DIFFERS");
  return o;
}

// --- 8: determinism and persistence -----------------------------------------

Outcome determinism() {
  SyntheticSpec spec;
  spec.pairs = 96;
  spec.dim_v = 12;
  spec.dim_t = 10;
  spec.missing_rate = 0.25;
  spec.seed = 8;
  const Dataset d = generate(spec);
  ModelConfig m;
  m.dim_v = 12;
  m.dim_t = 10;
  m.width = 32;
  m.heads = 4;
  m.embed_dim = 16;
  TrainConfig tc;
  tc.steps = 40;
  tc.batch_size = 16;
  tc.learning_rate = 1e-3;
  tc.weight_stride = 3;
  tc.feature_noise = 0.02;
  std::ostringstream log1, log2;
  TrainOptions o1, o2;
  o1.metrics = &log1;
  o2.metrics = &log2;
  const auto r1 = train(d, initial_checkpoint(m, tc), tc, LossConfig{}, o1);
  const auto r2 = train(d, initial_checkpoint(m, tc), tc, LossConfig{}, o2);
  const bool logs_same = log1.str() == log2.str() && !log1.str().empty();

  const fs::path dir = fs::temp_directory_path() / "uniecs_acceptance";
  fs::create_directories(dir);
  save_checkpoint(r1.checkpoint, dir / "ck.uck");
  const Checkpoint back = load_checkpoint(dir / "ck.uck");
  const auto e1 = embed_side(d, Side::kTrigger, r1.checkpoint.params, r1.checkpoint.model);
  const auto e2 = embed_side(d, Side::kTrigger, back.params, back.model);
  const bool ckpt_same = back == r1.checkpoint && e1.fused == e2.fused && e1.visual == e2.visual &&
                         e1.textual == e2.textual;

  // Formats, including extreme float values.
  Dataset x = d;
  auto feats = x.records.front().trigger.image->values();
  const float specials[] = {std::numeric_limits<float>::min(), std::numeric_limits<float>::denorm_min(),
                            std::numeric_limits<float>::max(), -0.0f, 1.0f / 3.0f, -1e-30f};
  for (std::size_t i = 0; i < std::size(specials) && i < feats.size(); ++i) feats[i] = specials[i];
  write_jsonl(x, dir / "d.jsonl");
  write_packed(x, dir / "d.bin");
  const Dataset from_jsonl = read_jsonl(dir / "d.jsonl"), from_packed = read_packed(dir / "d.bin");
  auto bitwise = [](const Dataset& a, const Dataset& b) {
    if (!(a == b)) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (const auto* pa : {&a.records[i].trigger, &a.records[i].recall}) {
        const auto* pb = pa == &a.records[i].trigger ? &b.records[i].trigger : &b.records[i].recall;
        for (const auto& [ta, tb] : {std::pair{&pa->image, &pb->image}, std::pair{&pa->text, &pb->text}}) {
          if (!ta->has_value()) continue;
          const auto& va = (*ta)->values();
          const auto& vb = (*tb)->values();
          if (std::memcmp(va.data(), vb.data(), va.size() * sizeof(float)) != 0) return false;
        }
      }
    }
    return true;
  };
  const bool formats_same = bitwise(from_jsonl, x) && bitwise(from_packed, x);
  fs::remove_all(dir);
  Outcome o;
  o.pass = logs_same && ckpt_same && formats_same;
  o.detail = fmt("metrics logs %s (%zu bytes); checkpoint round trip %s; JSONL and packed round trips %s",
                 logs_same ? "byte-identical" : "DIFFER", log1.str().size(),
                 ckpt_same ? "reproduces embeddings bitwise" : "DIFFERS", formats_same ? "lossless" : "LOSSY");
  return o;
}

}  // namespace
}  // namespace uniecs

int main(int argc, char** argv) {
  using namespace uniecs;
  CLI::App app{"Acceptance criteria, one PASS/FAIL line each"};
  std::vector<int> only;
  app.add_option("--only", only, "Run just these criteria (1-8)")->delimiter(',')->check(CLI::Range(1, 8));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient fidelity", gradient_fidelity},   {"adaptive-weight dynamics", weight_dynamics},
      {"loss oracles", loss_oracles},             {"retrieval oracle", retrieval_oracle},
      {"synthetic end-to-end learning", synthetic_learning},
      {"ablation directions", ablation_directions},
      {"missing-modality contract", missing_modality},
      {"determinism and persistence", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << " " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
