// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#include "uniecs/trainer/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>

#include <json.hpp>

#include "common/binary_io.hpp"
#include "uniecs/model/encoder.hpp"

namespace uniecs {

void TrainConfig::validate() const {
  optimizer().validate();
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2 for in-batch negatives");
  if (weight_stride == 0) throw ConfigError("weight_stride must be at least 1");
  if (!(weight_beta >= 0.0 && weight_beta <= 1.0)) throw ConfigError("weight_beta must lie in [0, 1]");
  if (!(feature_noise >= 0.0) || !std::isfinite(feature_noise)) throw ConfigError("feature_noise must be non-negative");
  if (disable_cmal && disable_clal && disable_imcl) throw ConfigError("cannot disable every loss group");
}

AdamWConfig TrainConfig::optimizer() const { return {learning_rate, weight_decay, beta1, beta2, eps}; }

std::array<bool, kLossTermCount> TrainConfig::enabled_terms() const {
  return {!disable_cmal, !disable_cmal, !disable_clal, !disable_clal, !disable_imcl, !disable_imcl};
}

Checkpoint initial_checkpoint(const ModelConfig& model, const TrainConfig& train, std::string config_hash,
                              std::string config_text) {
  train.validate();
  Checkpoint c;
  c.model = model;
  c.model.disable_gating = model.disable_gating || train.disable_gating;
  c.model.validate();
  c.params = init_parameters(c.model, train.seed);
  c.optimizer = AdamWState<float>::zeros_like(c.params);
  c.weights.beta = train.weight_beta;
  const auto enabled = train.enabled_terms();
  for (std::size_t i = 0; i < kLossTermCount; ++i) c.weights.lambdas[i] = enabled[i] ? 1.0 : 0.0;
  c.config_hash = std::move(config_hash);
  c.config_text = std::move(config_text);
  return c;
}

// ---------------------------------------------------------------------------
// Checkpoint files

namespace {

void put_store(std::ostream& out, const ParameterStore<float>& store) {
  binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& e : store.entries()) {
    binary::put_string(out, e.name);
    binary::put<std::uint8_t>(out, static_cast<std::uint8_t>(e.value.rank()));
    for (auto d : e.value.shape()) binary::put<std::uint64_t>(out, d);
    binary::put_array<float>(out, e.value.values());
  }
}

ParameterStore<float> get_store(binary::Reader& rd) {
  ParameterStore<float> store;
  const auto count = rd.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = rd.get_string();
    const auto rank = rd.get<std::uint8_t>();
    if (rank < 1 || rank > 2) throw DataError(rd.what() + ": parameter " + name + " has rank " + std::to_string(rank));
    Shape shape;
    std::size_t n = 1;
    for (std::uint8_t r = 0; r < rank; ++r) {
      shape.push_back(rd.get<std::uint64_t>());
      if (shape.back() == 0 || shape.back() > (1u << 28)) throw DataError(rd.what() + ": bad extent for " + name);
      n *= shape.back();
    }
    store.add(std::move(name), Tensor<float>(std::move(shape), rd.get_array<float>(n)));
  }
  return store;
}

void check_aligned(const ParameterStore<float>& a, const ParameterStore<float>& b, const std::string& what) {
  if (a.size() != b.size()) throw DataError(what + ": optimizer moments do not match the parameters");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.entries()[i].name != b.entries()[i].name || a.entries()[i].value.shape() != b.entries()[i].value.shape()) {
      throw DataError(what + ": optimizer moments do not match parameter " + a.entries()[i].name);
    }
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  // Write next to the target and rename so readers never see a partial file.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
    out.write(kCheckpointMagic, 4);
    binary::put<std::uint32_t>(out, kCheckpointVersion);
    binary::put_string(out, c.config_hash);
    binary::put_string(out, c.config_text);
    const ModelConfig& m = c.model;
    for (std::size_t v : {m.dim_v, m.dim_t, m.width, m.heads, m.ff_width, m.embed_dim, m.gated_layers, m.fusion_blocks}) {
      binary::put<std::uint64_t>(out, v);
    }
    binary::put<std::uint8_t>(out, m.disable_gating ? 1 : 0);
    binary::put<double>(out, m.layer_norm_eps);
    binary::put<std::uint64_t>(out, c.step);
    for (double l : c.weights.lambdas) binary::put<double>(out, l);
    binary::put<double>(out, c.weights.beta);
    binary::put<std::uint64_t>(out, c.weights.step);
    binary::put<std::uint64_t>(out, c.optimizer.step);
    put_store(out, c.params);
    put_store(out, c.optimizer.m);
    put_store(out, c.optimizer.v);
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  binary::Reader rd(in, "checkpoint " + path.string());
  rd.expect_magic(kCheckpointMagic);
  const auto version = rd.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw DataError(rd.what() + " has unsupported version " + std::to_string(version));
  Checkpoint c;
  c.config_hash = rd.get_string();
  c.config_text = rd.get_string();
  ModelConfig& m = c.model;
  for (std::size_t* f : {&m.dim_v, &m.dim_t, &m.width, &m.heads, &m.ff_width, &m.embed_dim, &m.gated_layers,
                         &m.fusion_blocks}) {
    *f = rd.get<std::uint64_t>();
  }
  m.disable_gating = rd.get<std::uint8_t>() != 0;
  m.layer_norm_eps = rd.get<double>();
  c.step = rd.get<std::uint64_t>();
  for (double& l : c.weights.lambdas) l = rd.get<double>();
  c.weights.beta = rd.get<double>();
  c.weights.step = rd.get<std::uint64_t>();
  c.optimizer.step = rd.get<std::uint64_t>();
  c.params = get_store(rd);
  c.optimizer.m = get_store(rd);
  c.optimizer.v = get_store(rd);
  rd.expect_end();
  try {
    m.validate();
    c.weights.validate();
  } catch (const ConfigError& e) {
    throw DataError(rd.what() + ": " + e.what());
  }
  check_aligned(c.params, c.optimizer.m, rd.what());
  check_aligned(c.params, c.optimizer.v, rd.what());
  return c;
}

void check_resume(const Checkpoint& checkpoint, const std::string& expected, bool force, std::ostream& warnings) {
  if (checkpoint.config_hash == expected) return;
  const std::string msg = "checkpoint config hash " + checkpoint.config_hash + " differs from the current config hash " +
                          expected;
  if (!force) throw ConfigError(msg + "; refusing to resume (force to override)");
  warnings << "warning: " << msg << "; resuming anyway\n";
}

// ---------------------------------------------------------------------------
// Batching

std::vector<std::vector<std::size_t>> make_batches(std::size_t pairs, std::size_t batch_size, std::uint64_t seed,
                                                   std::uint64_t epoch) {
  if (pairs == 0) throw DataError("cannot batch an empty dataset");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  std::vector<std::size_t> order(pairs);
  std::iota(order.begin(), order.end(), 0);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  std::mt19937_64 rng(seq);
  for (std::size_t i = pairs; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < pairs; start += batch_size) {
    const std::size_t end = std::min(pairs, start + batch_size);
    if (end - start < 2) break;
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

// ---------------------------------------------------------------------------
// Objective

template <typename T>
BatchObjective<T>::BatchObjective(const ModelConfig& model, const LossConfig& losses,
                                  std::span<const ModalityBundle* const> side1,
                                  std::span<const ModalityBundle* const> side2,
                                  const std::array<bool, kLossTermCount>& enabled) {
  if (side1.size() != side2.size()) throw DataError("pair batch sides differ in length");
  std::vector<const ModalityBundle*> all(side1.begin(), side1.end());
  all.insert(all.end(), side2.begin(), side2.end());
  GraphBuilder b;
  EncoderGraph enc = build_encoder(b, model, all);
  const std::span<const ProductRows> rows(enc.products);
  nodes_ = build_losses(b, enc.embeddings, rows.first(side1.size()), rows.subspan(side1.size()), losses, enabled);
  graph_ = std::move(b).build();
  for (auto& [name, value] : enc.inputs) {
    if constexpr (std::is_same_v<T, float>) {
      inputs_.emplace(name, std::move(value));
    } else {
      inputs_.emplace(name, value.template cast<T>());
    }
  }
}

template <typename T>
void BatchObjective<T>::evaluate(const ParameterStore<T>& params) {
  params_ = &params;
  eval_ = forward(graph_, params, inputs_);
}

template <typename T>
LossVector BatchObjective<T>::losses() const {
  LossVector out{};
  for (std::size_t i = 0; i < kLossTermCount; ++i) {
    if (nodes_.terms[i]) out[i] = static_cast<double>(eval_.scalar(*nodes_.terms[i]));
  }
  return out;
}

template <typename T>
std::array<bool, kLossTermCount> BatchObjective<T>::defined() const {
  std::array<bool, kLossTermCount> out{};
  for (std::size_t i = 0; i < kLossTermCount; ++i) out[i] = nodes_.terms[i].has_value();
  return out;
}

template <typename T>
ParameterStore<T> BatchObjective<T>::term_gradient(std::size_t term) const {
  if (!params_) throw Error("evaluate() must run before gradients are requested");
  if (!nodes_.terms.at(term)) return params_->zeros_like();
  return backward(graph_, eval_, *nodes_.terms[term], *params_).params;
}

template <typename T>
ParameterStore<T> BatchObjective<T>::weighted_gradient(const LossVector& lambdas) const {
  if (!params_) throw Error("evaluate() must run before gradients are requested");
  std::vector<Seed<T>> seeds;
  for (std::size_t i = 0; i < kLossTermCount; ++i) {
    if (nodes_.terms[i] && lambdas[i] != 0.0) seeds.push_back({*nodes_.terms[i], static_cast<T>(lambdas[i])});
  }
  if (seeds.empty()) return params_->zeros_like();
  return backward(graph_, eval_, std::span<const Seed<T>>(seeds), *params_).params;
}

template class BatchObjective<float>;
template class BatchObjective<double>;

template <typename T>
double gradient_norm(const ParameterStore<T>& grads) {
  double s = 0.0;
  for (const auto& e : grads.entries()) {
    for (T x : e.value.values()) s += static_cast<double>(x) * static_cast<double>(x);
  }
  return std::sqrt(s);
}

template double gradient_norm(const ParameterStore<float>&);
template double gradient_norm(const ParameterStore<double>&);

// ---------------------------------------------------------------------------
// Training loop

std::string StepLog::json() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  nlohmann::ordered_json l = nlohmann::ordered_json::object(), w = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < kLossTermCount; ++i) {
    const std::string name(loss_term_name(i));
    if (defined[i]) {
      l[name] = losses[i];
    } else {
      l[name] = nullptr;
    }
    w[name] = lambdas[i];
  }
  j["losses"] = std::move(l);
  j["lambdas"] = std::move(w);
  j["total"] = total;
  j["weights_updated"] = weights_updated;
  return j.dump();
}

namespace {

// Optional per-step feature noise; a no-op copy when sigma is 0.
ProductFeatures augment(const ProductFeatures& f, double sigma, std::mt19937_64& rng) {
  if (sigma == 0.0) return f;
  ProductFeatures out = f;
  std::normal_distribution<double> n(0.0, sigma);
  for (auto* p : {&out.image, &out.text}) {
    if (!*p) continue;
    for (float& x : (*p)->values()) x = static_cast<float>(x + n(rng));
  }
  return out;
}

}  // namespace

TrainResult train(const Dataset& dataset, Checkpoint start, const TrainConfig& config, const LossConfig& losses,
                  const TrainOptions& options) {
  config.validate();
  losses.validate();
  start.model.validate();
  start.weights.validate();
  if (dataset.size() < 2) throw DataError("training needs at least 2 pairs");
  if ((dataset.dim_v != 0 && dataset.dim_v != start.model.dim_v) ||
      (dataset.dim_t != 0 && dataset.dim_t != start.model.dim_t)) {
    throw DataError("data feature widths (visual " + std::to_string(dataset.dim_v) + ", textual " +
                    std::to_string(dataset.dim_t) + ") do not match the model (visual " +
                    std::to_string(start.model.dim_v) + ", textual " + std::to_string(start.model.dim_t) + ")");
  }
  if (start.model.disable_gating != config.disable_gating) {
    throw ConfigError("checkpoint gating mode does not match the training config");
  }
  const auto enabled = config.enabled_terms();
  for (std::size_t i = 0; i < kLossTermCount; ++i) {
    if (!enabled[i] && start.weights.lambdas[i] != 0.0) {
      throw ConfigError("ablated loss term " + std::string(loss_term_name(i)) + " has a nonzero weight");
    }
  }
  const AdamWConfig opt = config.optimizer();

  TrainResult result;
  result.checkpoint = std::move(start);
  Checkpoint& ck = result.checkpoint;

  const std::size_t per_epoch = make_batches(dataset.size(), config.batch_size, config.seed, 0).size();
  std::uint64_t epoch = ck.step / per_epoch;
  std::size_t cursor = ck.step % per_epoch;
  auto batches = make_batches(dataset.size(), config.batch_size, config.seed, epoch);

  while (ck.step < config.steps) {
    if (cursor == batches.size()) {
      batches = make_batches(dataset.size(), config.batch_size, config.seed, ++epoch);
      cursor = 0;
    }
    const auto& batch = batches[cursor++];
    const std::uint64_t step = ck.step + 1;
    const auto t0 = std::chrono::steady_clock::now();

    std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(step), 7u};
    std::mt19937_64 noise(seq);
    std::vector<ModalityBundle> side1, side2;
    for (auto i : batch) {
      side1.push_back(augment(dataset.records[i].trigger, config.feature_noise, noise).bundle());
      side2.push_back(augment(dataset.records[i].recall, config.feature_noise, noise).bundle());
    }
    std::vector<const ModalityBundle*> p1, p2;
    for (const auto& b : side1) p1.push_back(&b);
    for (const auto& b : side2) p2.push_back(&b);

    StepLog log;
    log.step = step;
    try {
      BatchObjective<float> objective(ck.model, losses, p1, p2, enabled);
      objective.evaluate(ck.params);
      log.losses = objective.losses();
      log.defined = objective.defined();
      for (std::size_t i = 0; i < kLossTermCount; ++i) {
        if (log.defined[i] && !std::isfinite(log.losses[i])) {
          throw NumericalError(std::string(loss_term_name(i)) + " loss is not finite");
        }
      }
      if (!config.fixed_weights && (step - 1) % config.weight_stride == 0) {
        LossVector norms{};
        for (std::size_t i = 0; i < kLossTermCount; ++i) {
          if (log.defined[i] && ck.weights.lambdas[i] != 0.0) norms[i] = gradient_norm(objective.term_gradient(i));
        }
        ck.weights = update_weights(ck.weights, gradient_shares(norms));
        log.weights_updated = true;
      }
      log.lambdas = ck.weights.lambdas;
      for (std::size_t i = 0; i < kLossTermCount; ++i) {
        if (log.defined[i]) log.total += log.lambdas[i] * log.losses[i];
      }
      optimizer_step(ck.params, objective.weighted_gradient(ck.weights.lambdas), ck.optimizer, opt);
    } catch (const NumericalError& e) {
      throw TrainingDiverged(step, e.what());
    }
    ck.step = step;
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (options.metrics) *options.metrics << log.json() << '\n' << std::flush;
    if (options.timing) {
      nlohmann::ordered_json t;
      t["step"] = step;
      t["seconds"] = log.seconds;
      *options.timing << t.dump() << '\n';
    }
    result.log.push_back(std::move(log));
    if (options.checkpoint_every && options.on_checkpoint && step % options.checkpoint_every == 0 &&
        step != config.steps) {
      options.on_checkpoint(ck);
    }
  }
  return result;
}

}  // namespace uniecs
