// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#include "uniecs/cli/run_config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

namespace uniecs {

namespace {

using Json = nlohmann::json;

struct Binding {
  std::string key;
  bool is_string = false;
  std::function<void(const Json&)> set;
  std::function<Json()> get;
};

template <typename T>
Binding bind_key(std::string key, T& field) {
  Binding b;
  b.key = std::move(key);
  b.is_string = std::is_same_v<T, std::string>;
  b.get = [&field] { return Json(field); };
  b.set = [&field, name = b.key](const Json& v) {
    auto mismatch = [&](const char* want) {
      return ConfigError("config key '" + name + "' expects " + want + ", got " + v.dump());
    };
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw mismatch("true or false");
      field = v.get<bool>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw mismatch("a number");
      field = v.get<double>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw mismatch("a string");
      field = v.get<std::string>();
    } else {
      if (!v.is_number_unsigned()) throw mismatch("a non-negative integer");
      field = v.get<T>();
    }
  };
  return b;
}

std::vector<Binding> bindings(RunConfig& c) {
  std::vector<Binding> b{
      bind_key("data.pairs", c.data.pairs),
      bind_key("data.latent_dim", c.data.latent_dim),
      bind_key("data.tokens_v", c.data.tokens_v),
      bind_key("data.tokens_t", c.data.tokens_t),
      bind_key("data.dim_v", c.data.dim_v),
      bind_key("data.dim_t", c.data.dim_t),
      bind_key("data.pair_noise", c.data.pair_noise),
      bind_key("data.token_noise", c.data.token_noise),
      bind_key("data.missing_rate", c.data.missing_rate),
      bind_key("data.seed", c.data.seed),
      bind_key("data.world_seed", c.data.world_seed),
      bind_key("data.id_prefix", c.data.id_prefix),
      bind_key("model.width", c.model.width),
      bind_key("model.heads", c.model.heads),
      bind_key("model.ff_width", c.model.ff_width),
      bind_key("model.embed_dim", c.model.embed_dim),
      bind_key("model.gated_layers", c.model.gated_layers),
      bind_key("model.fusion_blocks", c.model.fusion_blocks),
      bind_key("model.layer_norm_eps", c.model.layer_norm_eps),
      bind_key("loss.tau", c.loss.tau),
      bind_key("loss.tau_v", c.loss.tau_v),
      bind_key("loss.tau_t", c.loss.tau_t),
      bind_key("loss.alpha1", c.loss.alpha1),
      bind_key("loss.alpha2", c.loss.alpha2),
      bind_key("loss.alpha3", c.loss.alpha3),
      bind_key("loss.alpha4", c.loss.alpha4),
      bind_key("loss.k", c.loss.k),
      bind_key("loss.k_hard", c.loss.k_hard),
      bind_key("loss.symmetric_v2t", c.loss.symmetric_v2t),
      bind_key("loss.use_both_sides_intra", c.loss.use_both_sides_intra),
      bind_key("train.learning_rate", c.train.learning_rate),
      bind_key("train.batch_size", c.train.batch_size),
      bind_key("train.steps", c.train.steps),
      bind_key("train.seed", c.train.seed),
      bind_key("train.weight_decay", c.train.weight_decay),
      bind_key("train.beta1", c.train.beta1),
      bind_key("train.beta2", c.train.beta2),
      bind_key("train.eps", c.train.eps),
      bind_key("train.disable_cmal", c.train.disable_cmal),
      bind_key("train.disable_clal", c.train.disable_clal),
      bind_key("train.disable_imcl", c.train.disable_imcl),
      bind_key("train.disable_gating", c.train.disable_gating),
      bind_key("train.fixed_weights", c.train.fixed_weights),
      bind_key("train.weight_stride", c.train.weight_stride),
      bind_key("train.weight_beta", c.train.weight_beta),
      bind_key("train.feature_noise", c.train.feature_noise),
      bind_key("train.checkpoint_every", c.checkpoint_every),
  };
  std::sort(b.begin(), b.end(), [](const Binding& x, const Binding& y) { return x.key < y.key; });
  return b;
}

Binding& find(std::vector<Binding>& all, std::string_view key) {
  auto it = std::lower_bound(all.begin(), all.end(), key, [](const Binding& b, std::string_view k) { return b.key < k; });
  if (it == all.end() || it->key != key) throw ConfigError("unknown config key '" + std::string(key) + "'");
  return *it;
}

bool excluded_from_hash(std::string_view key) { return key == "train.steps" || key == "train.checkpoint_every"; }

Json to_json(const RunConfig& c, bool for_hash) {
  Json out = Json::object();
  for (const auto& b : bindings(const_cast<RunConfig&>(c))) {
    if (for_hash && excluded_from_hash(b.key)) continue;
    out[b.key] = b.get();
  }
  return out;
}

}  // namespace

RunConfig RunConfig::desk() {
  RunConfig c;
  c.model.width = 64;
  c.model.heads = 4;
  c.model.embed_dim = 32;
  c.train.batch_size = 64;
  return c;
}

RunConfig RunConfig::paper() {
  RunConfig c = desk();
  c.model.embed_dim = 256;
  c.train.batch_size = 1024;
  c.train.steps = 200000;
  return c;
}

RunConfig RunConfig::preset(std::string_view name) {
  if (name == "desk") return desk();
  if (name == "paper") return paper();
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected desk or paper)");
}

std::vector<std::string> RunConfig::keys() {
  RunConfig c;
  std::vector<std::string> out;
  for (const auto& b : bindings(c)) out.push_back(b.key);
  return out;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  auto all = bindings(*this);
  Binding& b = find(all, key);
  Json v;
  if (b.is_string && (value.empty() || value.front() != '"')) {
    v = std::string(value);
  } else {
    v = Json::parse(value, nullptr, false);
    if (v.is_discarded()) {
      throw ConfigError("config key '" + std::string(key) + "' has unparsable value '" + std::string(value) + "'");
    }
  }
  b.set(v);
}

void RunConfig::merge_json(std::string_view text, const std::string& origin) {
  const Json doc = Json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw ConfigError(origin + " is not valid JSON");
  if (!doc.is_object()) throw ConfigError(origin + " must hold a JSON object of dotted keys");
  auto all = bindings(*this);
  for (const auto& [key, value] : doc.items()) {
    try {
      find(all, key).set(value);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ": " + e.what());
    }
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream s;
  s << in.rdbuf();
  merge_json(s.str(), path.string());
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m = model;
  m.dim_v = data.dim_v;
  m.dim_t = data.dim_t;
  m.disable_gating = train.disable_gating;
  return m;
}

void RunConfig::validate() const {
  auto scoped = [](const char* group, auto&& check) {
    try {
      check();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(group) + ": " + e.what());
    }
  };
  scoped("data", [&] { data.validate(); });
  scoped("model", [&] { model_config().validate(); });
  scoped("loss", [&] { loss.validate(); });
  scoped("train", [&] { train.validate(); });
}

std::string RunConfig::json() const { return to_json(*this, false).dump(); }

std::string RunConfig::canonical_text() const { return to_json(*this, true).dump(); }

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical_text())));
  return buf;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace uniecs
