// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli_app.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "uniecs/cli/run_config.hpp"
#include "uniecs/data/formats.hpp"
#include "uniecs/data/synthetic.hpp"
#include "uniecs/retrieval/evaluation.hpp"
#include "uniecs/trainer/gradient_checks.hpp"
#include "uniecs/trainer/trainer.hpp"

namespace uniecs::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

/// Options every command shares for assembling a RunConfig.
struct ConfigFlags {
  std::string config;
  std::string preset = "desk";
  std::vector<std::string> sets;

  void attach(CLI::App& app) {
    app.add_option("--config", config, "JSON file of dotted config keys (default: $" + std::string(kConfigEnv) + ")");
    app.add_option("--preset", preset, "Base values before the config file")->check(CLI::IsMember({"desk", "paper"}));
    app.add_option("--set", sets, "Override one key, KEY=VALUE (repeatable)")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  }

  /// Preset, then config file, then --set; command flags are applied after.
  RunConfig resolve() const {
    RunConfig rc = RunConfig::preset(preset);
    std::string path = config;
    if (path.empty()) {
      if (const char* env = std::getenv(kConfigEnv); env && *env) path = env;
    }
    if (!path.empty()) rc.merge_file(path);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + s + "'");
      rc.set(s.substr(0, eq), s.substr(eq + 1));
    }
    return rc;
  }

  bool given() const { return !config.empty() || !sets.empty() || preset != "desk" || std::getenv(kConfigEnv); }
};

template <typename T>
void apply(std::optional<T> flag, T& field) {
  if (flag) field = *flag;
}

void print_config_hash(std::ostream& out, const std::string& hash) { out << "config " << hash << "\n"; }

fs::path ensure_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
  return p;
}

std::ofstream open_out(const fs::path& path, bool append = false) {
  std::ofstream f(path, append ? std::ios::app : std::ios::trunc);
  if (!f) throw DataError("cannot open " + path.string() + " for writing");
  return f;
}

// --- gen-data ---------------------------------------------------------------

struct GenDataCommand {
  ConfigFlags flags;
  std::string spec_file, out, format = "jsonl";
  std::optional<std::size_t> pairs, latent_dim, dim_v, dim_t, tokens_v, tokens_t;
  std::optional<std::uint64_t> seed, world_seed;
  std::optional<double> missing_rate, pair_noise, token_noise;
  std::optional<std::string> id_prefix;

  void attach(CLI::App& app) {
    flags.attach(app);
    app.add_option("--spec", spec_file, "Alias of --config");
    app.add_option("--out", out, "Output dataset path")->required();
    app.add_option("--format", format, "jsonl or packed")->check(CLI::IsMember({"jsonl", "packed"}));
    app.add_option("--pairs", pairs);
    app.add_option("--seed", seed);
    app.add_option("--world-seed", world_seed, "Seed of the shared feature maps");
    app.add_option("--latent-dim", latent_dim);
    app.add_option("--dim-v", dim_v);
    app.add_option("--dim-t", dim_t);
    app.add_option("--tokens-v", tokens_v);
    app.add_option("--tokens-t", tokens_t);
    app.add_option("--missing-rate", missing_rate);
    app.add_option("--pair-noise", pair_noise);
    app.add_option("--token-noise", token_noise);
    app.add_option("--id-prefix", id_prefix);
  }

  int run(std::ostream& os) {
    if (!spec_file.empty()) {
      if (!flags.config.empty()) throw ConfigError("give either --spec or --config, not both");
      flags.config = spec_file;
    }
    RunConfig rc = flags.resolve();
    SyntheticSpec& s = rc.data;
    apply(pairs, s.pairs);
    apply(seed, s.seed);
    apply(world_seed, s.world_seed);
    apply(latent_dim, s.latent_dim);
    apply(dim_v, s.dim_v);
    apply(dim_t, s.dim_t);
    apply(tokens_v, s.tokens_v);
    apply(tokens_t, s.tokens_t);
    apply(missing_rate, s.missing_rate);
    apply(pair_noise, s.pair_noise);
    apply(token_noise, s.token_noise);
    apply(id_prefix, s.id_prefix);
    rc.validate();
    const Dataset d = generate(s);
    if (format == "packed") {
      write_packed(d, fs::path(out));
    } else {
      write_jsonl(d, fs::path(out));
    }
    std::size_t missing[4] = {};
    for (const auto& r : d.records) {
      missing[0] += !r.trigger.image;
      missing[1] += !r.trigger.text;
      missing[2] += !r.recall.image;
      missing[3] += !r.recall.text;
    }
    os << "wrote " << d.size() << " pairs to " << out << " (" << format << ")\n"
       << "dims visual " << d.dim_v << ", textual " << d.dim_t << "\n"
       << "missing trigger image " << missing[0] << ", trigger text " << missing[1] << ", recall image "
       << missing[2] << ", recall text " << missing[3] << "\n";
    print_config_hash(os, rc.hash());
    return kSuccess;
  }
};

// --- train ------------------------------------------------------------------

struct TrainCommand {
  ConfigFlags flags;
  std::string data, out, resume;
  bool force = false;
  std::vector<std::string> ablate;
  std::optional<std::uint64_t> steps, seed, checkpoint_every;

  void attach(CLI::App& app) {
    flags.attach(app);
    app.add_option("--data", data, "Training dataset (JSONL or packed)")->required();
    app.add_option("--out", out, "Output directory")->required();
    app.add_option("--resume", resume, "Continue from this checkpoint");
    app.add_flag("--force", force, "Resume even if the config hash differs");
    app.add_option("--ablate", ablate, "cmal, clal, imcl, gating or weights (repeatable)")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
        ->check(CLI::IsMember({"cmal", "clal", "imcl", "gating", "weights"}));
    app.add_option("--steps", steps, "Total steps");
    app.add_option("--seed", seed, "Training seed");
    app.add_option("--checkpoint-every", checkpoint_every, "Steps between intermediate checkpoints");
  }

  int run(std::ostream& os, std::ostream& es) {
    RunConfig rc = flags.resolve();
    apply(steps, rc.train.steps);
    apply(seed, rc.train.seed);
    apply(checkpoint_every, rc.checkpoint_every);
    for (const auto& a : ablate) {
      if (a == "cmal") rc.train.disable_cmal = true;
      if (a == "clal") rc.train.disable_clal = true;
      if (a == "imcl") rc.train.disable_imcl = true;
      if (a == "gating") rc.train.disable_gating = true;
      if (a == "weights") rc.train.fixed_weights = true;
    }
    rc.validate();
    const std::string hash = rc.hash();
    print_config_hash(os, hash);

    const Dataset dataset = read_dataset(data);
    if (dataset.dim_v != rc.data.dim_v || dataset.dim_t != rc.data.dim_t) {
      throw DataError("dataset has dims visual " + std::to_string(dataset.dim_v) + ", textual " +
                      std::to_string(dataset.dim_t) + " but the config expects visual " +
                      std::to_string(rc.data.dim_v) + ", textual " + std::to_string(rc.data.dim_t));
    }
    Checkpoint start;
    if (resume.empty()) {
      start = initial_checkpoint(rc.model_config(), rc.train, hash, rc.json());
    } else {
      start = load_checkpoint(resume);
      check_resume(start, hash, force, es);
      if (!(start.model == rc.model_config())) throw ConfigError("checkpoint model shape differs from the config");
      start.config_hash = hash;
      start.config_text = rc.json();
    }

    const fs::path dir = ensure_dir(out);
    const bool append = !resume.empty();
    std::ofstream metrics = open_out(dir / "metrics.jsonl", append);
    std::ofstream timing = open_out(dir / "timing.jsonl", append);
    std::vector<std::string> ablations;
    if (rc.train.disable_cmal) ablations.push_back("cmal");
    if (rc.train.disable_clal) ablations.push_back("clal");
    if (rc.train.disable_imcl) ablations.push_back("imcl");
    if (rc.train.fixed_weights) ablations.push_back("weights");
    if (rc.train.disable_gating) ablations.push_back("gating");
    Json header;
    header["header"] = true;
    header["config_hash"] = hash;
    header["gating"] = rc.train.disable_gating ? "bypass" : "gated";
    header["ablations"] = ablations;
    header["start_step"] = start.step;
    header["steps"] = rc.train.steps;
    header["config"] = Json::parse(rc.json());
    metrics << header.dump() << "\n";

    TrainOptions opts;
    opts.metrics = &metrics;
    opts.timing = &timing;
    opts.checkpoint_every = rc.checkpoint_every;
    opts.on_checkpoint = [&](const Checkpoint& c) {
      std::ostringstream name;
      name << "checkpoint-" << std::setw(7) << std::setfill('0') << c.step << ".uck";
      save_checkpoint(c, dir / name.str());
      metrics.flush();
    };
    os << "training " << dataset.size() << " pairs from step " << start.step << " to " << rc.train.steps
       << (rc.train.disable_gating ? " (gate bypassed)" : "") << "\n";
    try {
      const TrainResult r = train(dataset, std::move(start), rc.train, rc.loss, opts);
      save_checkpoint(r.checkpoint, dir / "checkpoint.uck");
      if (!r.log.empty()) os << "final step " << r.checkpoint.step << " total loss " << r.log.back().total << "\n";
      os << "checkpoint " << (dir / "checkpoint.uck").string() << "\n";
    } catch (const TrainingDiverged& e) {
      metrics.flush();
      es << "error: " << e.what() << "\n"
         << "last finite step " << e.last_finite_step() << "\n";
      return kNumericalFailure;
    }
    return kSuccess;
  }
};

// --- embed ------------------------------------------------------------------

std::string embedding_file_name(Side side, View view) {
  return std::string(side_name(side)) + "." + std::string(view_tag(view)) + ".emb";
}

constexpr View kFileViews[] = {View::kVisual, View::kTextual, View::kMultimodal};

/// Checks a checkpoint against an explicitly given config.
void check_against_flags(const Checkpoint& ckpt, const ConfigFlags& flags, bool force, std::ostream& es) {
  if (!flags.given()) return;
  RunConfig rc = flags.resolve();
  rc.validate();
  check_resume(ckpt, rc.hash(), force, es);
}

struct EmbedCommand {
  ConfigFlags flags;
  std::string ckpt, data, side, out;
  bool force = false;

  void attach(CLI::App& app) {
    flags.attach(app);
    app.add_option("--ckpt", ckpt, "Checkpoint")->required();
    app.add_option("--data", data, "Dataset")->required();
    app.add_option("--side", side, "trigger, recall or both")->required()->check(
        CLI::IsMember({"trigger", "recall", "both"}));
    app.add_option("--out", out, "Output directory")->required();
    app.add_flag("--force", force, "Accept a config whose hash differs from the checkpoint's");
  }

  int run(std::ostream& os, std::ostream& es) {
    const Checkpoint c = load_checkpoint(ckpt);
    check_against_flags(c, flags, force, es);
    print_config_hash(os, c.config_hash);
    const Dataset d = read_dataset(data);
    const fs::path dir = ensure_dir(out);
    std::vector<Side> sides;
    if (side != "recall") sides.push_back(Side::kTrigger);
    if (side != "trigger") sides.push_back(Side::kRecall);
    for (Side s : sides) {
      const SideEmbeddings e = embed_side(d, s, c.params, c.model);
      for (View v : kFileViews) {
        const fs::path path = dir / embedding_file_name(s, v);
        write_embeddings({e.view(v), c.config_hash, c.step}, path);
        os << path.string() << ": " << e.view(v).size() << " rows\n";
      }
    }
    return kSuccess;
  }
};

// --- eval -------------------------------------------------------------------

std::vector<std::size_t> parse_ks(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ',')) {
    std::size_t k = 0;
    try {
      std::size_t used = 0;
      k = std::stoul(item, &used);
      if (used != item.size()) k = 0;
    } catch (const std::exception&) {
      k = 0;
    }
    if (k == 0) throw ConfigError("--k expects a comma-separated list of positive integers, got '" + text + "'");
    ks.push_back(k);
  }
  if (ks.empty()) throw ConfigError("--k is empty");
  return ks;
}

std::vector<TaskSpec> parse_tasks(const std::vector<std::string>& names) {
  if (names.empty()) return all_tasks();
  std::vector<TaskSpec> tasks;
  for (const auto& list : names) {
    std::stringstream s(list);
    std::string item;
    while (std::getline(s, item, ',')) tasks.push_back(TaskSpec::parse(item));
  }
  return tasks;
}

struct EvalCommand {
  ConfigFlags flags;
  std::string ckpt, data, k = "1,5,10", report;
  std::vector<std::string> emb, tasks;
  bool force = false;

  void attach(CLI::App& app) {
    flags.attach(app);
    app.add_option("--ckpt", ckpt, "Checkpoint to embed --data with");
    app.add_option("--data", data, "Dataset (with --ckpt)");
    app.add_option("--emb", emb, "Directories holding exported embeddings (repeatable)")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    app.add_option("--k", k, "Comma-separated K list");
    app.add_option("--tasks", tasks, "Comma-separated task names, e.g. qt2cv")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    app.add_option("--report", report, "Write the JSON report here and the table next to it");
    app.add_flag("--force", force, "Accept a config whose hash differs from the inputs'");
  }

  SideEmbeddings load_side(Side side, std::string& hash, std::uint64_t& step) const {
    SideEmbeddings out;
    for (View v : kFileViews) {
      const std::string name = embedding_file_name(side, v);
      std::optional<fs::path> found;
      for (const auto& d : emb) {
        if (fs::exists(fs::path(d) / name)) {
          found = fs::path(d) / name;
          break;
        }
      }
      if (!found) throw DataError("no " + name + " under the --emb directories");
      EmbeddingFile f = read_embeddings(*found);
      if (f.corpus.view != v) throw DataError(found->string() + " holds the wrong view");
      if (hash.empty()) {
        hash = f.config_hash;
        step = f.checkpoint_step;
      } else if (f.config_hash != hash || f.checkpoint_step != step) {
        throw ConfigError(found->string() + " comes from config " + f.config_hash + " step " +
                          std::to_string(f.checkpoint_step) + ", expected " + hash + " step " +
                          std::to_string(step));
      }
      (v == View::kVisual ? out.visual : v == View::kTextual ? out.textual : out.fused) = std::move(f.corpus);
    }
    return out;
  }

  int run(std::ostream& os, std::ostream& es) {
    const auto ks = parse_ks(k);
    const auto task_list = parse_tasks(tasks);
    if (ckpt.empty() == emb.empty()) throw ConfigError("give exactly one of --ckpt or --emb");
    SideEmbeddings triggers, recalls;
    std::string hash;
    std::uint64_t step = 0;
    if (!ckpt.empty()) {
      if (data.empty()) throw ConfigError("--ckpt needs --data");
      const Checkpoint c = load_checkpoint(ckpt);
      check_against_flags(c, flags, force, es);
      const Dataset d = read_dataset(data);
      triggers = embed_side(d, Side::kTrigger, c.params, c.model);
      recalls = embed_side(d, Side::kRecall, c.params, c.model);
      hash = c.config_hash;
      step = c.step;
    } else {
      triggers = load_side(Side::kTrigger, hash, step);
      recalls = load_side(Side::kRecall, hash, step);
      if (flags.given()) {
        RunConfig rc = flags.resolve();
        rc.validate();
        if (rc.hash() != hash) {
          if (!force) throw ConfigError("embeddings come from config " + hash + " but the given config is " + rc.hash());
          es << "warning: embeddings come from config " << hash << ", given config is " << rc.hash() << "\n";
        }
      }
    }
    print_config_hash(os, hash);
    Report r = run_task_matrix(triggers, recalls, task_list, ks);
    r.config_hash = hash;
    r.checkpoint_step = step;
    os << format_table(r);
    if (!report.empty()) emit_report(r, report);
    for (const auto& t : r.tasks) {
      if (!t.defined) es << "warning: task " << t.task.name() << " is undefined (no evaluable queries)\n";
    }
    return kSuccess;
  }
};

// --- gradcheck --------------------------------------------------------------

struct GradcheckCommand {
  ConfigFlags flags;
  std::uint64_t seed = 0;
  std::size_t seeds = 1, coords = 64;
  double eps = 1e-5, tol = 1e-4;
  std::string corrupt;

  void attach(CLI::App& app) {
    flags.attach(app);
    app.add_option("--seed", seed, "First seed");
    app.add_option("--seeds", seeds, "Number of consecutive seeds");
    app.add_option("--eps", eps, "Finite-difference step");
    app.add_option("--tol", tol, "Maximum relative error");
    app.add_option("--coords", coords, "Coordinates sampled per parameter tensor");
    app.add_option("--corrupt", corrupt, "Perturb the analytic gradient of this parameter (self-test)")
        ->group("");
  }

  int run(std::ostream& os) {
    RunConfig rc = flags.resolve();
    rc.validate();
    print_config_hash(os, rc.hash());
    GradientCheckSetup setup;
    setup.losses = rc.loss;
    GradcheckOptions opts;
    opts.eps = eps;
    opts.tol = tol;
    opts.coords_per_tensor = coords;
    bool corrupted = false;
    if (!corrupt.empty()) {
      opts.corrupt = [&](ParameterStore<double>& grads) {
        if (!grads.contains(corrupt)) return;
        corrupted = true;
        for (auto& g : grads.at(corrupt).values()) g = 1.5 * g + 1e-2;
      };
    }
    bool ok = true;
    double worst = 0.0;
    for (std::uint64_t s = seed; s < seed + seeds; ++s) {
      opts.seed = s;
      for (const auto& check : run_gradient_checks(setup, opts)) {
        const auto& r = check.report;
        worst = std::max(worst, r.max_rel_err);
        os << check.name << " seed " << s << ": " << (r.passed() ? "pass" : "FAIL") << " max_rel_err "
           << r.max_rel_err << " at " << r.worst_parameter << "[" << r.worst_index << "] over "
           << r.coordinates_checked << " coordinates (" << r.extended_coordinates << " in extended precision)\n";
        if (!r.passed()) {
          ok = false;
          const auto& f = r.failures.front();
          os << "  worst failure " << f.parameter << "[" << f.index << "] analytic " << f.analytic << " numeric "
             << f.numeric << "\n";
        }
      }
    }
    if (!corrupt.empty() && !corrupted) throw ConfigError("--corrupt names no parameter: " + corrupt);
    os << (ok ? "gradcheck passed" : "gradcheck FAILED") << ", max_rel_err " << worst << " (tol " << tol << ", eps "
       << eps << ")\n";
    return ok ? kSuccess : kNumericalFailure;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multimodal product retrieval: data, training, embedding and evaluation", "uniecs"};
  app.require_subcommand(1);
  // A repeated scalar flag takes its last value; list options opt back in to all.
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  GenDataCommand gen;
  TrainCommand train_cmd;
  EmbedCommand embed;
  EvalCommand eval;
  GradcheckCommand grad;
  gen.attach(*app.add_subcommand("gen-data", "Generate a synthetic pair corpus"));
  train_cmd.attach(*app.add_subcommand("train", "Train the encoder"));
  embed.attach(*app.add_subcommand("embed", "Export v, t and f embeddings of one side"));
  eval.attach(*app.add_subcommand("eval", "Nine-task Recall@K report"));
  grad.attach(*app.add_subcommand("gradcheck", "Finite-difference gradient checks"));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "gen-data") return gen.run(out);
    if (name == "train") return train_cmd.run(out, err);
    if (name == "embed") return embed.run(out, err);
    if (name == "eval") return eval.run(out, err);
    return grad.run(out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }
}

}  // namespace uniecs::cli
