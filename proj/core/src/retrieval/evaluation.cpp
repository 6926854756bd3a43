// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#include "uniecs/retrieval/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "common/binary_io.hpp"
#include "uniecs/error.hpp"
#include "uniecs/model/encoder.hpp"

namespace uniecs {

using ordered_json = nlohmann::ordered_json;

std::string TaskSpec::name() const {
  return "q" + std::string(view_tag(query)) + "2c" + std::string(view_tag(candidate));
}

std::string TaskSpec::label() const {
  auto side = [](char who, View v) {
    const std::string p(1, who);
    switch (v) {
      case View::kVisual:
        return p + "_v";
      case View::kTextual:
        return p + "_t";
      case View::kMultimodal:
        break;
    }
    return "(" + p + "_v," + p + "_t)";
  };
  return side('q', query) + " -> " + side('c', candidate);
}

TaskSpec TaskSpec::parse(std::string_view name) {
  const auto sep = name.find('2');
  if (name.size() < 4 || name.front() != 'q' || sep == std::string_view::npos || sep + 1 >= name.size() ||
      name[sep + 1] != 'c') {
    throw ConfigError("malformed task name '" + std::string(name) + "' (expected e.g. qt2cv)");
  }
  return {parse_view(name.substr(1, sep - 1)), parse_view(name.substr(sep + 2))};
}

std::vector<TaskSpec> all_tasks() {
  using enum View;
  return {{kTextual, kVisual},    {kTextual, kTextual},    {kTextual, kMultimodal},
          {kVisual, kTextual},    {kVisual, kVisual},      {kVisual, kMultimodal},
          {kMultimodal, kTextual}, {kMultimodal, kVisual}, {kMultimodal, kMultimodal}};
}

const EmbeddingCorpus& SideEmbeddings::view(View v) const {
  switch (v) {
    case View::kVisual:
      return visual;
    case View::kTextual:
      return textual;
    case View::kMultimodal:
      break;
  }
  return fused;
}

std::string_view side_name(Side side) { return side == Side::kTrigger ? "trigger" : "recall"; }

Side parse_side(std::string_view name) {
  if (name == "trigger") return Side::kTrigger;
  if (name == "recall") return Side::kRecall;
  throw ConfigError("unknown side '" + std::string(name) + "' (expected trigger or recall)");
}

namespace {

struct CorpusBuilder {
  View view;
  std::vector<std::string> ids;
  std::vector<float> values;
  std::size_t dim = 0;

  void add(const std::string& id, const std::vector<float>& row) {
    dim = row.size();
    ids.push_back(id);
    values.insert(values.end(), row.begin(), row.end());
  }
  EmbeddingCorpus finish(std::size_t width) && {
    EmbeddingCorpus c;
    c.view = view;
    if (!ids.empty()) c.matrix = Tensor<float>(Shape{ids.size(), width}, std::move(values));
    c.ids = std::move(ids);
    return c;
  }
};

// Rows of `side` usable for `view`: the multimodal view needs both modalities.
EmbeddingCorpus corpus_for(const SideEmbeddings& side, View view) {
  if (view != View::kMultimodal) return side.view(view);
  std::unordered_set<std::string_view> v(side.visual.ids.begin(), side.visual.ids.end());
  std::unordered_set<std::string_view> t(side.textual.ids.begin(), side.textual.ids.end());
  CorpusBuilder b{View::kMultimodal, {}, {}, 0};
  for (std::size_t r = 0; r < side.fused.size(); ++r) {
    const std::string& id = side.fused.ids[r];
    if (!v.contains(id) || !t.contains(id)) continue;
    const auto row = side.fused.matrix.row(r);
    b.add(id, std::vector<float>(row.begin(), row.end()));
  }
  return std::move(b).finish(side.fused.dim());
}

}  // namespace

SideEmbeddings embed_side(const Dataset& dataset, Side side, const ParameterStore<float>& params,
                          const ModelConfig& config, std::size_t chunk) {
  if ((dataset.dim_v != 0 && dataset.dim_v != config.dim_v) || (dataset.dim_t != 0 && dataset.dim_t != config.dim_t)) {
    throw DataError("data feature widths (visual " + std::to_string(dataset.dim_v) + ", textual " +
                    std::to_string(dataset.dim_t) + ") do not match the model's expected widths (visual " +
                    std::to_string(config.dim_v) + ", textual " + std::to_string(config.dim_t) + ")");
  }
  if (chunk == 0) throw ConfigError("embedding chunk must be at least 1");
  CorpusBuilder v{View::kVisual, {}, {}, 0}, t{View::kTextual, {}, {}, 0}, f{View::kMultimodal, {}, {}, 0};
  for (std::size_t start = 0; start < dataset.size(); start += chunk) {
    const std::size_t end = std::min(dataset.size(), start + chunk);
    std::vector<ModalityBundle> bundles;
    for (std::size_t i = start; i < end; ++i) {
      const auto& r = dataset.records[i];
      bundles.push_back((side == Side::kTrigger ? r.trigger : r.recall).bundle());
    }
    std::vector<const ModalityBundle*> ptrs;
    for (const auto& b : bundles) ptrs.push_back(&b);
    const auto triples = encode_batch<float>(ptrs, params, config);
    for (std::size_t i = 0; i < triples.size(); ++i) {
      const std::string& id = dataset.records[start + i].pair_id;
      if (triples[i].v) v.add(id, *triples[i].v);
      if (triples[i].t) t.add(id, *triples[i].t);
      f.add(id, triples[i].f);
    }
  }
  return {std::move(v).finish(config.embed_dim), std::move(t).finish(config.embed_dim),
          std::move(f).finish(config.embed_dim)};
}

const TaskResult& Report::task(std::string_view name) const {
  for (const auto& t : tasks) {
    if (t.task.name() == name) return t;
  }
  throw Error("report has no task " + std::string(name));
}

Report run_task_matrix(const SideEmbeddings& triggers, const SideEmbeddings& recalls,
                       const std::vector<TaskSpec>& tasks, const std::vector<std::size_t>& ks) {
  if (ks.empty()) throw ConfigError("at least one K is required");
  for (auto k : ks) {
    if (k == 0) throw ConfigError("K must be at least 1");
  }
  const std::size_t max_k = *std::max_element(ks.begin(), ks.end());
  Report report;
  report.ks = ks;
  for (const TaskSpec& task : tasks) {
    TaskResult res;
    res.task = task;
    const EmbeddingCorpus queries = corpus_for(triggers, task.query);
    const EmbeddingCorpus candidates = corpus_for(recalls, task.candidate);
    res.candidates = candidates.size();
    std::unordered_set<std::string_view> query_ids(queries.ids.begin(), queries.ids.end());
    std::unordered_set<std::string_view> cand_ids(candidates.ids.begin(), candidates.ids.end());
    std::vector<std::size_t> query_rows;
    std::vector<std::string> truth;
    // Every pair appears in the trigger fused corpus; walk pairs in that order.
    std::unordered_map<std::string_view, std::size_t> row_of;
    for (std::size_t r = 0; r < queries.size(); ++r) row_of.emplace(queries.ids[r], r);
    for (const auto& id : triggers.fused.ids) {
      if (!query_ids.contains(id) || !cand_ids.contains(id)) {
        ++res.skipped;
        continue;
      }
      query_rows.push_back(row_of.at(id));
      truth.push_back(id);
    }
    res.queries = query_rows.size();
    if (res.queries > 0) {
      const Index index(candidates);
      std::vector<std::vector<Hit>> hits;
      hits.reserve(query_rows.size());
      for (auto r : query_rows) hits.push_back(index.topk(queries.matrix.row(r), max_k));
      for (auto k : ks) res.recall.push_back(recall_at_k(index, hits, truth, k));
      res.defined = true;
    }
    report.tasks.push_back(std::move(res));
  }
  return report;
}

std::string report_json(const Report& report) {
  ordered_json j;
  j["config_hash"] = report.config_hash;
  j["checkpoint_step"] = report.checkpoint_step;
  j["ks"] = report.ks;
  ordered_json tasks = ordered_json::object();
  for (const auto& t : report.tasks) {
    ordered_json e;
    for (std::size_t i = 0; i < report.ks.size(); ++i) {
      const std::string key = "R@" + std::to_string(report.ks[i]);
      if (t.defined) {
        e[key] = t.recall[i];
      } else {
        e[key] = nullptr;
      }
    }
    e["N"] = t.queries;
    e["candidates"] = t.candidates;
    e["skipped"] = t.skipped;
    e["defined"] = t.defined;
    tasks[t.task.name()] = std::move(e);
  }
  j["tasks"] = std::move(tasks);
  return j.dump(2) + "\n";
}

Report parse_report(const std::string& text) {
  try {
    const ordered_json j = ordered_json::parse(text);
    Report r;
    r.config_hash = j.at("config_hash").get<std::string>();
    r.checkpoint_step = j.at("checkpoint_step").get<std::uint64_t>();
    r.ks = j.at("ks").get<std::vector<std::size_t>>();
    for (const auto& [name, e] : j.at("tasks").items()) {
      TaskResult t;
      t.task = TaskSpec::parse(name);
      t.defined = e.at("defined").get<bool>();
      t.queries = e.at("N").get<std::size_t>();
      t.candidates = e.at("candidates").get<std::size_t>();
      t.skipped = e.at("skipped").get<std::size_t>();
      if (t.defined) {
        for (auto k : r.ks) t.recall.push_back(e.at("R@" + std::to_string(k)).get<double>());
      }
      r.tasks.push_back(std::move(t));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

std::string format_table(const Report& report) {
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-24s", "task");
  out << buf;
  for (auto k : report.ks) {
    std::snprintf(buf, sizeof(buf), " %7s", ("R@" + std::to_string(k)).c_str());
    out << buf;
  }
  out << "        N  skipped\n";
  for (const auto& t : report.tasks) {
    std::snprintf(buf, sizeof(buf), "%-24s", t.task.label().c_str());
    out << buf;
    for (std::size_t i = 0; i < report.ks.size(); ++i) {
      if (t.defined) {
        std::snprintf(buf, sizeof(buf), " %7.4f", t.recall[i]);
      } else {
        std::snprintf(buf, sizeof(buf), " %7s", "undef");
      }
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), " %8zu %8zu\n", t.queries, t.skipped);
    out << buf;
  }
  out << "config " << report.config_hash << ", checkpoint step " << report.checkpoint_step << "\n";
  return out.str();
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace

void emit_report(const Report& report, const std::filesystem::path& path) {
  write_text(path, report_json(report));
  std::filesystem::path table = path;
  table.replace_extension(".txt");
  write_text(table, format_table(report));
}

Report read_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream s;
  s << in.rdbuf();
  return parse_report(s.str());
}

namespace {

constexpr char kEmbeddingMagic[4] = {'U', 'E', 'E', 'M'};
constexpr std::uint32_t kEmbeddingVersion = 1;

}  // namespace

void write_embeddings(const EmbeddingFile& file, const std::filesystem::path& path) {
  file.corpus.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(kEmbeddingMagic, 4);
  binary::put<std::uint32_t>(out, kEmbeddingVersion);
  binary::put<std::uint8_t>(out, static_cast<std::uint8_t>(file.corpus.view));
  binary::put_string(out, file.config_hash);
  binary::put<std::uint64_t>(out, file.checkpoint_step);
  binary::put<std::uint64_t>(out, file.corpus.size());
  binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(file.corpus.dim()));
  for (const auto& id : file.corpus.ids) binary::put_string(out, id);
  binary::put_array<float>(out, file.corpus.matrix.values());
  if (!out) throw DataError("write failed for " + path.string());
}

EmbeddingFile read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  binary::Reader rd(in, "embedding file " + path.string());
  rd.expect_magic(kEmbeddingMagic);
  if (rd.get<std::uint32_t>() != kEmbeddingVersion) throw DataError(rd.what() + " has an unsupported version");
  EmbeddingFile f;
  const auto view = rd.get<std::uint8_t>();
  if (view > 2) throw DataError(rd.what() + " has an unknown view tag");
  f.corpus.view = static_cast<View>(view);
  f.config_hash = rd.get_string();
  f.checkpoint_step = rd.get<std::uint64_t>();
  const auto rows = rd.get<std::uint64_t>();
  const auto dim = rd.get<std::uint32_t>();
  if (rows > (1u << 28)) throw DataError(rd.what() + " declares an implausible row count");
  for (std::uint64_t i = 0; i < rows; ++i) f.corpus.ids.push_back(rd.get_string());
  if (rows > 0) {
    f.corpus.matrix = Tensor<float>(Shape{static_cast<std::size_t>(rows), dim}, rd.get_array<float>(rows * dim));
  }
  rd.expect_end();
  f.corpus.validate();
  return f;
}

}  // namespace uniecs
