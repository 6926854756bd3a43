// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#include "uniecs/data/formats.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "common/binary_io.hpp"
#include "uniecs/error.hpp"

namespace uniecs {

namespace {

constexpr std::array<const char*, 4> kPayloadKeys = {"trigger_text_feat", "trigger_image_feat", "recall_text_feat",
                                                     "recall_image_feat"};

std::array<const std::optional<Tensor<float>>*, 4> payloads(const ProductPairRecord& r) {
  return {&r.trigger.text, &r.trigger.image, &r.recall.text, &r.recall.image};
}
std::array<std::optional<Tensor<float>>*, 4> payloads(ProductPairRecord& r) {
  return {&r.trigger.text, &r.trigger.image, &r.recall.text, &r.recall.image};
}

void append_float(std::string& out, float x) {
  // "-0" would be read back as the integer 0.
  if (x == 0.0f && std::signbit(x)) {
    out += "-0.0";
    return;
  }
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  out.append(buf, res.ptr);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

// Builds one record from SAX events. Reals are converted from their decimal
// lexeme straight to float so no double rounding can occur.
class RecordHandler {
 public:
  using json = nlohmann::json;

  ProductPairRecord record;
  std::string error;

  bool null() {
    if (depth_ != 1 || slot_ < 0) return fail("unexpected null");
    return mark_seen();
  }
  bool boolean(bool) { return fail("unexpected boolean"); }
  bool number_integer(json::number_integer_t v) { return number(static_cast<float>(v)); }
  bool number_unsigned(json::number_unsigned_t v) { return number(static_cast<float>(v)); }
  bool number_float(json::number_float_t, const std::string& lexeme) {
    float x = 0.0f;
    auto res = std::from_chars(lexeme.data(), lexeme.data() + lexeme.size(), x);
    if (res.ec != std::errc() || res.ptr != lexeme.data() + lexeme.size()) {
      return fail("real " + lexeme + " is not representable as a finite float");
    }
    return number(x);
  }
  bool string(std::string& s) {
    if (depth_ != 1 || key_ != "pair_id") return fail("unexpected string");
    record.pair_id = s;
    return mark_seen();
  }
  bool binary(json::binary_t&) { return fail("unexpected binary value"); }
  bool start_object(std::size_t) {
    if (depth_ != 0) return fail("nested objects are not allowed");
    ++depth_;
    return true;
  }
  bool end_object() {
    --depth_;
    for (std::size_t i = 0; i < seen_.size(); ++i) {
      if (!seen_[i]) return fail(std::string("missing key ") + key_name(i));
    }
    return true;
  }
  bool key(std::string& k) {
    key_ = k;
    slot_ = -1;
    for (std::size_t i = 0; i < kPayloadKeys.size(); ++i) {
      if (k == kPayloadKeys[i]) slot_ = static_cast<int>(i);
    }
    if (slot_ < 0 && k != "pair_id") return fail("unknown key " + k);
    if (seen_[seen_index()]) return fail("duplicate key " + k);
    return true;
  }
  bool start_array(std::size_t) {
    if (slot_ < 0 || depth_ < 1 || depth_ > 2) return fail("unexpected array");
    ++depth_;
    if (depth_ == 2) {
      values_.clear();
      rows_ = 0;
      width_ = 0;
    } else {
      row_len_ = 0;
    }
    return true;
  }
  bool end_array() {
    if (depth_ == 3) {
      if (row_len_ == 0) return fail(key_ + " has an empty token row");
      if (rows_ == 0) width_ = row_len_;
      if (row_len_ != width_) return fail(key_ + " has ragged token rows");
      ++rows_;
    } else {
      if (rows_ == 0) return fail(key_ + " has no token rows");
      *payloads(record)[static_cast<std::size_t>(slot_)] = Tensor<float>(Shape{rows_, width_}, std::move(values_));
      values_ = {};
      mark_seen();
    }
    --depth_;
    return true;
  }
  bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception& ex) {
    return fail(ex.what());
  }

 private:
  bool number(float x) {
    if (depth_ != 3) return fail("unexpected number");
    if (!std::isfinite(x)) return fail("non-finite real");
    values_.push_back(x);
    ++row_len_;
    return true;
  }
  bool fail(const std::string& what) {
    if (error.empty()) error = what;
    return false;
  }
  std::size_t seen_index() const { return slot_ < 0 ? 4 : static_cast<std::size_t>(slot_); }
  bool mark_seen() {
    seen_[seen_index()] = true;
    return true;
  }
  static const char* key_name(std::size_t i) { return i < 4 ? kPayloadKeys[i] : "pair_id"; }

  int depth_ = 0;
  int slot_ = -1;
  std::string key_;
  std::array<bool, 5> seen_{};
  std::vector<float> values_;
  std::size_t rows_ = 0, width_ = 0, row_len_ = 0;
};

}  // namespace

void write_jsonl(const Dataset& dataset, std::ostream& out) {
  dataset.validate();
  std::string line;
  for (const auto& r : dataset.records) {
    line.clear();
    line += "{\"pair_id\":";
    line += nlohmann::json(r.pair_id).dump();
    const auto ps = payloads(r);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      line += ",\"";
      line += kPayloadKeys[i];
      line += "\":";
      if (!*ps[i]) {
        line += "null";
        continue;
      }
      const Tensor<float>& m = **ps[i];
      line += '[';
      for (std::size_t row = 0; row < m.rows(); ++row) {
        if (row) line += ',';
        line += '[';
        for (std::size_t c = 0; c < m.cols(); ++c) {
          if (c) line += ',';
          append_float(line, m(row, c));
        }
        line += ']';
      }
      line += ']';
    }
    line += "}\n";
    out << line;
  }
  if (!out) throw DataError("write failed");
}

void write_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_jsonl(dataset, out);
}

Dataset read_jsonl(std::istream& in) {
  Dataset d;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    RecordHandler h;
    const bool ok = nlohmann::json::sax_parse(line, &h);
    const std::string where =
        "line " + std::to_string(line_no) + (h.record.pair_id.empty() ? "" : " (pair " + h.record.pair_id + ")");
    if (!ok) throw DataError(where + ": " + (h.error.empty() ? "malformed record" : h.error));
    try {
      check_record(h.record, d.dim_v, d.dim_t);
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!ids.insert(h.record.pair_id).second) throw DataError(where + ": duplicate pair_id");
    d.records.push_back(std::move(h.record));
  }
  return d;
}

Dataset read_jsonl(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return read_jsonl(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_packed(const Dataset& dataset, std::ostream& out) {
  dataset.validate();
  out.write(kPackedMagic, 4);
  binary::put<std::uint32_t>(out, kPackedVersion);
  binary::put<std::uint64_t>(out, dataset.records.size());
  for (const auto& r : dataset.records) {
    binary::put_string(out, r.pair_id);
    const auto ps = payloads(r);
    for (const auto* p : ps) binary::put<std::uint8_t>(out, p->has_value() ? 1 : 0);
    for (const auto* p : ps) {
      if (!*p) continue;
      binary::put<std::uint32_t>(out, static_cast<std::uint32_t>((*p)->rows()));
      binary::put<std::uint32_t>(out, static_cast<std::uint32_t>((*p)->cols()));
    }
    for (const auto* p : ps) {
      if (*p) binary::put_array<float>(out, (*p)->values());
    }
  }
  if (!out) throw DataError("write failed");
}

void write_packed(const Dataset& dataset, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_packed(dataset, out);
}

Dataset read_packed(std::istream& in) {
  binary::Reader rd(in, "packed corpus");
  rd.expect_magic(kPackedMagic);
  const auto version = rd.get<std::uint32_t>();
  if (version != kPackedVersion) throw DataError("packed corpus has unsupported version " + std::to_string(version));
  const auto count = rd.get<std::uint64_t>();
  Dataset d;
  std::unordered_set<std::string> ids;
  for (std::uint64_t i = 0; i < count; ++i) {
    ProductPairRecord r;
    r.pair_id = rd.get_string();
    const auto ps = payloads(r);
    std::array<std::uint8_t, 4> present{};
    for (auto& p : present) {
      p = rd.get<std::uint8_t>();
      if (p > 1) throw DataError("packed corpus: bad presence flag in record " + std::to_string(i));
    }
    std::array<std::pair<std::uint32_t, std::uint32_t>, 4> dims{};
    for (std::size_t k = 0; k < 4; ++k) {
      if (!present[k]) continue;
      dims[k].first = rd.get<std::uint32_t>();
      dims[k].second = rd.get<std::uint32_t>();
    }
    for (std::size_t k = 0; k < 4; ++k) {
      if (!present[k]) continue;
      const std::size_t n = std::size_t{dims[k].first} * dims[k].second;
      *ps[k] = Tensor<float>(Shape{dims[k].first, dims[k].second}, rd.get_array<float>(n));
    }
    check_record(r, d.dim_v, d.dim_t);
    if (!ids.insert(r.pair_id).second) throw DataError("packed corpus: duplicate pair_id " + r.pair_id);
    d.records.push_back(std::move(r));
  }
  rd.expect_end();
  return d;
}

Dataset read_packed(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return read_packed(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Dataset read_dataset(const std::filesystem::path& path) {
  char head[4] = {};
  {
    auto in = open_in(path);
    in.read(head, 4);
  }
  if (std::equal(head, head + 4, kPackedMagic)) return read_packed(path);
  return read_jsonl(path);
}

}  // namespace uniecs
