// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

// Little-endian primitives shared by the binary file formats.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "uniecs/error.hpp"

namespace uniecs::binary {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void put_array(std::ostream& out, std::span<const T> values) {
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
}

inline void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

/// Reads with truncation checks. `what` names the container in errors.
class Reader {
 public:
  Reader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

  void bytes(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw DataError(what_ + " is truncated");
  }

  template <typename T>
  T get() {
    T value;
    bytes(reinterpret_cast<char*>(&value), sizeof(T));
    return value;
  }

  template <typename T>
  std::vector<T> get_array(std::size_t n) {
    // Guard against absurd lengths from corrupt headers before allocating.
    if (n > (std::size_t{1} << 34) / sizeof(T)) throw DataError(what_ + " declares an implausible array length");
    std::vector<T> values(n);
    bytes(reinterpret_cast<char*>(values.data()), n * sizeof(T));
    return values;
  }

  std::string get_string() {
    const auto n = get<std::uint32_t>();
    if (n > (1u << 20)) throw DataError(what_ + " declares an implausible string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

  void expect_magic(const char (&magic)[4]) {
    char got[4];
    bytes(got, 4);
    if (std::memcmp(got, magic, 4) != 0) throw DataError(what_ + " has the wrong magic bytes");
  }

  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) throw DataError(what_ + " has trailing bytes");
  }

  const std::string& what() const noexcept { return what_; }

 private:
  std::istream& in_;
  std::string what_;
};

}  // namespace uniecs::binary
