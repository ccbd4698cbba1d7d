#pragma once

// `VPHM1` binary model container.
//
// Layout (all integers little-endian):
//   "VPHM1"                       5 magic bytes
//   u32 version                   currently 1
//   u32 n, n bytes                model-kind tag ("cnn", "qlr", "qrf", "qgb")
//   u32 n, n bytes                header text, `name = value` lines
//   u32 count                     number of named arrays
//   per array:
//     u32 n, n bytes              array name
//     u32 rank, rank x u64 dims
//     product(dims) x f64         IEEE-754 binary64 payload
//
// Payloads are copied bit-for-bit, so save/load round-trips exactly.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vphm/kv.hpp"

namespace vphm {

struct NamedArray {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<double> data;
};

struct Container {
  static constexpr std::uint32_t kVersion = 1;

  std::string kind;
  kv::Table header;
  std::vector<NamedArray> arrays;

  void add(std::string name, std::vector<std::uint64_t> shape, std::vector<double> data);
  /// Throws Format if absent.
  const NamedArray &get(const std::string &name) const;
  bool has(const std::string &name) const;

  std::vector<std::uint8_t> encode() const;
  static Container decode(const std::vector<std::uint8_t> &bytes);

  void save(const std::filesystem::path &path) const;
  static Container load(const std::filesystem::path &path);
};

} // namespace vphm
