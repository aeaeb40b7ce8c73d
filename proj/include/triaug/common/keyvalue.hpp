// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace triaug {

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);
std::string format_float(float v);

double parse_double(std::string_view text, std::string_view what);
float parse_float(std::string_view text, std::string_view what);
std::uint64_t parse_u64(std::string_view text, std::string_view what);

std::vector<std::string_view> split_fields(std::string_view line, char sep);

/// Ordered `key = value` document, one entry per line, '#' comments allowed.
class KeyValueDoc {
 public:
  void set(std::string key, std::string value);
  void set(std::string key, double value) { set(std::move(key), format_double(value)); }
  void set_int(std::string key, std::uint64_t value) { set(std::move(key), std::to_string(value)); }

  bool has(std::string_view key) const;
  const std::string& get(std::string_view key) const;  // IoError when missing
  double get_double(std::string_view key) const;
  std::uint64_t get_u64(std::string_view key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }

  std::string to_text() const;
  static KeyValueDoc parse(std::string_view text, std::string_view origin);

  void save(const std::filesystem::path& path) const;
  static KeyValueDoc load(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace triaug
