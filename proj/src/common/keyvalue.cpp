// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#include "triaug/common/keyvalue.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "triaug/errors.hpp"

namespace triaug {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view text, std::string_view what) {
  text = trim(text);
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw IoError("cannot parse " + std::string(what) + " from '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::string format_float(float v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

double parse_double(std::string_view text, std::string_view what) { return parse_number<double>(text, what); }
float parse_float(std::string_view text, std::string_view what) { return parse_number<float>(text, what); }
std::uint64_t parse_u64(std::string_view text, std::string_view what) {
  return parse_number<std::uint64_t>(text, what);
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

void KeyValueDoc::set(std::string key, std::string value) {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == key; });
  if (it != entries_.end()) {
    it->second = std::move(value);
  } else {
    entries_.emplace_back(std::move(key), std::move(value));
  }
}

bool KeyValueDoc::has(std::string_view key) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == key; });
}

const std::string& KeyValueDoc::get(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  throw IoError("missing key '" + std::string(key) + "'");
}

double KeyValueDoc::get_double(std::string_view key) const { return parse_double(get(key), key); }
std::uint64_t KeyValueDoc::get_u64(std::string_view key) const { return parse_u64(get(key), key); }

std::string KeyValueDoc::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries_) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

KeyValueDoc KeyValueDoc::parse(std::string_view text, std::string_view origin) {
  KeyValueDoc doc;
  std::size_t line_no = 0;
  for (std::string_view line : split_fields(text, '\n')) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw IoError(std::string(origin) + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    doc.set(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
  }
  return doc;
}

void KeyValueDoc::save(const std::filesystem::path& path) const { write_text_file(path, to_text()); }

KeyValueDoc KeyValueDoc::load(const std::filesystem::path& path) {
  return parse(read_text_file(path), path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace triaug
