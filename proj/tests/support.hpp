// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "tasc/dsl.hpp"
#include "tasc/model.hpp"

namespace tasc::testing {

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline std::string corpus_path(std::string_view name) { return std::string(TASC_CORPUS_DIR) + "/" + std::string(name); }
inline std::string data_path(std::string_view name) { return std::string(TASC_TEST_DATA_DIR) + "/" + std::string(name); }

// Parses text that is expected to be free of parse errors.
inline CaremapSet parse_ok(std::string_view text) {
  auto r = parse(text, "<test>");
  if (!r.ok()) {
    std::string msg = "unexpected parse failure:";
    for (const auto& d : r.diagnostics) msg += "\n  " + format(d);
    throw std::runtime_error(msg);
  }
  return std::move(*r.set);
}

inline CaremapSet load_corpus(std::string_view name) { return parse_ok(read_file(corpus_path(name))); }
inline CaremapSet load_data(std::string_view name) { return parse_ok(read_file(data_path(name))); }

// Replaces the single occurrence of `find`; throws if it occurs 0 or > 1 times.
inline std::string replace_once(std::string text, std::string_view find, std::string_view with) {
  auto pos = text.find(find);
  if (pos == std::string::npos) throw std::runtime_error("fixture text not found: " + std::string(find));
  if (text.find(find, pos + 1) != std::string::npos)
    throw std::runtime_error("fixture text not unique: " + std::string(find));
  text.replace(pos, find.size(), with);
  return text;
}

}  // namespace tasc::testing
