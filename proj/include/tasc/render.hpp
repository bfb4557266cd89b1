// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tasc/model.hpp"

namespace tasc {

using DotAttrs = std::vector<std::pair<std::string, std::string>>;

struct StyleProfile {
  std::map<NodeKind, DotAttrs> glyphs;  // one entry per NodeKind
  std::string label_open = "[";         // criterion edge labels
  std::string label_close = "]";
  DotAttrs cluster{{"style", "rounded"}};
  bool monochrome = true;

  static StyleProfile mono();
  static StyleProfile color();
};

// Deterministic DOT text: one cluster per caremap, nodes and edges sorted by
// id, multi-level links as dashed edges after the clusters.
std::string to_dot(const CaremapSet& set, const StyleProfile& style = StyleProfile::mono());

// DOT double-quoted string literal.
std::string dot_quote(std::string_view s);

}  // namespace tasc
