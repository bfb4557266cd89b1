// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "tasc/model.hpp"

namespace tasc {

struct SourceSpan {
  std::string file;
  int line = 1;    // 1-based
  int column = 1;  // 1-based
  int length = 0;
};

enum class Severity { Error, Warning };

std::string_view to_string(Severity s);

struct ParseDiagnostic {
  Severity severity = Severity::Error;
  std::string code;  // E-SYNTAX, E-UNDEF, E-DUP, ...
  std::string message;
  SourceSpan span;
};

// `file:line:col: error[E-UNDEF]: message`
std::string format(const ParseDiagnostic& d);

struct ParseResult {
  std::optional<CaremapSet> set;  // present iff no Error diagnostic
  std::vector<ParseDiagnostic> diagnostics;

  [[nodiscard]] bool ok() const { return set.has_value(); }
};

inline constexpr std::size_t kMaxParseDiagnostics = 25;

// Parses `.tasc` text. Cross-caremap references (nested refs, links) are
// left for resolve_refs and the validator; everything local to a caremap is
// checked here.
ParseResult parse(std::string_view text, std::string_view file = "<input>");

// A lone criterion expression, e.g. `glucose > 7.0 mmol/L`.
// Throws Error("ParseError").
Criterion parse_criterion(std::string_view text);

// Ids the parser gives id-less edges, in declaration order: `<from>-<to>`,
// then `-2`, `-3`, ... skipping anything in `taken`.
std::vector<std::string> implicit_edge_ids(
    const std::vector<std::pair<std::string, std::string>>& endpoints,
    std::set<std::string> taken);

// Canonical text form: caremaps by id, nodes by kind then id, edges by id.
std::string serialize(const CaremapSet& set);

// Schema-versioned canonical JSON (`"tasc_schema": 1`, sorted keys).
nlohmann::json to_json_value(const CaremapSet& set);
nlohmann::json criterion_to_json(const Criterion& c);
std::string to_json(const CaremapSet& set);

}  // namespace tasc
