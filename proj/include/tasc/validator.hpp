// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "tasc/dsl.hpp"
#include "tasc/model.hpp"

namespace tasc {

// Ordered so that enum order equals the lexicographic order of the codes.
enum class RuleCode {
  S1,  // exactly one entry
  S2,  // at least one exit
  S3,  // every node reachable from the entry
  S4,  // every node reaches an exit or exclusion
  S5,  // decisions: out-degree >= 2, every out-edge criterioned, <= 1 otherwise
  S6,  // criteria only on decision out-edges
  S7,  // entry in-degree 0, exit/exclusion out-degree 0
  S8,  // nested refs resolve, nesting acyclic
  S9,  // links join an exit to another caremap's entry
  W_CNT,   // content-order anomaly
  W_EXH,   // decision without an otherwise branch
  W_FREE,  // fan-out from a non-decision node
  W_LFC,   // lifecycle metadata incomplete
};

std::string_view to_string(RuleCode c);

struct Diagnostic {
  Severity severity = Severity::Error;
  RuleCode code = RuleCode::S1;
  std::string caremap;
  std::vector<std::string> ids;  // never empty
  std::string message;
};

struct ValidatorConfig {
  bool allow_multiple_entries = false;  // S1 becomes a warning for > 1 entries
  bool strict = false;                  // warnings become errors
};

// All rules over every caremap plus the set-level links, sorted by
// (caremap, code, first id, message).
std::vector<Diagnostic> validate(const CaremapSet& set, const ValidatorConfig& config = {});

// W-CNT: diagnosis-typed nodes reachable only through treatment or
// monitoring typed nodes.
std::vector<Diagnostic> content_lint(const Caremap& caremap);

// W-LFC: missing version, date or evidence_refs.
std::vector<Diagnostic> lifecycle_lint(const Caremap& caremap);

bool has_errors(std::span<const Diagnostic> diags);

// `caremap: error[S5] d1: message`
std::string format(const Diagnostic& d);
nlohmann::json to_json(std::span<const Diagnostic> diags);

}  // namespace tasc
