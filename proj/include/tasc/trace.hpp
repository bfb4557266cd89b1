// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "tasc/criteria.hpp"

namespace tasc {

struct TraceEvent {
  enum class Kind { ActivityDone, Observation, BranchTaken };

  Kind kind = Kind::ActivityDone;
  std::string ref;   // ActivityDone: node id or label; BranchTaken: decision id
  std::string edge;  // BranchTaken
  std::string var;   // Observation
  Value value;
  std::optional<std::string> unit;
  std::optional<long long> step;     // integer `at`
  std::optional<std::string> time;   // string `at`

  static TraceEvent activity(std::string ref, std::optional<long long> step = std::nullopt);
  static TraceEvent observation(std::string var, Value value, std::optional<std::string> unit = std::nullopt,
                                std::optional<long long> step = std::nullopt);
  static TraceEvent branch(std::string decision, std::string edge, std::optional<long long> step = std::nullopt);

  bool operator==(const TraceEvent&) const = default;
};

struct PatientTrace {
  std::string trace_id;
  std::vector<TraceEvent> events;

  bool operator==(const PatientTrace&) const = default;
};

nlohmann::json to_json(const TraceEvent& e);
nlohmann::json to_json(const PatientTrace& t);
// Throws Error("TraceFormat").
TraceEvent event_from_json(const nlohmann::json& j);
PatientTrace trace_from_json(const nlohmann::json& j);

// One compact JSON object, no newline.
std::string to_jsonl_line(const PatientTrace& t);

struct TraceLoadError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct TraceFile {
  std::vector<std::string> comments;  // `#` lines, without the marker
  std::vector<PatientTrace> traces;
  std::vector<TraceLoadError> errors;
};

// Malformed lines are collected in `errors`; blank lines are skipped.
TraceFile read_jsonl(std::istream& in);

}  // namespace tasc
