// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#include "tasc/trace.hpp"

#include <istream>

#include "tasc/error.hpp"

namespace tasc {

using nlohmann::json;

TraceEvent TraceEvent::activity(std::string ref, std::optional<long long> step) {
  TraceEvent e;
  e.kind = Kind::ActivityDone;
  e.ref = std::move(ref);
  e.step = step;
  return e;
}

TraceEvent TraceEvent::observation(std::string var, Value value, std::optional<std::string> unit,
                                   std::optional<long long> step) {
  TraceEvent e;
  e.kind = Kind::Observation;
  e.var = std::move(var);
  e.value = std::move(value);
  e.unit = std::move(unit);
  e.step = step;
  return e;
}

TraceEvent TraceEvent::branch(std::string decision, std::string edge, std::optional<long long> step) {
  TraceEvent e;
  e.kind = Kind::BranchTaken;
  e.ref = std::move(decision);
  e.edge = std::move(edge);
  e.step = step;
  return e;
}

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error("TraceFormat", msg); }

std::string require_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) fail(std::string("event needs a string '") + key + "'");
  return it->get<std::string>();
}

void read_at(const json& j, TraceEvent& e) {
  auto it = j.find("at");
  if (it == j.end() || it->is_null()) return;
  if (it->is_number_integer()) {
    e.step = it->get<long long>();
  } else if (it->is_string()) {
    e.time = it->get<std::string>();
  } else {
    fail("'at' must be an integer step or a string timestamp");
  }
}

}  // namespace

json to_json(const TraceEvent& e) {
  json j;
  switch (e.kind) {
    case TraceEvent::Kind::ActivityDone:
      j["type"] = "activity";
      j["ref"] = e.ref;
      break;
    case TraceEvent::Kind::Observation:
      j["type"] = "observation";
      j["var"] = e.var;
      if (const auto* d = std::get_if<double>(&e.value)) {
        j["value"] = *d;
      } else {
        j["value"] = std::get<std::string>(e.value);
      }
      j["unit"] = e.unit ? json(*e.unit) : json(nullptr);
      break;
    case TraceEvent::Kind::BranchTaken:
      j["type"] = "branch";
      j["decision"] = e.ref;
      j["edge"] = e.edge;
      break;
  }
  if (e.step) {
    j["at"] = *e.step;
  } else if (e.time) {
    j["at"] = *e.time;
  }
  return j;
}

json to_json(const PatientTrace& t) {
  json events = json::array();
  for (const auto& e : t.events) events.push_back(to_json(e));
  return json{{"trace_id", t.trace_id}, {"events", std::move(events)}};
}

TraceEvent event_from_json(const json& j) {
  if (!j.is_object()) fail("event must be an object");
  auto type = require_string(j, "type");
  TraceEvent e;
  if (type == "activity") {
    e.kind = TraceEvent::Kind::ActivityDone;
    e.ref = require_string(j, "ref");
  } else if (type == "observation") {
    e.kind = TraceEvent::Kind::Observation;
    e.var = require_string(j, "var");
    auto v = j.find("value");
    if (v == j.end()) fail("observation needs a 'value'");
    if (v->is_number()) {
      e.value = v->get<double>();
    } else if (v->is_string()) {
      e.value = v->get<std::string>();
    } else if (v->is_boolean()) {
      e.value = std::string(v->get<bool>() ? "true" : "false");
    } else {
      fail("observation value must be a number, string or boolean");
    }
    auto u = j.find("unit");
    if (u != j.end() && !u->is_null()) {
      if (!u->is_string()) fail("'unit' must be a string");
      e.unit = u->get<std::string>();
    }
  } else if (type == "branch") {
    e.kind = TraceEvent::Kind::BranchTaken;
    e.ref = require_string(j, "decision");
    e.edge = require_string(j, "edge");
  } else {
    fail("unknown event type '" + type + "'");
  }
  read_at(j, e);
  return e;
}

PatientTrace trace_from_json(const json& j) {
  if (!j.is_object()) fail("trace must be an object");
  PatientTrace t;
  t.trace_id = require_string(j, "trace_id");
  auto it = j.find("events");
  if (it == j.end() || !it->is_array()) fail("trace needs an 'events' array");
  for (const auto& e : *it) t.events.push_back(event_from_json(e));
  return t;
}

std::string to_jsonl_line(const PatientTrace& t) { return to_json(t).dump(); }

TraceFile read_jsonl(std::istream& in) {
  TraceFile out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '#') {
      auto body = line.substr(first + 1);
      if (!body.empty() && body.front() == ' ') body.erase(0, 1);
      out.comments.push_back(std::move(body));
      continue;
    }
    try {
      out.traces.push_back(trace_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      out.errors.push_back({lineno, e.what()});
    } catch (const Error& e) {
      out.errors.push_back({lineno, e.what()});
    }
  }
  return out;
}

}  // namespace tasc
