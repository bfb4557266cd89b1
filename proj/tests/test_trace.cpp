// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#include <sstream>

#include "doctest.h"

#include "tasc/error.hpp"
#include "tasc/trace.hpp"

using namespace tasc;

TEST_CASE("events round-trip through json") {
  PatientTrace t{"p1",
                 {TraceEvent::activity("admit", 0), TraceEvent::observation("glucose", 7.2, "mmol/L", 1),
                  TraceEvent::observation("progress", std::string("normal")), TraceEvent::branch("mode", "mode-svb", 3)}};
  auto line = to_jsonl_line(t);
  CHECK(line.find('\n') == std::string::npos);
  CHECK(trace_from_json(nlohmann::json::parse(line)) == t);
}

TEST_CASE("timestamps may be strings") {
  auto e = event_from_json(nlohmann::json::parse(R"({"type":"activity","ref":"a","at":"2018-05-29T10:00"})"));
  CHECK(e.time == "2018-05-29T10:00");
  CHECK_FALSE(e.step.has_value());
  CHECK(to_json(e)["at"] == "2018-05-29T10:00");
}

TEST_CASE("null unit is accepted") {
  auto e = event_from_json(nlohmann::json::parse(R"({"type":"observation","var":"x","value":3,"unit":null})"));
  CHECK_FALSE(e.unit.has_value());
  CHECK(std::get<double>(e.value) == 3.0);
}

TEST_CASE("malformed events") {
  const char* bad[] = {
      R"({"ref":"a"})",
      R"({"type":"teleport","ref":"a"})",
      R"({"type":"activity"})",
      R"({"type":"branch","decision":"d"})",
      R"({"type":"observation","var":"x","value":[1]})",
      R"({"type":"activity","ref":"a","at":true})",
  };
  for (const char* b : bad) {
    CAPTURE(b);
    try {
      (void)event_from_json(nlohmann::json::parse(b));
      FAIL("accepted");
    } catch (const Error& e) {
      CHECK(e.code() == "TraceFormat");
    }
  }
}

TEST_CASE("jsonl reader") {
  std::istringstream in(
      "# tasc-synth v1 seed=1\n"
      "\n"
      R"({"trace_id":"a","events":[]})" "\n"
      "not json\n"
      R"({"trace_id":"b","events":[{"type":"activity","ref":"x"}]})" "\n"
      R"({"events":[]})" "\n");
  auto f = read_jsonl(in);
  REQUIRE(f.comments.size() == 1);
  CHECK(f.comments[0] == "tasc-synth v1 seed=1");
  REQUIRE(f.traces.size() == 2);
  CHECK(f.traces[1].events.size() == 1);
  REQUIRE(f.errors.size() == 2);
  CHECK(f.errors[0].line == 4);
  CHECK(f.errors[1].line == 6);
}
