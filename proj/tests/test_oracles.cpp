// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

// The oracles are only useful if they are right; pin them on cases small
// enough to check by hand.

#include "doctest.h"

#include "oracles.hpp"
#include "support.hpp"

using namespace tasc;
using namespace tasc::testing;

TEST_CASE("sliding window by hand") {
  CHECK(oracle::sliding_window_above({6.8, 7.2, 7.5}, 7.0, 2));
  CHECK_FALSE(oracle::sliding_window_above({7.2, 6.8, 7.5}, 7.0, 2));
  CHECK_FALSE(oracle::sliding_window_above({7.0, 7.0}, 7.0, 2));
  CHECK_FALSE(oracle::sliding_window_above({}, 7.0, 1));
  CHECK(oracle::sliding_window_above({8.0}, 7.0, 1));
}

TEST_CASE("lattice logic by hand") {
  using oracle::K;
  CHECK(oracle::kleene_and(K::T, K::U) == K::U);
  CHECK(oracle::kleene_and(K::F, K::U) == K::F);
  CHECK(oracle::kleene_or(K::T, K::U) == K::T);
  CHECK(oracle::kleene_or(K::F, K::U) == K::U);
}

TEST_CASE("path oracle by hand") {
  auto set = load_data("oracle_loop.tasc");
  const auto& m = set.caremaps.at("oracle_loop");
  // Bound 0: straight to summary, or one adjust then escalation.
  auto p0 = oracle::all_paths(m, 0);
  CHECK(p0.size() == 2);
  CHECK(p0.count({"begin", "start_therapy", "monitor", "control", "summary", "controlled"}) == 1);
  CHECK(p0.count({"begin", "start_therapy", "monitor", "control", "adjust", "review", "escalated"}) == 1);
  // Bound 1: retry or teach once, each followed by summary or escalation.
  CHECK(oracle::all_paths(m, 1).size() == 6);
}

TEST_CASE("projections") {
  auto set = load_data("oracle_branching.tasc");
  const auto& m = set.caremaps.at("oracle_branching");
  auto proj = oracle::project_path(m, {"start", "triage", "assess", "severity", "treat", "observe", "home"});
  CHECK(proj == std::vector<std::string>{"A:triage", "A:assess", "B:severity:moderate", "A:treat", "A:observe"});
  PatientTrace t{"x", {TraceEvent::activity("triage"), TraceEvent::observation("v", 1.0),
                       TraceEvent::branch("severity", "mild")}};
  CHECK(oracle::project_trace(t) == std::vector<std::string>{"A:triage", "B:severity:mild"});
  CHECK(oracle::max_repetition({"A:a", "B:d:x", "A:a", "B:d:y", "B:d:x"}) == 3);
}
