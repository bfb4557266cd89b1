// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <set>

#include "doctest.h"

#include "oracles.hpp"
#include "support.hpp"
#include "tasc/error.hpp"
#include "tasc/model.hpp"

using namespace tasc;
using tasc::testing::parse_ok;

namespace {

const char* kLoop6 = R"(
caremap loop6 {
  entry s
  activity treat "Treat" [treatment]
  activity monitor "Monitor" [monitoring]
  decision ok "Controlled?"
  activity adjust "Adjust" [treatment]
  exit e
  s -> treat
  treat -> monitor
  monitor -> ok
  ok -> e when hba1c < 7 %
  ok -> adjust otherwise
  adjust -> monitor
}
)";

std::set<oracle::Path> as_set(const std::vector<std::vector<std::string>>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("successors") {
  auto set = parse_ok(R"(
caremap m {
  entry s
  decision d "Which?"
  activity a "A"
  activity b "B"
  activity c "C"
  exit e
  s -> d
  d -> a when x < 1
  d -> b when x in [1, 2]
  d -> c otherwise
  a -> e
  b -> e
  c -> e
}
)");
  const auto& m = set.caremaps.at("m");
  CHECK(successors(m, "e").empty());
  auto succ = successors(m, "d");
  REQUIRE(succ.size() == 3);
  for (const auto& s : succ) CHECK(s.edge->criterion.has_value());
  CHECK(succ[0].edge->id == "d-a");
  CHECK(succ[1].node->id == "b");
  CHECK_THROWS_AS(successors(m, "nope"), Error);
  try {
    (void)successors(m, "nope");
  } catch (const Error& e) {
    CHECK(e.code() == "UnknownNode");
  }
  auto again = successors(m, "d");
  for (std::size_t i = 0; i < succ.size(); ++i) CHECK(succ[i].edge == again[i].edge);
}

TEST_CASE("enumerate_paths on small shapes") {
  auto lin = parse_ok("caremap m { entry s\n activity a1 \"A\"\n exit e\n s -> a1\n a1 -> e }");
  auto p = enumerate_paths(lin.caremaps.at("m"), 0);
  REQUIRE(p.size() == 1);
  CHECK(p[0] == std::vector<std::string>{"s", "a1", "e"});

  auto fork = parse_ok(R"(caremap m {
  entry s
  decision d "D"
  exit e1
  exit e2
  s -> d
  d -> e1 when x > 1
  d -> e2 otherwise
})");
  auto q = enumerate_paths(fork.caremaps.at("m"), 0);
  CHECK(q.size() == 2);
  for (const auto& path : q) {
    CHECK(path.front() == "s");
    CHECK((path.back() == "e1" || path.back() == "e2"));
  }
}

TEST_CASE("enumerate_paths agrees with the DFS oracle on a monitoring loop") {
  auto set = parse_ok(kLoop6);
  const auto& m = set.caremaps.at("loop6");
  for (int bound = 0; bound <= 4; ++bound) {
    auto got = enumerate_paths(m, bound);
    auto want = oracle::all_paths(m, bound);
    CHECK(got.size() == want.size());
    CHECK(as_set(got) == want);
  }
  CHECK(enumerate_paths(m, 1).size() == 2);
}

TEST_CASE("enumerate_paths ordering is stable") {
  auto set = parse_ok(kLoop6);
  const auto& m = set.caremaps.at("loop6");
  CHECK(enumerate_paths(m, 3) == enumerate_paths(m, 3));
}

TEST_CASE("enumerate_paths errors") {
  auto set = parse_ok(kLoop6);
  try {
    (void)enumerate_paths(set.caremaps.at("loop6"), 50, 10);
    FAIL("expected PathExplosion");
  } catch (const Error& e) {
    CHECK(e.code() == "PathExplosion");
  }
  auto two = parse_ok("caremap m { entry s\n entry t\n exit e\n s -> e\n t -> e }");
  try {
    (void)enumerate_paths(two.caremaps.at("m"), 0);
    FAIL("expected NoUniqueEntry");
  } catch (const Error& e) {
    CHECK(e.code() == "NoUniqueEntry");
  }
}

TEST_CASE("resolve_refs") {
  auto ok = parse_ok("caremap m { entry s\n exit e\n s -> e }");
  CHECK(resolve_refs(ok).empty());

  auto dangling = parse_ok(R"(caremap m {
  entry s
  nested activity n "N" ref absent
  exit e
  s -> n
  n -> e
})");
  auto errs = resolve_refs(dangling);
  REQUIRE(errs.size() == 1);
  CHECK(errs[0].kind == ReferenceError::Kind::DanglingNestedRef);

  auto cyc = parse_ok(R"(
caremap a {
  entry s
  nested activity n "N" ref b
  exit e
  s -> n
  n -> e
}
caremap b {
  entry s
  nested activity n "N" ref a
  exit e
  s -> n
  n -> e
})");
  auto cycle_errs = resolve_refs(cyc);
  CHECK(std::any_of(cycle_errs.begin(), cycle_errs.end(),
                    [](const ReferenceError& r) { return r.kind == ReferenceError::Kind::NestingCycle; }));

  auto link = parse_ok("caremap a { entry s\n exit e\n s -> e }\nlink a.e -> b.s");
  auto link_errs = resolve_refs(link);
  REQUIRE(link_errs.size() == 1);
  CHECK(link_errs[0].kind == ReferenceError::Kind::DanglingLink);
}

TEST_CASE("content-type table") {
  CHECK(implied_content_type(ActivityClassKind::SetGoals) == ContentType::Treatment);
  CHECK(implied_content_type(ActivityClassKind::WritePrescription) == ContentType::Treatment);
  CHECK(implied_content_type(ActivityClassKind::CollectPatientHistory) == ContentType::Diagnosis);
  CHECK(implied_content_type(ActivityClassKind::EvaluateGoals) == ContentType::Monitoring);
  CHECK_FALSE(implied_content_type(ActivityClassKind::Other).has_value());
  CHECK(allowed_content_types(ActivityClassKind::Other).empty());
  // Appears in both the diagnosis and monitoring rows.
  CHECK(allowed_content_types(ActivityClassKind::ClinicalExamination).size() == 2);
  CHECK_FALSE(implied_content_type(ActivityClassKind::ClinicalExamination).has_value());

  for (auto k : {ActivityClassKind::ReviewPatientRecords, ActivityClassKind::AskLifestyleQuestions,
                 ActivityClassKind::DiseaseAssessment, ActivityClassKind::ConsiderComplications}) {
    CHECK(activity_class_from(to_string(k)) == k);
  }
}

TEST_CASE("keyword tables round-trip") {
  for (auto k : kAllNodeKinds) CHECK_FALSE(to_string(k).empty());
  for (auto t : {ContentType::Diagnosis, ContentType::Treatment, ContentType::Monitoring})
    CHECK(content_type_from(to_string(t)) == t);
  for (auto a : {DecisionAspect::ClinicalEvidence, DecisionAspect::Diagnosis, DecisionAspect::Prognosis,
                 DecisionAspect::Therapy, DecisionAspect::Prevention, DecisionAspect::Education})
    CHECK(decision_aspect_from(to_string(a)) == a);
  CHECK_FALSE(decision_aspect_from("astrology").has_value());
}

TEST_CASE("structural equality ignores declaration order") {
  auto a = parse_ok("caremap m { entry s\n activity x \"X\"\n exit e\n s -> x\n x -> e }");
  auto b = parse_ok("caremap m { exit e\n activity x \"X\"\n entry s\n x -> e\n s -> x }");
  CHECK(structurally_equal(a, b));
  auto c = parse_ok("caremap m { entry s\n activity x \"Y\"\n exit e\n s -> x\n x -> e }");
  CHECK_FALSE(structurally_equal(a, c));
}
