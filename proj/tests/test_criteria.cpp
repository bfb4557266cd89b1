// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include "doctest.h"

#include "oracles.hpp"
#include "tasc/criteria.hpp"
#include "tasc/dsl.hpp"
#include "tasc/error.hpp"

using namespace tasc;

namespace {

Bindings with(const std::string& var, std::vector<double> values, std::optional<std::string> unit = std::nullopt) {
  Bindings b;
  for (double v : values) b.observe(var, v, unit);
  return b;
}

std::string code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST_CASE("strict threshold comparison") {
  auto c = parse_criterion("glucose > 7.0 mmol/L");
  CHECK(eval(c, with("glucose", {7.4}, "mmol/L")) == Tri::True);
  CHECK(eval(c, with("glucose", {7.0}, "mmol/L")) == Tri::False);
  CHECK(eval(c, with("glucose", {6.1}, "mmol/L")) == Tri::False);
  CHECK(eval(c, Bindings{}) == Tri::Unknown);
}

TEST_CASE("latest value is the evaluation value") {
  auto c = parse_criterion("glucose > 7.0 mmol/L");
  CHECK(eval(c, with("glucose", {8.0, 6.0}, "mmol/L")) == Tri::False);
  CHECK(eval(c, with("glucose", {6.0, 8.0}, "mmol/L")) == Tri::True);
}

TEST_CASE("units must match exactly") {
  auto c = parse_criterion("glucose > 7.0 mmol/L");
  CHECK(code_of([&] { (void)eval(c, with("glucose", {8.0}, "mg/dL")); }) == "UnitMismatch");
  CHECK(code_of([&] { (void)eval(c, with("glucose", {8.0})); }) == "UnitMismatch");
  auto bare = parse_criterion("score >= 3");
  CHECK(code_of([&] { (void)eval(bare, with("score", {4}, "pts")); }) == "UnitMismatch");
  CHECK(eval(bare, with("score", {3})) == Tri::True);
}

TEST_CASE("type mismatches") {
  Bindings b;
  b.observe("progress", std::string("normal"));
  CHECK(eval(parse_criterion("progress == normal"), b) == Tri::True);
  CHECK(eval(parse_criterion("progress != normal"), b) == Tri::False);
  CHECK(code_of([&] { (void)eval(parse_criterion("progress > 3"), b); }) == "TypeMismatch");
}

TEST_CASE("inclusive range") {
  auto c = parse_criterion("hba1c in [6.5, 8.0] %");
  CHECK(eval(c, with("hba1c", {6.5}, "%")) == Tri::True);
  CHECK(eval(c, with("hba1c", {8.0}, "%")) == Tri::True);
  CHECK(eval(c, with("hba1c", {8.01}, "%")) == Tri::False);
  CHECK(eval(c, with("hba1c", {6.4}, "%")) == Tri::False);
}

TEST_CASE("consecutive_above over histories") {
  auto c = parse_criterion("consecutive_above(glucose, 7.0, 2)");
  CHECK(eval(c, with("glucose", {6.8, 7.2, 7.5})) == Tri::True);
  CHECK(eval(c, with("glucose", {7.2, 6.8, 7.5})) == Tri::False);
  CHECK(eval(c, with("glucose", {7.0, 7.5})) == Tri::False);
  CHECK(eval(c, with("glucose", {7.5})) == Tri::False);
  CHECK(eval(c, Bindings{}) == Tri::Unknown);
}

TEST_CASE("consecutive_above matches the sliding-window oracle") {
  std::mt19937_64 gen(2024);
  auto c = parse_criterion("consecutive_above(glucose, 7.0, 3)");
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> h(gen() % 9);
    for (auto& v : h) v = 6.6 + 0.1 * static_cast<double>(gen() % 9);
    Tri expect = h.empty() ? Tri::Unknown : (oracle::sliding_window_above(h, 7.0, 3) ? Tri::True : Tri::False);
    CHECK(eval(c, with("glucose", h)) == expect);
  }
}

TEST_CASE("predicate threshold units") {
  auto c = parse_criterion("consecutive_above(glucose, 7.0 mmol/L, 2)");
  CHECK(eval(c, with("glucose", {7.2, 7.5}, "mmol/L")) == Tri::True);
  CHECK(code_of([&] { (void)eval(c, with("glucose", {7.2, 7.5})); }) == "UnitMismatch");
}

TEST_CASE("count_above and consecutive_below") {
  CHECK(eval(parse_criterion("count_above(bp, 140, 2)"), with("bp", {150, 120, 145})) == Tri::True);
  CHECK(eval(parse_criterion("count_above(bp, 140, 3)"), with("bp", {150, 120, 145})) == Tri::False);
  CHECK(eval(parse_criterion("consecutive_below(bp, 100, 2)"), with("bp", {90, 95})) == Tri::True);
}

TEST_CASE("predicate argument errors") {
  Bindings b = with("g", {1.0});
  CHECK(code_of([&] { (void)eval(parse_criterion("consecutive_above(g, 7.0)"), b); }) == "InvalidPredicateArgs");
  CHECK(code_of([&] { (void)eval(parse_criterion("consecutive_above(g, 7.0, 0)"), b); }) == "InvalidPredicateArgs");
  CHECK(code_of([&] { (void)eval(parse_criterion("consecutive_above(g, 7.0, 1.5)"), b); }) == "InvalidPredicateArgs");
  CHECK(code_of([&] { (void)eval(parse_criterion("mystery(g, 1, 2)"), b); }) == "UnknownPredicate");
}

TEST_CASE("custom predicates can be registered") {
  PredicateRegistry r;
  r.add("always", [](std::span<const Literal>, const Bindings&) { return Tri::True; });
  CHECK(eval(parse_criterion("always()"), Bindings{}, r) == Tri::True);
  CHECK(r.find("never") == nullptr);
}

TEST_CASE("kleene truth tables match the lattice oracle") {
  const Tri all[] = {Tri::False, Tri::Unknown, Tri::True};
  auto k = [](Tri t) { return t == Tri::False ? oracle::K::F : t == Tri::True ? oracle::K::T : oracle::K::U; };
  for (Tri a : all) {
    for (Tri b : all) {
      CHECK(k(tri_and(a, b)) == oracle::kleene_and(k(a), k(b)));
      CHECK(k(tri_or(a, b)) == oracle::kleene_or(k(a), k(b)));
    }
  }
  CHECK(tri_not(Tri::True) == Tri::False);
  CHECK(tri_not(Tri::False) == Tri::True);
  CHECK(tri_not(Tri::Unknown) == Tri::Unknown);
}

TEST_CASE("boolean operators propagate unknown through evaluation") {
  Bindings b = with("x", {10});
  CHECK(eval(parse_criterion("x > 5 or y > 1"), b) == Tri::True);
  CHECK(eval(parse_criterion("x > 50 or y > 1"), b) == Tri::Unknown);
  CHECK(eval(parse_criterion("x > 50 and y > 1"), b) == Tri::False);
  CHECK(eval(parse_criterion("x > 5 and y > 1"), b) == Tri::Unknown);
  CHECK(eval(parse_criterion("not y > 1"), b) == Tri::Unknown);
  CHECK(eval(parse_criterion("not x > 50"), b) == Tri::True);
}

TEST_CASE("select_branch") {
  auto gt5 = parse_criterion("x > 5");
  auto le5 = parse_criterion("x <= 5");
  auto gt3 = parse_criterion("x > 3");
  auto other = Criterion::otherwise();

  SUBCASE("otherwise taken when nothing else holds") {
    BranchOption opts[] = {{"A", &gt5}, {"B", &other}};
    auto s = select_branch(opts, with("x", {3}));
    CHECK(s.kind == Selection::Kind::Chosen);
    CHECK(s.edges == std::vector<std::string>{"B"});
  }
  SUBCASE("partition") {
    BranchOption opts[] = {{"A", &gt5}, {"B", &le5}};
    auto s = select_branch(opts, with("x", {7}));
    CHECK(s.kind == Selection::Kind::Chosen);
    CHECK(s.edges == std::vector<std::string>{"A"});
  }
  SUBCASE("overlap is ambiguous") {
    BranchOption opts[] = {{"A", &gt5}, {"B", &gt3}};
    auto s = select_branch(opts, with("x", {7}));
    CHECK(s.kind == Selection::Kind::Ambiguous);
    CHECK(s.edges == std::vector<std::string>{"A", "B"});
  }
  SUBCASE("gap without otherwise") {
    auto lt2 = parse_criterion("x < 2");
    BranchOption opts[] = {{"A", &gt5}, {"B", &lt2}};
    CHECK(select_branch(opts, with("x", {3})).kind == Selection::Kind::NoneMatch);
  }
  SUBCASE("unbound variable") {
    BranchOption opts[] = {{"A", &gt5}, {"B", &other}};
    auto s = select_branch(opts, Bindings{});
    CHECK(s.kind == Selection::Kind::Undetermined);
    CHECK(s.vars == std::vector<std::string>{"x"});
  }
}

TEST_CASE("to_string round-trips through the parser") {
  const char* texts[] = {
      "glucose > 7.0 mmol/L",
      "x <= 5",
      "progress == delayed_second_stage",
      "hba1c in [6.5, 8.0] %",
      "consecutive_above(glucose, 7.0 mmol/L, 2)",
      "a > 1 and b < 2 and c == 3",
      "(a > 1 or b < 2) and not c == 3",
      "a > 1 or (b < 2 and c >= 3)",
  };
  for (const char* t : texts) {
    auto c = parse_criterion(t);
    CHECK(to_string(c) == t);
    CHECK(parse_criterion(to_string(c)) == c);
  }
  CHECK(to_string(Criterion::otherwise()) == "otherwise");
}

TEST_CASE("number formatting keeps the literal style") {
  CHECK(to_string(parse_criterion("x > 2")) == "x > 2");
  CHECK(to_string(parse_criterion("x > 2.0")) == "x > 2.0");
  CHECK(to_string(parse_criterion("x > -0.25")) == "x > -0.25");
}

TEST_CASE("referenced variables") {
  auto c = parse_criterion("a > 1 and consecutive_above(g, 7.0, 2) or not b == yes");
  CHECK(referenced_variables(c) == std::set<std::string>{"a", "b", "g"});
}

TEST_CASE("nested otherwise is a parse error") {
  CHECK(code_of([] { (void)parse_criterion("x > 1 or otherwise"); }) == "ParseError");
  CHECK(code_of([] { (void)parse_criterion("x >"); }) == "ParseError");
  CHECK(code_of([] { (void)parse_criterion("x in [5, 1]"); }) == "ParseError");
}
