// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#include <sstream>

#include "doctest.h"

#include "support.hpp"
#include "tasc/error.hpp"
#include "tasc/ingest.hpp"

using namespace tasc;
using namespace tasc::testing;

namespace {

const char* kThree = R"(caremap m {
  entry s
  decision d "D"
  exit a
  exit b
  exit c
  s -> d
  x: d -> a when v == 1
  y: d -> b when v == 2
  z: d -> c otherwise
})";

std::string code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

std::map<std::string, double> probs(const TransitionModel& m, const char* node) {
  return std::get<EdgeProbabilities>(m.branches.at({"m", node})).p;
}

}  // namespace

TEST_CASE("counts become probabilities") {
  auto set = parse_ok(R"(caremap m {
  entry s
  decision d "D"
  exit a
  exit b
  s -> d
  d -> a when v > 1
  d -> b otherwise
})");
  std::vector<ContingencyRow> rows = {{"m", "d", "d-a", 250, 0}, {"m", "d", "d-b", 750, 0}};
  auto model = derive_model(rows, set, 9);
  CHECK(model.master_seed == 9);
  CHECK(probs(model, "d").at("d-a") == 0.25);
  CHECK(probs(model, "d").at("d-b") == 0.75);
}

TEST_CASE("rounding residual goes to the first largest count") {
  auto set = parse_ok(kThree);
  std::vector<ContingencyRow> rows = {{"m", "d", "x", 1, 0}, {"m", "d", "y", 1, 0}, {"m", "d", "z", 1, 0}};
  auto p = probs(derive_model(rows, set, 0), "d");
  CHECK(p.at("x") == 0.333333333334);
  CHECK(p.at("y") == 0.333333333333);
  CHECK(p.at("z") == 0.333333333333);
  // Exact on the 1e-12 grid.
  long long units = 0;
  for (const auto& [e, v] : p) units += std::llround(v * 1e12);
  CHECK(units == 1000000000000LL);

  std::vector<ContingencyRow> later = {{"m", "d", "x", 1, 0}, {"m", "d", "z", 2, 0}, {"m", "d", "y", 2, 0}};
  auto q = probs(derive_model(later, set, 0), "d");
  CHECK(q.at("z") == 0.4);
  CHECK(q.at("y") == 0.4);
  CHECK(q.at("x") == 0.2);

  std::vector<ContingencyRow> sevenths = {{"m", "d", "x", 1, 0}, {"m", "d", "y", 3, 0}, {"m", "d", "z", 3, 0}};
  auto r = probs(derive_model(sevenths, set, 0), "d");
  CHECK(r.at("x") == 0.142857142857);
  CHECK(r.at("y") == 0.428571428572);
  CHECK(r.at("z") == 0.428571428571);
}

TEST_CASE("unlisted edges get zero") {
  auto set = parse_ok(kThree);
  std::vector<ContingencyRow> rows = {{"m", "d", "x", 3, 0}, {"m", "d", "y", 1, 0}};
  auto p = probs(derive_model(rows, set, 0), "d");
  CHECK(p.at("z") == 0.0);
  CHECK(p.at("x") == 0.75);
}

TEST_CASE("ingest errors") {
  auto set = parse_ok(kThree);
  CHECK(code_of([&] {
          std::vector<ContingencyRow> rows = {{"m", "d", "w", 1, 0}};
          (void)derive_model(rows, set, 0);
        }) == "UnknownEdge");
  CHECK(code_of([&] {
          std::vector<ContingencyRow> rows = {{"m", "ghost", "x", 1, 0}};
          (void)derive_model(rows, set, 0);
        }) == "UnknownEdge");
  CHECK(code_of([&] {
          std::vector<ContingencyRow> rows = {{"m", "d", "x", 1, 0}, {"m", "d", "x", 2, 0}};
          (void)derive_model(rows, set, 0);
        }) == "DuplicateRow");
  CHECK(code_of([&] {
          std::vector<ContingencyRow> rows = {{"m", "d", "x", 0, 0}, {"m", "d", "y", 0, 0}};
          (void)derive_model(rows, set, 0);
        }) == "ZeroTotal");
}

TEST_CASE("csv reader") {
  std::istringstream in(
      "\xEF\xBB\xBF# counts\n"
      "caremap,node,edge,count\n"
      "\n"
      "m,d,x,5\n"
      "\"m\",\"d\",\"y\",7\n");
  auto rows = read_contingency_csv(in);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].count == 5);
  CHECK(rows[0].line == 4);
  CHECK(rows[1].edge == "y");

  const char* bad[] = {
      "node,edge,count\nd,x,1\n",
      "caremap,node,edge,count\nm,d,x\n",
      "caremap,node,edge,count\nm,d,x,-1\n",
      "caremap,node,edge,count\nm,d,x,1.5\n",
      "caremap,node,edge,count\nm,d,\"x,1\n",
  };
  for (const char* b : bad) {
    CAPTURE(b);
    std::istringstream s(b);
    CHECK(code_of([&] { (void)read_contingency_csv(s); }) == "CsvFormat");
  }
}

TEST_CASE("labour fixture") {
  auto set = load_corpus("labour_birth.tasc");
  std::ifstream f(corpus_path("labour_birth_counts.csv"));
  auto rows = read_contingency_csv(f);
  auto model = derive_model(rows, set, 42);
  CHECK(model.branches.size() == 4);
  const auto& onset = std::get<EdgeProbabilities>(model.branches.at({"labour_birth", "onset"})).p;
  double sum = 0;
  for (const auto& [e, v] : onset) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}
