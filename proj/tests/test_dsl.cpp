// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <random>
#include <sstream>

#include "doctest.h"

#include "support.hpp"
#include "tasc/dsl.hpp"

using namespace tasc;
using namespace tasc::testing;

namespace {

bool has_code(const ParseResult& r, std::string_view code) {
  return std::any_of(r.diagnostics.begin(), r.diagnostics.end(),
                     [&](const ParseDiagnostic& d) { return d.code == code; });
}

const char* kCorpus[] = {"notation_coverage.tasc", "gdm.tasc", "labour_birth.tasc"};

}  // namespace

TEST_CASE("smallest valid map") {
  auto r = parse(R"(caremap "m" { entry s; exit e; s -> e })");
  REQUIRE(r.ok());
  const auto& m = r.set->caremaps.at("m");
  CHECK(m.nodes.size() == 2);
  CHECK(m.edges.size() == 1);
  CHECK(m.title == "m");
  CHECK(m.edges[0].id == "s-e");
}

TEST_CASE("decision with threshold and otherwise") {
  auto set = parse_ok(R"(caremap m {
  entry s
  decision d "High glucose?"
  activity insulin "IV insulin"
  activity diet "Diet"
  exit e
  s -> d
  d -> insulin when glucose > 7.0 mmol/L
  d -> diet otherwise
  insulin -> e
  diet -> e
})");
  const auto& m = set.caremaps.at("m");
  CHECK(m.find_node("d")->kind == NodeKind::Decision);
  auto out = m.out_edges("d");
  REQUIRE(out.size() == 2);
  CHECK(out[0]->criterion.has_value());
  CHECK(out[1]->criterion.has_value());
  CHECK(to_string(*m.find_edge("d-insulin")->criterion) == "glucose > 7.0 mmol/L");
  CHECK(m.find_edge("d-diet")->criterion->is_otherwise());
}

TEST_CASE("undeclared node reference points at the reference") {
  auto r = parse("caremap m {\n  entry s\n  exit e\n  s -> ghost\n}\n", "f.tasc");
  CHECK_FALSE(r.ok());
  REQUIRE(has_code(r, "E-UNDEF"));
  auto d = *std::find_if(r.diagnostics.begin(), r.diagnostics.end(),
                         [](const ParseDiagnostic& x) { return x.code == "E-UNDEF"; });
  CHECK(d.span.file == "f.tasc");
  CHECK(d.span.line == 4);
  CHECK(d.span.column == 8);
  CHECK(format(d).rfind("f.tasc:4:8: error[E-UNDEF]:", 0) == 0);
}

TEST_CASE("local diagnostics") {
  CHECK(has_code(parse("caremap m { entry s\n entry s\n exit e\n s -> e }"), "E-DUP"));
  CHECK(has_code(parse("caremap m { entry s\n exit e\n x: s -> e\n x: s -> e }"), "E-DUP"));
  CHECK(has_code(parse("caremap m { entry s\n exit e\n s -> e\n s -> e }"), "E-DUP"));
  CHECK(has_code(parse("caremap m { entry s\n exit e\n s => e }"), "E-SYNTAX"));
  CHECK(has_code(parse("caremap m { meta { date \"May 2018\" }\n entry s\n exit e\n s -> e }"), "E-DATE"));
  CHECK(has_code(parse("caremap m { entry s\n activity a \"A\" [aspect: therapy]\n exit e\n s -> a\n a -> e }"),
                 "E-ASPECT"));
  CHECK(has_code(parse("caremap m { entry s\n activity a \"A\" [monitoring, class: set_goals]\n exit e\n"
                       " s -> a\n a -> e }"),
                 "E-CONTENT"));
  CHECK(has_code(parse("caremap m { entry s\n decision d \"D\"\n exit e\n exit f\n"
                       " d -> e when x > 1 or otherwise\n s -> d\n d -> f otherwise }"),
                 "E-OTHERWISE"));
}

TEST_CASE("diagnostics are capped") {
  std::string text = "caremap m { entry s\n exit e\n";
  for (int i = 0; i < 60; ++i) text += " s -> ghost" + std::to_string(i) + "\n";
  text += "}";
  auto r = parse(text);
  CHECK_FALSE(r.ok());
  CHECK(r.diagnostics.size() <= kMaxParseDiagnostics);
}

TEST_CASE("implicit edge ids") {
  auto ids = implicit_edge_ids({{"a", "b"}, {"a", "b"}, {"a", "c"}, {"a", "b"}}, {"a-b-2"});
  CHECK(ids == std::vector<std::string>{"a-b", "a-b-3", "a-c", "a-b-4"});
}

TEST_CASE("serialize is idempotent for the corpus") {
  for (const char* name : kCorpus) {
    CAPTURE(name);
    auto once = serialize(load_corpus(name));
    auto twice = serialize(parse_ok(once));
    CHECK(once == twice);
  }
}

TEST_CASE("serialization ignores declaration order") {
  // Shuffle the statement lines inside each caremap body.
  auto text = read_file(corpus_path("labour_birth.tasc"));
  auto canonical = serialize(parse_ok(text));
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  auto body_begin = std::find_if(lines.begin(), lines.end(), [](const std::string& l) { return l == "  }"; }) + 1;
  auto body_end = lines.end() - 1;
  std::mt19937 gen(5);
  for (int round = 0; round < 20; ++round) {
    std::shuffle(body_begin, body_end, gen);
    std::string permuted;
    for (const auto& l : lines) permuted += l + "\n";
    CHECK(serialize(parse_ok(permuted)) == canonical);
  }
}

TEST_CASE("coverage file round-trips losslessly") {
  auto a = load_corpus("notation_coverage.tasc");
  auto b = parse_ok(serialize(a));
  CHECK(structurally_equal(a, b));
  const auto& main = a.caremaps.at("coverage_main");
  std::set<NodeKind> kinds;
  for (const auto& n : main.nodes) kinds.insert(n.kind);
  CHECK(kinds.size() == 7);
  CHECK(a.links.size() == 1);
  CHECK(main.lifecycle.evidence_refs.size() == 2);
  CHECK(main.find_node("history")->duration.has_value());
  CHECK(main.find_node("prescribe")->annotation == "per local formulary");
  CHECK(main.find_edge("on_target") != nullptr);
}

TEST_CASE("json form") {
  auto minimal = nlohmann::json::parse(to_json(parse_ok("caremap m { entry s\n exit e\n s -> e }")));
  CHECK(minimal["tasc_schema"] == 1);
  CHECK(minimal["caremaps"].size() == 1);
  CHECK(minimal["caremaps"][0]["nodes"].size() == 2);

  auto gdm = load_corpus("gdm.tasc");
  auto j = nlohmann::json::parse(to_json(gdm));
  CHECK(j["caremaps"].size() == 3);
  CHECK(j["links"].size() == 2);
  CHECK(to_json(gdm) == to_json(gdm));
}

TEST_CASE("utf-8 labels survive") {
  auto set = parse_ok("caremap m { entry s \"Début\"\n exit e \"Fin – sortie\"\n s -> e }");
  CHECK(set.caremaps.at("m").find_node("s")->label == "Début");
  CHECK(serialize(parse_ok(serialize(set))) == serialize(set));
}

TEST_CASE("invalid utf-8 is rejected") {
  auto r = parse("caremap m { entry s \"\xff\"\n exit e\n s -> e }");
  CHECK(has_code(r, "E-UTF8"));
}
