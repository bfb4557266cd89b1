// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <sstream>

#include "doctest.h"

#include "cli.hpp"
#include "dot_check.hpp"
#include "support.hpp"

using namespace tasc;
using namespace tasc::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args, const std::string& stdin_text = "") {
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  int code = cli::run(args, in, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("tasc-cli-" + std::to_string(::getpid()) + "-" +
                                        std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

void write(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

const std::string kGdm = corpus_path("gdm.tasc");
const std::string kLabour = corpus_path("labour_birth.tasc");
const std::string kCounts = corpus_path("labour_birth_counts.csv");

}  // namespace

TEST_CASE("usage errors") {
  CHECK(run({}).code == cli::kUsage);
  CHECK(run({"frobnicate"}).code == cli::kUsage);
  CHECK(run({"validate"}).code == cli::kUsage);
  CHECK(run({"fmt", kGdm, "--format", "yaml"}).code == cli::kUsage);
  CHECK(run({"--help"}).code == 0);
  auto v = run({"--version"});
  CHECK(v.code == 0);
}

TEST_CASE("validate") {
  auto r = run({"validate", kGdm});
  CHECK(r.code == cli::kOk);
  CHECK(r.out.find("3 caremap(s): 0 error(s), 0 warning(s)") != std::string::npos);

  auto cov = corpus_path("notation_coverage.tasc");
  CHECK(run({"validate", cov}).code == cli::kOk);
  CHECK(run({"validate", cov, "--strict"}).code == cli::kFailures);
  auto j = nlohmann::json::parse(run({"validate", cov, "--format", "json"}).out);
  CHECK(j.size() == 1);
  CHECK(j[0]["code"] == "W-FREE");

  CHECK(run({"validate", "/nonexistent/x.tasc"}).code == cli::kInputError);
  CHECK(run({"validate", "-"}, "caremap m { entry s\n s -> ghost }").code == cli::kInputError);
  CHECK(run({"validate", "-"}, "caremap m { entry s\n exit e }").code == cli::kFailures);
  CHECK(run({"validate", kGdm, kGdm}).code == cli::kInputError);
}

TEST_CASE("fmt") {
  TempDir dir;
  auto canon = run({"fmt", kLabour});
  REQUIRE(canon.code == 0);
  write(dir / "c.tasc", canon.out);
  CHECK(run({"fmt", dir / "c.tasc", "--check"}).code == cli::kOk);

  // Same map with statements in a different order.
  auto permuted = replace_once(canon.out, "  presents -> admit\n", "");
  permuted = replace_once(permuted, "  entry presents", "  presents -> admit\n  entry presents");
  write(dir / "p.tasc", permuted);
  CHECK(run({"fmt", dir / "p.tasc", "--check"}).code == cli::kFailures);
  CHECK(run({"fmt", dir / "p.tasc"}).out == canon.out);

  CHECK(run({"fmt", dir / "p.tasc", "--out", dir / "o.tasc"}).code == 0);
  CHECK(read_file(dir / "o.tasc") == canon.out);
  auto j = nlohmann::json::parse(run({"fmt", kLabour, "--format", "json"}).out);
  CHECK(j["tasc_schema"] == 1);
}

TEST_CASE("render") {
  TempDir dir;
  CHECK(run({"render", kGdm, "--out", dir / "g.dot"}).code == 0);
  auto g = dot::parse(read_file(dir / "g.dot"));
  CHECK(dot::count_clusters(g) == 3);
  CHECK(dot::count_link_edges(g) == 2);
  CHECK(run({"render", kGdm, "--out", "-", "--style", "color"}).out.find("fillcolor") != std::string::npos);
  CHECK(run({"render", kGdm}).code == cli::kUsage);
}

TEST_CASE("paths") {
  auto r = run({"paths", kLabour, "--caremap", "labour_birth"});
  CHECK(r.code == 0);
  CHECK(r.out.find("presents") != std::string::npos);
  auto explode = run({"paths", kGdm, "--caremap", "gdm_management", "--cycle-bound", "40", "--max-paths", "5"});
  CHECK(explode.code == cli::kFailures);
  CHECK(explode.err.find("PathExplosion") != std::string::npos);
  CHECK(run({"paths", kGdm, "--caremap", "nope"}).code != 0);
}

TEST_CASE("ingest, synth, conform, synth-check") {
  TempDir dir;
  auto model = dir / "model.json";
  auto traces = dir / "t.jsonl";
  REQUIRE(run({"ingest", kCounts, "--caremaps", kLabour, "--out", model, "--seed", "42"}).code == 0);
  REQUIRE(run({"synth", kLabour, "--model", model, "--entry", "labour_birth", "-n", "8731", "--seed", "42",
               "--out", traces})
              .code == 0);
  auto text = read_file(traces);
  CHECK(text.rfind("# tasc-synth v1 seed=42 ", 0) == 0);

  auto c = run({"conform", kLabour, "--traces", traces, "--entry", "labour_birth"});
  CHECK(c.code == 0);
  CHECK(c.out.find("8731") != std::string::npos);
  auto cj = nlohmann::json::parse(
      run({"conform", kLabour, "--traces", traces, "--entry", "labour_birth", "--format", "json"}).out);
  CHECK(cj["n"] == 8731);
  CHECK(cj["conformant"] == 8731);

  auto sc = run({"synth-check", kLabour, "--model", model, "--entry", "labour_birth", "--traces", traces});
  CHECK(sc.code == 0);
  CHECK(run({"synth-check", kLabour, "--model", model, "--entry", "labour_birth", "--traces", traces,
             "--tolerance", "0.000001"})
            .code == cli::kFailures);

  // A non-conformant trace turns the exit code to 1.
  write(dir / "bad.jsonl", R"({"trace_id":"x","events":[{"type":"activity","ref":"postnatal"}]})" "\n");
  CHECK(run({"conform", kLabour, "--traces", dir / "bad.jsonl", "--entry", "labour_birth"}).code == cli::kFailures);
  write(dir / "und.jsonl", R"({"trace_id":"x","events":[{"type":"activity","ref":"admit"}]})" "\n");
  CHECK(run({"conform", kLabour, "--traces", dir / "und.jsonl", "--entry", "labour_birth"}).code == cli::kOk);
  CHECK(run({"conform", kLabour, "--traces", dir / "und.jsonl", "--entry", "labour_birth", "--fail-undetermined"})
            .code == cli::kFailures);
}

TEST_CASE("input errors") {
  TempDir dir;
  write(dir / "bad.csv", "caremap,node\n");
  CHECK(run({"ingest", dir / "bad.csv", "--caremaps", kLabour, "--out", dir / "m.json"}).code == cli::kInputError);
  write(dir / "unknown.csv", "caremap,node,edge,count\nlabour_birth,onset,nope,3\n");
  CHECK(run({"ingest", dir / "unknown.csv", "--caremaps", kLabour, "--out", dir / "m.json"}).code ==
        cli::kFailures);
  CHECK_FALSE(fs::exists(dir / "m.json"));
  write(dir / "m.json", "{not json");
  CHECK(run({"synth", kLabour, "--model", dir / "m.json", "--entry", "labour_birth", "-n", "1", "--out", "-"})
            .code == cli::kInputError);
  write(dir / "empty.json", R"({"tasc_model":1,"master_seed":1})");
  auto missing = run({"synth", kLabour, "--model", dir / "empty.json", "--entry", "labour_birth", "-n", "1", "--out", "-"});
  CHECK(missing.code == cli::kFailures);
  CHECK(missing.err.find("MissingAnnotation") != std::string::npos);
}

TEST_CASE("invalid sets are refused before analysis") {
  TempDir dir;
  write(dir / "bad.tasc", "caremap m { entry s\n decision d \"D\"\n exit e\n s -> d\n d -> e when x > 1 }");
  write(dir / "t.jsonl", "");
  CHECK(run({"conform", dir / "bad.tasc", "--traces", dir / "t.jsonl", "--entry", "m"}).code == cli::kFailures);
}
