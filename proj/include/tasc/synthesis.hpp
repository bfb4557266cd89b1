// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "tasc/criteria.hpp"
#include "tasc/graph.hpp"
#include "tasc/model.hpp"
#include "tasc/trace.hpp"

namespace tasc {

struct Distribution {
  enum class Kind { Categorical, Normal, Uniform };
  Kind kind = Kind::Categorical;
  std::vector<Value> values;  // Categorical
  std::vector<double> probs;  // Categorical
  double mu = 0.0, sigma = 1.0;  // Normal
  double a = 0.0, b = 1.0;       // Uniform
};

struct EdgeProbabilities {
  std::map<std::string, double> p;  // edge id -> probability
};

struct VariableSampler {
  std::string var;
  Distribution dist;
  std::optional<std::string> unit;
};

struct Emission {
  std::string var;
  Distribution dist;
  std::optional<std::string> unit;
};

using NodeKey = std::pair<std::string, std::string>;  // (caremap, node)

struct TransitionModel {
  std::uint64_t master_seed = 0;
  std::map<NodeKey, std::variant<EdgeProbabilities, VariableSampler>> branches;
  std::map<NodeKey, std::vector<Emission>> emitters;
};

// Throws Error("ModelFormat").
TransitionModel model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TransitionModel& m);

struct Provenance {
  std::string caremap_sha;  // SHA-256 of the canonical notation
  std::string model_sha;    // SHA-256 of the compact model JSON
  std::string rng{"siphash24-xoshiro256ss"};
  std::string entry;
  std::uint64_t seed = 0;
};

// Compiled machine. Owns a copy of the caremap set; immutable once built.
struct STM {
  struct State {
    enum class Mode { Fixed, Edges, Sampler, Terminal };
    Mode mode = Mode::Terminal;
    std::vector<int> edges;         // Fixed: one; Edges: all out-edges by id
    std::vector<double> cumulative;  // Edges
    std::optional<VariableSampler> sampler;
    std::vector<double> expected;   // per out-edge, Edges and Sampler
    std::vector<Emission> emissions;
    bool branching = false;
  };

  std::shared_ptr<const CaremapSet> set;
  std::shared_ptr<const SetGraph> graph;
  int entry = -1;
  std::vector<State> states;  // indexed like graph nodes
  std::vector<int> terminals;
  Provenance provenance;
  std::size_t step_cap = 10000;
};

// Throws Error with code MissingAnnotation, ProbabilityMass, InescapableCycle
// or InvalidAnnotation.
STM compile_stm(const CaremapSet& set, std::string_view entry_caremap, const TransitionModel& model);

// Trace i depends only on (seed, i). Throws Error("StepCap") if a walk
// exceeds stm.step_cap.
PatientTrace generate_one(const STM& stm, std::uint64_t seed, std::uint64_t index);
std::vector<PatientTrace> generate(const STM& stm, std::size_t n, std::uint64_t seed, int workers = 1);

// `tasc-synth v1 seed=... caremap_sha=... model_sha=... rng=... entry=... n=...`
std::string provenance_header(const STM& stm, std::uint64_t seed, std::size_t n);

struct EdgeFrequency {
  std::string caremap, node, edge;
  double expected = 0.0;
  double empirical = 0.0;
  double delta = 0.0;
  std::size_t count = 0;
  std::size_t visits = 0;
};

struct FrequencyReport {
  std::vector<EdgeFrequency> edges;  // by (caremap, node, edge)
  double max_delta = 0.0;
  std::size_t traces_used = 0;       // conformant traces that contributed
};

FrequencyReport frequency_report(std::span<const PatientTrace> traces, const STM& stm, int workers = 1);
nlohmann::json to_json(const FrequencyReport& r);

std::string sha256_hex(std::string_view data);

}  // namespace tasc
