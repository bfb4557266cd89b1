// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "tasc/criteria.hpp"
#include "tasc/graph.hpp"
#include "tasc/model.hpp"
#include "tasc/trace.hpp"

namespace tasc {

enum class Verdict { Conformant, NonConformant, Undetermined };
enum class VarianceKind { SkippedActivity, UnexpectedActivity, WrongBranch, IncompleteTrace };

std::string_view to_string(Verdict v);
std::string_view to_string(VarianceKind k);

struct Divergence {
  std::size_t event_index = 0;        // == events.size() when the trace ran out
  std::vector<std::string> expected;  // activity ids that would have matched
  std::string found;                  // ref of the offending event, empty at end
  std::string at_node;                // last position reached before it
};

struct Unresolved {
  std::string decision;
  std::vector<std::string> vars;
  bool operator==(const Unresolved&) const = default;
};

struct ConformanceReport {
  std::string trace_id;
  Verdict status = Verdict::NonConformant;
  std::optional<std::vector<std::string>> matched_path;
  std::optional<Divergence> divergence;
  std::vector<Unresolved> unresolved;
  std::optional<VarianceKind> variance_kind;
};

// A trace whose refs have been looked up in a SetGraph. Observations keep
// their index so bindings are reconstructed positionally.
struct ResolvedTrace {
  struct Event {
    TraceEvent::Kind kind = TraceEvent::Kind::ActivityDone;
    int node = -1;  // -1 when the ref matched nothing
    int edge = -1;  // BranchTaken
  };
  std::string trace_id;
  std::vector<Event> events;
  std::vector<Bindings> bindings;  // bindings[i]: observations before event i
};

class Replayer {
 public:
  // Throws Error("NoUniqueEntry") / Error("UnknownCaremap") / Error("InvalidSet").
  Replayer(const CaremapSet& set, std::string_view entry_caremap,
           const PredicateRegistry& preds = PredicateRegistry::builtin());

  [[nodiscard]] const SetGraph& graph() const { return graph_; }

  // Throws Error("AmbiguousRef") / Error("AmbiguousLabel").
  [[nodiscard]] ResolvedTrace resolve(const PatientTrace& trace) const;
  [[nodiscard]] ConformanceReport replay(const PatientTrace& trace) const;
  [[nodiscard]] ConformanceReport replay(const ResolvedTrace& trace, const PatientTrace& source) const;

  // Node indices of the witness walk, empty when not conformant.
  [[nodiscard]] std::vector<int> witness(const PatientTrace& trace) const;
  // Edge indices traversed by the witness walk, in order; nullopt when the
  // trace is not conformant.
  [[nodiscard]] std::optional<std::vector<int>> witness_edges(const PatientTrace& trace) const;

 private:
  SetGraph graph_;
  int entry_ = -1;
  const PredicateRegistry* preds_;
};

ConformanceReport replay(const CaremapSet& set, std::string_view entry_caremap, const PatientTrace& trace);

struct BatchSummary {
  std::size_t n = 0;
  std::size_t conformant = 0;
  std::size_t non_conformant = 0;
  std::size_t undetermined = 0;
  std::vector<std::pair<std::string, std::size_t>> top_divergence_points;
  std::vector<ConformanceReport> reports;  // sorted by trace id
  std::vector<std::pair<std::string, std::string>> load_errors;  // (trace id, message)
};

// Traces that fail to load are reported in load_errors and excluded from n.
BatchSummary batch_conform(const CaremapSet& set, std::string_view entry_caremap,
                           std::span<const PatientTrace> traces, int workers = 1);

nlohmann::json to_json(const ConformanceReport& r);
nlohmann::json to_json(const BatchSummary& s);
std::string format_table(const BatchSummary& s);

}  // namespace tasc
