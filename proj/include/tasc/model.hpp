// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tasc/criteria.hpp"

namespace tasc {

// Declaration order doubles as the canonical serialization order.
enum class NodeKind {
  EntryPoint,
  ExitPoint,
  ExclusionPoint,
  Activity,
  NestedActivity,
  Decision,
  NestedDecision,
};

inline constexpr NodeKind kAllNodeKinds[] = {
    NodeKind::EntryPoint, NodeKind::ExitPoint,      NodeKind::ExclusionPoint,
    NodeKind::Activity,   NodeKind::NestedActivity, NodeKind::Decision,
    NodeKind::NestedDecision,
};

std::string_view to_string(NodeKind k);

inline bool is_decision(NodeKind k) {
  return k == NodeKind::Decision || k == NodeKind::NestedDecision;
}
inline bool is_activity(NodeKind k) {
  return k == NodeKind::Activity || k == NodeKind::NestedActivity;
}
inline bool is_nested(NodeKind k) {
  return k == NodeKind::NestedActivity || k == NodeKind::NestedDecision;
}
inline bool is_terminal(NodeKind k) {
  return k == NodeKind::ExitPoint || k == NodeKind::ExclusionPoint;
}

enum class ContentType { Diagnosis, Treatment, Monitoring };

std::string_view to_string(ContentType t);
std::optional<ContentType> content_type_from(std::string_view keyword);

// Canonical activity rows of the caremap content table.
enum class ActivityClassKind {
  ReviewPatientRecords,
  CollectPatientHistory,
  AskLifestyleQuestions,
  ClinicalExamination,
  TargetedExamination,
  DiseaseAssessment,
  SetGoals,
  ConsiderInterventions,
  ConsiderComplications,
  WritePrescription,
  EvaluateGoals,
  Other,
};

struct ActivityClass {
  ActivityClassKind kind = ActivityClassKind::Other;
  std::string label;  // Other only

  bool operator==(const ActivityClass&) const = default;
};

std::string_view to_string(ActivityClassKind k);  // snake_case keyword
std::optional<ActivityClassKind> activity_class_from(std::string_view keyword);

// Content types a class may carry. Record review and the two examination
// rows appear under both Diagnosis and Monitoring; Other has none.
std::span<const ContentType> allowed_content_types(ActivityClassKind k);

// The content type a class implies on its own, when that is unambiguous.
std::optional<ContentType> implied_content_type(ActivityClassKind k);

enum class DecisionAspect { ClinicalEvidence, Diagnosis, Prognosis, Therapy, Prevention, Education };

std::string_view to_string(DecisionAspect a);
std::optional<DecisionAspect> decision_aspect_from(std::string_view keyword);

// Opaque; never interpreted.
struct Duration {
  Number value;
  std::string unit;

  bool operator==(const Duration&) const = default;
};

struct Node {
  std::string id;
  NodeKind kind = NodeKind::Activity;
  std::string label;
  std::optional<ContentType> content_type;
  std::optional<ActivityClass> activity_class;
  std::optional<DecisionAspect> aspect;
  std::optional<std::string> nested_ref;
  std::optional<Duration> duration;
  std::optional<std::string> annotation;

  // Explicit content type, else the one implied by a single-mapping class.
  [[nodiscard]] std::optional<ContentType> effective_content_type() const;

  bool operator==(const Node&) const = default;
};

struct Edge {
  std::string id;
  std::string from;
  std::string to;
  std::optional<Criterion> criterion;
  std::optional<std::string> annotation;

  bool operator==(const Edge&) const = default;
};

struct LifecycleMeta {
  std::optional<std::string> team;
  std::vector<std::string> evidence_refs;
  std::optional<std::string> variance_log_ref;

  bool operator==(const LifecycleMeta&) const = default;
};

struct Caremap {
  std::string id;
  std::string title;
  std::optional<std::string> scenario;
  std::optional<std::string> date;
  std::optional<int> version;
  LifecycleMeta lifecycle;
  std::vector<Node> nodes;
  std::vector<Edge> edges;

  [[nodiscard]] const Node* find_node(std::string_view node_id) const;
  [[nodiscard]] const Edge* find_edge(std::string_view edge_id) const;
  [[nodiscard]] std::vector<const Node*> nodes_of_kind(NodeKind k) const;
  // Out/in edges sorted by edge id.
  [[nodiscard]] std::vector<const Edge*> out_edges(std::string_view node_id) const;
  [[nodiscard]] std::vector<const Edge*> in_edges(std::string_view node_id) const;
};

// Structural equality ignoring declaration order of nodes and edges.
bool structurally_equal(const Caremap& a, const Caremap& b);

struct MultiLevelLink {
  std::string from_caremap;
  std::string from_exit;
  std::string to_caremap;
  std::string to_entry;

  auto operator<=>(const MultiLevelLink&) const = default;
};

struct CaremapSet {
  std::map<std::string, Caremap, std::less<>> caremaps;
  std::vector<MultiLevelLink> links;

  [[nodiscard]] const Caremap* find(std::string_view id) const;
};

bool structurally_equal(const CaremapSet& a, const CaremapSet& b);

struct Successor {
  const Edge* edge = nullptr;
  const Node* node = nullptr;
};

// Out-edges of `node_id` in edge-id order. Throws Error("UnknownNode").
std::vector<Successor> successors(const Caremap& caremap, std::string_view node_id);

inline constexpr std::size_t kDefaultPathCap = 100'000;

// Every entry -> exit/exclusion walk in which no node occurs more than
// cycle_bound + 1 times, in DFS order over edge-id-sorted successors.
// Throws Error("NoUniqueEntry") without exactly one entry, and
// Error("PathExplosion") once more than `cap` paths exist.
std::vector<std::vector<std::string>> enumerate_paths(const Caremap& caremap, int cycle_bound,
                                                      std::size_t cap = kDefaultPathCap);

struct ReferenceError {
  enum class Kind { DanglingNodeRef, DanglingNestedRef, DanglingLink, NestingCycle };
  Kind kind = Kind::DanglingNodeRef;
  std::string caremap;
  std::vector<std::string> ids;
  std::string message;
};

std::string_view to_string(ReferenceError::Kind k);

std::vector<ReferenceError> resolve_refs(const CaremapSet& set);

}  // namespace tasc
