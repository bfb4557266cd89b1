// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#include "tasc/model.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <set>

#include "tasc/error.hpp"

namespace tasc {

std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::EntryPoint: return "entry";
    case NodeKind::ExitPoint: return "exit";
    case NodeKind::ExclusionPoint: return "exclusion";
    case NodeKind::Activity: return "activity";
    case NodeKind::NestedActivity: return "nested activity";
    case NodeKind::Decision: return "decision";
    case NodeKind::NestedDecision: return "nested decision";
  }
  return "?";
}

std::string_view to_string(ContentType t) {
  switch (t) {
    case ContentType::Diagnosis: return "diagnosis";
    case ContentType::Treatment: return "treatment";
    case ContentType::Monitoring: return "monitoring";
  }
  return "?";
}

std::optional<ContentType> content_type_from(std::string_view keyword) {
  for (auto t : {ContentType::Diagnosis, ContentType::Treatment, ContentType::Monitoring}) {
    if (to_string(t) == keyword) return t;
  }
  return std::nullopt;
}

namespace {

struct ClassRow {
  ActivityClassKind kind;
  std::string_view keyword;
  std::span<const ContentType> types;
};

constexpr std::array kDiagnosisOnly{ContentType::Diagnosis};
constexpr std::array kTreatmentOnly{ContentType::Treatment};
constexpr std::array kMonitoringOnly{ContentType::Monitoring};
constexpr std::array kDiagnosisOrMonitoring{ContentType::Diagnosis, ContentType::Monitoring};

constexpr std::array kClassRows{
    ClassRow{ActivityClassKind::ReviewPatientRecords, "review_patient_records", kDiagnosisOrMonitoring},
    ClassRow{ActivityClassKind::CollectPatientHistory, "collect_patient_history", kDiagnosisOnly},
    ClassRow{ActivityClassKind::AskLifestyleQuestions, "ask_lifestyle_questions", kDiagnosisOnly},
    ClassRow{ActivityClassKind::ClinicalExamination, "clinical_examination", kDiagnosisOrMonitoring},
    ClassRow{ActivityClassKind::TargetedExamination, "targeted_examination", kDiagnosisOrMonitoring},
    ClassRow{ActivityClassKind::DiseaseAssessment, "disease_assessment", kDiagnosisOnly},
    ClassRow{ActivityClassKind::SetGoals, "set_goals", kTreatmentOnly},
    ClassRow{ActivityClassKind::ConsiderInterventions, "consider_interventions", kTreatmentOnly},
    ClassRow{ActivityClassKind::ConsiderComplications, "consider_complications", kTreatmentOnly},
    ClassRow{ActivityClassKind::WritePrescription, "write_prescription", kTreatmentOnly},
    ClassRow{ActivityClassKind::EvaluateGoals, "evaluate_goals", kMonitoringOnly},
    ClassRow{ActivityClassKind::Other, "other", {}},
};

const ClassRow& row(ActivityClassKind k) {
  return kClassRows[static_cast<std::size_t>(k)];
}

}  // namespace

std::string_view to_string(ActivityClassKind k) { return row(k).keyword; }

std::optional<ActivityClassKind> activity_class_from(std::string_view keyword) {
  for (const auto& r : kClassRows) {
    if (r.keyword == keyword && r.kind != ActivityClassKind::Other) return r.kind;
  }
  return std::nullopt;
}

std::span<const ContentType> allowed_content_types(ActivityClassKind k) { return row(k).types; }

std::optional<ContentType> implied_content_type(ActivityClassKind k) {
  auto types = row(k).types;
  if (types.size() == 1) return types.front();
  return std::nullopt;
}

std::string_view to_string(DecisionAspect a) {
  switch (a) {
    case DecisionAspect::ClinicalEvidence: return "clinical_evidence";
    case DecisionAspect::Diagnosis: return "diagnosis";
    case DecisionAspect::Prognosis: return "prognosis";
    case DecisionAspect::Therapy: return "therapy";
    case DecisionAspect::Prevention: return "prevention";
    case DecisionAspect::Education: return "education";
  }
  return "?";
}

std::optional<DecisionAspect> decision_aspect_from(std::string_view keyword) {
  for (auto a : {DecisionAspect::ClinicalEvidence, DecisionAspect::Diagnosis,
                 DecisionAspect::Prognosis, DecisionAspect::Therapy, DecisionAspect::Prevention,
                 DecisionAspect::Education}) {
    if (to_string(a) == keyword) return a;
  }
  return std::nullopt;
}

std::optional<ContentType> Node::effective_content_type() const {
  if (content_type) return content_type;
  if (activity_class) return implied_content_type(activity_class->kind);
  return std::nullopt;
}

const Node* Caremap::find_node(std::string_view node_id) const {
  for (const auto& n : nodes) {
    if (n.id == node_id) return &n;
  }
  return nullptr;
}

const Edge* Caremap::find_edge(std::string_view edge_id) const {
  for (const auto& e : edges) {
    if (e.id == edge_id) return &e;
  }
  return nullptr;
}

std::vector<const Node*> Caremap::nodes_of_kind(NodeKind k) const {
  std::vector<const Node*> out;
  for (const auto& n : nodes) {
    if (n.kind == k) out.push_back(&n);
  }
  std::sort(out.begin(), out.end(), [](const Node* a, const Node* b) { return a->id < b->id; });
  return out;
}

namespace {

std::vector<const Edge*> edges_where(const Caremap& m, const std::function<bool(const Edge&)>& pred) {
  std::vector<const Edge*> out;
  for (const auto& e : m.edges) {
    if (pred(e)) out.push_back(&e);
  }
  std::sort(out.begin(), out.end(), [](const Edge* a, const Edge* b) { return a->id < b->id; });
  return out;
}

template <typename T>
std::vector<const T*> sorted_by_id(const std::vector<T>& items) {
  std::vector<const T*> out;
  for (const auto& i : items) out.push_back(&i);
  std::sort(out.begin(), out.end(), [](const T* a, const T* b) { return a->id < b->id; });
  return out;
}

}  // namespace

std::vector<const Edge*> Caremap::out_edges(std::string_view node_id) const {
  return edges_where(*this, [&](const Edge& e) { return e.from == node_id; });
}

std::vector<const Edge*> Caremap::in_edges(std::string_view node_id) const {
  return edges_where(*this, [&](const Edge& e) { return e.to == node_id; });
}

bool structurally_equal(const Caremap& a, const Caremap& b) {
  if (a.id != b.id || a.title != b.title || a.scenario != b.scenario || a.date != b.date ||
      a.version != b.version || !(a.lifecycle == b.lifecycle) ||
      a.nodes.size() != b.nodes.size() || a.edges.size() != b.edges.size()) {
    return false;
  }
  auto na = sorted_by_id(a.nodes);
  auto nb = sorted_by_id(b.nodes);
  for (std::size_t i = 0; i < na.size(); ++i) {
    if (!(*na[i] == *nb[i])) return false;
  }
  auto ea = sorted_by_id(a.edges);
  auto eb = sorted_by_id(b.edges);
  for (std::size_t i = 0; i < ea.size(); ++i) {
    if (!(*ea[i] == *eb[i])) return false;
  }
  return true;
}

const Caremap* CaremapSet::find(std::string_view id) const {
  auto it = caremaps.find(id);
  return it == caremaps.end() ? nullptr : &it->second;
}

bool structurally_equal(const CaremapSet& a, const CaremapSet& b) {
  if (a.caremaps.size() != b.caremaps.size()) return false;
  for (const auto& [id, m] : a.caremaps) {
    const auto* other = b.find(id);
    if (!other || !structurally_equal(m, *other)) return false;
  }
  auto la = a.links;
  auto lb = b.links;
  std::sort(la.begin(), la.end());
  std::sort(lb.begin(), lb.end());
  return la == lb;
}

std::vector<Successor> successors(const Caremap& caremap, std::string_view node_id) {
  if (!caremap.find_node(node_id)) {
    throw Error("UnknownNode", "caremap '" + caremap.id + "' has no node '" + std::string(node_id) + "'");
  }
  std::vector<Successor> out;
  for (const auto* e : caremap.out_edges(node_id)) {
    out.push_back(Successor{e, caremap.find_node(e->to)});
  }
  return out;
}

std::vector<std::vector<std::string>> enumerate_paths(const Caremap& caremap, int cycle_bound,
                                                      std::size_t cap) {
  auto entries = caremap.nodes_of_kind(NodeKind::EntryPoint);
  if (entries.size() != 1) {
    throw Error("NoUniqueEntry", "caremap '" + caremap.id + "' must have exactly one entry point");
  }
  if (cycle_bound < 0) throw Error("InvalidArgument", "cycle bound must be >= 0");

  // Adjacency by node index, successors in edge-id order.
  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t i = 0; i < caremap.nodes.size(); ++i) index.emplace(caremap.nodes[i].id, i);
  std::vector<std::vector<std::size_t>> adj(caremap.nodes.size());
  for (const auto* e : edges_where(caremap, [](const Edge&) { return true; })) {
    auto f = index.find(e->from);
    auto t = index.find(e->to);
    if (f != index.end() && t != index.end()) adj[f->second].push_back(t->second);
  }

  std::vector<std::vector<std::string>> paths;
  std::vector<int> visits(caremap.nodes.size(), 0);
  std::vector<std::size_t> stack;
  const int budget = cycle_bound + 1;

  std::function<void(std::size_t)> dfs = [&](std::size_t v) {
    ++visits[v];
    stack.push_back(v);
    if (is_terminal(caremap.nodes[v].kind)) {
      if (paths.size() == cap) {
        throw Error("PathExplosion", "caremap '" + caremap.id + "' has more than " +
                                         std::to_string(cap) + " paths at cycle bound " +
                                         std::to_string(cycle_bound));
      }
      std::vector<std::string> p;
      p.reserve(stack.size());
      for (auto s : stack) p.push_back(caremap.nodes[s].id);
      paths.push_back(std::move(p));
    } else {
      for (auto w : adj[v]) {
        if (visits[w] < budget) dfs(w);
      }
    }
    stack.pop_back();
    --visits[v];
  };
  dfs(index.at(entries.front()->id));
  return paths;
}

std::string_view to_string(ReferenceError::Kind k) {
  switch (k) {
    case ReferenceError::Kind::DanglingNodeRef: return "DanglingNodeRef";
    case ReferenceError::Kind::DanglingNestedRef: return "DanglingNestedRef";
    case ReferenceError::Kind::DanglingLink: return "DanglingLink";
    case ReferenceError::Kind::NestingCycle: return "NestingCycle";
  }
  return "?";
}

std::vector<ReferenceError> resolve_refs(const CaremapSet& set) {
  using K = ReferenceError::Kind;
  std::vector<ReferenceError> errors;

  for (const auto& [id, m] : set.caremaps) {
    for (const auto* e : sorted_by_id(m.edges)) {
      for (const auto* end : {&e->from, &e->to}) {
        if (!m.find_node(*end)) {
          errors.push_back({K::DanglingNodeRef, id, {e->id, *end},
                            "edge '" + e->id + "' references unknown node '" + *end + "'"});
        }
      }
    }
    for (const auto* n : sorted_by_id(m.nodes)) {
      if (is_nested(n->kind) && (!n->nested_ref || !set.find(*n->nested_ref))) {
        std::string target = n->nested_ref.value_or("");
        errors.push_back({K::DanglingNestedRef, id, {n->id},
                          "node '" + n->id + "' nests unknown caremap '" + target + "'"});
      }
    }
  }

  for (const auto& l : set.links) {
    const auto* from = set.find(l.from_caremap);
    const auto* to = set.find(l.to_caremap);
    std::string where = l.from_caremap + "." + l.from_exit + " -> " + l.to_caremap + "." + l.to_entry;
    if (!from || !from->find_node(l.from_exit)) {
      errors.push_back({K::DanglingLink, l.from_caremap, {l.from_exit},
                        "link " + where + ": source does not resolve"});
    }
    if (!to || !to->find_node(l.to_entry)) {
      errors.push_back({K::DanglingLink, l.from_caremap, {l.to_entry},
                        "link " + where + ": target does not resolve"});
    }
  }

  // Nesting relation: caremap -> caremaps it nests. Report each cycle once,
  // found as a DFS back edge, starting from the smallest caremap id.
  std::map<std::string, std::set<std::string>> nests;
  for (const auto& [id, m] : set.caremaps) {
    auto& out = nests[id];
    for (const auto& n : m.nodes) {
      if (is_nested(n.kind) && n.nested_ref && set.find(*n.nested_ref)) out.insert(*n.nested_ref);
    }
  }
  std::map<std::string, int> color;  // 0 new, 1 on stack, 2 done
  std::vector<std::string> stack;
  std::function<void(const std::string&)> dfs = [&](const std::string& v) {
    color[v] = 1;
    stack.push_back(v);
    for (const auto& w : nests[v]) {
      if (color[w] == 1) {
        auto it = std::find(stack.begin(), stack.end(), w);
        std::vector<std::string> cycle(it, stack.end());
        std::string text;
        for (const auto& c : cycle) text += c + " -> ";
        text += w;
        errors.push_back({K::NestingCycle, w, cycle, "nesting cycle: " + text});
      } else if (color[w] == 0) {
        dfs(w);
      }
    }
    stack.pop_back();
    color[v] = 2;
  };
  for (const auto& [id, _] : set.caremaps) {
    if (color[id] == 0) dfs(id);
  }
  return errors;
}

}  // namespace tasc
