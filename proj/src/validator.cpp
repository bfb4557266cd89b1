// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#include "tasc/validator.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>

namespace tasc {

std::string_view to_string(RuleCode c) {
  switch (c) {
    case RuleCode::S1: return "S1";
    case RuleCode::S2: return "S2";
    case RuleCode::S3: return "S3";
    case RuleCode::S4: return "S4";
    case RuleCode::S5: return "S5";
    case RuleCode::S6: return "S6";
    case RuleCode::S7: return "S7";
    case RuleCode::S8: return "S8";
    case RuleCode::S9: return "S9";
    case RuleCode::W_CNT: return "W-CNT";
    case RuleCode::W_EXH: return "W-EXH";
    case RuleCode::W_FREE: return "W-FREE";
    case RuleCode::W_LFC: return "W-LFC";
  }
  return "?";
}

namespace {

using Adjacency = std::map<std::string, std::vector<std::string>>;

Diagnostic make(Severity sev, RuleCode code, const std::string& caremap, std::vector<std::string> ids,
                std::string message) {
  return Diagnostic{sev, code, caremap, std::move(ids), std::move(message)};
}

Adjacency forward(const Caremap& m) {
  Adjacency adj;
  for (const auto& n : m.nodes) adj[n.id];
  for (const auto& e : m.edges) adj[e.from].push_back(e.to);
  return adj;
}

Adjacency backward(const Caremap& m) {
  Adjacency adj;
  for (const auto& n : m.nodes) adj[n.id];
  for (const auto& e : m.edges) adj[e.to].push_back(e.from);
  return adj;
}

std::set<std::string> reach(const Adjacency& adj, const std::vector<std::string>& seeds,
                            const std::set<std::string>& blocked = {}) {
  std::set<std::string> seen;
  std::deque<std::string> queue;
  for (const auto& s : seeds) {
    if (seen.insert(s).second) queue.push_back(s);
  }
  while (!queue.empty()) {
    auto v = queue.front();
    queue.pop_front();
    if (blocked.count(v)) continue;
    auto it = adj.find(v);
    if (it == adj.end()) continue;
    for (const auto& w : it->second) {
      if (seen.insert(w).second) queue.push_back(w);
    }
  }
  return seen;
}

std::vector<std::string> ids_of(const std::vector<const Node*>& nodes) {
  std::vector<std::string> out;
  for (const auto* n : nodes) out.push_back(n->id);
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i];
  return out;
}

void structural_rules(const Caremap& m, const ValidatorConfig& config, std::vector<Diagnostic>& out) {
  const auto E = Severity::Error;
  const auto W = Severity::Warning;
  auto entries = ids_of(m.nodes_of_kind(NodeKind::EntryPoint));
  auto exits = m.nodes_of_kind(NodeKind::ExitPoint);

  if (entries.empty()) {
    out.push_back(make(E, RuleCode::S1, m.id, {m.id}, "caremap has no entry point"));
  } else if (entries.size() > 1) {
    out.push_back(make(config.allow_multiple_entries ? W : E, RuleCode::S1, m.id, entries,
                       "caremap has " + std::to_string(entries.size()) + " entry points: " + join(entries)));
  }
  if (exits.empty()) out.push_back(make(E, RuleCode::S2, m.id, {m.id}, "caremap has no exit point"));

  std::vector<std::string> all_ids;
  for (const auto& n : m.nodes) all_ids.push_back(n.id);
  std::sort(all_ids.begin(), all_ids.end());

  if (!entries.empty()) {
    auto reached = reach(forward(m), entries);
    for (const auto& id : all_ids) {
      if (!reached.count(id)) {
        out.push_back(make(E, RuleCode::S3, m.id, {id}, "node '" + id + "' is unreachable from the entry"));
      }
    }
  }

  std::vector<std::string> terminals;
  for (const auto& n : m.nodes) {
    if (is_terminal(n.kind)) terminals.push_back(n.id);
  }
  auto finishing = reach(backward(m), terminals);
  for (const auto& id : all_ids) {
    if (!finishing.count(id)) {
      out.push_back(make(E, RuleCode::S4, m.id, {id}, "node '" + id + "' cannot reach an exit or exclusion"));
    }
  }

  for (const auto& id : all_ids) {
    const Node& n = *m.find_node(id);
    auto outs = m.out_edges(id);
    auto ins = m.in_edges(id);
    if (is_decision(n.kind)) {
      if (outs.size() < 2) {
        out.push_back(make(E, RuleCode::S5, m.id, {id},
                           "decision '" + id + "' has " + std::to_string(outs.size()) +
                               " out-edge(s); at least 2 required"));
      }
      int otherwise = 0;
      for (const auto* e : outs) {
        if (!e->criterion) {
          out.push_back(make(E, RuleCode::S5, m.id, {id, e->id},
                             "decision '" + id + "' out-edge '" + e->id + "' has no criterion"));
        } else if (e->criterion->is_otherwise()) {
          ++otherwise;
        }
      }
      if (otherwise > 1) {
        out.push_back(make(E, RuleCode::S5, m.id, {id}, "decision '" + id + "' has more than one otherwise"));
      }
      if (otherwise == 0) {
        out.push_back(make(W, RuleCode::W_EXH, m.id, {id}, "decision '" + id + "' has no otherwise branch"));
      }
    } else {
      for (const auto* e : outs) {
        if (e->criterion) {
          out.push_back(make(E, RuleCode::S6, m.id, {e->id, id},
                             "edge '" + e->id + "' carries a criterion but '" + id + "' is not a decision"));
        }
      }
      if (outs.size() >= 2 && !is_terminal(n.kind)) {
        out.push_back(make(W, RuleCode::W_FREE, m.id, {id},
                           "non-decision node '" + id + "' fans out to " + std::to_string(outs.size()) +
                               " successors"));
      }
    }
    if (n.kind == NodeKind::EntryPoint && !ins.empty()) {
      out.push_back(make(E, RuleCode::S7, m.id, {id}, "entry '" + id + "' has incoming edges"));
    }
    if (is_terminal(n.kind) && !outs.empty()) {
      out.push_back(make(E, RuleCode::S7, m.id, {id},
                         std::string(to_string(n.kind)) + " '" + id + "' has outgoing edges"));
    }
  }
}

void set_rules(const CaremapSet& set, std::vector<Diagnostic>& out) {
  const auto E = Severity::Error;
  for (const auto& r : resolve_refs(set)) {
    if (r.kind == ReferenceError::Kind::DanglingNestedRef || r.kind == ReferenceError::Kind::NestingCycle) {
      out.push_back(make(E, RuleCode::S8, r.caremap, r.ids, r.message));
    } else if (r.kind == ReferenceError::Kind::DanglingLink) {
      out.push_back(make(E, RuleCode::S9, r.caremap, r.ids, r.message));
    }
  }
  std::map<std::pair<std::string, std::string>, int> per_exit;
  for (const auto& l : set.links) {
    const auto* from = set.find(l.from_caremap);
    const auto* to = set.find(l.to_caremap);
    if (!from || !to) continue;  // reported as dangling
    const auto* exit = from->find_node(l.from_exit);
    const auto* entry = to->find_node(l.to_entry);
    if (!exit || !entry) continue;
    std::string where = l.from_caremap + "." + l.from_exit + " -> " + l.to_caremap + "." + l.to_entry;
    if (exit->kind != NodeKind::ExitPoint) {
      out.push_back(make(E, RuleCode::S9, l.from_caremap, {l.from_exit},
                         "link " + where + " does not start at an exit point"));
    }
    if (entry->kind != NodeKind::EntryPoint) {
      out.push_back(make(E, RuleCode::S9, l.from_caremap, {l.to_entry},
                         "link " + where + " does not end at an entry point"));
    }
    if (l.from_caremap == l.to_caremap) {
      out.push_back(make(E, RuleCode::S9, l.from_caremap, {l.from_exit},
                         "link " + where + " must join two different caremaps"));
    }
    if (++per_exit[{l.from_caremap, l.from_exit}] == 2) {
      out.push_back(make(E, RuleCode::S9, l.from_caremap, {l.from_exit},
                         "exit '" + l.from_exit + "' has more than one outgoing link"));
    }
  }
}

}  // namespace

std::vector<Diagnostic> content_lint(const Caremap& m) {
  std::vector<Diagnostic> out;
  auto entries = ids_of(m.nodes_of_kind(NodeKind::EntryPoint));
  if (entries.empty()) return out;
  std::set<std::string> later_stage;
  for (const auto& n : m.nodes) {
    auto t = n.effective_content_type();
    if (t == ContentType::Treatment || t == ContentType::Monitoring) later_stage.insert(n.id);
  }
  auto adj = forward(m);
  auto reachable = reach(adj, entries);
  auto early = reach(adj, entries, later_stage);
  auto diagnosis = m.nodes;
  std::sort(diagnosis.begin(), diagnosis.end(), [](const Node& a, const Node& b) { return a.id < b.id; });
  for (const auto& n : diagnosis) {
    if (n.effective_content_type() != ContentType::Diagnosis) continue;
    if (reachable.count(n.id) && !early.count(n.id)) {
      out.push_back(make(Severity::Warning, RuleCode::W_CNT, m.id, {n.id},
                         "diagnosis node '" + n.id + "' is only reachable through treatment or monitoring"));
    }
  }
  return out;
}

std::vector<Diagnostic> lifecycle_lint(const Caremap& m) {
  std::vector<std::string> missing;
  if (!m.version) missing.emplace_back("version");
  if (!m.date) missing.emplace_back("date");
  if (m.lifecycle.evidence_refs.empty()) missing.emplace_back("evidence_refs");
  if (missing.empty()) return {};
  std::string what = join(missing);
  Diagnostic d = make(Severity::Warning, RuleCode::W_LFC, m.id, {m.id}, "lifecycle metadata missing: " + what);
  return {d};
}

std::vector<Diagnostic> validate(const CaremapSet& set, const ValidatorConfig& config) {
  std::vector<Diagnostic> out;
  for (const auto& [id, m] : set.caremaps) {
    structural_rules(m, config, out);
    for (auto& d : content_lint(m)) out.push_back(std::move(d));
    for (auto& d : lifecycle_lint(m)) out.push_back(std::move(d));
  }
  set_rules(set, out);
  if (config.strict) {
    for (auto& d : out) d.severity = Severity::Error;
  }
  std::stable_sort(out.begin(), out.end(), [](const Diagnostic& a, const Diagnostic& b) {
    return std::tie(a.caremap, a.code, a.ids.front(), a.message) <
           std::tie(b.caremap, b.code, b.ids.front(), b.message);
  });
  return out;
}

bool has_errors(std::span<const Diagnostic> diags) {
  return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) { return d.severity == Severity::Error; });
}

std::string format(const Diagnostic& d) {
  return d.caremap + ": " + std::string(to_string(d.severity)) + "[" + std::string(to_string(d.code)) + "] " +
         join(d.ids) + ": " + d.message;
}

nlohmann::json to_json(std::span<const Diagnostic> diags) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& d : diags) {
    arr.push_back({{"severity", std::string(to_string(d.severity))},
                   {"code", std::string(to_string(d.code))},
                   {"caremap", d.caremap},
                   {"ids", d.ids},
                   {"message", d.message}});
  }
  return arr;
}

}  // namespace tasc
