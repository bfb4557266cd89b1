// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#include "tasc/graph.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <tuple>

#include "tasc/error.hpp"

namespace tasc {

SetGraph::SetGraph(const CaremapSet& set) : set_(&set) {
  std::map<std::string, int> id_count;
  for (const auto& [cid, m] : set.caremaps) {
    std::vector<const Node*> sorted;
    for (const auto& n : m.nodes) sorted.push_back(&n);
    std::sort(sorted.begin(), sorted.end(), [](const Node* a, const Node* b) { return a->id < b->id; });
    for (const auto* n : sorted) {
      NodeInfo info;
      info.caremap = cid;
      info.node = n;
      info.qualified = cid + "." + n->id;
      nodes_.push_back(std::move(info));
      ++id_count[n->id];
    }
  }
  for (auto& info : nodes_) {
    info.display = id_count[info.node->id] == 1 ? info.node->id : info.qualified;
  }

  for (const auto& [cid, m] : set.caremaps) {
    std::vector<const Edge*> sorted;
    for (const auto& e : m.edges) sorted.push_back(&e);
    std::sort(sorted.begin(), sorted.end(), [](const Edge* a, const Edge* b) { return a->id < b->id; });
    for (const auto* e : sorted) {
      int from = find(cid, e->from);
      int to = find(cid, e->to);
      if (from < 0 || to < 0) {
        throw Error("InvalidSet", "edge '" + e->id + "' in '" + cid + "' has an unresolved endpoint");
      }
      int idx = static_cast<int>(edges_.size());
      edges_.push_back(EdgeInfo{e, from, to});
      nodes_[static_cast<std::size_t>(from)].out.push_back(idx);
    }
  }

  for (auto& info : nodes_) {
    info.by_target = info.out;
    std::sort(info.by_target.begin(), info.by_target.end(), [this](int a, int b) {
      const auto& ea = edges_[static_cast<std::size_t>(a)];
      const auto& eb = edges_[static_cast<std::size_t>(b)];
      const auto& ta = nodes_[static_cast<std::size_t>(ea.to)].node->id;
      const auto& tb = nodes_[static_cast<std::size_t>(eb.to)].node->id;
      return std::tie(ta, ea.edge->id) < std::tie(tb, eb.edge->id);
    });
    if (is_nested(info.node->kind)) {
      const auto& ref = info.node->nested_ref;
      if (!ref || !set.find(*ref)) {
        throw Error("InvalidSet", "node '" + info.qualified + "' nests an unknown caremap");
      }
    }
  }
  for (auto& info : nodes_) {
    if (is_nested(info.node->kind)) info.nested_entry = entry_of(*info.node->nested_ref);
  }
  for (const auto& l : set.links) {
    int exit = find(l.from_caremap, l.from_exit);
    int entry = find(l.to_caremap, l.to_entry);
    if (exit < 0 || entry < 0) throw Error("InvalidSet", "link endpoint does not resolve");
    auto& info = nodes_[static_cast<std::size_t>(exit)];
    if (info.link_entry < 0 || entry < info.link_entry) info.link_entry = entry;
  }
}

int SetGraph::find(std::string_view caremap, std::string_view node_id) const {
  // Nodes are grouped by caremap and sorted by id within each group.
  auto lo = std::lower_bound(nodes_.begin(), nodes_.end(), std::pair{caremap, node_id},
                             [](const NodeInfo& n, const std::pair<std::string_view, std::string_view>& key) {
                               return std::pair<std::string_view, std::string_view>{n.caremap, n.node->id} < key;
                             });
  if (lo == nodes_.end() || lo->caremap != caremap || lo->node->id != node_id) return -1;
  return static_cast<int>(lo - nodes_.begin());
}

int SetGraph::entry_of(std::string_view caremap) const {
  const auto* m = set_->find(caremap);
  if (!m) throw Error("UnknownCaremap", "no caremap '" + std::string(caremap) + "'");
  auto entries = m->nodes_of_kind(NodeKind::EntryPoint);
  if (entries.size() != 1) {
    throw Error("NoUniqueEntry", "caremap '" + std::string(caremap) + "' must have exactly one entry point");
  }
  return find(caremap, entries.front()->id);
}

int SetGraph::find_out_edge(int node, std::string_view edge_id) const {
  for (int e : nodes_[static_cast<std::size_t>(node)].out) {
    if (edges_[static_cast<std::size_t>(e)].edge->id == edge_id) return e;
  }
  return -1;
}

int SetGraph::resolve_ref(std::string_view ref) const {
  if (auto dot = ref.find('.'); dot != std::string_view::npos) {
    int q = find(ref.substr(0, dot), ref.substr(dot + 1));
    if (q >= 0) return q;
  }
  int by_id = -1;
  int id_hits = 0;
  for (int i = 0; i < size(); ++i) {
    if (nodes_[static_cast<std::size_t>(i)].node->id == ref) {
      by_id = i;
      ++id_hits;
    }
  }
  if (id_hits == 1) return by_id;
  if (id_hits > 1) {
    throw Error("AmbiguousRef", "node id '" + std::string(ref) + "' exists in several caremaps; qualify it");
  }
  int by_label = -1;
  int label_hits = 0;
  for (int i = 0; i < size(); ++i) {
    if (nodes_[static_cast<std::size_t>(i)].node->label == ref) {
      by_label = i;
      ++label_hits;
    }
  }
  if (label_hits > 1) throw Error("AmbiguousLabel", "label '" + std::string(ref) + "' matches several nodes");
  return by_label;
}

std::vector<bool> SetGraph::reachable_from(int from) const {
  std::vector<bool> seen(nodes_.size(), false);
  std::deque<int> queue{from};
  auto push = [&](int w) {
    if (w >= 0 && !seen[static_cast<std::size_t>(w)]) {
      seen[static_cast<std::size_t>(w)] = true;
      queue.push_back(w);
    }
  };
  while (!queue.empty()) {
    int v = queue.front();
    queue.pop_front();
    const auto& info = nodes_[static_cast<std::size_t>(v)];
    for (int e : info.out) push(edges_[static_cast<std::size_t>(e)].to);
    push(info.nested_entry);
    push(info.link_entry);
  }
  return seen;
}

}  // namespace tasc
