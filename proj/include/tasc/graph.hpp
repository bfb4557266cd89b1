// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "tasc/model.hpp"

namespace tasc {

// Flat, index-based view of a whole caremap set: every node of every caremap
// gets one integer id, with nesting and multi-level links resolved to the
// entry they lead to. Replay and synthesis both walk this.
class SetGraph {
 public:
  struct NodeInfo {
    std::string caremap;
    const Node* node = nullptr;
    std::string qualified;     // caremap.node
    std::string display;       // bare id when unique across the set
    std::vector<int> out;      // edge indices, by edge id
    std::vector<int> by_target;  // edge indices, by (target id, edge id)
    int nested_entry = -1;     // nested nodes
    int link_entry = -1;       // linked exits
  };

  struct EdgeInfo {
    const Edge* edge = nullptr;
    int from = -1;
    int to = -1;
  };

  // The set must outlive the graph. Throws Error("InvalidSet") when a
  // reference does not resolve.
  explicit SetGraph(const CaremapSet& set);

  [[nodiscard]] const CaremapSet& set() const { return *set_; }
  [[nodiscard]] int size() const { return static_cast<int>(nodes_.size()); }
  [[nodiscard]] const NodeInfo& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  [[nodiscard]] const EdgeInfo& edge(int i) const { return edges_[static_cast<std::size_t>(i)]; }
  [[nodiscard]] int edge_count() const { return static_cast<int>(edges_.size()); }

  [[nodiscard]] int find(std::string_view caremap, std::string_view node_id) const;
  // Throws Error("NoUniqueEntry") / Error("UnknownCaremap").
  [[nodiscard]] int entry_of(std::string_view caremap) const;
  [[nodiscard]] int find_out_edge(int node, std::string_view edge_id) const;

  // Trace reference lookup: `caremap.node`, then a node id unique across the
  // set, then a unique node label. Returns -1 when nothing matches; throws
  // Error("AmbiguousRef") or Error("AmbiguousLabel").
  [[nodiscard]] int resolve_ref(std::string_view ref) const;

  // Nodes reachable from `from` (excluded unless on a cycle), following
  // edges, nested entries and links.
  [[nodiscard]] std::vector<bool> reachable_from(int from) const;

 private:
  const CaremapSet* set_;
  std::vector<NodeInfo> nodes_;
  std::vector<EdgeInfo> edges_;
};

}  // namespace tasc
