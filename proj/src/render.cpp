// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#include "tasc/render.hpp"

#include <algorithm>
#include <sstream>

namespace tasc {

StyleProfile StyleProfile::mono() {
  StyleProfile s;
  s.glyphs[NodeKind::EntryPoint] = {{"shape", "circle"}, {"style", "filled"}, {"fillcolor", "black"},
                                    {"width", "0.3"}, {"fixedsize", "true"}};
  s.glyphs[NodeKind::ExitPoint] = {{"shape", "doublecircle"}, {"width", "0.3"}, {"fixedsize", "true"}};
  s.glyphs[NodeKind::ExclusionPoint] = {{"shape", "octagon"}};
  s.glyphs[NodeKind::Activity] = {{"shape", "box"}, {"style", "rounded"}};
  s.glyphs[NodeKind::NestedActivity] = {{"shape", "folder"}, {"style", "rounded"}};
  s.glyphs[NodeKind::Decision] = {{"shape", "diamond"}};
  s.glyphs[NodeKind::NestedDecision] = {{"shape", "diamond"}, {"peripheries", "2"}};
  return s;
}

StyleProfile StyleProfile::color() {
  StyleProfile s = mono();
  s.monochrome = false;
  s.glyphs[NodeKind::ExclusionPoint].emplace_back("color", "firebrick");
  s.glyphs[NodeKind::Decision].emplace_back("color", "darkgoldenrod");
  s.glyphs[NodeKind::NestedDecision].emplace_back("color", "darkgoldenrod");
  return s;
}

std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': break;
      default: out += c;
    }
  }
  out += '"';
  return out;
}

namespace {

std::string fill_for(ContentType t) {
  switch (t) {
    case ContentType::Diagnosis: return "lightblue";
    case ContentType::Treatment: return "lightsalmon";
    case ContentType::Monitoring: return "palegreen";
  }
  return "white";
}

void write_attrs(std::ostream& os, const DotAttrs& attrs) {
  os << " [";
  for (std::size_t i = 0; i < attrs.size(); ++i) {
    os << (i ? ", " : "") << attrs[i].first << "=" << dot_quote(attrs[i].second);
  }
  os << "]";
}

void set_attr(DotAttrs& attrs, const std::string& key, const std::string& value) {
  for (auto& [k, v] : attrs) {
    if (k == key) {
      v = value;
      return;
    }
  }
  attrs.emplace_back(key, value);
}

std::string qualified(const std::string& caremap, const std::string& node) {
  return dot_quote(caremap + "." + node);
}

}  // namespace

std::string to_dot(const CaremapSet& set, const StyleProfile& style) {
  std::ostringstream os;
  os << "digraph \"tasc\" {\n";
  os << "  graph [compound=\"true\", rankdir=\"TB\"];\n";
  os << "  node [fontname=\"Helvetica\"];\n";
  os << "  edge [fontname=\"Helvetica\"];\n";
  for (const auto& [cid, m] : set.caremaps) {
    os << "  subgraph " << dot_quote("cluster_" + cid) << " {\n";
    DotAttrs cluster = style.cluster;
    std::string title = m.title.empty() ? cid : m.title;
    set_attr(cluster, "label", title == cid ? cid : title + " (" + cid + ")");
    for (const auto& [k, v] : cluster) os << "    " << k << "=" << dot_quote(v) << ";\n";

    std::vector<const Node*> nodes;
    for (const auto& n : m.nodes) nodes.push_back(&n);
    std::sort(nodes.begin(), nodes.end(), [](const Node* a, const Node* b) { return a->id < b->id; });
    for (const auto* n : nodes) {
      DotAttrs attrs;
      auto glyph = style.glyphs.find(n->kind);
      if (glyph != style.glyphs.end()) attrs = glyph->second;
      std::string label = n->label.empty() ? n->id : n->label;
      std::string tooltip = n->id;
      switch (n->kind) {
        case NodeKind::EntryPoint:
        case NodeKind::ExitPoint:
          label.clear();
          set_attr(attrs, "xlabel", n->label.empty() ? n->id : n->label);
          break;
        case NodeKind::ExclusionPoint:
          set_attr(attrs, "xlabel", label);
          label = "X";
          break;
        case NodeKind::NestedActivity:
        case NodeKind::NestedDecision:
          label += "\n[+] " + n->nested_ref.value_or("?");
          tooltip = "nested caremap: " + n->nested_ref.value_or("?");
          break;
        case NodeKind::Decision:
          if (n->aspect) tooltip = n->id + " (" + std::string(to_string(*n->aspect)) + ")";
          break;
        case NodeKind::Activity: break;
      }
      set_attr(attrs, "label", label);
      set_attr(attrs, "tooltip", tooltip);
      if (!style.monochrome && is_activity(n->kind)) {
        if (auto t = n->effective_content_type()) {
          std::string s = "filled";
          for (const auto& [k, v] : attrs) {
            if (k == "style") s = v + ",filled";
          }
          set_attr(attrs, "style", s);
          set_attr(attrs, "fillcolor", fill_for(*t));
        }
      }
      os << "    " << qualified(cid, n->id);
      write_attrs(os, attrs);
      os << ";\n";
    }

    std::vector<const Edge*> edges;
    for (const auto& e : m.edges) edges.push_back(&e);
    std::sort(edges.begin(), edges.end(), [](const Edge* a, const Edge* b) { return a->id < b->id; });
    for (const auto* e : edges) {
      os << "    " << qualified(cid, e->from) << " -> " << qualified(cid, e->to);
      DotAttrs attrs{{"id", cid + "." + e->id}};
      if (e->criterion) attrs.emplace_back("label", style.label_open + to_string(*e->criterion) + style.label_close);
      write_attrs(os, attrs);
      os << ";\n";
    }
    os << "  }\n";
  }
  auto links = set.links;
  std::sort(links.begin(), links.end());
  for (const auto& l : links) {
    os << "  " << qualified(l.from_caremap, l.from_exit) << " -> " << qualified(l.to_caremap, l.to_entry);
    write_attrs(os, {{"style", "dashed"},
                     {"ltail", "cluster_" + l.from_caremap},
                     {"lhead", "cluster_" + l.to_caremap},
                     {"arrowhead", "empty"}});
    os << ";\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace tasc
