// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

// Parser for the DOT subset the renderer emits: one digraph, nested
// subgraphs, node/edge/attr statements, quoted or bare ids. Anything else
// is an error. Used to check well-formedness and to count the structure.

#pragma once

#include <cctype>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tasc::dot {

using Attrs = std::map<std::string, std::string>;

struct DotEdge {
  std::string from, to;
  Attrs attrs;
  std::string subgraph;  // innermost enclosing subgraph, empty at top level
};

struct DotGraph {
  std::string name;
  std::vector<std::string> subgraphs;
  std::map<std::string, Attrs> nodes;
  std::map<std::string, std::string> node_subgraph;
  std::vector<DotEdge> edges;
};

class DotError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

struct Tok {
  enum K { Id, Punct, End } k;
  std::string text;
};

inline std::vector<Tok> lex(std::string_view s) {
  std::vector<Tok> out;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '"') {
      std::string v;
      ++i;
      bool closed = false;
      while (i < s.size()) {
        if (s[i] == '\\' && i + 1 < s.size()) {
          v += s[i];
          v += s[i + 1];
          i += 2;
        } else if (s[i] == '"') {
          ++i;
          closed = true;
          break;
        } else if (s[i] == '\n') {
          throw DotError("raw newline inside a quoted string");
        } else {
          v += s[i++];
        }
      }
      if (!closed) throw DotError("unterminated string");
      out.push_back({Tok::Id, v});
    } else if (c == '-' && i + 1 < s.size() && s[i + 1] == '>') {
      out.push_back({Tok::Punct, "->"});
      i += 2;
    } else if (std::string_view("{}[]=,;").find(c) != std::string_view::npos) {
      out.push_back({Tok::Punct, std::string(1, c)});
      ++i;
    } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.') {
      std::string v;
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_' || s[i] == '.')) v += s[i++];
      out.push_back({Tok::Id, v});
    } else {
      throw DotError(std::string("unexpected character '") + c + "'");
    }
  }
  out.push_back({Tok::End, ""});
  return out;
}

class Parser {
 public:
  explicit Parser(std::vector<Tok> t) : t_(std::move(t)) {}

  DotGraph run() {
    if (!ident("digraph")) throw DotError("expected digraph");
    g_.name = id();
    expect("{");
    body("");
    if (t_[p_].k != Tok::End) throw DotError("trailing input after graph");
    for (const auto& e : g_.edges) {
      if (!g_.nodes.count(e.from) || !g_.nodes.count(e.to))
        throw DotError("edge endpoint not declared: " + e.from + " -> " + e.to);
    }
    return g_;
  }

 private:
  bool punct(std::string_view p) {
    if (t_[p_].k == Tok::Punct && t_[p_].text == p) {
      ++p_;
      return true;
    }
    return false;
  }
  bool ident(std::string_view w) {
    if (t_[p_].k == Tok::Id && t_[p_].text == w) {
      ++p_;
      return true;
    }
    return false;
  }
  void expect(std::string_view p) {
    if (!punct(p)) throw DotError("expected '" + std::string(p) + "' near '" + t_[p_].text + "'");
  }
  std::string id() {
    if (t_[p_].k != Tok::Id) throw DotError("expected an id near '" + t_[p_].text + "'");
    return t_[p_++].text;
  }
  Attrs attr_list() {
    Attrs a;
    expect("[");
    while (!punct("]")) {
      std::string k = id();
      expect("=");
      std::string v = id();
      if (!a.emplace(k, v).second) throw DotError("duplicate attribute " + k);
      if (!punct(",")) punct(";");
    }
    return a;
  }
  void body(const std::string& sub) {
    while (!punct("}")) {
      if (t_[p_].k == Tok::End) throw DotError("unbalanced braces");
      if (ident("subgraph")) {
        std::string name = id();
        g_.subgraphs.push_back(name);
        expect("{");
        body(name);
        continue;
      }
      if (ident("graph") || ident("node") || ident("edge")) {
        attr_list();
        expect(";");
        continue;
      }
      std::string a = id();
      if (punct("=")) {
        id();
        expect(";");
        continue;
      }
      if (punct("->")) {
        std::string b = id();
        Attrs attrs;
        if (t_[p_].k == Tok::Punct && t_[p_].text == "[") attrs = attr_list();
        expect(";");
        g_.edges.push_back({a, b, attrs, sub});
        continue;
      }
      Attrs attrs;
      if (t_[p_].k == Tok::Punct && t_[p_].text == "[") attrs = attr_list();
      expect(";");
      if (g_.nodes.count(a)) throw DotError("node declared twice: " + a);
      g_.nodes[a] = attrs;
      g_.node_subgraph[a] = sub;
    }
  }

  std::vector<Tok> t_;
  std::size_t p_ = 0;
  DotGraph g_;
};

}  // namespace detail

// Throws DotError when `text` is outside the subset.
inline DotGraph parse(std::string_view text) { return detail::Parser(detail::lex(text)).run(); }

inline std::size_t count_clusters(const DotGraph& g) {
  std::size_t n = 0;
  for (const auto& s : g.subgraphs) n += s.rfind("cluster_", 0) == 0;
  return n;
}

// Dashed edges whose endpoints live in different clusters.
inline std::size_t count_link_edges(const DotGraph& g) {
  std::size_t n = 0;
  for (const auto& e : g.edges) {
    auto it = e.attrs.find("style");
    if (it == e.attrs.end() || it->second != "dashed") continue;
    if (g.node_subgraph.at(e.from) != g.node_subgraph.at(e.to)) ++n;
  }
  return n;
}

}  // namespace tasc::dot
