// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#include "tasc/ingest.hpp"

#include <charconv>
#include <istream>
#include <map>
#include <set>
#include <tuple>

#include "tasc/error.hpp"

namespace tasc {

namespace {

constexpr std::uint64_t kGrid = 1'000'000'000'000ULL;  // 12 decimal places

[[noreturn]] void bad_csv(std::size_t line, const std::string& msg) {
  throw Error("CsvFormat", "line " + std::to_string(line) + ": " + msg);
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line, std::size_t lineno) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"' && trim(field).empty()) {
      quoted = true;
      was_quoted = true;
      field.clear();
    } else if (c == ',') {
      out.push_back(was_quoted ? field : trim(field));
      field.clear();
      was_quoted = false;
    } else {
      field += c;
    }
  }
  if (quoted) bad_csv(lineno, "unterminated quoted field");
  out.push_back(was_quoted ? field : trim(field));
  return out;
}

// round(count * kGrid / total), half up, by decimal long division so the
// product never overflows.
std::uint64_t grid_units(std::uint64_t count, std::uint64_t total) {
  std::uint64_t q = count / total;
  std::uint64_t r = count % total;
  for (int digit = 0; digit < 12; ++digit) {
    r *= 10;
    q = q * 10 + r / total;
    r %= total;
  }
  if (r >= total - r) ++q;
  return q;
}

}  // namespace

std::vector<ContingencyRow> read_contingency_csv(std::istream& in) {
  std::vector<ContingencyRow> rows;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto fields = split_fields(line, lineno);
    if (!header) {
      if (fields != std::vector<std::string>{"caremap", "node", "edge", "count"}) {
        bad_csv(lineno, "expected header caremap,node,edge,count");
      }
      header = true;
      continue;
    }
    if (fields.size() != 4) bad_csv(lineno, "expected 4 fields, got " + std::to_string(fields.size()));
    ContingencyRow row{fields[0], fields[1], fields[2], 0, lineno};
    const auto& c = fields[3];
    auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), row.count);
    if (c.empty() || ec != std::errc() || ptr != c.data() + c.size()) {
      bad_csv(lineno, "count '" + c + "' is not a non-negative integer");
    }
    rows.push_back(std::move(row));
  }
  if (!header) bad_csv(lineno, "missing header caremap,node,edge,count");
  return rows;
}

TransitionModel derive_model(std::span<const ContingencyRow> rows, const CaremapSet& set, std::uint64_t seed) {
  TransitionModel model;
  model.master_seed = seed;
  std::map<NodeKey, std::vector<const ContingencyRow*>> groups;
  std::vector<NodeKey> order;
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (const auto& row : rows) {
    auto where = row.line ? " (line " + std::to_string(row.line) + ")" : std::string();
    const auto* m = set.find(row.caremap);
    const auto* n = m ? m->find_node(row.node) : nullptr;
    const auto* e = m ? m->find_edge(row.edge) : nullptr;
    if (!n || !e || e->from != row.node) {
      throw Error("UnknownEdge", row.caremap + "." + row.node + " has no out-edge '" + row.edge + "'" + where);
    }
    if (!seen.emplace(row.caremap, row.node, row.edge).second) {
      throw Error("DuplicateRow", "duplicate row for " + row.caremap + "." + row.node + " edge " + row.edge + where);
    }
    NodeKey key{row.caremap, row.node};
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&row);
  }
  for (const auto& key : order) {
    const auto& list = groups[key];
    std::uint64_t total = 0;
    const ContingencyRow* largest = nullptr;
    for (const auto* r : list) {
      total += r->count;
      if (!largest || r->count > largest->count) largest = r;
    }
    if (total == 0) throw Error("ZeroTotal", key.first + "." + key.second + " has a zero total count");
    EdgeProbabilities ep;
    for (const auto* e : set.find(key.first)->out_edges(key.second)) ep.p[e->id] = 0.0;
    std::uint64_t assigned = 0;
    for (const auto* r : list) {
      if (r == largest) continue;
      auto u = grid_units(r->count, total);
      assigned += u;
      ep.p[r->edge] = static_cast<double>(u) / static_cast<double>(kGrid);
    }
    ep.p[largest->edge] = static_cast<double>(kGrid - assigned) / static_cast<double>(kGrid);
    model.branches.emplace(key, std::move(ep));
  }
  return model;
}

}  // namespace tasc
