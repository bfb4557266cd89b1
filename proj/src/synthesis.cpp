// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#include "tasc/synthesis.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <deque>
#include <exception>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "tasc/conformance.hpp"
#include "tasc/dsl.hpp"
#include "tasc/error.hpp"
#include "tasc/rng.hpp"

namespace tasc {

using nlohmann::json;

// ---- model I/O -------------------------------------------------------------

namespace {

[[noreturn]] void bad_model(const std::string& msg) { throw Error("ModelFormat", msg); }

std::string need_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) bad_model(std::string("expected string field '") + key + "'");
  return it->get<std::string>();
}

double need_number(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number()) bad_model(std::string("expected numeric field '") + key + "'");
  return it->get<double>();
}

std::optional<std::string> opt_unit(const json& j) {
  auto it = j.find("unit");
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) bad_model("'unit' must be a string or null");
  return it->get<std::string>();
}

Distribution dist_from_json(const json& j) {
  if (!j.is_object()) bad_model("'dist' must be an object");
  auto kind = need_string(j, "kind");
  Distribution d;
  if (kind == "categorical") {
    d.kind = Distribution::Kind::Categorical;
    auto v = j.find("values");
    auto p = j.find("probs");
    if (v == j.end() || p == j.end() || !v->is_array() || !p->is_array()) {
      bad_model("categorical needs 'values' and 'probs' arrays");
    }
    if (v->size() != p->size() || v->empty()) bad_model("categorical 'values' and 'probs' must be non-empty and equal length");
    for (const auto& x : *v) {
      if (x.is_number()) {
        d.values.emplace_back(x.get<double>());
      } else if (x.is_string()) {
        d.values.emplace_back(x.get<std::string>());
      } else {
        bad_model("categorical values must be numbers or strings");
      }
    }
    double sum = 0.0;
    for (const auto& x : *p) {
      if (!x.is_number() || x.get<double>() < 0.0) bad_model("categorical probs must be non-negative numbers");
      d.probs.push_back(x.get<double>());
      sum += d.probs.back();
    }
    if (std::abs(sum - 1.0) > 1e-9) bad_model("categorical probs sum to " + std::to_string(sum));
  } else if (kind == "normal") {
    d.kind = Distribution::Kind::Normal;
    d.mu = need_number(j, "mu");
    d.sigma = need_number(j, "sigma");
    if (!(d.sigma > 0.0)) bad_model("normal sigma must be positive");
  } else if (kind == "uniform") {
    d.kind = Distribution::Kind::Uniform;
    d.a = need_number(j, "a");
    d.b = need_number(j, "b");
    if (!(d.a < d.b)) bad_model("uniform requires a < b");
  } else {
    bad_model("unknown distribution kind '" + kind + "'");
  }
  return d;
}

json to_json(const Distribution& d) {
  switch (d.kind) {
    case Distribution::Kind::Categorical: {
      json values = json::array();
      for (const auto& v : d.values) {
        if (const auto* x = std::get_if<double>(&v)) {
          values.push_back(*x);
        } else {
          values.push_back(std::get<std::string>(v));
        }
      }
      return {{"kind", "categorical"}, {"values", values}, {"probs", d.probs}};
    }
    case Distribution::Kind::Normal: return {{"kind", "normal"}, {"mu", d.mu}, {"sigma", d.sigma}};
    case Distribution::Kind::Uniform: return {{"kind", "uniform"}, {"a", d.a}, {"b", d.b}};
  }
  return nullptr;
}

json unit_json(const std::optional<std::string>& u) { return u ? json(*u) : json(nullptr); }

}  // namespace

TransitionModel model_from_json(const json& j) {
  if (!j.is_object()) bad_model("model must be a JSON object");
  auto version = j.find("tasc_model");
  if (version == j.end() || !version->is_number_integer() || version->get<int>() != 1) {
    bad_model("expected \"tasc_model\": 1");
  }
  TransitionModel m;
  if (auto s = j.find("master_seed"); s != j.end()) {
    if (s->is_number_unsigned()) {
      m.master_seed = s->get<std::uint64_t>();
    } else if (s->is_number_integer() && s->get<long long>() >= 0) {
      m.master_seed = static_cast<std::uint64_t>(s->get<long long>());
    } else {
      bad_model("'master_seed' must be a non-negative integer");
    }
  }
  if (auto b = j.find("branches"); b != j.end()) {
    if (!b->is_array()) bad_model("'branches' must be an array");
    for (const auto& row : *b) {
      NodeKey key{need_string(row, "caremap"), need_string(row, "node")};
      if (m.branches.count(key)) bad_model("duplicate branch annotation for " + key.first + "." + key.second);
      auto edges = row.find("edges");
      auto sampler = row.find("sampler");
      if ((edges != row.end()) == (sampler != row.end())) {
        bad_model("branch " + key.first + "." + key.second + " needs exactly one of 'edges' or 'sampler'");
      }
      if (edges != row.end()) {
        if (!edges->is_object()) bad_model("'edges' must be an object of edge id -> probability");
        EdgeProbabilities ep;
        for (const auto& [id, p] : edges->items()) {
          if (!p.is_number()) bad_model("edge probability for '" + id + "' must be a number");
          ep.p[id] = p.get<double>();
        }
        m.branches.emplace(key, std::move(ep));
      } else {
        VariableSampler vs;
        vs.var = need_string(*sampler, "var");
        vs.unit = opt_unit(*sampler);
        auto d = sampler->find("dist");
        if (d == sampler->end()) bad_model("sampler needs 'dist'");
        vs.dist = dist_from_json(*d);
        m.branches.emplace(key, std::move(vs));
      }
    }
  }
  if (auto e = j.find("emitters"); e != j.end()) {
    if (!e->is_array()) bad_model("'emitters' must be an array");
    for (const auto& row : *e) {
      NodeKey key{need_string(row, "caremap"), need_string(row, "node")};
      auto obs = row.find("observations");
      if (obs == row.end() || !obs->is_array()) bad_model("emitter needs an 'observations' array");
      auto& list = m.emitters[key];
      for (const auto& o : *obs) {
        Emission em;
        em.var = need_string(o, "var");
        em.unit = opt_unit(o);
        auto d = o.find("dist");
        if (d == o.end()) bad_model("observation needs 'dist'");
        em.dist = dist_from_json(*d);
        list.push_back(std::move(em));
      }
    }
  }
  return m;
}

json to_json(const TransitionModel& m) {
  json branches = json::array();
  for (const auto& [key, mode] : m.branches) {
    json row{{"caremap", key.first}, {"node", key.second}};
    if (const auto* ep = std::get_if<EdgeProbabilities>(&mode)) {
      json edges = json::object();
      for (const auto& [id, p] : ep->p) edges[id] = p;
      row["edges"] = edges;
    } else {
      const auto& vs = std::get<VariableSampler>(mode);
      row["sampler"] = {{"var", vs.var}, {"unit", unit_json(vs.unit)}, {"dist", to_json(vs.dist)}};
    }
    branches.push_back(std::move(row));
  }
  json emitters = json::array();
  for (const auto& [key, list] : m.emitters) {
    json obs = json::array();
    for (const auto& em : list) {
      obs.push_back({{"var", em.var}, {"unit", unit_json(em.unit)}, {"dist", to_json(em.dist)}});
    }
    emitters.push_back({{"caremap", key.first}, {"node", key.second}, {"observations", obs}});
  }
  return {{"tasc_model", 1}, {"master_seed", m.master_seed}, {"branches", branches}, {"emitters", emitters}};
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("Crypto", "SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

// ---- sampler decidability --------------------------------------------------

namespace {

struct Interval {
  double lo, hi;
  bool lo_closed, hi_closed;
};
using IntervalSet = std::vector<Interval>;

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_empty(const Interval& x) { return x.lo > x.hi || (x.lo == x.hi && !(x.lo_closed && x.hi_closed)); }

IntervalSet normalize(IntervalSet s) {
  std::erase_if(s, is_empty);
  std::sort(s.begin(), s.end(), [](const Interval& a, const Interval& b) {
    return a.lo < b.lo || (a.lo == b.lo && a.lo_closed && !b.lo_closed);
  });
  IntervalSet out;
  for (const auto& x : s) {
    if (!out.empty()) {
      auto& last = out.back();
      if (x.lo < last.hi || (x.lo == last.hi && (last.hi_closed || x.lo_closed))) {
        if (x.hi > last.hi || (x.hi == last.hi && x.hi_closed)) {
          last.hi = x.hi;
          last.hi_closed = x.hi_closed;
        }
        continue;
      }
    }
    out.push_back(x);
  }
  return out;
}

IntervalSet complement(const IntervalSet& in) {
  IntervalSet s = normalize(in);
  IntervalSet out;
  double lo = -kInf;
  bool lo_closed = false;
  for (const auto& x : s) {
    out.push_back({lo, x.lo, lo_closed, !x.lo_closed});
    lo = x.hi;
    lo_closed = !x.hi_closed;
  }
  out.push_back({lo, kInf, lo_closed, false});
  return normalize(out);
}

IntervalSet intersect(const IntervalSet& a, const IntervalSet& b) {
  IntervalSet out;
  for (const auto& x : a) {
    for (const auto& y : b) {
      Interval z;
      if (x.lo > y.lo || (x.lo == y.lo && !x.lo_closed)) {
        z.lo = x.lo;
        z.lo_closed = x.lo_closed;
      } else {
        z.lo = y.lo;
        z.lo_closed = y.lo_closed;
      }
      if (x.hi < y.hi || (x.hi == y.hi && !x.hi_closed)) {
        z.hi = x.hi;
        z.hi_closed = x.hi_closed;
      } else {
        z.hi = y.hi;
        z.hi_closed = y.hi_closed;
      }
      out.push_back(z);
    }
  }
  return normalize(out);
}

IntervalSet unite(IntervalSet a, const IntervalSet& b) {
  a.insert(a.end(), b.begin(), b.end());
  return normalize(std::move(a));
}

[[noreturn]] void bad_annotation(const std::string& msg) { throw Error("InvalidAnnotation", msg); }

IntervalSet to_intervals(const Criterion& c, const VariableSampler& s, const std::string& where) {
  using K = Criterion::Kind;
  switch (c.kind) {
    case K::Comparison: {
      if (c.token) bad_annotation(where + ": categorical comparison under a continuous sampler");
      if (c.var != s.var) bad_annotation(where + ": criterion reads '" + c.var + "', sampler draws '" + s.var + "'");
      if (c.unit != s.unit) bad_annotation(where + ": criterion unit differs from sampler unit");
      double v = c.value.value;
      switch (c.op) {
        case CompareOp::Less: return {{-kInf, v, false, false}};
        case CompareOp::LessEqual: return {{-kInf, v, false, true}};
        case CompareOp::Greater: return {{v, kInf, false, false}};
        case CompareOp::GreaterEqual: return {{v, kInf, true, false}};
        case CompareOp::Equal: return {{v, v, true, true}};
        case CompareOp::NotEqual: return complement({{v, v, true, true}});
      }
      break;
    }
    case K::InRange:
      if (c.var != s.var) bad_annotation(where + ": criterion reads '" + c.var + "', sampler draws '" + s.var + "'");
      if (c.unit != s.unit) bad_annotation(where + ": criterion unit differs from sampler unit");
      return normalize({{c.low.value, c.high.value, true, true}});
    case K::And: {
      IntervalSet acc{{-kInf, kInf, false, false}};
      for (const auto& ch : c.children) acc = intersect(acc, to_intervals(ch, s, where));
      return acc;
    }
    case K::Or: {
      IntervalSet acc;
      for (const auto& ch : c.children) acc = unite(acc, to_intervals(ch, s, where));
      return acc;
    }
    case K::Not: return complement(to_intervals(c.children.front(), s, where));
    case K::Predicate: bad_annotation(where + ": predicates are not allowed under a sampler");
    case K::Otherwise: bad_annotation(where + ": nested otherwise");
  }
  return {};
}

double normal_cdf(double x, double mu, double sigma) {
  if (x == -kInf) return 0.0;
  if (x == kInf) return 1.0;
  return 0.5 * std::erfc(-(x - mu) / (sigma * std::sqrt(2.0)));
}

double mass(const IntervalSet& s, const Distribution& d) {
  double p = 0.0;
  for (const auto& x : s) {
    if (d.kind == Distribution::Kind::Normal) {
      p += normal_cdf(x.hi, d.mu, d.sigma) - normal_cdf(x.lo, d.mu, d.sigma);
    } else {
      double lo = std::max(x.lo, d.a);
      double hi = std::min(x.hi, d.b);
      if (hi > lo) p += (hi - lo) / (d.b - d.a);
    }
  }
  return p;
}

bool uses_predicate(const Criterion& c) {
  if (c.kind == Criterion::Kind::Predicate) return true;
  return std::any_of(c.children.begin(), c.children.end(), uses_predicate);
}

// Expected probability of each out-edge (in `edges` order) under the sampler.
std::vector<double> analyse_sampler(const SetGraph& g, int node, const std::vector<int>& edges,
                                    const VariableSampler& s) {
  const std::string where = g.node(node).qualified;
  std::vector<BranchOption> options;
  int otherwise = -1;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto& e = *g.edge(edges[k]).edge;
    if (!e.criterion) bad_annotation(where + ": edge '" + e.id + "' has no criterion");
    if (uses_predicate(*e.criterion)) bad_annotation(where + ": predicates are not allowed under a sampler");
    auto vars = referenced_variables(*e.criterion);
    for (const auto& v : vars) {
      if (v != s.var) bad_annotation(where + ": criterion reads '" + v + "', sampler draws '" + s.var + "'");
    }
    if (e.criterion->is_otherwise()) otherwise = static_cast<int>(k);
    options.push_back({e.id, &*e.criterion});
  }
  std::vector<double> expected(edges.size(), 0.0);

  if (s.dist.kind == Distribution::Kind::Categorical) {
    for (std::size_t i = 0; i < s.dist.values.size(); ++i) {
      if (s.dist.probs[i] <= 0.0) continue;
      Bindings b;
      b.observe(s.var, s.dist.values[i], s.unit);
      Selection sel;
      try {
        sel = select_branch(options, b);
      } catch (const Error& err) {
        bad_annotation(where + ": " + err.what());
      }
      if (sel.kind != Selection::Kind::Chosen) {
        bad_annotation(where + ": sampled value does not select exactly one branch (" +
                       std::string(to_string(sel.kind)) + ")");
      }
      for (std::size_t k = 0; k < edges.size(); ++k) {
        if (options[k].edge_id == sel.edges.front()) expected[k] += s.dist.probs[i];
      }
    }
    return expected;
  }

  if (otherwise < 0) bad_annotation(where + ": a continuous sampler needs an otherwise branch");
  std::vector<IntervalSet> sets(edges.size());
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (static_cast<int>(k) == otherwise) continue;
    sets[k] = to_intervals(*options[k].criterion, s, where);
  }
  for (std::size_t a = 0; a < edges.size(); ++a) {
    for (std::size_t b = a + 1; b < edges.size(); ++b) {
      if (static_cast<int>(a) == otherwise || static_cast<int>(b) == otherwise) continue;
      if (!intersect(sets[a], sets[b]).empty()) {
        bad_annotation(where + ": criteria on '" + options[a].edge_id + "' and '" + options[b].edge_id +
                       "' overlap for some sampled values");
      }
    }
  }
  double rest = 1.0;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (static_cast<int>(k) == otherwise) continue;
    expected[k] = mass(sets[k], s.dist);
    rest -= expected[k];
  }
  expected[static_cast<std::size_t>(otherwise)] = std::max(0.0, rest);
  return expected;
}

// ---- termination analysis --------------------------------------------------

std::vector<int> positive_out(const STM& stm, int v) {
  const auto& st = stm.states[static_cast<std::size_t>(v)];
  std::vector<int> out;
  switch (st.mode) {
    case STM::State::Mode::Fixed: out = st.edges; break;
    case STM::State::Mode::Edges:
    case STM::State::Mode::Sampler:
      for (std::size_t k = 0; k < st.edges.size(); ++k) {
        if (st.expected[k] > 0.0) out.push_back(st.edges[k]);
      }
      break;
    case STM::State::Mode::Terminal: break;
  }
  return out;
}

void check_termination(const STM& stm) {
  const SetGraph& g = *stm.graph;
  const CaremapSet& set = *stm.set;
  std::map<std::string, int> entries;
  for (const auto& [id, m] : set.caremaps) {
    if (m.nodes_of_kind(NodeKind::EntryPoint).size() == 1) entries[id] = g.entry_of(id);
  }
  auto nested_of = [&](int v) -> std::string {
    const auto& ref = g.node(v).node->nested_ref;
    return ref ? *ref : std::string();
  };

  // Per caremap: can a walk started at its entry reach an exit (ret), reach
  // an exclusion (term), or finish at top level (fin)?
  std::map<std::string, bool> ret, term, fin;
  auto explore = [&](int start, auto&& on_node) {
    std::set<int> seen{start};
    std::deque<int> queue{start};
    while (!queue.empty()) {
      int v = queue.front();
      queue.pop_front();
      if (!on_node(v)) continue;
      for (int e : positive_out(stm, v)) {
        int w = g.edge(e).to;
        if (seen.insert(w).second) queue.push_back(w);
      }
    }
  };
  auto passes = [&](int v) {
    if (!is_nested(g.node(v).node->kind)) return true;
    return ret[nested_of(v)];
  };
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& [id, entry] : entries) {
      bool r = false, t = false, f = false;
      explore(entry, [&](int v) {
        auto kind = g.node(v).node->kind;
        if (kind == NodeKind::ExclusionPoint) t = true;
        if (kind == NodeKind::ExitPoint) {
          r = true;
          int link = g.node(v).link_entry;
          if (link < 0 || fin[g.node(link).caremap]) f = true;
        }
        if (is_nested(kind) && term[nested_of(v)]) t = true;
        return passes(v);
      });
      f = f || t;
      if (r != ret[id] || t != term[id] || f != fin[id]) {
        ret[id] = ret[id] || r;
        term[id] = term[id] || t;
        fin[id] = fin[id] || f;
        changed = true;
      }
    }
  }

  // Which caremaps run nested, which at top level.
  std::set<std::string> top{g.node(stm.entry).caremap};
  std::set<std::string> nested;
  for (bool changed = true; changed;) {
    changed = false;
    auto contexts = top;
    contexts.insert(nested.begin(), nested.end());
    for (const auto& id : contexts) {
      explore(entries[id], [&](int v) {
        const auto& info = g.node(v);
        if (is_nested(info.node->kind) && nested.insert(nested_of(v)).second) changed = true;
        if (info.node->kind == NodeKind::ExitPoint && info.link_entry >= 0 && top.count(id) &&
            top.insert(g.node(info.link_entry).caremap).second) {
          changed = true;
        }
        return passes(v);
      });
    }
  }

  auto check = [&](const std::string& id, bool as_top) {
    std::vector<int> reached;
    explore(entries[id], [&](int v) {
      reached.push_back(v);
      return passes(v);
    });
    auto goal = [&](int v) {
      const auto& info = g.node(v);
      auto kind = info.node->kind;
      if (kind == NodeKind::ExclusionPoint) return true;
      if (is_nested(kind) && term[nested_of(v)]) return true;
      if (kind == NodeKind::ExitPoint) {
        if (!as_top || info.link_entry < 0) return true;
        return fin[g.node(info.link_entry).caremap];
      }
      return false;
    };
    // Backward closure from goals over the positive-probability graph.
    std::set<int> in_map(reached.begin(), reached.end());
    std::map<int, std::vector<int>> preds;
    for (int v : reached) {
      if (!passes(v)) continue;
      for (int e : positive_out(stm, v)) preds[g.edge(e).to].push_back(v);
    }
    std::set<int> good;
    std::deque<int> queue;
    for (int v : reached) {
      if (goal(v)) {
        good.insert(v);
        queue.push_back(v);
      }
    }
    while (!queue.empty()) {
      int w = queue.front();
      queue.pop_front();
      for (int v : preds[w]) {
        if (good.insert(v).second) queue.push_back(v);
      }
    }
    std::vector<std::string> stuck;
    for (int v : reached) {
      if (!good.count(v)) stuck.push_back(g.node(v).qualified);
    }
    if (!stuck.empty()) {
      std::sort(stuck.begin(), stuck.end());
      std::string list;
      for (std::size_t k = 0; k < stuck.size(); ++k) list += (k ? ", " : "") + stuck[k];
      throw Error("InescapableCycle", "no probability-positive route to a terminal from: " + list);
    }
  };
  for (const auto& id : top) check(id, true);
  for (const auto& id : nested) check(id, false);
}

// A sampler decision must not be followed, before any activity, by another
// sampler on the same variable: replay folds both observations into the
// first decision's bindings.
void check_sampler_spacing(const STM& stm) {
  const SetGraph& g = *stm.graph;
  std::map<std::string, std::vector<int>> callers;
  for (int v = 0; v < g.size(); ++v) {
    if (is_nested(g.node(v).node->kind)) callers[*g.node(v).node->nested_ref].push_back(v);
  }
  for (int d = 0; d < g.size(); ++d) {
    const auto& st = stm.states[static_cast<std::size_t>(d)];
    if (st.mode != STM::State::Mode::Sampler) continue;
    std::set<int> seen;
    std::vector<int> todo;
    for (int e : st.edges) todo.push_back(g.edge(e).to);
    while (!todo.empty()) {
      int x = todo.back();
      todo.pop_back();
      if (!seen.insert(x).second) continue;
      const auto& info = g.node(x);
      if (is_activity(info.node->kind)) continue;
      const auto& sx = stm.states[static_cast<std::size_t>(x)];
      if (sx.mode == STM::State::Mode::Sampler && sx.sampler->var == st.sampler->var) {
        bad_annotation(g.node(d).qualified + " and " + info.qualified + " both sample '" + st.sampler->var +
                       "' with no activity between them");
      }
      for (int e : info.out) todo.push_back(g.edge(e).to);
      if (info.nested_entry >= 0) todo.push_back(info.nested_entry);
      if (info.node->kind == NodeKind::ExitPoint) {
        if (info.link_entry >= 0) todo.push_back(info.link_entry);
        for (int c : callers[info.caremap]) {
          for (int e : g.node(c).out) todo.push_back(g.edge(e).to);
        }
      }
    }
  }
}

}  // namespace

STM compile_stm(const CaremapSet& set, std::string_view entry_caremap, const TransitionModel& model) {
  STM stm;
  auto owned = std::make_shared<CaremapSet>(set);
  stm.set = owned;
  stm.graph = std::make_shared<SetGraph>(*owned);
  const SetGraph& g = *stm.graph;
  stm.entry = g.entry_of(entry_caremap);

  for (const auto& [key, mode] : model.branches) {
    if (g.find(key.first, key.second) < 0) {
      bad_annotation("annotation for unknown node " + key.first + "." + key.second);
    }
  }
  for (const auto& [key, list] : model.emitters) {
    int v = g.find(key.first, key.second);
    if (v < 0) bad_annotation("emitter for unknown node " + key.first + "." + key.second);
    if (!is_activity(g.node(v).node->kind)) {
      bad_annotation("emitter on " + key.first + "." + key.second + ", which is not an activity");
    }
  }

  auto reachable = g.reachable_from(stm.entry);
  reachable[static_cast<std::size_t>(stm.entry)] = true;

  stm.states.resize(static_cast<std::size_t>(g.size()));
  for (int v = 0; v < g.size(); ++v) {
    const auto& info = g.node(v);
    auto& st = stm.states[static_cast<std::size_t>(v)];
    NodeKey key{info.caremap, info.node->id};
    if (auto it = model.emitters.find(key); it != model.emitters.end()) st.emissions = it->second;
    if (is_terminal(info.node->kind)) {
      st.mode = STM::State::Mode::Terminal;
      stm.terminals.push_back(v);
      continue;
    }
    auto ann = model.branches.find(key);
    if (info.out.size() < 2) {
      if (ann != model.branches.end()) bad_annotation(info.qualified + " has fewer than 2 out-edges; nothing to annotate");
      st.mode = info.out.empty() ? STM::State::Mode::Terminal : STM::State::Mode::Fixed;
      st.edges = info.out;
      continue;
    }
    st.branching = true;
    st.edges = info.out;
    if (ann == model.branches.end()) {
      if (reachable[static_cast<std::size_t>(v)]) {
        throw Error("MissingAnnotation", "branching node " + info.qualified + " has no annotation");
      }
      st.mode = STM::State::Mode::Terminal;
      st.expected.assign(st.edges.size(), 0.0);
      continue;
    }
    if (const auto* ep = std::get_if<EdgeProbabilities>(&ann->second)) {
      std::set<std::string> want, have;
      for (int e : info.out) want.insert(g.edge(e).edge->id);
      for (const auto& [id, p] : ep->p) have.insert(id);
      if (want != have) {
        std::string missing, extra;
        for (const auto& id : want) {
          if (!have.count(id)) missing += " " + id;
        }
        for (const auto& id : have) {
          if (!want.count(id)) extra += " " + id;
        }
        bad_annotation(info.qualified + " edge probabilities do not match its out-edges" +
                       (missing.empty() ? "" : "; missing:" + missing) + (extra.empty() ? "" : "; unknown:" + extra));
      }
      st.mode = STM::State::Mode::Edges;
      double sum = 0.0;
      for (int e : info.out) {
        double p = ep->p.at(g.edge(e).edge->id);
        if (!(p >= 0.0) || !std::isfinite(p)) {
          throw Error("ProbabilityMass", info.qualified + " has a negative or non-finite probability");
        }
        sum += p;
        st.expected.push_back(p);
        st.cumulative.push_back(sum);
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        std::ostringstream os;
        os.precision(12);
        os << info.qualified << " probabilities sum to " << sum;
        throw Error("ProbabilityMass", os.str());
      }
    } else {
      const auto& vs = std::get<VariableSampler>(ann->second);
      if (info.node->kind != NodeKind::Decision) {
        bad_annotation(info.qualified + ": samplers are only allowed on decision nodes");
      }
      st.mode = STM::State::Mode::Sampler;
      st.sampler = vs;
      st.expected = analyse_sampler(g, v, st.edges, vs);
    }
  }

  check_sampler_spacing(stm);
  check_termination(stm);

  stm.provenance.caremap_sha = sha256_hex(serialize(set));
  stm.provenance.model_sha = sha256_hex(to_json(model).dump());
  stm.provenance.rng = std::string(kRngName);
  stm.provenance.entry = std::string(entry_caremap);
  stm.provenance.seed = model.master_seed;
  return stm;
}

// ---- generation ------------------------------------------------------------

namespace {

Value draw(const Distribution& d, Xoshiro256ss& rng) {
  switch (d.kind) {
    case Distribution::Kind::Categorical: {
      double u = rng.uniform01();
      double acc = 0.0;
      std::size_t last = 0;
      for (std::size_t i = 0; i < d.probs.size(); ++i) {
        if (d.probs[i] <= 0.0) continue;
        last = i;
        acc += d.probs[i];
        if (u < acc) return d.values[i];
      }
      return d.values[last];
    }
    case Distribution::Kind::Normal: return rng.normal(d.mu, d.sigma);
    case Distribution::Kind::Uniform: return d.a + (d.b - d.a) * rng.uniform01();
  }
  return 0.0;
}

}  // namespace

PatientTrace generate_one(const STM& stm, std::uint64_t seed, std::uint64_t index) {
  const SetGraph& g = *stm.graph;
  Xoshiro256ss rng = substream(seed, index);
  PatientTrace t;
  char id[32];
  std::snprintf(id, sizeof id, "syn-%06llu", static_cast<unsigned long long>(index + 1));
  t.trace_id = id;
  Bindings bindings;
  long long step = 0;
  auto emit = [&](TraceEvent e) {
    e.step = step++;
    t.events.push_back(std::move(e));
  };

  std::vector<int> stack{stm.entry};
  std::size_t visits = 0;
  auto arrive = [&](int w) {
    if (++visits > stm.step_cap) {
      throw Error("StepCap", "trace " + t.trace_id + " exceeded " + std::to_string(stm.step_cap) + " steps");
    }
    const auto& info = g.node(w);
    const auto& st = stm.states[static_cast<std::size_t>(w)];
    stack.back() = w;
    if (is_activity(info.node->kind)) {
      for (const auto& em : st.emissions) {
        Value v = draw(em.dist, rng);
        bindings.observe(em.var, v, em.unit);
        emit(TraceEvent::observation(em.var, v, em.unit));
      }
      emit(TraceEvent::activity(info.display));
    }
    if (info.nested_entry >= 0) stack.push_back(info.nested_entry);
  };

  for (;;) {
    int v = stack.back();
    const auto& info = g.node(v);
    auto kind = info.node->kind;
    if (kind == NodeKind::ExclusionPoint) break;
    if (kind == NodeKind::ExitPoint) {
      if (stack.size() > 1) {
        stack.pop_back();
      } else if (info.link_entry >= 0) {
        arrive(info.link_entry);
        continue;
      } else {
        break;
      }
    }
    int u = stack.back();
    const auto& st = stm.states[static_cast<std::size_t>(u)];
    const auto& uinfo = g.node(u);
    int chosen = -1;
    switch (st.mode) {
      case STM::State::Mode::Terminal:
        throw Error("StepCap", "walk stopped at non-terminal " + uinfo.qualified);
      case STM::State::Mode::Fixed: chosen = st.edges.front(); break;
      case STM::State::Mode::Edges: {
        double r = rng.uniform01();
        for (std::size_t k = 0; k < st.edges.size(); ++k) {
          if (st.expected[k] > 0.0) chosen = st.edges[k];
          if (r < st.cumulative[k] && st.expected[k] > 0.0) break;
        }
        if (is_decision(uinfo.node->kind)) {
          emit(TraceEvent::branch(uinfo.display, g.edge(chosen).edge->id));
        }
        break;
      }
      case STM::State::Mode::Sampler: {
        const auto& s = *st.sampler;
        Value v = draw(s.dist, rng);
        bindings.observe(s.var, v, s.unit);
        emit(TraceEvent::observation(s.var, v, s.unit));
        std::vector<BranchOption> options;
        for (int e : st.edges) options.push_back({g.edge(e).edge->id, &*g.edge(e).edge->criterion});
        auto sel = select_branch(options, bindings);
        if (sel.kind != Selection::Kind::Chosen) {
          throw Error("InvalidAnnotation", uinfo.qualified + ": sampled value selected no unique branch");
        }
        chosen = g.find_out_edge(u, sel.edges.front());
        break;
      }
    }
    arrive(g.edge(chosen).to);
  }
  return t;
}

std::vector<PatientTrace> generate(const STM& stm, std::size_t n, std::uint64_t seed, int workers) {
  std::vector<PatientTrace> out(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out[i] = generate_one(stm, seed, i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  int threads = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::string provenance_header(const STM& stm, std::uint64_t seed, std::size_t n) {
  std::ostringstream os;
  os << "tasc-synth v1 seed=" << seed << " caremap_sha=" << stm.provenance.caremap_sha
     << " model_sha=" << stm.provenance.model_sha << " rng=" << stm.provenance.rng
     << " entry=" << stm.provenance.entry << " n=" << n;
  return os.str();
}

// ---- frequency report ------------------------------------------------------

FrequencyReport frequency_report(std::span<const PatientTrace> traces, const STM& stm, int workers) {
  const SetGraph& g = *stm.graph;
  Replayer replayer(*stm.set, stm.provenance.entry);
  std::vector<std::optional<std::vector<int>>> walks(traces.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < traces.size(); i = next++) {
      try {
        walks[i] = replayer.witness_edges(traces[i]);
      } catch (const Error&) {
        walks[i] = std::nullopt;
      }
    }
  };
  int threads = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(traces.size(), 1))));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  FrequencyReport r;
  std::vector<std::size_t> edge_count(static_cast<std::size_t>(g.edge_count()), 0);
  std::vector<std::size_t> node_visits(static_cast<std::size_t>(g.size()), 0);
  for (const auto& w : walks) {
    if (!w) continue;
    ++r.traces_used;
    for (int e : *w) {
      int from = g.edge(e).from;
      if (!stm.states[static_cast<std::size_t>(from)].branching) continue;
      ++edge_count[static_cast<std::size_t>(e)];
      ++node_visits[static_cast<std::size_t>(from)];
    }
  }
  for (int v = 0; v < g.size(); ++v) {
    const auto& st = stm.states[static_cast<std::size_t>(v)];
    std::size_t visits = node_visits[static_cast<std::size_t>(v)];
    if (!st.branching || visits == 0) continue;
    for (std::size_t k = 0; k < st.edges.size(); ++k) {
      int e = st.edges[k];
      EdgeFrequency f;
      f.caremap = g.node(v).caremap;
      f.node = g.node(v).node->id;
      f.edge = g.edge(e).edge->id;
      f.expected = k < st.expected.size() ? st.expected[k] : 0.0;
      f.count = edge_count[static_cast<std::size_t>(e)];
      f.visits = visits;
      f.empirical = static_cast<double>(f.count) / static_cast<double>(visits);
      f.delta = std::abs(f.empirical - f.expected);
      r.max_delta = std::max(r.max_delta, f.delta);
      r.edges.push_back(std::move(f));
    }
  }
  return r;
}

json to_json(const FrequencyReport& r) {
  json edges = json::array();
  for (const auto& f : r.edges) {
    edges.push_back({{"caremap", f.caremap},
                     {"node", f.node},
                     {"edge", f.edge},
                     {"expected", f.expected},
                     {"empirical", f.empirical},
                     {"delta", f.delta},
                     {"count", f.count},
                     {"visits", f.visits}});
  }
  return {{"edges", edges}, {"max_delta", r.max_delta}, {"traces_used", r.traces_used}};
}

}  // namespace tasc
