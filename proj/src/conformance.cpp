// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#include "tasc/conformance.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "tasc/error.hpp"

namespace tasc {

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Conformant: return "Conformant";
    case Verdict::NonConformant: return "NonConformant";
    case Verdict::Undetermined: return "Undetermined";
  }
  return "?";
}

std::string_view to_string(VarianceKind k) {
  switch (k) {
    case VarianceKind::SkippedActivity: return "SkippedActivity";
    case VarianceKind::UnexpectedActivity: return "UnexpectedActivity";
    case VarianceKind::WrongBranch: return "WrongBranch";
    case VarianceKind::IncompleteTrace: return "IncompleteTrace";
  }
  return "?";
}

namespace {

using Kind = TraceEvent::Kind;

// Depth-first search over (event index, call stack) states. A state that has
// been fully explored without success is never explored again, which also
// cuts silent cycles.
class Search {
 public:
  Search(const SetGraph& g, const PredicateRegistry& preds, const ResolvedTrace& t)
      : g_(g), preds_(preds), t_(t), n_(t.events.size()), next_sig_(n_ + 1, n_) {
    for (std::size_t i = n_; i-- > 0;) {
      next_sig_[i] = t.events[i].kind == Kind::Observation ? next_sig_[i + 1] : i;
    }
    silent_bound_ = static_cast<std::size_t>(g.size()) * static_cast<std::size_t>(g.size() + 1);
  }

  bool run(int entry) {
    std::vector<int> stack{entry};
    path_.push_back(entry);
    path_edges_.push_back(-1);
    return visit(0, stack);
  }

  const SetGraph& g_;
  const PredicateRegistry& preds_;
  const ResolvedTrace& t_;
  std::size_t n_;
  std::vector<std::size_t> next_sig_;
  std::size_t silent_bound_ = 0;

  std::set<std::vector<int>> seen_;
  std::vector<int> path_;
  std::vector<int> path_edges_;  // edge used to reach path_[k], -1 if none
  std::vector<int> witness_;
  std::vector<int> witness_edges_;
  std::size_t silent_ = 0;
  bool step_bound_hit_ = false;

  std::vector<Unresolved> unresolved_;

  bool any_failure_ = false;
  std::size_t best_i_ = 0;
  std::set<int> expected_;
  std::set<std::string> at_nodes_;
  bool wrong_branch_ = false;
  std::map<std::size_t, std::set<int>> excluded_heads_;

 private:
  void note(std::size_t i, int at, int expected) {
    if (!any_failure_ || i > best_i_) {
      any_failure_ = true;
      best_i_ = i;
      expected_.clear();
      at_nodes_.clear();
      wrong_branch_ = false;
    }
    if (i < best_i_) return;
    if (expected >= 0) expected_.insert(expected);
    at_nodes_.insert(g_.node(at).display);
  }

  void note_wrong_branch(std::size_t i, int at) {
    note(i, at, -1);
    if (i == best_i_) wrong_branch_ = true;
  }

  void note_unresolved(int decision, std::vector<std::string> vars) {
    Unresolved u{g_.node(decision).display, std::move(vars)};
    if (std::find(unresolved_.begin(), unresolved_.end(), u) == unresolved_.end()) unresolved_.push_back(u);
  }

  bool succeed() {
    witness_ = path_;
    witness_edges_ = path_edges_;
    return true;
  }

  std::vector<int> key(std::size_t i, const std::vector<int>& stack) {
    std::vector<int> k = stack;
    k.push_back(static_cast<int>(i));
    return k;
  }

  bool visit(std::size_t i, std::vector<int>& stack) {
    i = next_sig_[i];
    if (!seen_.insert(key(i, stack)).second) return false;
    int v = stack.back();
    switch (g_.node(v).node->kind) {
      case NodeKind::ExclusionPoint:
        if (i == n_) return succeed();
        note(i, v, -1);
        return false;
      case NodeKind::ExitPoint: {
        if (stack.size() > 1) {
          stack.pop_back();
          bool ok = resume(i, stack);
          if (!ok) stack.push_back(v);
          return ok;
        }
        if (i == n_) return succeed();
        int next = g_.node(v).link_entry;
        if (next >= 0) return enter(i, stack, next, -1);
        note(i, v, -1);
        return false;
      }
      default:
        return resume(i, stack);
    }
  }

  bool resume(std::size_t i, std::vector<int>& stack) {
    int v = stack.back();
    if (is_decision(g_.node(v).node->kind)) return decide(i, stack);
    for (int e : g_.node(v).by_target) {
      if (enter(i, stack, g_.edge(e).to, e)) return true;
    }
    return false;
  }

  bool decide(std::size_t i, std::vector<int>& stack) {
    int v = stack.back();
    const auto& info = g_.node(v);
    if (i < n_ && t_.events[i].kind == Kind::BranchTaken && t_.events[i].node == v) {
      int e = t_.events[i].edge;
      if (e < 0) {
        note_wrong_branch(i, v);
        return false;
      }
      return enter(i + 1, stack, g_.edge(e).to, e);
    }
    std::vector<BranchOption> options;
    for (int e : info.out) {
      const auto& edge = *g_.edge(e).edge;
      if (!edge.criterion) {
        note_unresolved(v, {});
        return false;
      }
      options.push_back({edge.id, &*edge.criterion});
    }
    Selection s;
    try {
      s = select_branch(options, t_.bindings[i], preds_);
    } catch (const Error&) {
      note_unresolved(v, {});
      return false;
    }
    switch (s.kind) {
      case Selection::Kind::Chosen: {
        int chosen = g_.find_out_edge(v, s.edges.front());
        for (int e : info.out) {
          if (e != chosen) heads(g_.edge(e).to, excluded_heads_[i]);
        }
        return enter(i, stack, g_.edge(chosen).to, chosen);
      }
      case Selection::Kind::NoneMatch:
        note_wrong_branch(i, v);
        return false;
      case Selection::Kind::Ambiguous:
        note_unresolved(v, {});
        return false;
      case Selection::Kind::Undetermined:
        note_unresolved(v, s.vars);
        return false;
    }
    return false;
  }

  // First activities reachable from `w` through silent nodes.
  void heads(int w, std::set<int>& out) const {
    std::set<int> seen;
    std::vector<int> todo{w};
    while (!todo.empty()) {
      int x = todo.back();
      todo.pop_back();
      if (!seen.insert(x).second) continue;
      const auto& info = g_.node(x);
      if (is_activity(info.node->kind)) {
        out.insert(x);
        continue;
      }
      for (int e : info.out) todo.push_back(g_.edge(e).to);
      if (info.nested_entry >= 0) todo.push_back(info.nested_entry);
    }
  }

  bool enter(std::size_t i, std::vector<int>& stack, int w, int via) {
    i = next_sig_[i];
    const auto& info = g_.node(w);
    std::size_t saved_silent = silent_;
    if (is_activity(info.node->kind)) {
      if (i >= n_ || t_.events[i].kind != Kind::ActivityDone || t_.events[i].node != w) {
        note(i, stack.back(), w);
        return false;
      }
      ++i;
      silent_ = 0;
    } else if (++silent_ > silent_bound_) {
      step_bound_hit_ = true;
      silent_ = saved_silent;
      return false;
    }
    int saved = stack.back();
    std::size_t saved_path = path_.size();
    stack.back() = w;
    path_.push_back(w);
    path_edges_.push_back(via);
    bool ok;
    if (info.nested_entry >= 0) {
      stack.push_back(info.nested_entry);
      path_.push_back(info.nested_entry);
      path_edges_.push_back(-1);
      ok = visit(i, stack);
      if (!ok) stack.pop_back();
    } else {
      ok = visit(i, stack);
    }
    if (!ok) {
      stack.back() = saved;
      path_.resize(saved_path);
      path_edges_.resize(saved_path);
      silent_ = saved_silent;
    }
    return ok;
  }
};

struct Outcome {
  ConformanceReport report;
  std::vector<int> witness;
  std::vector<int> witness_edges;
};

Outcome run_replay(const SetGraph& g, int entry, const PredicateRegistry& preds, const ResolvedTrace& t,
                   const PatientTrace& source) {
  Outcome out;
  auto& r = out.report;
  r.trace_id = source.trace_id;
  Search s(g, preds, t);
  if (s.run(entry)) {
    r.status = Verdict::Conformant;
    std::vector<std::string> path;
    for (int v : s.witness_) path.push_back(g.node(v).display);
    r.matched_path = std::move(path);
    out.witness = std::move(s.witness_);
    out.witness_edges = std::move(s.witness_edges_);
    return out;
  }
  if (!s.unresolved_.empty()) {
    r.status = Verdict::Undetermined;
    r.unresolved = std::move(s.unresolved_);
    std::sort(r.unresolved.begin(), r.unresolved.end(), [](const Unresolved& a, const Unresolved& b) {
      return std::tie(a.decision, a.vars) < std::tie(b.decision, b.vars);
    });
    return out;
  }
  r.status = Verdict::NonConformant;
  Divergence d;
  d.event_index = s.best_i_;
  for (int w : s.expected_) d.expected.push_back(g.node(w).display);
  std::sort(d.expected.begin(), d.expected.end());
  if (!s.at_nodes_.empty()) d.at_node = *s.at_nodes_.begin();
  const std::size_t n = t.events.size();
  if (s.best_i_ < n) {
    const auto& ev = source.events[s.best_i_];
    d.found = ev.kind == Kind::BranchTaken ? ev.ref + ":" + ev.edge : ev.ref;
  }

  VarianceKind kind = VarianceKind::UnexpectedActivity;
  if (!s.any_failure_ && s.step_bound_hit_) {
    kind = VarianceKind::IncompleteTrace;
  } else if (s.best_i_ >= n) {
    kind = VarianceKind::IncompleteTrace;
  } else if (s.wrong_branch_ || t.events[s.best_i_].kind == Kind::BranchTaken) {
    kind = VarianceKind::WrongBranch;
  } else if (int f = t.events[s.best_i_].node; f >= 0) {
    auto it = s.excluded_heads_.find(s.best_i_);
    if (it != s.excluded_heads_.end() && it->second.count(f) && !s.expected_.count(f)) {
      kind = VarianceKind::WrongBranch;
    } else {
      for (int w : s.expected_) {
        if (g.reachable_from(w)[static_cast<std::size_t>(f)]) {
          kind = VarianceKind::SkippedActivity;
          break;
        }
      }
    }
  }
  r.divergence = std::move(d);
  r.variance_kind = kind;
  return out;
}

}  // namespace

Replayer::Replayer(const CaremapSet& set, std::string_view entry_caremap, const PredicateRegistry& preds)
    : graph_(set), preds_(&preds) {
  entry_ = graph_.entry_of(entry_caremap);
}

ResolvedTrace Replayer::resolve(const PatientTrace& trace) const {
  ResolvedTrace out;
  out.trace_id = trace.trace_id;
  Bindings current;
  for (const auto& e : trace.events) {
    out.bindings.push_back(current);
    ResolvedTrace::Event r;
    r.kind = e.kind;
    switch (e.kind) {
      case Kind::ActivityDone:
        r.node = graph_.resolve_ref(e.ref);
        break;
      case Kind::BranchTaken:
        r.node = graph_.resolve_ref(e.ref);
        if (r.node >= 0) r.edge = graph_.find_out_edge(r.node, e.edge);
        break;
      case Kind::Observation:
        current.observe(e.var, e.value, e.unit);
        break;
    }
    out.events.push_back(r);
  }
  out.bindings.push_back(std::move(current));
  return out;
}

ConformanceReport Replayer::replay(const ResolvedTrace& trace, const PatientTrace& source) const {
  return run_replay(graph_, entry_, *preds_, trace, source).report;
}

ConformanceReport Replayer::replay(const PatientTrace& trace) const { return replay(resolve(trace), trace); }

std::vector<int> Replayer::witness(const PatientTrace& trace) const {
  return run_replay(graph_, entry_, *preds_, resolve(trace), trace).witness;
}

std::optional<std::vector<int>> Replayer::witness_edges(const PatientTrace& trace) const {
  auto out = run_replay(graph_, entry_, *preds_, resolve(trace), trace);
  if (out.report.status != Verdict::Conformant) return std::nullopt;
  std::erase(out.witness_edges, -1);
  return out.witness_edges;
}

ConformanceReport replay(const CaremapSet& set, std::string_view entry_caremap, const PatientTrace& trace) {
  return Replayer(set, entry_caremap).replay(trace);
}

BatchSummary batch_conform(const CaremapSet& set, std::string_view entry_caremap,
                           std::span<const PatientTrace> traces, int workers) {
  Replayer replayer(set, entry_caremap);
  const std::size_t count = traces.size();
  std::vector<std::optional<ConformanceReport>> reports(count);
  std::vector<std::string> errors(count);

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        reports[i] = replayer.replay(traces[i]);
      } catch (const Error& e) {
        errors[i] = e.what();
      }
    }
  };
  int threads = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  BatchSummary s;
  std::map<std::string, std::size_t> div_counts;
  for (std::size_t i = 0; i < count; ++i) {
    if (!reports[i]) {
      s.load_errors.emplace_back(traces[i].trace_id, errors[i]);
      continue;
    }
    auto& r = *reports[i];
    ++s.n;
    switch (r.status) {
      case Verdict::Conformant: ++s.conformant; break;
      case Verdict::NonConformant:
        ++s.non_conformant;
        if (r.divergence && !r.divergence->at_node.empty()) ++div_counts[r.divergence->at_node];
        break;
      case Verdict::Undetermined: ++s.undetermined; break;
    }
    s.reports.push_back(std::move(r));
  }
  std::stable_sort(s.reports.begin(), s.reports.end(),
                   [](const ConformanceReport& a, const ConformanceReport& b) { return a.trace_id < b.trace_id; });
  std::stable_sort(s.load_errors.begin(), s.load_errors.end());
  s.top_divergence_points.assign(div_counts.begin(), div_counts.end());
  std::stable_sort(s.top_divergence_points.begin(), s.top_divergence_points.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return s;
}

nlohmann::json to_json(const ConformanceReport& r) {
  using nlohmann::json;
  json j;
  j["trace_id"] = r.trace_id;
  j["status"] = std::string(to_string(r.status));
  j["matched_path"] = r.matched_path ? json(*r.matched_path) : json(nullptr);
  if (r.divergence) {
    j["divergence"] = {{"event_index", r.divergence->event_index},
                       {"expected", r.divergence->expected},
                       {"found", r.divergence->found},
                       {"at_node", r.divergence->at_node}};
  } else {
    j["divergence"] = nullptr;
  }
  json unresolved = json::array();
  for (const auto& u : r.unresolved) unresolved.push_back({{"decision", u.decision}, {"vars", u.vars}});
  j["unresolved"] = std::move(unresolved);
  j["variance_kind"] = r.variance_kind ? json(std::string(to_string(*r.variance_kind))) : json(nullptr);
  return j;
}

nlohmann::json to_json(const BatchSummary& s) {
  using nlohmann::json;
  json top = json::array();
  for (const auto& [node, c] : s.top_divergence_points) top.push_back({{"node", node}, {"count", c}});
  json reports = json::array();
  for (const auto& r : s.reports) reports.push_back(to_json(r));
  json errors = json::array();
  for (const auto& [id, msg] : s.load_errors) errors.push_back({{"trace_id", id}, {"message", msg}});
  return {{"n", s.n},
          {"conformant", s.conformant},
          {"non_conformant", s.non_conformant},
          {"undetermined", s.undetermined},
          {"top_divergence_points", std::move(top)},
          {"load_errors", std::move(errors)},
          {"reports", std::move(reports)}};
}

std::string format_table(const BatchSummary& s) {
  std::ostringstream os;
  std::size_t width = 8;
  for (const auto& r : s.reports) width = std::max(width, r.trace_id.size());
  auto pad = [](std::string x, std::size_t w) {
    x.resize(std::max(x.size(), w), ' ');
    return x;
  };
  os << pad("trace", width) << "  " << pad("status", 13) << "  detail\n";
  for (const auto& r : s.reports) {
    os << pad(r.trace_id, width) << "  " << pad(std::string(to_string(r.status)), 13) << "  ";
    if (r.divergence) {
      os << to_string(*r.variance_kind) << " at event " << r.divergence->event_index;
      if (!r.divergence->found.empty()) os << " (found " << r.divergence->found << ")";
      if (!r.divergence->expected.empty()) {
        os << ", expected ";
        for (std::size_t k = 0; k < r.divergence->expected.size(); ++k) {
          os << (k ? "|" : "") << r.divergence->expected[k];
        }
      }
    }
    for (std::size_t k = 0; k < r.unresolved.size(); ++k) {
      const auto& u = r.unresolved[k];
      os << (k ? "; " : "") << "unresolved " << u.decision;
      if (!u.vars.empty()) {
        os << " needs ";
        for (std::size_t m = 0; m < u.vars.size(); ++m) os << (m ? "," : "") << u.vars[m];
      }
    }
    os << "\n";
  }
  for (const auto& [id, msg] : s.load_errors) os << pad(id, width) << "  " << pad("LoadError", 13) << "  " << msg << "\n";
  os << "\nn=" << s.n << " conformant=" << s.conformant << " non_conformant=" << s.non_conformant
     << " undetermined=" << s.undetermined << "\n";
  if (!s.top_divergence_points.empty()) {
    os << "top divergence points:";
    for (const auto& [node, c] : s.top_divergence_points) os << " " << node << "(" << c << ")";
    os << "\n";
  }
  return os.str();
}

}  // namespace tasc
