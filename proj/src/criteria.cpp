// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#include "tasc/criteria.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "tasc/error.hpp"
#include "tasc/text.hpp"

namespace tasc {

std::string format_number(const Number& n) {
  double v = n.value;
  if (n.integer_literal && std::floor(v) == v && std::fabs(v) < 1e15) {
    return std::to_string(static_cast<long long>(v));
  }
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEni") == std::string::npos) s += ".0";
  return s;
}

std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::Less: return "<";
    case CompareOp::LessEqual: return "<=";
    case CompareOp::Greater: return ">";
    case CompareOp::GreaterEqual: return ">=";
    case CompareOp::Equal: return "==";
    case CompareOp::NotEqual: return "!=";
  }
  return "?";
}

Criterion Criterion::comparison(std::string var, CompareOp op, Number value,
                                std::optional<std::string> unit) {
  Criterion c;
  c.kind = Kind::Comparison;
  c.var = std::move(var);
  c.op = op;
  c.value = value;
  c.unit = std::move(unit);
  return c;
}

Criterion Criterion::category(std::string var, CompareOp op, std::string token) {
  Criterion c;
  c.kind = Kind::Comparison;
  c.var = std::move(var);
  c.op = op;
  c.token = std::move(token);
  return c;
}

Criterion Criterion::in_range(std::string var, Number low, Number high,
                              std::optional<std::string> unit) {
  Criterion c;
  c.kind = Kind::InRange;
  c.var = std::move(var);
  c.low = low;
  c.high = high;
  c.unit = std::move(unit);
  return c;
}

Criterion Criterion::predicate(std::string name, std::vector<Literal> args) {
  Criterion c;
  c.kind = Kind::Predicate;
  c.name = std::move(name);
  c.args = std::move(args);
  return c;
}

Criterion Criterion::all_of(std::vector<Criterion> children) {
  Criterion c;
  c.kind = Kind::And;
  c.children = std::move(children);
  return c;
}

Criterion Criterion::any_of(std::vector<Criterion> children) {
  Criterion c;
  c.kind = Kind::Or;
  c.children = std::move(children);
  return c;
}

Criterion Criterion::negate(Criterion child) {
  Criterion c;
  c.kind = Kind::Not;
  c.children.push_back(std::move(child));
  return c;
}

Criterion Criterion::otherwise() { return Criterion{}; }

namespace {

std::string literal_text(const Literal& l) {
  switch (l.kind) {
    case Literal::Kind::Number: {
      std::string s = format_number(l.number);
      if (l.unit) s += " " + *l.unit;
      return s;
    }
    case Literal::Kind::Identifier: return l.text;
    case Literal::Kind::String: return quote(l.text);
  }
  return {};
}

bool needs_parens(const Criterion& c) {
  return c.kind == Criterion::Kind::And || c.kind == Criterion::Kind::Or;
}

void write(const Criterion& c, std::string& out) {
  using K = Criterion::Kind;
  switch (c.kind) {
    case K::Comparison:
      out += c.var;
      out += ' ';
      out += to_string(c.op);
      out += ' ';
      if (c.token) {
        out += *c.token;
      } else {
        out += format_number(c.value);
        if (c.unit) out += " " + *c.unit;
      }
      return;
    case K::InRange:
      out += c.var + " in [" + format_number(c.low) + ", " + format_number(c.high) + "]";
      if (c.unit) out += " " + *c.unit;
      return;
    case K::Predicate: {
      out += c.name;
      out += '(';
      for (std::size_t i = 0; i < c.args.size(); ++i) {
        if (i) out += ", ";
        out += literal_text(c.args[i]);
      }
      out += ')';
      return;
    }
    case K::And:
    case K::Or: {
      const char* sep = c.kind == K::And ? " and " : " or ";
      for (std::size_t i = 0; i < c.children.size(); ++i) {
        if (i) out += sep;
        const auto& child = c.children[i];
        if (needs_parens(child)) out += '(';
        write(child, out);
        if (needs_parens(child)) out += ')';
      }
      return;
    }
    case K::Not: {
      out += "not ";
      const auto& child = c.children.front();
      if (needs_parens(child)) out += '(';
      write(child, out);
      if (needs_parens(child)) out += ')';
      return;
    }
    case K::Otherwise: out += "otherwise"; return;
  }
}

void collect(const Criterion& c, std::set<std::string>& vars) {
  using K = Criterion::Kind;
  switch (c.kind) {
    case K::Comparison:
    case K::InRange: vars.insert(c.var); break;
    case K::Predicate:
      for (const auto& a : c.args) {
        if (a.kind == Literal::Kind::Identifier) vars.insert(a.text);
      }
      break;
    default: break;
  }
  for (const auto& child : c.children) collect(child, vars);
}

bool nested_otherwise(const Criterion& c) {
  for (const auto& child : c.children) {
    if (child.is_otherwise() || nested_otherwise(child)) return true;
  }
  return false;
}

std::string unit_text(const std::optional<std::string>& u) { return u ? *u : "<none>"; }

void check_unit(const std::string& var, const std::optional<std::string>& expected,
                const std::optional<std::string>& found) {
  if (expected != found) {
    throw Error("UnitMismatch", "unit mismatch for '" + var + "': expected " +
                                    unit_text(expected) + ", found " + unit_text(found));
  }
}

double numeric(const std::string& var, const Observed& o) {
  if (const auto* d = std::get_if<double>(&o.value)) return *d;
  throw Error("TypeMismatch", "variable '" + var + "' holds a categorical value");
}

bool compare(double lhs, CompareOp op, double rhs) {
  switch (op) {
    case CompareOp::Less: return lhs < rhs;
    case CompareOp::LessEqual: return lhs <= rhs;
    case CompareOp::Greater: return lhs > rhs;
    case CompareOp::GreaterEqual: return lhs >= rhs;
    case CompareOp::Equal: return lhs == rhs;
    case CompareOp::NotEqual: return lhs != rhs;
  }
  return false;
}

struct ThresholdArgs {
  std::string var;
  Literal threshold;
  long long count = 0;
};

ThresholdArgs threshold_args(std::string_view pred, std::span<const Literal> args) {
  auto bad = [&](const std::string& why) {
    return Error("InvalidPredicateArgs", std::string(pred) + ": " + why);
  };
  if (args.size() != 3) throw bad("expects (variable, threshold, count)");
  if (args[0].kind != Literal::Kind::Identifier) throw bad("first argument must be a variable");
  if (args[1].kind != Literal::Kind::Number) throw bad("threshold must be a number");
  if (args[2].kind != Literal::Kind::Number || args[2].unit) throw bad("count must be a plain number");
  double n = args[2].number.value;
  if (n < 1 || std::floor(n) != n) throw bad("count must be a positive integer");
  return {args[0].text, args[1], static_cast<long long>(n)};
}

// Values of the history as numbers, unit-checked against the threshold.
std::vector<double> checked_history(const ThresholdArgs& a, const std::vector<Observed>& hist) {
  std::vector<double> values;
  values.reserve(hist.size());
  for (const auto& o : hist) {
    check_unit(a.var, a.threshold.unit, o.unit);
    values.push_back(numeric(a.var, o));
  }
  return values;
}

PredicateRegistry::Fn consecutive(bool above) {
  const char* name = above ? "consecutive_above" : "consecutive_below";
  return [above, name](std::span<const Literal> args, const Bindings& b) {
    auto a = threshold_args(name, args);
    const auto* hist = b.history(a.var);
    if (!hist) return Tri::Unknown;
    auto values = checked_history(a, *hist);
    double t = a.threshold.number.value;
    long long run = 0;
    for (double v : values) {
      bool hit = above ? v > t : v < t;
      run = hit ? run + 1 : 0;
      if (run >= a.count) return Tri::True;
    }
    return Tri::False;
  };
}

PredicateRegistry make_builtin() {
  PredicateRegistry r;
  r.add("consecutive_above", consecutive(true));
  r.add("consecutive_below", consecutive(false));
  r.add("count_above", [](std::span<const Literal> args, const Bindings& b) {
    auto a = threshold_args("count_above", args);
    const auto* hist = b.history(a.var);
    if (!hist) return Tri::Unknown;
    auto values = checked_history(a, *hist);
    double t = a.threshold.number.value;
    auto hits = std::count_if(values.begin(), values.end(), [t](double v) { return v > t; });
    return hits >= a.count ? Tri::True : Tri::False;
  });
  return r;
}

}  // namespace

std::string to_string(const Criterion& c) {
  std::string out;
  write(c, out);
  return out;
}

std::set<std::string> referenced_variables(const Criterion& c) {
  std::set<std::string> vars;
  collect(c, vars);
  return vars;
}

bool has_nested_otherwise(const Criterion& c) { return nested_otherwise(c); }

std::string_view to_string(Tri t) {
  switch (t) {
    case Tri::False: return "false";
    case Tri::True: return "true";
    case Tri::Unknown: return "unknown";
  }
  return "?";
}

Tri tri_and(Tri a, Tri b) {
  if (a == Tri::False || b == Tri::False) return Tri::False;
  if (a == Tri::True && b == Tri::True) return Tri::True;
  return Tri::Unknown;
}

Tri tri_or(Tri a, Tri b) {
  if (a == Tri::True || b == Tri::True) return Tri::True;
  if (a == Tri::False && b == Tri::False) return Tri::False;
  return Tri::Unknown;
}

Tri tri_not(Tri a) {
  if (a == Tri::Unknown) return a;
  return a == Tri::True ? Tri::False : Tri::True;
}

void Bindings::observe(const std::string& var, Value value, std::optional<std::string> unit) {
  auto it = vars_.find(var);
  if (it == vars_.end()) it = vars_.emplace(var, std::vector<Observed>{}).first;
  it->second.push_back(Observed{std::move(value), std::move(unit)});
}

const std::vector<Observed>* Bindings::history(std::string_view var) const {
  auto it = vars_.find(var);
  return it == vars_.end() ? nullptr : &it->second;
}

const Observed* Bindings::latest(std::string_view var) const {
  const auto* h = history(var);
  return h && !h->empty() ? &h->back() : nullptr;
}

const PredicateRegistry& PredicateRegistry::builtin() {
  static const PredicateRegistry registry = make_builtin();
  return registry;
}

void PredicateRegistry::add(std::string name, Fn fn) { fns_[std::move(name)] = std::move(fn); }

const PredicateRegistry::Fn* PredicateRegistry::find(std::string_view name) const {
  auto it = fns_.find(name);
  return it == fns_.end() ? nullptr : &it->second;
}

Tri eval(const Criterion& c, const Bindings& b, const PredicateRegistry& preds) {
  using K = Criterion::Kind;
  switch (c.kind) {
    case K::Comparison: {
      const auto* o = b.latest(c.var);
      if (!o) return Tri::Unknown;
      check_unit(c.var, c.unit, o->unit);
      if (c.token) {
        const auto* s = std::get_if<std::string>(&o->value);
        if (!s) throw Error("TypeMismatch", "variable '" + c.var + "' holds a number, compared to token");
        if (c.op == CompareOp::Equal) return *s == *c.token ? Tri::True : Tri::False;
        if (c.op == CompareOp::NotEqual) return *s != *c.token ? Tri::True : Tri::False;
        throw Error("TypeMismatch", "ordering comparison on categorical '" + c.var + "'");
      }
      return compare(numeric(c.var, *o), c.op, c.value.value) ? Tri::True : Tri::False;
    }
    case K::InRange: {
      const auto* o = b.latest(c.var);
      if (!o) return Tri::Unknown;
      check_unit(c.var, c.unit, o->unit);
      double v = numeric(c.var, *o);
      return v >= c.low.value && v <= c.high.value ? Tri::True : Tri::False;
    }
    case K::Predicate: {
      const auto* fn = preds.find(c.name);
      if (!fn) throw Error("UnknownPredicate", "no evaluator registered for '" + c.name + "'");
      return (*fn)(c.args, b);
    }
    case K::And: {
      Tri acc = Tri::True;
      for (const auto& child : c.children) acc = tri_and(acc, eval(child, b, preds));
      return acc;
    }
    case K::Or: {
      Tri acc = Tri::False;
      for (const auto& child : c.children) acc = tri_or(acc, eval(child, b, preds));
      return acc;
    }
    case K::Not: return tri_not(eval(c.children.front(), b, preds));
    case K::Otherwise: return Tri::False;
  }
  return Tri::Unknown;
}

std::string_view to_string(Selection::Kind k) {
  switch (k) {
    case Selection::Kind::Chosen: return "chosen";
    case Selection::Kind::Ambiguous: return "ambiguous";
    case Selection::Kind::NoneMatch: return "none-match";
    case Selection::Kind::Undetermined: return "undetermined";
  }
  return "?";
}

Selection select_branch(std::span<const BranchOption> options, const Bindings& b,
                        const PredicateRegistry& preds) {
  std::vector<std::string> truthy;
  std::set<std::string> missing;
  bool any_unknown = false;
  const BranchOption* fallback = nullptr;
  for (const auto& opt : options) {
    if (!opt.criterion) throw Error("MissingCriterion", "branch '" + opt.edge_id + "' has no criterion");
    if (opt.criterion->is_otherwise()) {
      fallback = &opt;
      continue;
    }
    Tri t = eval(*opt.criterion, b, preds);
    if (t == Tri::True) {
      truthy.push_back(opt.edge_id);
    } else if (t == Tri::Unknown) {
      any_unknown = true;
      for (const auto& v : referenced_variables(*opt.criterion)) {
        if (!b.bound(v)) missing.insert(v);
      }
    }
  }
  Selection s;
  if (truthy.size() > 1) {
    s.kind = Selection::Kind::Ambiguous;
    s.edges = std::move(truthy);
  } else if (truthy.size() == 1) {
    s.kind = Selection::Kind::Chosen;
    s.edges = std::move(truthy);
  } else if (any_unknown) {
    s.kind = Selection::Kind::Undetermined;
    s.vars.assign(missing.begin(), missing.end());
  } else if (fallback) {
    s.kind = Selection::Kind::Chosen;
    s.edges.push_back(fallback->edge_id);
  } else {
    s.kind = Selection::Kind::NoneMatch;
  }
  return s;
}

}  // namespace tasc
