// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tasc {

// A numeric literal. `integer_literal` only affects formatting: a value
// written as `2` prints back as `2`, one written as `7.0` prints as `7.0`.
struct Number {
  double value = 0.0;
  bool integer_literal = false;

  bool operator==(const Number& other) const { return value == other.value; }
};

std::string format_number(const Number& n);

enum class CompareOp { Less, LessEqual, Greater, GreaterEqual, Equal, NotEqual };

std::string_view to_string(CompareOp op);

struct Literal {
  enum class Kind { Number, Identifier, String };
  Kind kind = Kind::Number;
  Number number;
  std::string text;
  std::optional<std::string> unit;

  bool operator==(const Literal&) const = default;
};

// Decision-criterion AST. A tagged struct rather than a variant keeps the
// recursive children vector simple; only the fields relevant to `kind` are
// meaningful.
struct Criterion {
  enum class Kind { Comparison, InRange, Predicate, And, Or, Not, Otherwise };

  Kind kind = Kind::Otherwise;
  std::string var;  // Comparison, InRange
  CompareOp op = CompareOp::Equal;
  Number value;                      // Comparison rhs when numeric
  std::optional<std::string> token;  // Comparison rhs when categorical
  Number low, high;                  // InRange, inclusive
  std::optional<std::string> unit;
  std::string name;  // Predicate
  std::vector<Literal> args;
  std::vector<Criterion> children;  // And, Or (>= 2), Not (1)

  static Criterion comparison(std::string var, CompareOp op, Number value,
                              std::optional<std::string> unit = std::nullopt);
  static Criterion category(std::string var, CompareOp op, std::string token);
  static Criterion in_range(std::string var, Number low, Number high,
                            std::optional<std::string> unit = std::nullopt);
  static Criterion predicate(std::string name, std::vector<Literal> args);
  static Criterion all_of(std::vector<Criterion> children);
  static Criterion any_of(std::vector<Criterion> children);
  static Criterion negate(Criterion child);
  static Criterion otherwise();

  [[nodiscard]] bool is_otherwise() const { return kind == Kind::Otherwise; }

  bool operator==(const Criterion&) const = default;
};

// Canonical surface syntax, e.g. `glucose > 7.0 mmol/L`. Parenthesises
// nested boolean operators so that parsing the result gives back the AST.
std::string to_string(const Criterion& c);

// Variables referenced by comparisons, ranges and predicate identifier args.
std::set<std::string> referenced_variables(const Criterion& c);

// True when `otherwise` appears anywhere below the root.
bool has_nested_otherwise(const Criterion& c);

enum class Tri { False, True, Unknown };

std::string_view to_string(Tri t);
Tri tri_and(Tri a, Tri b);
Tri tri_or(Tri a, Tri b);
Tri tri_not(Tri a);

using Value = std::variant<double, std::string>;

struct Observed {
  Value value;
  std::optional<std::string> unit;
};

// Variable observations in trace order. The latest entry of a history is the
// evaluation value; histories only grow.
class Bindings {
 public:
  void observe(const std::string& var, Value value,
               std::optional<std::string> unit = std::nullopt);

  [[nodiscard]] const std::vector<Observed>* history(std::string_view var) const;
  [[nodiscard]] const Observed* latest(std::string_view var) const;
  [[nodiscard]] bool bound(std::string_view var) const { return history(var) != nullptr; }

  [[nodiscard]] const std::map<std::string, std::vector<Observed>, std::less<>>& all() const {
    return vars_;
  }

 private:
  std::map<std::string, std::vector<Observed>, std::less<>> vars_;
};

// Named predicates over binding histories. The builtin table holds
// consecutive_above, consecutive_below and count_above.
class PredicateRegistry {
 public:
  using Fn = std::function<Tri(std::span<const Literal>, const Bindings&)>;

  static const PredicateRegistry& builtin();

  void add(std::string name, Fn fn);
  [[nodiscard]] const Fn* find(std::string_view name) const;

 private:
  std::map<std::string, Fn, std::less<>> fns_;
};

// Kleene evaluation. Throws Error("UnitMismatch"), Error("TypeMismatch"),
// Error("UnknownPredicate") or Error("InvalidPredicateArgs"). `otherwise`
// evaluates False here; select_branch gives it its meaning.
Tri eval(const Criterion& c, const Bindings& b,
         const PredicateRegistry& preds = PredicateRegistry::builtin());

struct BranchOption {
  std::string edge_id;
  const Criterion* criterion = nullptr;
};

struct Selection {
  enum class Kind { Chosen, Ambiguous, NoneMatch, Undetermined };
  Kind kind = Kind::NoneMatch;
  std::vector<std::string> edges;  // Chosen: one; Ambiguous: all True
  std::vector<std::string> vars;   // Undetermined: unbound variables
};

std::string_view to_string(Selection::Kind k);

Selection select_branch(std::span<const BranchOption> options, const Bindings& b,
                        const PredicateRegistry& preds = PredicateRegistry::builtin());

}  // namespace tasc
