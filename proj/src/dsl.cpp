// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#include "tasc/dsl.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>

#include "tasc/error.hpp"
#include "tasc/text.hpp"

namespace tasc {

std::string_view to_string(Severity s) { return s == Severity::Error ? "error" : "warning"; }

std::string format(const ParseDiagnostic& d) {
  std::ostringstream os;
  os << d.span.file << ':' << d.span.line << ':' << d.span.column << ": " << to_string(d.severity)
     << '[' << d.code << "]: " << d.message;
  return os.str();
}

namespace {

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

enum class Tok { Ident, String, Number, Punct, Newline, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;  // decoded contents for strings
  int line = 1;
  int col = 1;
  std::size_t offset = 0;
  std::size_t length = 0;
};

struct LexError {
  int line;
  int col;
  std::string message;
};

const std::set<std::string, std::less<>> kKeywords{
    "caremap", "meta", "entry", "exit",      "exclusion", "activity", "nested", "decision", "ref",
    "when",    "note", "link",  "otherwise", "and",       "or",       "not",    "in",
};

bool is_keyword(std::string_view s) { return kKeywords.count(s) > 0; }

bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

// Returns the byte offset of the first invalid UTF-8 sequence, or npos.
std::size_t invalid_utf8_at(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    if (c < 0x80) {
      extra = 0;
    } else if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
      extra = 1;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
    } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
      extra = 3;
    } else {
      return i;
    }
    for (std::size_t k = 1; k <= extra; ++k) {
      if (i + k >= s.size() || (static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return i;
    }
    i += extra + 1;
  }
  return std::string_view::npos;
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  // Tokenizes everything; lexical errors are collected, not fatal.
  std::vector<Token> run(std::vector<LexError>& errors) {
    std::vector<Token> out;
    while (true) {
      skip_blank();
      if (pos_ >= src_.size()) break;
      char c = src_[pos_];
      int line = line_, col = col_;
      std::size_t start = pos_;
      auto emit = [&](Tok k, std::string text) {
        out.push_back(Token{k, std::move(text), line, col, start, pos_ - start});
      };
      if (c == '\n') {
        advance();
        if (depth_ == 0) emit(Tok::Newline, "\n");
        continue;
      }
      if (c == '"') {
        advance();
        std::string value;
        bool closed = false;
        while (pos_ < src_.size()) {
          char d = src_[pos_];
          if (d == '"') {
            advance();
            closed = true;
            break;
          }
          if (d == '\n') break;
          if (d == '\\' && pos_ + 1 < src_.size()) {
            advance();
            char e = src_[pos_];
            switch (e) {
              case 'n': value.push_back('\n'); break;
              case 't': value.push_back('\t'); break;
              case '"': value.push_back('"'); break;
              case '\\': value.push_back('\\'); break;
              default:
                errors.push_back({line_, col_, std::string("unknown escape '\\") + e + "'"});
                value.push_back(e);
            }
            advance();
            continue;
          }
          value.push_back(d);
          advance();
        }
        if (!closed) errors.push_back({line, col, "unterminated string"});
        emit(Tok::String, std::move(value));
        continue;
      }
      bool negative_number = c == '-' && pos_ + 1 < src_.size() &&
                             std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]));
      if (std::isdigit(static_cast<unsigned char>(c)) || negative_number) {
        if (negative_number) advance();
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
        if (pos_ + 1 < src_.size() && src_[pos_] == '.' &&
            std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
          advance();
          while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
          std::size_t save = pos_;
          int save_col = col_;
          advance();
          if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) advance();
          if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
          } else {
            pos_ = save;
            col_ = save_col;
          }
        }
        emit(Tok::Number, std::string(src_.substr(start, pos_ - start)));
        continue;
      }
      if (ident_start(static_cast<unsigned char>(c))) {
        while (pos_ < src_.size()) {
          auto d = static_cast<unsigned char>(src_[pos_]);
          if (ident_char(d)) {
            advance();
          } else if (d == '-' && pos_ + 1 < src_.size() &&
                     ident_char(static_cast<unsigned char>(src_[pos_ + 1]))) {
            advance();
          } else {
            break;
          }
        }
        emit(Tok::Ident, std::string(src_.substr(start, pos_ - start)));
        continue;
      }
      static constexpr std::string_view kTwo[] = {"->", "<=", ">=", "==", "!="};
      bool matched = false;
      for (auto two : kTwo) {
        if (src_.substr(pos_, 2) == two) {
          advance();
          advance();
          emit(Tok::Punct, std::string(two));
          matched = true;
          break;
        }
      }
      if (matched) continue;
      static constexpr std::string_view kOne = "{}()[];,:.<>/%^*";
      if (kOne.find(c) != std::string_view::npos) {
        advance();
        if (c == '(' || c == '[') ++depth_;
        if ((c == ')' || c == ']') && depth_ > 0) --depth_;
        if (c == '{' || c == '}' || c == ';') depth_ = 0;
        emit(Tok::Punct, std::string(1, c));
        continue;
      }
      errors.push_back({line, col, std::string("unexpected character '") + c + "'"});
      advance();
    }
    out.push_back(Token{Tok::End, "", line_, col_, pos_, 0});
    return out;
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else if ((static_cast<unsigned char>(src_[pos_]) & 0xC0) != 0x80) {
      ++col_;
    }
    ++pos_;
  }

  void skip_blank() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\r') {
        advance();
      } else if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else {
        break;
      }
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  int depth_ = 0;
};

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct SyntaxError {
  Token at;
  std::string code;
  std::string message;
};

struct EdgeDraft {
  Edge edge;
  std::optional<Token> id_tok;
  Token from_tok;
  Token to_tok;
  Token arrow_tok;
};

struct CaremapDraft {
  Caremap map;
  Token id_tok;
  bool title_set = false;
  std::vector<std::pair<Node, Token>> nodes;
  std::vector<EdgeDraft> edges;
};

bool is_integer_text(std::string_view s) { return s.find_first_of(".eE") == std::string_view::npos; }

class Parser {
 public:
  Parser(std::vector<Token> toks, std::string file) : toks_(std::move(toks)), file_(std::move(file)) {}

  std::vector<ParseDiagnostic>& diagnostics() { return diags_; }

  void report(const Token& at, std::string code, std::string message,
              Severity sev = Severity::Error) {
    if (diags_.size() >= kMaxParseDiagnostics) {
      bail_ = true;
      return;
    }
    SourceSpan span{file_, at.line, at.col, static_cast<int>(std::max<std::size_t>(at.length, 1))};
    diags_.push_back(ParseDiagnostic{sev, std::move(code), std::move(message), span});
    if (diags_.size() >= kMaxParseDiagnostics) bail_ = true;
  }

  CaremapSet parse_file() {
    CaremapSet set;
    std::map<std::string, Token> seen_maps;
    while (!bail_) {
      skip_separators();
      if (at_end()) break;
      try {
        if (peek_keyword("caremap")) {
          auto draft = parse_caremap();
          std::string id = draft.map.id;
          if (seen_maps.count(id)) {
            report(draft.id_tok, "E-DUP", "duplicate caremap id '" + id + "'");
          } else {
            seen_maps.emplace(id, draft.id_tok);
            set.caremaps.emplace(id, std::move(draft.map));
          }
        } else if (peek_keyword("link")) {
          set.links.push_back(parse_link());
        } else {
          throw SyntaxError{peek(), "E-SYNTAX", "expected 'caremap' or 'link', found " + describe(peek())};
        }
      } catch (const SyntaxError& e) {
        report(e.at, e.code, e.message);
        resync_top();
      }
    }
    return set;
  }

  Criterion parse_lone_criterion() {
    skip_newlines();
    auto c = parse_or();
    skip_separators();
    if (!at_end()) throw SyntaxError{peek(), "E-SYNTAX", "unexpected " + describe(peek())};
    return c;
  }

 private:
  // -- token helpers --------------------------------------------------------

  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  bool at_end() const { return peek().kind == Tok::End; }
  Token take() {
    Token t = peek();
    if (pos_ < toks_.size() - 1) ++pos_;
    return t;
  }
  bool peek_punct(std::string_view p, std::size_t ahead = 0) const {
    return peek(ahead).kind == Tok::Punct && peek(ahead).text == p;
  }
  bool peek_keyword(std::string_view k, std::size_t ahead = 0) const {
    return peek(ahead).kind == Tok::Ident && peek(ahead).text == k;
  }
  bool accept_punct(std::string_view p) {
    if (!peek_punct(p)) return false;
    take();
    return true;
  }
  bool accept_keyword(std::string_view k) {
    if (!peek_keyword(k)) return false;
    take();
    return true;
  }
  static std::string describe(const Token& t) {
    switch (t.kind) {
      case Tok::End: return "end of input";
      case Tok::Newline: return "end of line";
      case Tok::String: return "string " + quote(t.text);
      default: return "'" + t.text + "'";
    }
  }
  Token expect_punct(std::string_view p) {
    if (!peek_punct(p)) {
      throw SyntaxError{peek(), "E-SYNTAX", "expected '" + std::string(p) + "', found " + describe(peek())};
    }
    return take();
  }
  void expect_keyword(std::string_view k) {
    if (!peek_keyword(k)) {
      throw SyntaxError{peek(), "E-SYNTAX", "expected '" + std::string(k) + "', found " + describe(peek())};
    }
    take();
  }
  Token expect_id(std::string_view what) {
    const Token& t = peek();
    if (t.kind != Tok::Ident || is_keyword(t.text)) {
      throw SyntaxError{t, "E-SYNTAX", "expected " + std::string(what) + ", found " + describe(t)};
    }
    if (!is_identifier(t.text)) {
      throw SyntaxError{t, "E-ID", "invalid identifier '" + t.text + "'"};
    }
    return take();
  }
  Token expect_string(std::string_view what) {
    if (peek().kind != Tok::String) {
      throw SyntaxError{peek(), "E-SYNTAX", "expected " + std::string(what) + ", found " + describe(peek())};
    }
    return take();
  }
  Number expect_number() {
    const Token& t = peek();
    if (t.kind != Tok::Number) {
      throw SyntaxError{t, "E-SYNTAX", "expected a number, found " + describe(t)};
    }
    double v = 0;
    auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (res.ec != std::errc{}) throw SyntaxError{t, "E-SYNTAX", "number out of range '" + t.text + "'"};
    Number n{v, is_integer_text(t.text)};
    take();
    return n;
  }
  void skip_newlines() {
    while (peek().kind == Tok::Newline) take();
  }
  void skip_separators() {
    while (peek().kind == Tok::Newline || peek_punct(";")) take();
  }
  // Statement terminator: `;`, newline, or a closing brace left in place.
  void end_statement() {
    if (peek().kind == Tok::Newline || peek_punct(";")) {
      take();
      return;
    }
    if (peek_punct("}") || at_end()) return;
    throw SyntaxError{peek(), "E-SYNTAX", "expected end of statement, found " + describe(peek())};
  }
  void resync_statement() {
    while (!at_end()) {
      if (peek().kind == Tok::Newline || peek_punct(";")) {
        take();
        return;
      }
      if (peek_punct("}")) return;
      take();
    }
  }
  void resync_top() {
    int depth = 0;
    while (!at_end()) {
      if (peek_punct("{")) ++depth;
      if (peek_punct("}")) {
        take();
        if (--depth <= 0) return;
        continue;
      }
      if (depth == 0 && (peek().kind == Tok::Newline || peek_punct(";"))) {
        take();
        return;
      }
      take();
    }
  }

  // -- units ----------------------------------------------------------------

  static bool adjacent(const Token& a, const Token& b) { return a.offset + a.length == b.offset; }

  std::optional<std::string> parse_unit() {
    const Token& t = peek();
    bool starts = (t.kind == Tok::Ident && !is_keyword(t.text)) ||
                  (t.kind == Tok::Punct && t.text == "%");
    if (!starts) return std::nullopt;
    Token prev = take();
    std::string unit = prev.text;
    while (true) {
      const Token& n = peek();
      bool joins = adjacent(prev, n) &&
                   (n.kind == Tok::Ident || n.kind == Tok::Number ||
                    (n.kind == Tok::Punct && (n.text == "/" || n.text == "%" || n.text == "^" ||
                                              n.text == "*")));
      if (!joins) break;
      prev = take();
      unit += prev.text;
    }
    return unit;
  }

  // -- criteria ---------------------------------------------------------------

  Criterion parse_or() {
    std::vector<Criterion> parts;
    parts.push_back(parse_and());
    while (accept_keyword("or")) parts.push_back(parse_and());
    if (parts.size() == 1) return std::move(parts.front());
    return Criterion::any_of(std::move(parts));
  }

  Criterion parse_and() {
    std::vector<Criterion> parts;
    parts.push_back(parse_unary());
    while (accept_keyword("and")) parts.push_back(parse_unary());
    if (parts.size() == 1) return std::move(parts.front());
    return Criterion::all_of(std::move(parts));
  }

  Criterion parse_unary() {
    if (accept_keyword("not")) return Criterion::negate(parse_unary());
    return parse_atom();
  }

  std::optional<CompareOp> peek_compare() const {
    if (peek().kind != Tok::Punct) return std::nullopt;
    const auto& s = peek().text;
    if (s == "<") return CompareOp::Less;
    if (s == "<=") return CompareOp::LessEqual;
    if (s == ">") return CompareOp::Greater;
    if (s == ">=") return CompareOp::GreaterEqual;
    if (s == "==") return CompareOp::Equal;
    if (s == "!=") return CompareOp::NotEqual;
    return std::nullopt;
  }

  Literal parse_literal() {
    Literal l;
    const Token& t = peek();
    if (t.kind == Tok::Number) {
      l.kind = Literal::Kind::Number;
      l.number = expect_number();
      l.unit = parse_unit();
    } else if (t.kind == Tok::String) {
      l.kind = Literal::Kind::String;
      l.text = take().text;
    } else {
      l.kind = Literal::Kind::Identifier;
      l.text = expect_id("a predicate argument").text;
    }
    return l;
  }

  Criterion parse_atom() {
    if (accept_punct("(")) {
      auto inner = parse_or();
      expect_punct(")");
      return inner;
    }
    if (peek_keyword("otherwise")) {
      throw SyntaxError{peek(), "E-OTHERWISE", "'otherwise' must be the whole criterion"};
    }
    Token name = expect_id("a variable or predicate");
    if (accept_punct("(")) {
      std::vector<Literal> args;
      if (!peek_punct(")")) {
        args.push_back(parse_literal());
        while (accept_punct(",")) args.push_back(parse_literal());
      }
      expect_punct(")");
      return Criterion::predicate(name.text, std::move(args));
    }
    if (accept_keyword("in")) {
      expect_punct("[");
      Number lo = expect_number();
      expect_punct(",");
      Number hi = expect_number();
      expect_punct("]");
      if (lo.value > hi.value) throw SyntaxError{name, "E-RANGE", "range low bound exceeds high bound"};
      return Criterion::in_range(name.text, lo, hi, parse_unit());
    }
    auto op = peek_compare();
    if (!op) {
      throw SyntaxError{peek(), "E-SYNTAX", "expected a comparison after '" + name.text + "', found " +
                                                describe(peek())};
    }
    Token op_tok = take();
    if (peek().kind == Tok::Number) {
      Number v = expect_number();
      return Criterion::comparison(name.text, *op, v, parse_unit());
    }
    Token token = expect_id("a number or category");
    if (*op != CompareOp::Equal && *op != CompareOp::NotEqual) {
      throw SyntaxError{op_tok, "E-SYNTAX", "categories only support == and !="};
    }
    return Criterion::category(name.text, *op, token.text);
  }

  // -- declarations -------------------------------------------------------------

  void parse_tags(Node& node) {
    std::set<std::string> seen;
    while (accept_punct("[")) {
      do {
        Token key = peek();
        if (key.kind != Tok::Ident) throw SyntaxError{key, "E-SYNTAX", "expected a tag, found " + describe(key)};
        take();
        std::string group = key.text;
        if (content_type_from(key.text)) group = "content";
        if (!seen.insert(group).second) throw SyntaxError{key, "E-SYNTAX", "duplicate tag '" + group + "'"};
        if (auto ct = content_type_from(key.text)) {
          node.content_type = ct;
        } else if (key.text == "aspect") {
          expect_punct(":");
          Token v = expect_id("a decision aspect");
          auto a = decision_aspect_from(v.text);
          if (!a) throw SyntaxError{v, "E-TAG", "unknown decision aspect '" + v.text + "'"};
          node.aspect = a;
        } else if (key.text == "class") {
          expect_punct(":");
          if (peek().kind == Tok::String) {
            node.activity_class = ActivityClass{ActivityClassKind::Other, take().text};
          } else {
            Token v = expect_id("an activity class");
            auto k = activity_class_from(v.text);
            if (!k) throw SyntaxError{v, "E-TAG", "unknown activity class '" + v.text + "'"};
            node.activity_class = ActivityClass{*k, ""};
          }
        } else if (key.text == "duration") {
          expect_punct(":");
          Token at = peek();
          Number v = expect_number();
          if (v.value < 0) throw SyntaxError{at, "E-TAG", "duration must be non-negative"};
          auto unit = parse_unit();
          if (!unit) throw SyntaxError{peek(), "E-TAG", "duration needs a unit"};
          node.duration = Duration{v, *unit};
        } else {
          throw SyntaxError{key, "E-TAG", "unknown tag '" + key.text + "'"};
        }
      } while (accept_punct(","));
      expect_punct("]");
    }
  }

  void parse_node(CaremapDraft& draft) {
    Node node;
    Token kw = take();
    bool label_required = true;
    if (kw.text == "entry") {
      node.kind = NodeKind::EntryPoint;
      label_required = false;
    } else if (kw.text == "exit") {
      node.kind = NodeKind::ExitPoint;
      label_required = false;
    } else if (kw.text == "exclusion") {
      node.kind = NodeKind::ExclusionPoint;
      label_required = false;
    } else if (kw.text == "activity") {
      node.kind = NodeKind::Activity;
    } else if (kw.text == "decision") {
      node.kind = NodeKind::Decision;
    } else {  // nested
      if (accept_keyword("activity")) {
        node.kind = NodeKind::NestedActivity;
      } else if (accept_keyword("decision")) {
        node.kind = NodeKind::NestedDecision;
      } else {
        throw SyntaxError{peek(), "E-SYNTAX", "expected 'activity' or 'decision' after 'nested'"};
      }
    }
    Token id = expect_id("a node id");
    node.id = id.text;
    if (peek().kind == Tok::String) {
      node.label = take().text;
    } else if (label_required) {
      throw SyntaxError{peek(), "E-SYNTAX", "expected a label for " + std::string(to_string(node.kind)) +
                                                " '" + node.id + "'"};
    }
    if (is_nested(node.kind)) {
      expect_keyword("ref");
      node.nested_ref = expect_id("a caremap id").text;
    }
    parse_tags(node);
    if (accept_keyword("note")) node.annotation = expect_string("a note").text;
    end_statement();
    draft.nodes.emplace_back(std::move(node), id);
  }

  void parse_edge(CaremapDraft& draft) {
    EdgeDraft d;
    if (peek_punct(":", 1)) {
      d.id_tok = expect_id("an edge id");
      take();  // ':'
      d.edge.id = d.id_tok->text;
    }
    d.from_tok = expect_id("a node id");
    d.arrow_tok = expect_punct("->");
    d.to_tok = expect_id("a node id");
    d.edge.from = d.from_tok.text;
    d.edge.to = d.to_tok.text;
    if (accept_keyword("when")) {
      skip_newlines();
      d.edge.criterion = parse_or();
    } else if (accept_keyword("otherwise")) {
      d.edge.criterion = Criterion::otherwise();
    }
    if (accept_keyword("note")) d.edge.annotation = expect_string("a note").text;
    end_statement();
    draft.edges.push_back(std::move(d));
  }

  void parse_meta(CaremapDraft& draft) {
    take();  // meta
    expect_punct("{");
    Caremap& m = draft.map;
    std::set<std::string> seen;
    while (!bail_) {
      skip_separators();
      if (accept_punct("}")) return;
      if (at_end()) throw SyntaxError{peek(), "E-SYNTAX", "unterminated meta block"};
      try {
        Token key = peek();
        if (key.kind != Tok::Ident) throw SyntaxError{key, "E-SYNTAX", "expected a meta field, found " + describe(key)};
        take();
        if (!seen.insert(key.text).second) {
          throw SyntaxError{key, "E-DUP", "duplicate meta field '" + key.text + "'"};
        }
        if (key.text == "title") {
          m.title = expect_string("a title").text;
          draft.title_set = true;
        } else if (key.text == "scenario") {
          m.scenario = expect_string("a scenario").text;
        } else if (key.text == "date") {
          Token d = expect_string("an ISO-8601 date");
          if (!is_iso_date(d.text)) throw SyntaxError{d, "E-DATE", "date must be YYYY-MM-DD, got " + quote(d.text)};
          m.date = d.text;
        } else if (key.text == "version") {
          Token at = peek();
          Number v = expect_number();
          if (!v.integer_literal || v.value < 1 || v.value > 1e9) {
            throw SyntaxError{at, "E-VERSION", "version must be an integer >= 1"};
          }
          m.version = static_cast<int>(v.value);
        } else if (key.text == "team") {
          m.lifecycle.team = expect_string("a team").text;
        } else if (key.text == "evidence") {
          m.lifecycle.evidence_refs.push_back(expect_string("an evidence reference").text);
          while (accept_punct(",")) m.lifecycle.evidence_refs.push_back(expect_string("an evidence reference").text);
        } else if (key.text == "variance_log") {
          m.lifecycle.variance_log_ref = expect_string("a variance log reference").text;
        } else {
          throw SyntaxError{key, "E-SYNTAX", "unknown meta field '" + key.text + "'"};
        }
        end_statement();
      } catch (const SyntaxError& e) {
        report(e.at, e.code, e.message);
        resync_statement();
      }
    }
  }

  CaremapDraft parse_caremap() {
    take();  // caremap
    CaremapDraft draft;
    if (peek().kind == Tok::String) {
      draft.id_tok = take();
      if (!is_identifier(draft.id_tok.text) || is_keyword(draft.id_tok.text)) {
        throw SyntaxError{draft.id_tok, "E-ID", "invalid caremap id " + quote(draft.id_tok.text)};
      }
    } else {
      draft.id_tok = expect_id("a caremap id");
    }
    draft.map.id = draft.id_tok.text;
    skip_newlines();
    expect_punct("{");
    bool closed = false;
    while (!bail_) {
      skip_separators();
      if (accept_punct("}")) {
        closed = true;
        break;
      }
      if (at_end()) break;
      try {
        const Token& t = peek();
        if (peek_keyword("meta")) {
          parse_meta(draft);
        } else if (t.kind == Tok::Ident && (t.text == "entry" || t.text == "exit" || t.text == "exclusion" ||
                                            t.text == "activity" || t.text == "decision" ||
                                            t.text == "nested")) {
          parse_node(draft);
        } else if (t.kind == Tok::Ident && !is_keyword(t.text)) {
          parse_edge(draft);
        } else {
          throw SyntaxError{t, "E-SYNTAX", "expected a declaration or edge, found " + describe(t)};
        }
      } catch (const SyntaxError& e) {
        report(e.at, e.code, e.message);
        resync_statement();
      }
    }
    if (!closed && !bail_) report(peek(), "E-SYNTAX", "expected '}' to close caremap '" + draft.map.id + "'");
    if (!draft.title_set) draft.map.title = draft.map.id;
    finish(draft);
    return draft;
  }

  MultiLevelLink parse_link() {
    take();  // link
    MultiLevelLink l;
    l.from_caremap = expect_id("a caremap id").text;
    expect_punct(".");
    l.from_exit = expect_id("an exit id").text;
    expect_punct("->");
    l.to_caremap = expect_id("a caremap id").text;
    expect_punct(".");
    l.to_entry = expect_id("an entry id").text;
    end_statement();
    return l;
  }

  // -- per-caremap semantic checks -------------------------------------------

  void finish(CaremapDraft& draft) {
    Caremap& m = draft.map;
    std::map<std::string, const Node*> nodes;
    for (auto& [node, tok] : draft.nodes) {
      if (nodes.count(node.id)) {
        report(tok, "E-DUP", "duplicate node id '" + node.id + "'");
        continue;
      }
      if (node.aspect && !is_decision(node.kind)) {
        report(tok, "E-ASPECT", "aspect tag on non-decision node '" + node.id + "'");
      }
      if (node.content_type && node.activity_class) {
        auto allowed = allowed_content_types(node.activity_class->kind);
        if (!allowed.empty() &&
            std::find(allowed.begin(), allowed.end(), *node.content_type) == allowed.end()) {
          report(tok, "E-CONTENT",
                 "node '" + node.id + "': class " + std::string(to_string(node.activity_class->kind)) +
                     " is not a " + std::string(to_string(*node.content_type)) + " activity");
        }
      }
      m.nodes.push_back(node);
      nodes.emplace(node.id, nullptr);
    }

    std::set<std::string> explicit_ids;
    for (auto& d : draft.edges) {
      if (!d.id_tok) continue;
      if (!explicit_ids.insert(d.edge.id).second) {
        report(*d.id_tok, "E-DUP", "duplicate edge id '" + d.edge.id + "'");
      }
    }
    std::vector<std::pair<std::string, std::string>> implicit;
    for (auto& d : draft.edges) {
      if (!d.id_tok) implicit.emplace_back(d.edge.from, d.edge.to);
    }
    auto ids = implicit_edge_ids(implicit, explicit_ids);
    std::size_t next = 0;
    std::vector<std::tuple<std::string, std::string, std::string>> triples;
    for (auto& d : draft.edges) {
      if (!d.id_tok) d.edge.id = ids[next++];
      bool ok = true;
      for (const Token* end : {&d.from_tok, &d.to_tok}) {
        if (!nodes.count(end->text)) {
          report(*end, "E-UNDEF", "undeclared node '" + end->text + "'");
          ok = false;
        }
      }
      std::string crit = d.edge.criterion ? to_string(*d.edge.criterion) : "";
      auto triple = std::make_tuple(d.edge.from, d.edge.to, crit);
      if (std::find(triples.begin(), triples.end(), triple) != triples.end()) {
        report(d.arrow_tok, "E-DUP", "duplicate edge " + d.edge.from + " -> " + d.edge.to);
        ok = false;
      }
      triples.push_back(triple);
      if (ok) m.edges.push_back(d.edge);
    }
    check_units(draft);
  }

  void collect_units(const Criterion& c, std::map<std::string, std::optional<std::string>>& units,
                     const Token& at) {
    if (c.kind == Criterion::Kind::Comparison && !c.token) note_unit(c.var, c.unit, units, at);
    if (c.kind == Criterion::Kind::InRange) note_unit(c.var, c.unit, units, at);
    for (const auto& child : c.children) collect_units(child, units, at);
  }

  void note_unit(const std::string& var, const std::optional<std::string>& unit,
                 std::map<std::string, std::optional<std::string>>& units, const Token& at) {
    auto [it, inserted] = units.emplace(var, unit);
    if (!inserted && it->second != unit) {
      report(at, "E-UNIT", "variable '" + var + "' compared in " + (it->second ? *it->second : "no unit") +
                               " and " + (unit ? *unit : "no unit") + " at the same decision");
    }
  }

  void check_units(const CaremapDraft& draft) {
    std::map<std::string, std::map<std::string, std::optional<std::string>>> per_decision;
    for (const auto& d : draft.edges) {
      if (d.edge.criterion) collect_units(*d.edge.criterion, per_decision[d.edge.from], d.arrow_tok);
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::string file_;
  std::vector<ParseDiagnostic> diags_;
  bool bail_ = false;
};

}  // namespace

std::vector<std::string> implicit_edge_ids(
    const std::vector<std::pair<std::string, std::string>>& endpoints, std::set<std::string> taken) {
  std::vector<std::string> out;
  out.reserve(endpoints.size());
  for (const auto& [from, to] : endpoints) {
    std::string base = from + "-" + to;
    std::string candidate = base;
    for (int k = 2; taken.count(candidate); ++k) candidate = base + "-" + std::to_string(k);
    taken.insert(candidate);
    out.push_back(candidate);
  }
  return out;
}

ParseResult parse(std::string_view text, std::string_view file) {
  ParseResult result;
  std::string fname(file);
  if (auto bad = invalid_utf8_at(text); bad != std::string_view::npos) {
    int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(bad), '\n'));
    auto nl = text.rfind('\n', bad == 0 ? 0 : bad - 1);
    int col = static_cast<int>(nl == std::string_view::npos || bad == 0 ? bad + 1 : bad - nl);
    result.diagnostics.push_back({Severity::Error, "E-UTF8", "input is not valid UTF-8", {fname, line, col, 1}});
    return result;
  }
  std::vector<LexError> lex_errors;
  auto toks = Lexer(text).run(lex_errors);
  Parser p(std::move(toks), fname);
  for (const auto& e : lex_errors) {
    Token at;
    at.line = e.line;
    at.col = e.col;
    at.length = 1;
    p.report(at, "E-LEX", e.message);
  }
  CaremapSet set = p.parse_file();
  auto& diags = p.diagnostics();
  std::stable_sort(diags.begin(), diags.end(), [](const ParseDiagnostic& a, const ParseDiagnostic& b) {
    return std::tie(a.span.line, a.span.column) < std::tie(b.span.line, b.span.column);
  });
  result.diagnostics = std::move(diags);
  bool errors = std::any_of(result.diagnostics.begin(), result.diagnostics.end(),
                            [](const ParseDiagnostic& d) { return d.severity == Severity::Error; });
  if (!errors) result.set = std::move(set);
  return result;
}

Criterion parse_criterion(std::string_view text) {
  std::vector<LexError> lex_errors;
  auto toks = Lexer(text).run(lex_errors);
  if (!lex_errors.empty()) throw Error("ParseError", lex_errors.front().message);
  Parser p(std::move(toks), "<criterion>");
  try {
    return p.parse_lone_criterion();
  } catch (const SyntaxError& e) {
    throw Error("ParseError", e.message);
  }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

std::vector<const Node*> canonical_nodes(const Caremap& m) {
  std::vector<const Node*> out;
  for (const auto& n : m.nodes) out.push_back(&n);
  std::sort(out.begin(), out.end(), [](const Node* a, const Node* b) {
    return std::tie(a->kind, a->id) < std::tie(b->kind, b->id);
  });
  return out;
}

std::vector<const Edge*> canonical_edges(const Caremap& m) {
  std::vector<const Edge*> out;
  for (const auto& e : m.edges) out.push_back(&e);
  std::sort(out.begin(), out.end(), [](const Edge* a, const Edge* b) { return a->id < b->id; });
  return out;
}

// Which edges (in canonical order) can be written without an explicit id
// and still re-derive their id on parse. Grows the explicit set until the
// parser's assignment agrees on every implicit edge.
std::vector<bool> writable_implicitly(const std::vector<const Edge*>& edges) {
  std::vector<bool> implicit(edges.size(), true);
  while (true) {
    std::set<std::string> explicit_ids;
    std::vector<std::pair<std::string, std::string>> endpoints;
    std::vector<std::size_t> which;
    for (std::size_t i = 0; i < edges.size(); ++i) {
      if (implicit[i]) {
        endpoints.emplace_back(edges[i]->from, edges[i]->to);
        which.push_back(i);
      } else {
        explicit_ids.insert(edges[i]->id);
      }
    }
    auto ids = implicit_edge_ids(endpoints, explicit_ids);
    bool changed = false;
    for (std::size_t k = 0; k < which.size(); ++k) {
      if (ids[k] != edges[which[k]]->id) {
        implicit[which[k]] = false;
        changed = true;
      }
    }
    if (!changed) return implicit;
  }
}

void write_tags(const Node& n, std::ostream& os) {
  std::vector<std::string> tags;
  if (n.content_type) tags.emplace_back(to_string(*n.content_type));
  if (n.activity_class) {
    if (n.activity_class->kind == ActivityClassKind::Other) {
      tags.push_back("class: " + quote(n.activity_class->label));
    } else {
      tags.push_back("class: " + std::string(to_string(n.activity_class->kind)));
    }
  }
  if (n.aspect) tags.push_back("aspect: " + std::string(to_string(*n.aspect)));
  if (n.duration) tags.push_back("duration: " + format_number(n.duration->value) + " " + n.duration->unit);
  if (tags.empty()) return;
  os << " [";
  for (std::size_t i = 0; i < tags.size(); ++i) os << (i ? ", " : "") << tags[i];
  os << ']';
}

}  // namespace

std::string serialize(const CaremapSet& set) {
  std::ostringstream os;
  bool first = true;
  for (const auto& [id, m] : set.caremaps) {
    if (!first) os << '\n';
    first = false;
    os << "caremap " << quote(id) << " {\n";
    const auto& lc = m.lifecycle;
    bool has_meta = m.title != m.id || m.scenario || m.date || m.version || lc.team ||
                    !lc.evidence_refs.empty() || lc.variance_log_ref;
    if (has_meta) {
      os << "  meta {\n";
      if (m.title != m.id) os << "    title " << quote(m.title) << '\n';
      if (m.scenario) os << "    scenario " << quote(*m.scenario) << '\n';
      if (m.date) os << "    date " << quote(*m.date) << '\n';
      if (m.version) os << "    version " << *m.version << '\n';
      if (lc.team) os << "    team " << quote(*lc.team) << '\n';
      if (!lc.evidence_refs.empty()) {
        os << "    evidence ";
        for (std::size_t i = 0; i < lc.evidence_refs.size(); ++i) {
          os << (i ? ", " : "") << quote(lc.evidence_refs[i]);
        }
        os << '\n';
      }
      if (lc.variance_log_ref) os << "    variance_log " << quote(*lc.variance_log_ref) << '\n';
      os << "  }\n";
    }
    for (const auto* n : canonical_nodes(m)) {
      os << "  " << to_string(n->kind) << ' ' << n->id;
      if (!n->label.empty() || (!is_terminal(n->kind) && n->kind != NodeKind::EntryPoint)) {
        os << ' ' << quote(n->label);
      }
      if (n->nested_ref) os << " ref " << *n->nested_ref;
      write_tags(*n, os);
      if (n->annotation) os << " note " << quote(*n->annotation);
      os << '\n';
    }
    auto edges = canonical_edges(m);
    if (!edges.empty()) os << '\n';
    auto implicit = writable_implicitly(edges);
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const Edge& e = *edges[i];
      os << "  ";
      if (!implicit[i]) os << e.id << ": ";
      os << e.from << " -> " << e.to;
      if (e.criterion) {
        if (e.criterion->is_otherwise()) {
          os << " otherwise";
        } else {
          os << " when " << to_string(*e.criterion);
        }
      }
      if (e.annotation) os << " note " << quote(*e.annotation);
      os << '\n';
    }
    os << "}\n";
  }
  auto links = set.links;
  std::sort(links.begin(), links.end());
  if (!links.empty()) os << '\n';
  for (const auto& l : links) {
    os << "link " << l.from_caremap << '.' << l.from_exit << " -> " << l.to_caremap << '.' << l.to_entry
       << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

json literal_json(const Literal& l) {
  json j;
  switch (l.kind) {
    case Literal::Kind::Number:
      j["kind"] = "number";
      j["value"] = l.number.value;
      j["unit"] = opt(l.unit);
      break;
    case Literal::Kind::Identifier:
      j["kind"] = "identifier";
      j["text"] = l.text;
      break;
    case Literal::Kind::String:
      j["kind"] = "string";
      j["text"] = l.text;
      break;
  }
  return j;
}

json ast_json(const Criterion& c) {
  using K = Criterion::Kind;
  json j;
  switch (c.kind) {
    case K::Comparison:
      j["kind"] = "comparison";
      j["var"] = c.var;
      j["op"] = std::string(to_string(c.op));
      if (c.token) {
        j["token"] = *c.token;
      } else {
        j["value"] = c.value.value;
      }
      j["unit"] = opt(c.unit);
      break;
    case K::InRange:
      j["kind"] = "in_range";
      j["var"] = c.var;
      j["low"] = c.low.value;
      j["high"] = c.high.value;
      j["unit"] = opt(c.unit);
      break;
    case K::Predicate: {
      j["kind"] = "predicate";
      j["name"] = c.name;
      json args = json::array();
      for (const auto& a : c.args) args.push_back(literal_json(a));
      j["args"] = args;
      break;
    }
    case K::And:
    case K::Or:
    case K::Not: {
      j["kind"] = c.kind == K::And ? "and" : c.kind == K::Or ? "or" : "not";
      json kids = json::array();
      for (const auto& child : c.children) kids.push_back(ast_json(child));
      j["children"] = kids;
      break;
    }
    case K::Otherwise: j["kind"] = "otherwise"; break;
  }
  return j;
}

}  // namespace

nlohmann::json criterion_to_json(const Criterion& c) {
  return json{{"text", to_string(c)}, {"ast", ast_json(c)}};
}

nlohmann::json to_json_value(const CaremapSet& set) {
  json maps = json::array();
  for (const auto& [id, m] : set.caremaps) {
    json nodes = json::array();
    for (const auto* n : canonical_nodes(m)) {
      json jn;
      jn["id"] = n->id;
      jn["kind"] = std::string(to_string(n->kind));
      jn["label"] = n->label;
      jn["content_type"] = n->content_type ? json(std::string(to_string(*n->content_type))) : json(nullptr);
      if (n->activity_class) {
        jn["activity_class"] = json{{"kind", std::string(to_string(n->activity_class->kind))},
                                    {"label", n->activity_class->label}};
      } else {
        jn["activity_class"] = nullptr;
      }
      jn["aspect"] = n->aspect ? json(std::string(to_string(*n->aspect))) : json(nullptr);
      jn["nested_ref"] = opt(n->nested_ref);
      jn["duration"] = n->duration ? json{{"value", n->duration->value.value}, {"unit", n->duration->unit}}
                                   : json(nullptr);
      jn["annotation"] = opt(n->annotation);
      nodes.push_back(jn);
    }
    json edges = json::array();
    for (const auto* e : canonical_edges(m)) {
      edges.push_back(json{{"id", e->id},
                           {"from", e->from},
                           {"to", e->to},
                           {"criterion", e->criterion ? criterion_to_json(*e->criterion) : json(nullptr)},
                           {"annotation", opt(e->annotation)}});
    }
    maps.push_back(json{{"id", m.id},
                        {"title", m.title},
                        {"scenario", opt(m.scenario)},
                        {"date", opt(m.date)},
                        {"version", opt(m.version)},
                        {"lifecycle",
                         {{"team", opt(m.lifecycle.team)},
                          {"evidence_refs", m.lifecycle.evidence_refs},
                          {"variance_log_ref", opt(m.lifecycle.variance_log_ref)}}},
                        {"nodes", nodes},
                        {"edges", edges}});
  }
  auto links = set.links;
  std::sort(links.begin(), links.end());
  json jl = json::array();
  for (const auto& l : links) {
    jl.push_back(json{{"from_caremap", l.from_caremap},
                      {"from_exit", l.from_exit},
                      {"to_caremap", l.to_caremap},
                      {"to_entry", l.to_entry}});
  }
  return json{{"tasc_schema", 1}, {"caremaps", maps}, {"links", jl}};
}

std::string to_json(const CaremapSet& set) { return to_json_value(set).dump(2) + "\n"; }

}  // namespace tasc
