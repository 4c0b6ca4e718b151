#include "deepdfa/minic.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "deepdfa/error.hpp"

namespace deepdfa {

namespace {

enum class Tok { Ident, Keyword, Number, String, Char, Punct, End };

struct Token {
  Tok kind;
  std::string text;
  std::size_t line;
  std::size_t column;
  std::size_t offset;
};

constexpr std::array<std::string_view, 12> kTypeWords{
    "int", "char", "float", "double", "long", "short", "unsigned", "signed", "void", "size_t", "bool", "const"};

constexpr std::array<std::string_view, 14> kUnsupportedWords{
    "for", "do", "switch", "case", "default", "goto", "break", "continue",
    "struct", "union", "enum", "typedef", "sizeof", "static"};

bool is_type_word(std::string_view s) {
  return std::find(kTypeWords.begin(), kTypeWords.end(), s) != kTypeWords.end();
}

bool is_typedef_name(std::string_view s) { return s.size() > 2 && s.ends_with("_t"); }

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      if (pos_ >= src_.size()) {
        out.push_back({Tok::End, "", line_, col_, pos_});
        return out;
      }
      out.push_back(next());
    }
  }

 private:
  char peek(std::size_t ahead = 0) const { return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0'; }

  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      char c = peek();
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (c == '/' && peek(1) == '/') {
        while (pos_ < src_.size() && peek() != '\n') advance();
      } else if (c == '/' && peek(1) == '*') {
        const std::size_t l = line_, k = col_;
        advance();
        advance();
        while (pos_ < src_.size() && !(peek() == '*' && peek(1) == '/')) advance();
        if (pos_ >= src_.size()) throw ParseError("unterminated comment", l, k);
        advance();
        advance();
      } else if (c == '#') {
        throw UnsupportedError("preprocessor directive");
      } else {
        return;
      }
    }
  }

  Token next() {
    const std::size_t start = pos_, line = line_, col = col_;
    const char c = peek();
    auto make = [&](Tok kind) { return Token{kind, std::string(src_.substr(start, pos_ - start)), line, col, start}; };

    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') advance();
      Token t = make(Tok::Ident);
      if (is_type_word(t.text) || t.text == "if" || t.text == "else" || t.text == "while" || t.text == "return")
        t.kind = Tok::Keyword;
      return t;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
      while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '.') advance();
      return make(Tok::Number);
    }
    if (c == '"' || c == '\'') {
      advance();
      while (pos_ < src_.size() && peek() != c && peek() != '\n') {
        if (peek() == '\\') advance();
        if (pos_ < src_.size()) advance();
      }
      if (peek() != c) throw ParseError(c == '"' ? "unterminated string literal" : "unterminated character literal", line, col);
      advance();
      return make(c == '"' ? Tok::String : Tok::Char);
    }
    static constexpr std::array<std::string_view, 19> kLong{
        "<<=", ">>=", "==", "!=", "<=", ">=", "&&", "||", "<<", ">>", "++", "--",
        "+=", "-=", "*=", "/=", "%=", "->", "::"};
    for (std::string_view op : kLong) {
      if (src_.substr(pos_, op.size()) == op) {
        for (std::size_t i = 0; i < op.size(); ++i) advance();
        return make(Tok::Punct);
      }
    }
    if (std::string_view("+-*/%<>=!&|^~()[]{},;?:.").find(c) != std::string_view::npos) {
      advance();
      return make(Tok::Punct);
    }
    throw ParseError(std::string("unexpected character '") + c + "'", line, col);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

// Expression tree. Children are stored in source order so that an in-order
// walk visits tokens left to right.
struct Expr {
  enum class Kind { Ident, Literal, Unary, Binary, Call, Index };
  Kind kind;
  std::string text;  // identifier, literal spelling, operator, or callee
  std::vector<std::unique_ptr<Expr>> kids;
};

using ExprPtr = std::unique_ptr<Expr>;

struct Facts {
  std::optional<std::string> callee;
  std::vector<std::string> constants;
  std::vector<std::string> operators;
  std::set<std::string> uses;
  bool derefs = false;
  bool calls = false;
};

void collect(const Expr& e, Facts& f) {
  switch (e.kind) {
    case Expr::Kind::Ident:
      f.uses.insert(e.text);
      break;
    case Expr::Kind::Literal:
      f.constants.push_back(e.text);
      break;
    case Expr::Kind::Unary:
      f.operators.push_back(e.text);
      if (e.text == "*") f.derefs = true;
      collect(*e.kids[0], f);
      break;
    case Expr::Kind::Binary:
      collect(*e.kids[0], f);
      f.operators.push_back(e.text);
      collect(*e.kids[1], f);
      break;
    case Expr::Kind::Call:
      if (!f.callee) f.callee = e.text;
      f.calls = true;
      for (const auto& k : e.kids) collect(*k, f);
      break;
    case Expr::Kind::Index:
      f.derefs = true;
      collect(*e.kids[0], f);
      collect(*e.kids[1], f);
      break;
  }
}

class Parser {
 public:
  Parser(std::string_view src, std::vector<Token> toks, const ParseOptions& opts)
      : src_(src), toks_(std::move(toks)), opts_(opts) {}

  Cfg run() {
    std::string type = parse_type();
    const Token& name = expect_ident("function name");
    cfg_.function = name.text;
    scopes_.emplace_back();
    expect("(");
    if (!at(")")) {
      if (at_word("void") && toks_[pos_ + 1].text == ")") {
        ++pos_;
      } else {
        for (;;) {
          std::string ptype = parse_type();
          const Token& p = expect_ident("parameter name");
          scopes_.back()[p.text] = ptype;
          if (!accept(",")) break;
        }
      }
    }
    expect(")");
    (void)type;

    cfg_.entry = add_raw(Statement{StatementKind::Nop, "ENTRY", {}, {}, {}, {}, {}, {}});
    frontier_ = {cfg_.entry};
    parse_block();
    if (cur().kind != Tok::End) fail("expected end of input after function body");

    Statement exit{StatementKind::Nop, "EXIT", {}, {}, {}, {}, {}, {}};
    cfg_.exit = add_raw(std::move(exit));
    for (NodeId r : returns_) cfg_.edges.emplace_back(r, cfg_.exit);
    for (NodeId f : frontier_) cfg_.edges.emplace_back(f, cfg_.exit);
    cfg_.canonicalize();
    return std::move(cfg_);
  }

 private:
  const Token& cur() const { return toks_[pos_]; }
  bool at(std::string_view p) const { return cur().kind == Tok::Punct && cur().text == p; }
  bool at_word(std::string_view w) const {
    return (cur().kind == Tok::Keyword || cur().kind == Tok::Ident) && cur().text == w;
  }
  bool accept(std::string_view p) {
    if (at(p)) {
      ++pos_;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, cur().line, cur().column); }

  void expect(std::string_view p) {
    if (!accept(p)) fail("expected '" + std::string(p) + "' but found '" + describe(cur()) + "'");
  }

  static std::string describe(const Token& t) { return t.kind == Tok::End ? "end of input" : t.text; }

  const Token& expect_ident(const char* what) {
    check_unsupported_word();
    if (cur().kind != Tok::Ident) fail(std::string("expected ") + what + " but found '" + describe(cur()) + "'");
    return toks_[pos_++];
  }

  void check_unsupported_word() const {
    if (cur().kind != Tok::Ident) return;
    for (std::string_view w : kUnsupportedWords) {
      if (cur().text == w) throw UnsupportedError("'" + std::string(w) + "' at line " + std::to_string(cur().line));
    }
  }

  bool at_type() const {
    if (cur().kind == Tok::Keyword && is_type_word(cur().text)) return true;
    // `size_t`-style typedef names, but only when a declarator follows.
    return cur().kind == Tok::Ident && is_typedef_name(cur().text) &&
           (toks_[pos_ + 1].kind == Tok::Ident || (toks_[pos_ + 1].kind == Tok::Punct && toks_[pos_ + 1].text == "*"));
  }

  std::string parse_type() {
    check_unsupported_word();
    if (!at_type()) fail("expected a type but found '" + describe(cur()) + "'");
    std::string spelled;
    while (at_type()) {
      if (cur().text != "const") {
        if (!spelled.empty()) spelled += ' ';
        spelled += cur().text;
      }
      ++pos_;
    }
    if (spelled.empty()) fail("expected a type name after 'const'");
    while (accept("*")) spelled += '*';
    return spelled;
  }

  std::optional<std::string> lookup_type(const std::string& name) const {
    for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
      if (auto f = it->find(name); f != it->end()) return f->second;
    }
    return std::nullopt;
  }

  NodeId add_raw(Statement s) {
    cfg_.nodes.push_back(std::move(s));
    return cfg_.nodes.size() - 1;
  }

  NodeId add_statement(Statement s, const Token& at_tok) {
    if (frontier_.empty()) {
      throw UnsupportedError("unreachable statement after return at line " + std::to_string(at_tok.line));
    }
    NodeId id = add_raw(std::move(s));
    for (NodeId f : frontier_) cfg_.edges.emplace_back(f, id);
    frontier_ = {id};
    return id;
  }

  std::string text_between(std::size_t first_tok, std::size_t end_tok) const {
    const Token& a = toks_[first_tok];
    const Token& b = toks_[end_tok - 1];
    return std::string(src_.substr(a.offset, b.offset + b.text.size() - a.offset));
  }

  void parse_block() {
    expect("{");
    scopes_.emplace_back();
    while (!at("}")) {
      if (cur().kind == Tok::End) fail("expected '}' before end of input");
      parse_statement();
    }
    expect("}");
    scopes_.pop_back();
  }

  // Parses a branch or loop body; an empty body becomes one nop node.
  void parse_body() {
    const std::size_t before = cfg_.nodes.size();
    const Token& first = cur();
    if (at("{")) {
      parse_block();
    } else {
      scopes_.emplace_back();
      parse_statement();
      scopes_.pop_back();
    }
    if (cfg_.nodes.size() == before) {
      add_statement(Statement{StatementKind::Nop, "{}", {}, {}, {}, {}, {}, {}}, first);
    }
  }

  void parse_statement() {
    check_unsupported_word();
    const Token& first = cur();
    if (at("{")) {
      parse_block();
    } else if (at(";")) {
      ++pos_;
    } else if (at_word("if")) {
      parse_if();
    } else if (at_word("while")) {
      parse_while();
    } else if (at_word("return")) {
      parse_return();
    } else if (at_word("else")) {
      fail("'else' without matching 'if'");
    } else if (at_type()) {
      parse_declaration();
    } else {
      parse_expression_statement();
    }
    (void)first;
  }

  NodeId add_condition() {
    const Token& kw = cur();
    ++pos_;
    expect("(");
    const std::size_t start = pos_;
    ExprPtr cond = parse_expr();
    const std::size_t end = pos_;
    expect(")");
    Facts f;
    collect(*cond, f);
    Statement s{StatementKind::Condition, text_between(start, end), {}, {}, f.callee, f.constants, f.operators,
                {f.uses.begin(), f.uses.end()}};
    return add_statement(std::move(s), kw);
  }

  void parse_if() {
    NodeId c = add_condition();
    frontier_ = {c};
    parse_body();
    std::vector<NodeId> then_out = frontier_;
    std::vector<NodeId> else_out{c};
    if (at_word("else")) {
      ++pos_;
      frontier_ = {c};
      if (at_word("if")) {
        parse_if();
      } else {
        parse_body();
      }
      else_out = frontier_;
    }
    frontier_ = then_out;
    frontier_.insert(frontier_.end(), else_out.begin(), else_out.end());
  }

  void parse_while() {
    NodeId c = add_condition();
    frontier_ = {c};
    parse_body();
    for (NodeId f : frontier_) cfg_.edges.emplace_back(f, c);
    frontier_ = {c};
  }

  void parse_return() {
    const Token& kw = cur();
    const std::size_t start = pos_;
    ++pos_;
    Facts f;
    if (!at(";")) collect(*parse_expr(), f);
    expect(";");
    Statement s{StatementKind::Return, text_between(start, pos_), {}, {}, f.callee, f.constants, f.operators,
                {f.uses.begin(), f.uses.end()}};
    NodeId id = add_statement(std::move(s), kw);
    returns_.push_back(id);
    frontier_.clear();
  }

  void parse_declaration() {
    const Token& first = cur();
    const std::size_t start = pos_;
    std::string type = parse_type();
    const Token& name = expect_ident("variable name");
    if (at("[")) throw UnsupportedError("array declaration at line " + std::to_string(name.line));
    if (at("(")) throw UnsupportedError("nested function declaration at line " + std::to_string(name.line));
    std::optional<ExprPtr> init;
    if (accept("=")) init = parse_expr();
    if (at(",")) throw UnsupportedError("multiple declarators in one statement at line " + std::to_string(first.line));
    reject_chained_assignment();
    expect(";");
    scopes_.back()[name.text] = type;
    if (!init) return;  // a bare declaration executes nothing

    Facts f;
    collect(**init, f);
    Statement s{StatementKind::DeclInit, text_between(start, pos_), name.text, type, f.callee, f.constants,
                f.operators, {f.uses.begin(), f.uses.end()}};
    add_statement(std::move(s), first);
  }

  void reject_chained_assignment() const {
    if (at("=")) throw UnsupportedError("multiple definitions in one statement at line " + std::to_string(cur().line));
    for (std::string_view op : {"+=", "-=", "*=", "/=", "%=", "<<=", ">>="}) {
      if (at(op)) throw UnsupportedError("compound assignment '" + std::string(op) + "' at line " + std::to_string(cur().line));
    }
  }

  void parse_expression_statement() {
    const Token& first = cur();
    const std::size_t start = pos_;
    ExprPtr lhs = parse_expr();
    if (accept("=")) {
      ExprPtr rhs = parse_expr();
      reject_chained_assignment();
      expect(";");
      Facts rf;
      collect(*rhs, rf);
      const std::string code = text_between(start, pos_);
      if (lhs->kind == Expr::Kind::Ident) {
        const auto kind = rf.calls ? StatementKind::CallAssign : StatementKind::Assign;
        Statement s{kind, code, lhs->text, lookup_type(lhs->text), rf.callee, rf.constants, rf.operators,
                    {rf.uses.begin(), rf.uses.end()}};
        add_statement(std::move(s), first);
        return;
      }
      const bool store = (lhs->kind == Expr::Kind::Unary && lhs->text == "*") || lhs->kind == Expr::Kind::Index;
      if (!store) throw ParseError("left side of '=' is not assignable", first.line, first.column);
      Facts lf;
      collect(*lhs, lf);
      Facts all;
      all.callee = lf.callee ? lf.callee : rf.callee;
      all.constants = lf.constants;
      all.constants.insert(all.constants.end(), rf.constants.begin(), rf.constants.end());
      all.operators = lf.operators;
      all.operators.insert(all.operators.end(), rf.operators.begin(), rf.operators.end());
      all.uses = lf.uses;
      all.uses.insert(rf.uses.begin(), rf.uses.end());
      Statement s{StatementKind::DerefUse, code, {}, {}, all.callee, all.constants, all.operators,
                  {all.uses.begin(), all.uses.end()}};
      add_statement(std::move(s), first);
      return;
    }
    reject_chained_assignment();
    expect(";");
    Facts f;
    collect(*lhs, f);
    const auto kind = f.derefs ? StatementKind::DerefUse : StatementKind::Nop;
    Statement s{kind, text_between(start, pos_), {}, {}, f.callee, f.constants, f.operators,
                {f.uses.begin(), f.uses.end()}};
    NodeId id = add_statement(std::move(s), first);
    if (kind == StatementKind::DerefUse && opts_.anonymous_deref_defs) {
      cfg_.nodes[id].target = std::string(kAnonymousPrefix) + "d" + std::to_string(id);
    }
  }

  // Precedence climbing over C binary operators.
  static int precedence(std::string_view op) {
    static const std::map<std::string_view, int> table{
        {"||", 1}, {"&&", 2}, {"|", 3}, {"^", 4}, {"&", 5}, {"==", 6}, {"!=", 6},
        {"<", 7}, {">", 7}, {"<=", 7}, {">=", 7}, {"<<", 8}, {">>", 8},
        {"+", 9}, {"-", 9}, {"*", 10}, {"/", 10}, {"%", 10}};
    auto it = table.find(op);
    return it == table.end() ? -1 : it->second;
  }

  ExprPtr parse_expr(int min_prec = 1) {
    ExprPtr lhs = parse_unary();
    for (;;) {
      if (cur().kind != Tok::Punct) break;
      if (at("?")) throw UnsupportedError("conditional operator '?:' at line " + std::to_string(cur().line));
      const int prec = precedence(cur().text);
      if (prec < min_prec) break;
      std::string op = toks_[pos_++].text;
      ExprPtr rhs = parse_expr(prec + 1);
      auto e = std::make_unique<Expr>(Expr{Expr::Kind::Binary, op, {}});
      e->kids.push_back(std::move(lhs));
      e->kids.push_back(std::move(rhs));
      lhs = std::move(e);
    }
    return lhs;
  }

  ExprPtr parse_unary() {
    if (at("++") || at("--")) throw UnsupportedError("increment/decrement operator at line " + std::to_string(cur().line));
    if (at("-") && toks_[pos_ + 1].kind == Tok::Number) {
      // A negated literal is a single constant such as `-1`.
      ++pos_;
      const Token& num = toks_[pos_++];
      return parse_postfix(std::make_unique<Expr>(Expr{Expr::Kind::Literal, "-" + num.text, {}}));
    }
    for (std::string_view op : {"-", "!", "*", "&", "~", "+"}) {
      if (at(op)) {
        ++pos_;
        auto e = std::make_unique<Expr>(Expr{Expr::Kind::Unary, std::string(op), {}});
        e->kids.push_back(parse_unary());
        return e;
      }
    }
    return parse_postfix(parse_primary());
  }

  ExprPtr parse_primary() {
    check_unsupported_word();
    const Token& t = cur();
    switch (t.kind) {
      case Tok::Number:
      case Tok::String:
      case Tok::Char:
        ++pos_;
        return std::make_unique<Expr>(Expr{Expr::Kind::Literal, t.text, {}});
      case Tok::Ident:
        ++pos_;
        if (t.text == "NULL") return std::make_unique<Expr>(Expr{Expr::Kind::Literal, t.text, {}});
        return std::make_unique<Expr>(Expr{Expr::Kind::Ident, t.text, {}});
      case Tok::Punct:
        if (t.text == "(") {
          ++pos_;
          if (at_type()) throw UnsupportedError("cast expression at line " + std::to_string(t.line));
          ExprPtr inner = parse_expr();
          expect(")");
          return inner;
        }
        break;
      case Tok::Keyword:
        if (is_type_word(t.text)) throw UnsupportedError("declaration inside an expression at line " + std::to_string(t.line));
        break;
      case Tok::End:
        break;
    }
    fail("expected an expression but found '" + describe(t) + "'");
  }

  ExprPtr parse_postfix(ExprPtr base) {
    for (;;) {
      if (at("(")) {
        if (base->kind != Expr::Kind::Ident) fail("only named functions can be called");
        ++pos_;
        auto call = std::make_unique<Expr>(Expr{Expr::Kind::Call, base->text, {}});
        if (!at(")")) {
          for (;;) {
            call->kids.push_back(parse_expr());
            if (!accept(",")) break;
          }
        }
        expect(")");
        base = std::move(call);
      } else if (at("[")) {
        ++pos_;
        auto idx = std::make_unique<Expr>(Expr{Expr::Kind::Index, "[]", {}});
        idx->kids.push_back(std::move(base));
        idx->kids.push_back(parse_expr());
        expect("]");
        base = std::move(idx);
      } else if (at("->") || at(".")) {
        throw UnsupportedError("member access at line " + std::to_string(cur().line));
      } else if (at("++") || at("--")) {
        throw UnsupportedError("increment/decrement operator at line " + std::to_string(cur().line));
      } else {
        return base;
      }
    }
  }

  std::string_view src_;
  std::vector<Token> toks_;
  ParseOptions opts_;
  std::size_t pos_ = 0;
  Cfg cfg_;
  std::vector<NodeId> frontier_;
  std::vector<NodeId> returns_;
  std::vector<std::map<std::string, std::string>> scopes_;
};

}  // namespace

Cfg parse_function(std::string_view source, const ParseOptions& options) {
  Parser parser(source, Lexer(source).run(), options);
  return parser.run();
}

}  // namespace deepdfa
