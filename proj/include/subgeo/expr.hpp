#pragma once

// Analytic expression language: AST, recursive-descent parser, printer,
// and an evaluator generic over the scalar kind.
//
//   expr     := term (("+"|"-") term)*
//   term     := factor (("*"|"/") factor)*
//   factor   := "-" factor | power
//   power    := atom ("^" exponent)*          right-associative, folded
//   exponent := ["+"|"-"] int | "(" ["-"] int ["/" int] ")"
//   atom     := number | ident | func "(" expr ")" | "(" expr ")"
//
// "-" directly before a number literal (not itself raised to a power) folds
// into a negative constant. The Unicode minus sign is accepted.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "jet.hpp"

namespace subgeo {

enum class Op { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Call };
enum class Fn { Exp, Log, Sin, Cos, Sqrt };

inline const char* fn_name(Fn f) {
  switch (f) {
    case Fn::Exp: return "exp";
    case Fn::Log: return "log";
    case Fn::Sin: return "sin";
    case Fn::Cos: return "cos";
    case Fn::Sqrt: return "sqrt";
  }
  return "?";
}

struct Node;
using Expr = std::shared_ptr<const Node>;

struct Node {
  Op op = Op::Const;
  double value = 0.0;     // Const
  int var = -1;           // Var: coordinate index
  std::string name;       // Var: coordinate name
  Fn fn = Fn::Exp;        // Call
  std::int64_t num = 1;   // Pow exponent num/den
  std::int64_t den = 1;
  Expr a, b;
};

inline double exponent_value(const Node& n) { return double(n.num) / double(n.den); }

inline Expr make_const(double v) {
  auto n = std::make_shared<Node>();
  n->op = Op::Const;
  n->value = v;
  return n;
}
inline Expr make_var(int idx, std::string name) {
  auto n = std::make_shared<Node>();
  n->op = Op::Var;
  n->var = idx;
  n->name = std::move(name);
  return n;
}
inline Expr make_unary(Expr a) {
  auto n = std::make_shared<Node>();
  n->op = Op::Neg;
  n->a = std::move(a);
  return n;
}
inline Expr make_binary(Op op, Expr a, Expr b) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}
inline Expr make_pow(Expr a, std::int64_t num, std::int64_t den) {
  auto n = std::make_shared<Node>();
  n->op = Op::Pow;
  n->a = std::move(a);
  if (den < 0) {
    num = -num;
    den = -den;
  }
  std::int64_t g = std::gcd(num < 0 ? -num : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  n->num = num;
  n->den = den;
  return n;
}
inline Expr make_call(Fn f, Expr a) {
  auto n = std::make_shared<Node>();
  n->op = Op::Call;
  n->fn = f;
  n->a = std::move(a);
  return n;
}

// ---------------------------------------------------------------- printing

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string to_string(const Node& n) {
  switch (n.op) {
    case Op::Const: {
      std::string s = format_number(n.value);
      return n.value < 0 || std::signbit(n.value) ? "(" + s + ")" : s;
    }
    case Op::Var: return n.name;
    case Op::Neg: return "-(" + to_string(*n.a) + ")";
    case Op::Add: return "(" + to_string(*n.a) + " + " + to_string(*n.b) + ")";
    case Op::Sub: return "(" + to_string(*n.a) + " - " + to_string(*n.b) + ")";
    case Op::Mul: return "(" + to_string(*n.a) + " * " + to_string(*n.b) + ")";
    case Op::Div: return "(" + to_string(*n.a) + " / " + to_string(*n.b) + ")";
    case Op::Pow: {
      std::string e = n.den == 1 ? std::to_string(n.num)
                                 : "(" + std::to_string(n.num) + "/" + std::to_string(n.den) + ")";
      return "(" + to_string(*n.a) + ")^" + e;
    }
    case Op::Call: return std::string(fn_name(n.fn)) + "(" + to_string(*n.a) + ")";
  }
  return "?";
}
inline std::string to_string(const Expr& e) { return to_string(*e); }

inline bool same_ast(const Node& x, const Node& y) {
  if (x.op != y.op) return false;
  switch (x.op) {
    case Op::Const: return x.value == y.value && std::signbit(x.value) == std::signbit(y.value);
    case Op::Var: return x.var == y.var && x.name == y.name;
    case Op::Neg: return same_ast(*x.a, *y.a);
    case Op::Pow: return x.num == y.num && x.den == y.den && same_ast(*x.a, *y.a);
    case Op::Call: return x.fn == y.fn && same_ast(*x.a, *y.a);
    default: return same_ast(*x.a, *y.a) && same_ast(*x.b, *y.b);
  }
}
inline bool same_ast(const Expr& x, const Expr& y) { return same_ast(*x, *y); }

/// True when no coordinate occurs (value is fixed).
inline bool is_constant(const Node& n) {
  switch (n.op) {
    case Op::Const: return true;
    case Op::Var: return false;
    case Op::Neg:
    case Op::Pow:
    case Op::Call: return is_constant(*n.a);
    default: return is_constant(*n.a) && is_constant(*n.b);
  }
}

// ----------------------------------------------------------------- parsing

class ParseError : public std::runtime_error {
 public:
  ParseError(std::string msg, std::size_t line, std::size_t column, std::set<std::string> expected)
      : std::runtime_error(compose(msg, line, column, expected)),
        message(std::move(msg)),
        line(line),
        column(column),
        expected(std::move(expected)) {}
  std::string message;
  std::size_t line, column;
  std::set<std::string> expected;

 private:
  static std::string compose(const std::string& msg, std::size_t line, std::size_t col,
                             const std::set<std::string>& exp) {
    std::string s = std::to_string(line) + ":" + std::to_string(col) + ": " + msg;
    if (!exp.empty()) {
      s += " (expected one of:";
      for (const auto& e : exp) s += " " + e;
      s += ")";
    }
    return s;
  }
};

enum class Tok { Num, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Cmp, AndAnd, Comma, End, Bad };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  double number = 0.0;
  bool integral = false;
  std::size_t line = 1, column = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : s_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.line = line_;
      t.column = col_;
      if (i_ >= s_.size()) {
        t.kind = Tok::End;
        out.push_back(t);
        return out;
      }
      unsigned char c = static_cast<unsigned char>(s_[i_]);
      if (std::isdigit(c) || (c == '.' && i_ + 1 < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_ + 1])))) {
        lex_number(t);
      } else if (std::isalpha(c) || c == '_') {
        std::size_t j = i_;
        while (j < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[j])) || s_[j] == '_')) ++j;
        t.kind = Tok::Ident;
        t.text = std::string(s_.substr(i_, j - i_));
        advance(j - i_);
      } else if (c == 0xE2 && s_.substr(i_, 3) == "\xE2\x88\x92") {
        t.kind = Tok::Minus;
        t.text = "-";
        i_ += 3;
        ++col_;
      } else {
        switch (c) {
          case '+': t.kind = Tok::Plus; break;
          case '-': t.kind = Tok::Minus; break;
          case '*': t.kind = Tok::Star; break;
          case '/': t.kind = Tok::Slash; break;
          case '^': t.kind = Tok::Caret; break;
          case '(': t.kind = Tok::LParen; break;
          case ')': t.kind = Tok::RParen; break;
          case ',': t.kind = Tok::Comma; break;
          case '<':
          case '>':
          case '=':
          case '!': {
            t.kind = Tok::Cmp;
            std::size_t len = (i_ + 1 < s_.size() && s_[i_ + 1] == '=') ? 2 : 1;
            t.text = std::string(s_.substr(i_, len));
            if (t.text == "=" || t.text == "!") t.kind = Tok::Bad;
            advance(len);
            out.push_back(t);
            continue;
          }
          case '&':
            if (i_ + 1 < s_.size() && s_[i_ + 1] == '&') {
              t.kind = Tok::AndAnd;
              t.text = "&&";
              advance(2);
              out.push_back(t);
              continue;
            }
            t.kind = Tok::Bad;
            break;
          default: t.kind = Tok::Bad; break;
        }
        t.text = std::string(1, static_cast<char>(c));
        advance(1);
      }
      out.push_back(t);
    }
  }

 private:
  void skip_space() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) {
      if (s_[i_] == '\n') {
        ++line_;
        col_ = 1;
        ++i_;
      } else {
        advance(1);
      }
    }
  }
  void advance(std::size_t k) {
    i_ += k;
    col_ += k;
  }
  void lex_number(Token& t) {
    std::size_t j = i_;
    bool integral = true;
    while (j < s_.size() && std::isdigit(static_cast<unsigned char>(s_[j]))) ++j;
    if (j < s_.size() && s_[j] == '.') {
      integral = false;
      ++j;
      while (j < s_.size() && std::isdigit(static_cast<unsigned char>(s_[j]))) ++j;
    }
    if (j < s_.size() && (s_[j] == 'e' || s_[j] == 'E')) {
      std::size_t k = j + 1;
      if (k < s_.size() && (s_[k] == '+' || s_[k] == '-')) ++k;
      if (k < s_.size() && std::isdigit(static_cast<unsigned char>(s_[k]))) {
        integral = false;
        j = k;
        while (j < s_.size() && std::isdigit(static_cast<unsigned char>(s_[j]))) ++j;
      }
    }
    t.kind = Tok::Num;
    t.text = std::string(s_.substr(i_, j - i_));
    t.number = std::strtod(t.text.c_str(), nullptr);
    t.integral = integral;
    advance(j - i_);
  }

  std::string_view s_;
  std::size_t i_ = 0, line_ = 1, col_ = 1;
};

/// Resolves identifiers to coordinate indices.
struct Symbols {
  std::vector<std::string> names;
  int find(const std::string& n) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == n) return static_cast<int>(i);
    return -1;
  }
};

class Parser {
 public:
  Parser(std::string_view src, const Symbols& syms) : toks_(Lexer(src).run()), syms_(syms) {}

  Expr parse_full() {
    Expr e = expr();
    expect_end();
    return e;
  }

  Expr expr() {
    Expr lhs = term();
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      Op op = next().kind == Tok::Plus ? Op::Add : Op::Sub;
      lhs = make_binary(op, lhs, term());
    }
    return lhs;
  }

  const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  Token next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

  [[noreturn]] void fail(const Token& at, const std::string& msg, std::set<std::string> expected = {}) const {
    throw ParseError(msg, at.line, at.column, std::move(expected));
  }

  void expect_end() {
    if (peek().kind != Tok::End)
      fail(peek(), "unexpected '" + peek().text + "'", {"+", "-", "*", "/", "^", "end of input"});
  }

 private:
  Expr term() {
    Expr lhs = factor();
    while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
      Op op = next().kind == Tok::Star ? Op::Mul : Op::Div;
      lhs = make_binary(op, lhs, factor());
    }
    return lhs;
  }

  Expr factor() {
    if (peek().kind == Tok::Minus) {
      next();
      if (peek().kind == Tok::Num && peek(1).kind != Tok::Caret) return make_const(-next().number);
      return make_unary(factor());
    }
    return power();
  }

  Expr power() {
    Expr base = atom();
    if (peek().kind != Tok::Caret) return base;
    std::vector<std::pair<std::int64_t, std::int64_t>> chain;
    while (peek().kind == Tok::Caret) {
      next();
      chain.push_back(exponent());
    }
    // fold right to left: a^(e1^(e2^...))
    auto [num, den] = chain.back();
    for (std::size_t k = chain.size() - 1; k-- > 0;) {
      auto [p, q] = chain[k];
      if (den != 1 || num < 0 || num > 16) fail(peek(), "chained exponent does not fold to a rational");
      std::int64_t pn = 1, pd = 1;
      for (std::int64_t r = 0; r < num; ++r) {
        pn *= p;
        pd *= q;
      }
      num = pn;
      den = pd;
    }
    return make_pow(base, num, den);
  }

  std::pair<std::int64_t, std::int64_t> exponent() {
    const Token& t = peek();
    std::int64_t sign = 1;
    if (t.kind == Tok::Minus || t.kind == Tok::Plus) {
      sign = next().kind == Tok::Minus ? -1 : 1;
      return {sign * integer_literal(), 1};
    }
    if (t.kind == Tok::Num) return {integer_literal(), 1};
    if (t.kind == Tok::LParen) {
      next();
      if (peek().kind == Tok::Minus) {
        next();
        sign = -1;
      } else if (peek().kind == Tok::Plus) {
        next();
      }
      std::int64_t p = sign * integer_literal();
      std::int64_t q = 1;
      if (peek().kind == Tok::Slash) {
        next();
        q = integer_literal();
        if (q == 0) fail(peek(), "zero denominator in exponent");
      }
      if (peek().kind != Tok::RParen) fail(peek(), "unterminated exponent", {")", "/"});
      next();
      return {p, q};
    }
    if (t.kind == Tok::Ident) fail(t, "non-constant exponent '" + t.text + "'", {"integer", "(p/q)"});
    fail(t, "bad exponent", {"integer", "(p/q)"});
  }

  std::int64_t integer_literal() {
    const Token& t = peek();
    if (t.kind == Tok::Ident) fail(t, "non-constant exponent '" + t.text + "'", {"integer", "(p/q)"});
    if (t.kind != Tok::Num || !t.integral) fail(t, "exponent must be an integer or (p/q)", {"integer"});
    next();
    return static_cast<std::int64_t>(t.number);
  }

  Expr atom() {
    const Token t = peek();
    switch (t.kind) {
      case Tok::Num: next(); return make_const(t.number);
      case Tok::LParen: {
        next();
        Expr e = expr();
        if (peek().kind != Tok::RParen) fail(peek(), "missing ')'", {")", "+", "-", "*", "/", "^"});
        next();
        return e;
      }
      case Tok::Ident: {
        next();
        static const std::pair<const char*, Fn> fns[] = {
            {"exp", Fn::Exp}, {"log", Fn::Log}, {"sin", Fn::Sin}, {"cos", Fn::Cos}, {"sqrt", Fn::Sqrt}};
        for (auto& [nm, f] : fns) {
          if (t.text == nm) {
            if (peek().kind != Tok::LParen) fail(peek(), "expected '(' after " + t.text, {"("});
            next();
            Expr arg = expr();
            if (peek().kind != Tok::RParen) fail(peek(), "missing ')'", {")"});
            next();
            return make_call(f, arg);
          }
        }
        int idx = syms_.find(t.text);
        if (idx >= 0) return make_var(idx, t.text);
        if (t.text == "pi") return make_const(3.14159265358979323846);
        fail(t, "unknown identifier '" + t.text + "'");
      }
      case Tok::End: fail(t, "unexpected end of input", {"number", "identifier", "(", "-"});
      default: fail(t, "unexpected '" + t.text + "'", {"number", "identifier", "(", "-"});
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  const Symbols& syms_;
};

inline Expr parse_expression(std::string_view text, const std::vector<std::string>& coords) {
  Symbols s{coords};
  return Parser(text, s).parse_full();
}

// -------------------------------------------------------------- evaluation

class EvalError : public std::runtime_error {
 public:
  EvalError(const std::string& what, std::string sub)
      : std::runtime_error(what + " in '" + sub + "'"), subexpression(std::move(sub)) {}
  std::string subexpression;
};

inline bool all_finite(double x) { return std::isfinite(x); }
template <class T>
bool all_finite(const Dual<T>& x) {
  return all_finite(x.v) && all_finite(x.d);
}

template <class S>
S eval(const Node& n, std::span<const S> x) {
  S r;
  switch (n.op) {
    case Op::Const: return S(n.value);
    case Op::Var: return x[static_cast<std::size_t>(n.var)];
    case Op::Neg: r = -eval(*n.a, x); break;
    case Op::Add: r = eval(*n.a, x) + eval(*n.b, x); break;
    case Op::Sub: r = eval(*n.a, x) - eval(*n.b, x); break;
    case Op::Mul: r = eval(*n.a, x) * eval(*n.b, x); break;
    case Op::Div: {
      S den = eval(*n.b, x);
      if (primal(den) == 0.0) throw EvalError("division by zero", to_string(n));
      r = eval(*n.a, x) / den;
      break;
    }
    case Op::Pow: {
      S base = eval(*n.a, x);
      double b0 = primal(base);
      if (b0 == 0.0 && n.num < 0) throw EvalError("zero raised to a negative power", to_string(n));
      if (b0 < 0.0 && n.den % 2 == 0) throw EvalError("even root of a negative number", to_string(n));
      if (n.den == 1) {
        r = pow(base, double(n.num));
      } else if (b0 < 0.0) {
        // odd root of a negative base: sign(b) |b|^r
        double e = exponent_value(n);
        S mag = pow(-base, e);
        r = (n.num % 2 == 0) ? mag : -mag;
      } else {
        r = pow(base, exponent_value(n));
      }
      break;
    }
    case Op::Call: {
      S a = eval(*n.a, x);
      switch (n.fn) {
        case Fn::Exp: r = exp(a); break;
        case Fn::Log:
          if (!(primal(a) > 0.0)) throw EvalError("log of non-positive value", to_string(n));
          r = log(a);
          break;
        case Fn::Sin: r = sin(a); break;
        case Fn::Cos: r = cos(a); break;
        case Fn::Sqrt:
          if (primal(a) < 0.0) throw EvalError("sqrt of negative value", to_string(n));
          r = sqrt(a);
          break;
      }
      break;
    }
  }
  if (!all_finite(r)) throw EvalError("non-finite value", to_string(n));
  return r;
}

template <class S>
S eval(const Expr& e, std::span<const S> x) {
  return eval(*e, x);
}

// -------------------------------------------------------------- predicates

enum class Cmp { Lt, Le, Gt, Ge, Eq, Ne };

struct Comparison {
  Expr lhs, rhs;
  Cmp op;
};

/// Conjunction of comparisons, e.g. "x3 > 1 && x1 != 0".
struct Predicate {
  std::vector<Comparison> terms;
  std::string source;

  bool holds(std::span<const double> x) const {
    for (const auto& c : terms) {
      double a, b;
      try {
        a = eval(*c.lhs, x);
        b = eval(*c.rhs, x);
      } catch (const EvalError&) {
        return false;
      }
      bool ok = false;
      switch (c.op) {
        case Cmp::Lt: ok = a < b; break;
        case Cmp::Le: ok = a <= b; break;
        case Cmp::Gt: ok = a > b; break;
        case Cmp::Ge: ok = a >= b; break;
        case Cmp::Eq: ok = a == b; break;
        case Cmp::Ne: ok = a != b; break;
      }
      if (!ok) return false;
    }
    return true;
  }
};

inline Predicate parse_predicate(std::string_view text, const std::vector<std::string>& coords) {
  Symbols s{coords};
  Parser p(text, s);
  Predicate pred;
  pred.source = std::string(text);
  for (;;) {
    Comparison c;
    c.lhs = p.expr();
    const Token& t = p.peek();
    if (t.kind != Tok::Cmp) p.fail(t, "expected comparison operator", {"<", "<=", ">", ">=", "==", "!="});
    std::string op = p.next().text;
    if (op == "<") c.op = Cmp::Lt;
    else if (op == "<=") c.op = Cmp::Le;
    else if (op == ">") c.op = Cmp::Gt;
    else if (op == ">=") c.op = Cmp::Ge;
    else if (op == "==") c.op = Cmp::Eq;
    else c.op = Cmp::Ne;
    c.rhs = p.expr();
    pred.terms.push_back(c);
    if (p.peek().kind == Tok::AndAnd) {
      p.next();
      continue;
    }
    p.expect_end();
    return pred;
  }
}

}  // namespace subgeo
