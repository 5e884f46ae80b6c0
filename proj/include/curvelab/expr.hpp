#pragma once

#include <cctype>
#include <charconv>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "curvelab/jet.hpp"

namespace curvelab {

class ParseError : public std::runtime_error {
public:
  ParseError(int line, int col, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ", col " + std::to_string(col) +
                           ": " + msg),
        line_(line),
        col_(col) {}
  int line() const { return line_; }
  int col() const { return col_; }

private:
  int line_, col_;
};

// double counterpart of the jet version, so expression evaluation can be
// generic over the scalar type.
inline double pow_int(double v, long long n) {
  if (n < 0) {
    if (v == 0.0) throw EvalError("division by zero");
    return 1.0 / pow_int(v, -n);
  }
  double r = 1.0, base = v;
  unsigned long long e = static_cast<unsigned long long>(n);
  while (e > 0) {
    if (e & 1ull) r *= base;
    base *= base;
    e >>= 1;
  }
  return r;
}

inline double reciprocal(double v) {
  if (v == 0.0) throw EvalError("division by zero");
  return 1.0 / v;
}

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class ExprKind { Number, VarX, VarY, Neg, Add, Sub, Mul, Div, Pow, Call };
enum class FuncId { Sin, Cos, Tan, Exp, Log, Sqrt, Sinh, Cosh };

struct Expr {
  ExprKind kind;
  double number = 0.0;      // Number
  long long exponent = 0;   // Pow
  FuncId func = FuncId::Sin;  // Call
  ExprPtr a, b;
  int line = 0, col = 0;
};

namespace detail {

struct Token {
  enum class Kind { Number, Ident, Symbol, End } kind;
  std::string text;
  double number = 0.0;
  int line = 1, col = 1;
};

class Lexer {
public:
  explicit Lexer(std::string_view src) : src_(src) { advance(); }

  const Token& peek() const { return tok_; }
  Token next() {
    Token t = tok_;
    advance();
    return t;
  }

private:
  void advance() {
    skip_space_and_comments();
    tok_.line = line_;
    tok_.col = col_;
    if (pos_ >= src_.size()) {
      tok_.kind = Token::Kind::End;
      tok_.text.clear();
      return;
    }
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      read_number();
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        bump();
      tok_.kind = Token::Kind::Ident;
      tok_.text = std::string(src_.substr(start, pos_ - start));
      return;
    }
    static constexpr std::string_view kSymbols = "+-*/^(),;[]=";
    if (kSymbols.find(c) != std::string_view::npos) {
      tok_.kind = Token::Kind::Symbol;
      tok_.text = std::string(1, c);
      bump();
      return;
    }
    throw ParseError(line_, col_, std::string("unexpected character '") + c + "'");
  }

  void read_number() {
    size_t start = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) bump();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      bump();
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) bump();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      size_t mark = pos_;
      bump();
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) bump();
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) bump();
      } else {
        pos_ = mark;  // 'e' belonged to something else; not part of the number
      }
    }
    std::string_view text = src_.substr(start, pos_ - start);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
      throw ParseError(tok_.line, tok_.col, "malformed number '" + std::string(text) + "'");
    tok_.kind = Token::Kind::Number;
    tok_.text = std::string(text);
    tok_.number = value;
  }

  void skip_space_and_comments() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') bump();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        bump();
      } else {
        break;
      }
    }
  }

  void bump() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  std::string_view src_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  Token tok_;
};

class ExprParser {
public:
  explicit ExprParser(Lexer& lex) : lex_(lex) {}

  ExprPtr parse() { return parse_sum(); }

private:
  static std::shared_ptr<Expr> make(ExprKind k, const Token& at) {
    auto e = std::make_shared<Expr>();
    e->kind = k;
    e->line = at.line;
    e->col = at.col;
    return e;
  }

  bool peek_symbol(std::string_view s) const {
    return lex_.peek().kind == Token::Kind::Symbol && lex_.peek().text == s;
  }

  Token expect_symbol(std::string_view s) {
    if (!peek_symbol(s))
      throw ParseError(lex_.peek().line, lex_.peek().col,
                       "expected '" + std::string(s) + "'" + found_text());
    return lex_.next();
  }

  std::string found_text() const {
    const Token& t = lex_.peek();
    if (t.kind == Token::Kind::End) return ", found end of input";
    return ", found '" + t.text + "'";
  }

  ExprPtr parse_sum() {
    ExprPtr left = parse_term();
    while (peek_symbol("+") || peek_symbol("-")) {
      Token op = lex_.next();
      auto e = make(op.text == "+" ? ExprKind::Add : ExprKind::Sub, op);
      e->a = left;
      e->b = parse_term();
      left = e;
    }
    return left;
  }

  ExprPtr parse_term() {
    ExprPtr left = parse_unary();
    while (peek_symbol("*") || peek_symbol("/")) {
      Token op = lex_.next();
      auto e = make(op.text == "*" ? ExprKind::Mul : ExprKind::Div, op);
      e->a = left;
      e->b = parse_unary();
      left = e;
    }
    return left;
  }

  ExprPtr parse_unary() {
    if (peek_symbol("-")) {
      Token op = lex_.next();
      auto e = make(ExprKind::Neg, op);
      e->a = parse_unary();
      return e;
    }
    return parse_power();
  }

  ExprPtr parse_power() {
    ExprPtr base = parse_atom();
    if (peek_symbol("^")) {
      Token op = lex_.next();
      auto e = make(ExprKind::Pow, op);
      e->a = base;
      e->exponent = parse_integer_exponent();
      return e;
    }
    return base;
  }

  // Exponents are restricted to (optionally signed, optionally
  // parenthesized) integer literals.
  long long parse_integer_exponent() {
    bool paren = false, negate = false;
    if (peek_symbol("(")) {
      paren = true;
      lex_.next();
    }
    if (peek_symbol("-")) {
      negate = true;
      lex_.next();
    }
    const Token& t = lex_.peek();
    if (t.kind != Token::Kind::Number)
      throw ParseError(t.line, t.col, "expected integer exponent" + found_text());
    Token num = lex_.next();
    double v = num.number;
    long long n = static_cast<long long>(v);
    if (static_cast<double>(n) != v)
      throw ParseError(num.line, num.col, "exponent must be an integer, got '" + num.text + "'");
    if (paren) expect_symbol(")");
    return negate ? -n : n;
  }

  ExprPtr parse_atom() {
    const Token& t = lex_.peek();
    switch (t.kind) {
      case Token::Kind::Number: {
        Token num = lex_.next();
        auto e = make(ExprKind::Number, num);
        e->number = num.number;
        return e;
      }
      case Token::Kind::Ident: {
        Token id = lex_.next();
        if (id.text == "x") return make(ExprKind::VarX, id);
        if (id.text == "y") return make(ExprKind::VarY, id);
        FuncId f;
        if (id.text == "sin") f = FuncId::Sin;
        else if (id.text == "cos") f = FuncId::Cos;
        else if (id.text == "tan") f = FuncId::Tan;
        else if (id.text == "exp") f = FuncId::Exp;
        else if (id.text == "log") f = FuncId::Log;
        else if (id.text == "sqrt") f = FuncId::Sqrt;
        else if (id.text == "sinh") f = FuncId::Sinh;
        else if (id.text == "cosh") f = FuncId::Cosh;
        else
          throw ParseError(id.line, id.col, "unknown function or variable '" + id.text + "'");
        expect_symbol("(");
        auto e = make(ExprKind::Call, id);
        e->func = f;
        e->a = parse_sum();
        expect_symbol(")");
        return e;
      }
      case Token::Kind::Symbol:
        if (t.text == "(") {
          lex_.next();
          ExprPtr inner = parse_sum();
          expect_symbol(")");
          return inner;
        }
        throw ParseError(t.line, t.col, "unexpected '" + t.text + "' in expression");
      case Token::Kind::End:
        throw ParseError(t.line, t.col, "unexpected end of input in expression");
    }
    throw ParseError(t.line, t.col, "unexpected token");
  }

  Lexer& lex_;
};

}  // namespace detail

// Parses a single expression (used directly by tests; surface files go
// through parse_surface in surface.hpp).
inline ExprPtr parse_expression(std::string_view src) {
  detail::Lexer lex(src);
  detail::ExprParser parser(lex);
  ExprPtr e = parser.parse();
  const auto& t = lex.peek();
  if (t.kind != detail::Token::Kind::End)
    throw ParseError(t.line, t.col, "unexpected trailing input '" + t.text + "'");
  return e;
}

// Evaluates an expression over any scalar type supporting the arithmetic
// and elementary functions used here (double and Jet both qualify).
template <class T>
T eval_expr(const Expr& e, const T& x, const T& y) {
  using std::cos;
  using std::cosh;
  using std::exp;
  using std::log;
  using std::sin;
  using std::sinh;
  using std::sqrt;
  using std::tan;
  try {
    switch (e.kind) {
      case ExprKind::Number:
        if constexpr (std::is_same_v<T, double>) return e.number;
        else return T::constant(x.order(), e.number);
      case ExprKind::VarX: return x;
      case ExprKind::VarY: return y;
      case ExprKind::Neg: return -eval_expr(*e.a, x, y);
      case ExprKind::Add: return eval_expr(*e.a, x, y) + eval_expr(*e.b, x, y);
      case ExprKind::Sub: return eval_expr(*e.a, x, y) - eval_expr(*e.b, x, y);
      case ExprKind::Mul: return eval_expr(*e.a, x, y) * eval_expr(*e.b, x, y);
      case ExprKind::Div: {
        T num = eval_expr(*e.a, x, y);
        T den = eval_expr(*e.b, x, y);
        if constexpr (std::is_same_v<T, double>) {
          if (den == 0.0) throw EvalError("division by zero");
        }
        return num / den;
      }
      case ExprKind::Pow: return pow_int(eval_expr(*e.a, x, y), e.exponent);
      case ExprKind::Call: {
        T arg = eval_expr(*e.a, x, y);
        if constexpr (std::is_same_v<T, double>) {
          if (e.func == FuncId::Log && arg <= 0.0) throw EvalError("log of a non-positive value");
          if (e.func == FuncId::Sqrt && arg < 0.0) throw EvalError("sqrt of a negative value");
        }
        switch (e.func) {
          case FuncId::Sin: return sin(arg);
          case FuncId::Cos: return cos(arg);
          case FuncId::Tan: return tan(arg);
          case FuncId::Exp: return exp(arg);
          case FuncId::Log: return log(arg);
          case FuncId::Sqrt: return sqrt(arg);
          case FuncId::Sinh: return sinh(arg);
          case FuncId::Cosh: return cosh(arg);
        }
        break;
      }
    }
  } catch (const EvalError& err) {
    std::string_view what = err.what();
    if (what.substr(0, 5) == "line ") throw;  // already annotated deeper in the tree
    throw EvalError("line " + std::to_string(e.line) + ", col " + std::to_string(e.col) + ": " +
                    std::string(what));
  }
  throw std::logic_error("unhandled expression node");
}

}  // namespace curvelab
