#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "curvelab/expr.hpp"

namespace curvelab {

struct Vec2 {
  double x = 0.0, y = 0.0;
};

struct Domain {
  double x0 = -1.0, x1 = 1.0;
  double y0 = -1.0, y1 = 1.0;
};

// A parsed surface definition: ambient dimension, one expression per
// component, and the optional domain / periodicity / normalization clauses.
struct SurfaceSpec {
  std::string name;  // filled by the catalog loader; empty for ad-hoc specs
  int dim = 0;
  std::vector<ExprPtr> components;
  Domain domain;
  bool has_domain = false;
  bool periodic = false;
  double period_x = 0.0, period_y = 0.0;
  bool normalize = false;
};

namespace detail {

inline double parse_signed_number(Lexer& lex, const char* what) {
  bool neg = false;
  if (lex.peek().kind == Token::Kind::Symbol && lex.peek().text == "-") {
    neg = true;
    lex.next();
  }
  const Token& t = lex.peek();
  if (t.kind != Token::Kind::Number)
    throw ParseError(t.line, t.col, std::string("expected ") + what);
  Token num = lex.next();
  return neg ? -num.number : num.number;
}

inline void expect_sym(Lexer& lex, std::string_view s) {
  const Token& t = lex.peek();
  if (t.kind != Token::Kind::Symbol || t.text != s)
    throw ParseError(t.line, t.col,
                     "expected '" + std::string(s) + "', found '" +
                         (t.kind == Token::Kind::End ? "end of input" : t.text) + "'");
  lex.next();
}

inline void expect_ident(Lexer& lex, std::string_view name) {
  const Token& t = lex.peek();
  if (t.kind != Token::Kind::Ident || t.text != name)
    throw ParseError(t.line, t.col,
                     "expected '" + std::string(name) + "', found '" +
                         (t.kind == Token::Kind::End ? "end of input" : t.text) + "'");
  lex.next();
}

inline void skip_optional_semicolon(Lexer& lex) {
  if (lex.peek().kind == Token::Kind::Symbol && lex.peek().text == ";") lex.next();
}

}  // namespace detail

// Parses a surface definition:
//
//   dim <int>;
//   f = ( expr {, expr} );
//   domain x in [a,b], y in [c,d];   (optional)
//   periodic Lx Ly;                  (optional)
//   normalize;                       (optional)
//
// '#' starts a line comment; whitespace is insignificant. The declared
// dimension must match the component count.
inline SurfaceSpec parse_surface(std::string_view src) {
  using detail::Lexer;
  using detail::Token;
  Lexer lex(src);
  SurfaceSpec spec;

  {
    const Token& t = lex.peek();
    if (!(t.kind == Token::Kind::Ident && t.text == "dim"))
      throw ParseError(t.line, t.col, "surface definition must start with 'dim'");
    lex.next();
    const Token& n = lex.peek();
    if (n.kind != Token::Kind::Number)
      throw ParseError(n.line, n.col, "expected integer after 'dim'");
    Token num = lex.next();
    if (num.number != static_cast<long long>(num.number) || num.number < 1 || num.number > 64)
      throw ParseError(num.line, num.col, "dim must be an integer in [1, 64]");
    spec.dim = static_cast<int>(num.number);
    detail::skip_optional_semicolon(lex);
  }

  bool have_f = false;
  while (lex.peek().kind != Token::Kind::End) {
    const Token& t = lex.peek();
    if (t.kind != Token::Kind::Ident)
      throw ParseError(t.line, t.col, "expected a statement keyword, found '" + t.text + "'");

    if (t.text == "f") {
      if (have_f) throw ParseError(t.line, t.col, "duplicate 'f' statement");
      lex.next();
      detail::expect_sym(lex, "=");
      detail::expect_sym(lex, "(");
      detail::ExprParser parser(lex);
      spec.components.push_back(parser.parse());
      while (lex.peek().kind == Token::Kind::Symbol && lex.peek().text == ",") {
        lex.next();
        spec.components.push_back(parser.parse());
      }
      detail::expect_sym(lex, ")");
      detail::skip_optional_semicolon(lex);
      have_f = true;
    } else if (t.text == "domain") {
      Token kw = lex.next();
      if (spec.has_domain) throw ParseError(kw.line, kw.col, "duplicate 'domain' statement");
      detail::expect_ident(lex, "x");
      detail::expect_ident(lex, "in");
      detail::expect_sym(lex, "[");
      spec.domain.x0 = detail::parse_signed_number(lex, "number");
      detail::expect_sym(lex, ",");
      spec.domain.x1 = detail::parse_signed_number(lex, "number");
      detail::expect_sym(lex, "]");
      detail::expect_sym(lex, ",");
      detail::expect_ident(lex, "y");
      detail::expect_ident(lex, "in");
      detail::expect_sym(lex, "[");
      spec.domain.y0 = detail::parse_signed_number(lex, "number");
      detail::expect_sym(lex, ",");
      spec.domain.y1 = detail::parse_signed_number(lex, "number");
      detail::expect_sym(lex, "]");
      detail::skip_optional_semicolon(lex);
      if (!(spec.domain.x0 < spec.domain.x1) || !(spec.domain.y0 < spec.domain.y1))
        throw ParseError(kw.line, kw.col, "empty domain interval");
      spec.has_domain = true;
    } else if (t.text == "periodic") {
      Token kw = lex.next();
      if (spec.periodic) throw ParseError(kw.line, kw.col, "duplicate 'periodic' statement");
      spec.period_x = detail::parse_signed_number(lex, "period length");
      spec.period_y = detail::parse_signed_number(lex, "period length");
      if (spec.period_x <= 0.0 || spec.period_y <= 0.0)
        throw ParseError(kw.line, kw.col, "period lengths must be positive");
      detail::skip_optional_semicolon(lex);
      spec.periodic = true;
    } else if (t.text == "normalize") {
      Token kw = lex.next();
      if (spec.normalize) throw ParseError(kw.line, kw.col, "duplicate 'normalize' statement");
      detail::skip_optional_semicolon(lex);
      spec.normalize = true;
    } else {
      throw ParseError(t.line, t.col, "unknown statement '" + t.text + "'");
    }
  }

  if (!have_f) throw ParseError(1, 1, "missing 'f = (...)' statement");
  if (static_cast<int>(spec.components.size()) != spec.dim)
    throw ParseError(1, 1, "declared dim " + std::to_string(spec.dim) + " but found " +
                               std::to_string(spec.components.size()) + " components");
  if (spec.periodic && !spec.has_domain) {
    // Periodic surfaces default to one fundamental rectangle anchored at 0.
    spec.domain = Domain{0.0, spec.period_x, 0.0, spec.period_y};
    spec.has_domain = true;
  }
  return spec;
}

// Evaluates the component jets of a surface at a point. Normalization, when
// declared, happens at the jet level so all derivatives see it.
inline VecJet eval_jet(const SurfaceSpec& spec, Vec2 p, int order) {
  Jet x = Jet::variable_x(order, p.x);
  Jet y = Jet::variable_y(order, p.y);
  VecJet f;
  f.reserve(spec.components.size());
  for (const ExprPtr& comp : spec.components) f.push_back(eval_expr(*comp, x, y));
  if (spec.normalize) normalize(f);
  return f;
}

// Pointwise (non-jet) evaluation; faster when only positions are needed.
inline std::vector<double> eval_point(const SurfaceSpec& spec, Vec2 p) {
  std::vector<double> f;
  f.reserve(spec.components.size());
  for (const ExprPtr& comp : spec.components) f.push_back(eval_expr<double>(*comp, p.x, p.y));
  if (spec.normalize) {
    double n2 = 0.0;
    for (double v : f) n2 += v * v;
    if (n2 <= 0.0) throw EvalError("cannot normalize a zero vector");
    const double inv = 1.0 / std::sqrt(n2);
    for (double& v : f) v *= inv;
  }
  return f;
}

// Deviation of |f(p)| from 1; sphere-valued specs must keep this below 1e-12.
inline double unit_norm_deviation(const VecJet& f) {
  double n2 = 0.0;
  for (const Jet& comp : f) n2 += comp.value() * comp.value();
  return std::abs(std::sqrt(n2) - 1.0);
}

namespace detail {

// Weights of the second-order central stencil for the k-th derivative,
// offsets -r..r with r = ceil(k/2) (k <= 4 is all the checker needs).
inline void central_stencil(int k, std::vector<double>& w, int& radius) {
  switch (k) {
    case 0: w = {1.0}; radius = 0; return;
    case 1: w = {-0.5, 0.0, 0.5}; radius = 1; return;
    case 2: w = {1.0, -2.0, 1.0}; radius = 1; return;
    case 3: w = {-0.5, 1.0, 0.0, -1.0, 0.5}; radius = 2; return;
    case 4: w = {1.0, -4.0, 6.0, -4.0, 1.0}; radius = 2; return;
    default: throw std::invalid_argument("finite-difference order not supported: " + std::to_string(k));
  }
}

inline double fd_partial(const SurfaceSpec& spec, int comp, Vec2 p, int i, int j, double h) {
  std::vector<double> wx, wy;
  int rx = 0, ry = 0;
  central_stencil(i, wx, rx);
  central_stencil(j, wy, ry);
  double acc = 0.0;
  for (int a = -rx; a <= rx; ++a) {
    if (wx[a + rx] == 0.0) continue;
    for (int b = -ry; b <= ry; ++b) {
      if (wy[b + ry] == 0.0) continue;
      Vec2 q{p.x + a * h, p.y + b * h};
      acc += wx[a + rx] * wy[b + ry] * eval_point(spec, q)[comp];
    }
  }
  double scale = 1.0;
  for (int k = 0; k < i + j; ++k) scale *= h;
  return acc / scale;
}

}  // namespace detail

// Compares jet partial derivatives against Richardson-extrapolated central
// finite differences of the evaluated components. Returns the maximum
// relative deviation over all components and all derivatives of total
// degree <= min(order, 4). Degree caps at 4 because the noise floor of
// higher-order stencils exceeds any useful tolerance in double precision.
inline double richardson_check(const SurfaceSpec& spec, Vec2 p, int order) {
  VecJet f = eval_jet(spec, p, order);
  const int max_deg = std::min(order, 4);
  const double scale = 1.0 + std::max(std::abs(p.x), std::abs(p.y));
  double worst = 0.0;
  for (int comp = 0; comp < spec.dim; ++comp) {
    for (int d = 0; d <= max_deg; ++d) {
      const double h = scale * std::pow(2.2e-16, 1.0 / (d + 4));
      for (int i = 0; i <= d; ++i) {
        const int j = d - i;
        const double coarse = detail::fd_partial(spec, comp, p, i, j, h);
        const double fine = detail::fd_partial(spec, comp, p, i, j, h / 2.0);
        const double fd = (4.0 * fine - coarse) / 3.0;
        const double jet = f[comp].partial(i, j);
        const double dev = std::abs(jet - fd) / std::max({1.0, std::abs(jet), std::abs(fd)});
        worst = std::max(worst, dev);
      }
    }
  }
  return worst;
}

}  // namespace curvelab
