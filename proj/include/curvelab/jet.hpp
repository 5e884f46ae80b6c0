#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace curvelab {

// Thrown when an evaluation leaves the domain of a function (log of a
// non-positive value, division by zero, ...). The CLI maps this to its
// "numeric failure" exit code.
class EvalError : public std::runtime_error {
public:
  explicit EvalError(const std::string& what) : std::runtime_error(what) {}
};

// Truncated bivariate Taylor expansion around a base point.
//
// coeff(i, j) stores the Taylor coefficient of dx^i dy^j, i.e.
// (d/dx)^i (d/dy)^j f / (i! j!), for all i + j <= order. All arithmetic
// truncates at the common order; mixing orders is a programming error.
class Jet {
public:
  static constexpr int kMinOrder = 1;
  static constexpr int kMaxOrder = 12;

  explicit Jet(int order) : order_(order), c_(size_for(order), 0.0) {
    if (order < kMinOrder || order > kMaxOrder)
      throw std::invalid_argument("jet order out of range: " + std::to_string(order));
  }

  static Jet constant(int order, double v) {
    Jet j(order);
    j.c_[0] = v;
    return j;
  }
  // Seed for the coordinate x: value x0, unit first derivative.
  static Jet variable_x(int order, double x0) {
    Jet j(order);
    j.c_[0] = x0;
    j.c_[idx(1, 0)] = 1.0;
    return j;
  }
  static Jet variable_y(int order, double y0) {
    Jet j(order);
    j.c_[0] = y0;
    j.c_[idx(0, 1)] = 1.0;
    return j;
  }

  int order() const { return order_; }
  double value() const { return c_[0]; }

  double coeff(int i, int j) const {
    check_index(i, j);
    return c_[idx(i, j)];
  }
  void set_coeff(int i, int j, double v) {
    check_index(i, j);
    c_[idx(i, j)] = v;
  }

  // Partial derivative (d/dx)^i (d/dy)^j f at the base point.
  double partial(int i, int j) const { return coeff(i, j) * factorial(i) * factorial(j); }

  // Polynomial evaluation of the truncated expansion at an offset.
  double evaluate(double dx, double dy) const {
    double acc = 0.0;
    std::vector<double> px(order_ + 1, 1.0), py(order_ + 1, 1.0);
    for (int k = 1; k <= order_; ++k) {
      px[k] = px[k - 1] * dx;
      py[k] = py[k - 1] * dy;
    }
    for (int d = order_; d >= 0; --d)
      for (int j = 0; j <= d; ++j) acc += c_[idx(d - j, j)] * px[d - j] * py[j];
    return acc;
  }

  Jet operator-() const {
    Jet r(*this);
    for (double& v : r.c_) v = -v;
    return r;
  }

  Jet& operator+=(const Jet& o) {
    check_same_order(o);
    for (size_t k = 0; k < c_.size(); ++k) c_[k] += o.c_[k];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    check_same_order(o);
    for (size_t k = 0; k < c_.size(); ++k) c_[k] -= o.c_[k];
    return *this;
  }
  Jet& operator+=(double s) {
    c_[0] += s;
    return *this;
  }
  Jet& operator-=(double s) {
    c_[0] -= s;
    return *this;
  }
  Jet& operator*=(double s) {
    for (double& v : c_) v *= s;
    return *this;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator+(Jet a, double s) { return a += s; }
  friend Jet operator+(double s, Jet a) { return a += s; }
  friend Jet operator-(Jet a, double s) { return a -= s; }
  friend Jet operator-(double s, const Jet& a) { return -a + s; }
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator/(Jet a, double s) {
    if (s == 0.0) throw EvalError("division by zero");
    return a *= (1.0 / s);
  }

  friend Jet operator*(const Jet& a, const Jet& b) {
    a.check_same_order(b);
    const int K = a.order_;
    Jet r(K);
    for (int da = 0; da <= K; ++da)
      for (int ja = 0; ja <= da; ++ja) {
        const double ca = a.c_[idx(da - ja, ja)];
        if (ca == 0.0) continue;
        const int ia = da - ja;
        for (int db = 0; db + da <= K; ++db)
          for (int jb = 0; jb <= db; ++jb) {
            const double cb = b.c_[idx(db - jb, jb)];
            if (cb == 0.0) continue;
            r.c_[idx(ia + db - jb, ja + jb)] += ca * cb;
          }
      }
    return r;
  }

  friend Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
  friend Jet operator/(double s, const Jet& b) { return reciprocal(b) * s; }

  // Composes a univariate analytic function with this jet. series[k] must be
  // g^(k)(value())/k! for k = 0..order. Evaluated by Horner on the
  // zero-constant part.
  Jet compose_series(const std::vector<double>& series) const {
    const int K = order_;
    Jet du(*this);
    du.c_[0] = 0.0;
    Jet r = Jet::constant(K, series[K]);
    for (int k = K - 1; k >= 0; --k) {
      r = r * du;
      r.c_[0] += series[k];
    }
    return r;
  }

  friend Jet reciprocal(const Jet& u) {
    const double u0 = u.value();
    if (u0 == 0.0) throw EvalError("division by zero in jet arithmetic");
    std::vector<double> s(u.order_ + 1);
    s[0] = 1.0 / u0;
    for (int k = 1; k <= u.order_; ++k) s[k] = -s[k - 1] / u0;
    return u.compose_series(s);
  }

  static int size_for(int order) { return (order + 1) * (order + 2) / 2; }

private:
  static int idx(int i, int j) {
    const int d = i + j;
    return d * (d + 1) / 2 + j;
  }
  void check_index(int i, int j) const {
    if (i < 0 || j < 0 || i + j > order_)
      throw std::out_of_range("jet coefficient index out of range");
  }
  void check_same_order(const Jet& o) const {
    if (order_ != o.order_) throw std::invalid_argument("jet order mismatch");
  }
  static double factorial(int n) {
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
  }

  int order_;
  std::vector<double> c_;
};

inline Jet exp(const Jet& u) {
  const double e = std::exp(u.value());
  std::vector<double> s(u.order() + 1);
  double f = 1.0;
  for (int k = 0; k <= u.order(); ++k) {
    if (k > 0) f *= k;
    s[k] = e / f;
  }
  return u.compose_series(s);
}

inline Jet log(const Jet& u) {
  const double u0 = u.value();
  if (u0 <= 0.0) throw EvalError("log of a non-positive value");
  std::vector<double> s(u.order() + 1);
  s[0] = std::log(u0);
  double t = 1.0;  // holds (-1)^(k-1) u0^(-k)
  for (int k = 1; k <= u.order(); ++k) {
    t = (k == 1) ? 1.0 / u0 : -t / u0;
    s[k] = t / k;
  }
  return u.compose_series(s);
}

inline Jet sqrt(const Jet& u) {
  const double u0 = u.value();
  if (u0 <= 0.0) throw EvalError("sqrt of a non-positive value in jet arithmetic");
  std::vector<double> s(u.order() + 1);
  s[0] = std::sqrt(u0);
  for (int k = 1; k <= u.order(); ++k) s[k] = s[k - 1] * (1.5 / k - 1.0) / u0;
  return u.compose_series(s);
}

// u^(-1/2); used by jet-level normalization.
inline Jet rsqrt(const Jet& u) {
  const double u0 = u.value();
  if (u0 <= 0.0) throw EvalError("rsqrt of a non-positive value in jet arithmetic");
  std::vector<double> s(u.order() + 1);
  s[0] = 1.0 / std::sqrt(u0);
  for (int k = 1; k <= u.order(); ++k) s[k] = s[k - 1] * (0.5 / k - 1.0) / u0;
  return u.compose_series(s);
}

inline Jet sin(const Jet& u) {
  const double sv = std::sin(u.value()), cv = std::cos(u.value());
  const double cycle[4] = {sv, cv, -sv, -cv};
  std::vector<double> s(u.order() + 1);
  double f = 1.0;
  for (int k = 0; k <= u.order(); ++k) {
    if (k > 0) f *= k;
    s[k] = cycle[k % 4] / f;
  }
  return u.compose_series(s);
}

inline Jet cos(const Jet& u) {
  const double sv = std::sin(u.value()), cv = std::cos(u.value());
  const double cycle[4] = {cv, -sv, -cv, sv};
  std::vector<double> s(u.order() + 1);
  double f = 1.0;
  for (int k = 0; k <= u.order(); ++k) {
    if (k > 0) f *= k;
    s[k] = cycle[k % 4] / f;
  }
  return u.compose_series(s);
}

inline Jet tan(const Jet& u) {
  Jet c = cos(u);
  if (std::abs(c.value()) < 1e-300) throw EvalError("tan evaluated at a pole");
  return sin(u) / c;
}

inline Jet sinh(const Jet& u) {
  const double sv = std::sinh(u.value()), cv = std::cosh(u.value());
  std::vector<double> s(u.order() + 1);
  double f = 1.0;
  for (int k = 0; k <= u.order(); ++k) {
    if (k > 0) f *= k;
    s[k] = (k % 2 == 0 ? sv : cv) / f;
  }
  return u.compose_series(s);
}

inline Jet cosh(const Jet& u) {
  const double sv = std::sinh(u.value()), cv = std::cosh(u.value());
  std::vector<double> s(u.order() + 1);
  double f = 1.0;
  for (int k = 0; k <= u.order(); ++k) {
    if (k > 0) f *= k;
    s[k] = (k % 2 == 0 ? cv : sv) / f;
  }
  return u.compose_series(s);
}

// Integer power, exact for polynomials. Negative exponents go through the
// reciprocal.
inline Jet pow_int(const Jet& u, long long n) {
  if (n < 0) return reciprocal(pow_int(u, -n));
  Jet r = Jet::constant(u.order(), 1.0);
  Jet base = u;
  unsigned long long e = static_cast<unsigned long long>(n);
  while (e > 0) {
    if (e & 1ull) r = r * base;
    base = base * base;
    e >>= 1;
  }
  return r;
}

// A vector-valued jet: one component jet per ambient coordinate.
using VecJet = std::vector<Jet>;

inline Jet dot(const VecJet& a, const VecJet& b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("vector jet size mismatch");
  Jet acc = a[0] * b[0];
  for (size_t k = 1; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

// In-place normalization of a vector jet to unit Euclidean length,
// performed at the jet level so all derivatives account for it.
inline void normalize(VecJet& f) {
  Jet n2 = dot(f, f);
  if (n2.value() <= 0.0) throw EvalError("cannot normalize a zero vector");
  Jet inv = rsqrt(n2);
  for (Jet& comp : f) comp = comp * inv;
}

}  // namespace curvelab
