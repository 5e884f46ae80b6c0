#pragma once

// Shared helpers for the test binaries: an independent finite-difference
// oracle (never touches the jet code) and deterministic RNG plumbing.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace testutil {

using Fn2 = std::function<double(double, double)>;

inline void central_stencil(int k, std::vector<double>& w, int& radius) {
  switch (k) {
    case 0: w = {1.0}; radius = 0; return;
    case 1: w = {-0.5, 0.0, 0.5}; radius = 1; return;
    case 2: w = {1.0, -2.0, 1.0}; radius = 1; return;
    case 3: w = {-0.5, 1.0, 0.0, -1.0, 0.5}; radius = 2; return;
    default: w = {1.0, -4.0, 6.0, -4.0, 1.0}; radius = 2; return;
  }
}

inline double fd_partial_once(const Fn2& f, double x, double y, int i, int j, double h) {
  std::vector<double> wx, wy;
  int rx = 0, ry = 0;
  central_stencil(i, wx, rx);
  central_stencil(j, wy, ry);
  double acc = 0.0;
  for (int a = -rx; a <= rx; ++a) {
    if (wx[a + rx] == 0.0) continue;
    for (int b = -ry; b <= ry; ++b) {
      if (wy[b + ry] == 0.0) continue;
      acc += wx[a + rx] * wy[b + ry] * f(x + a * h, y + b * h);
    }
  }
  return acc / std::pow(h, i + j);
}

// Richardson-extrapolated central difference for (d/dx)^i (d/dy)^j f.
inline double fd_partial(const Fn2& f, double x, double y, int i, int j) {
  const double scale = 1.0 + std::max(std::abs(x), std::abs(y));
  const double h = scale * std::pow(2.2e-16, 1.0 / (i + j + 4));
  const double coarse = fd_partial_once(f, x, y, i, j, h);
  const double fine = fd_partial_once(f, x, y, i, j, h / 2.0);
  return (4.0 * fine - coarse) / 3.0;
}

inline double rel_dev(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace testutil
