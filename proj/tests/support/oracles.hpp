#pragma once

// Reference computations used only by tests. They are written independently
// of the library code paths they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "jclt/ensemble.hpp"

namespace oracle {

/// phi_0..phi_n at spectral point z sqrt(n), long double, no rescaling.
inline std::vector<long double> phi(const jclt::JacobiMatrix& m, long double z) {
  const std::size_t n = m.n;
  const long double x = z * std::sqrt(static_cast<long double>(n));
  std::vector<long double> p(n + 1);
  p[0] = 1.0L;
  long double prev = 0.0L;
  for (std::size_t k = 1; k <= n; ++k) {
    long double a2 = 0.0L;
    if (k >= 2) {
      const long double a = m.a[k - 2];
      a2 = a * a;
    }
    p[k] = (x - static_cast<long double>(m.b[k - 1])) * p[k - 1] - a2 * prev;
    prev = p[k - 1];
  }
  return p;
}

/// Characteristic polynomial of the order-k bottom-right minor at lambda.
inline long double minor_poly(const jclt::JacobiMatrix& m, std::size_t k, long double lambda) {
  long double p0 = 1.0L, p1 = 0.0L;
  for (std::size_t j = 1; j <= k; ++j) {
    long double a2 = 0.0L;
    if (j >= 2) {
      const long double a = m.a[j - 2];
      a2 = a * a;
    }
    const long double next = (lambda - static_cast<long double>(m.b[j - 1])) * p0 - (j >= 2 ? a2 * p1 : 0.0L);
    p1 = p0;
    p0 = next;
  }
  return p0;
}

/// Eigenvalues of the (unscaled) Jacobi matrix by root isolation: the roots of
/// consecutive minors interlace, so each root of phi_k is bracketed by roots
/// of phi_{k-1}. Requires all a_k != 0.
inline std::vector<long double> eigenvalues(const jclt::JacobiMatrix& m) {
  long double radius = 1.0L;
  for (double b : m.b) radius = std::max(radius, static_cast<long double>(std::abs(b)));
  long double amax = 0.0L;
  for (double a : m.a) amax = std::max(amax, static_cast<long double>(std::abs(a)));
  radius += 2.0L * amax + 1.0L;

  std::vector<long double> roots;
  for (std::size_t k = 1; k <= m.n; ++k) {
    std::vector<long double> edges{-radius};
    edges.insert(edges.end(), roots.begin(), roots.end());
    edges.push_back(radius);
    std::vector<long double> next;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
      long double lo = edges[i], hi = edges[i + 1];
      long double flo = minor_poly(m, k, lo);
      for (int it = 0; it < 200 && lo < hi; ++it) {
        const long double mid = lo + (hi - lo) / 2.0L;
        if (mid <= lo || mid >= hi) break;
        const long double fm = minor_poly(m, k, mid);
        if ((fm < 0.0L) == (flo < 0.0L) && fm != 0.0L) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      next.push_back(lo + (hi - lo) / 2.0L);
    }
    roots = std::move(next);
  }
  return roots;
}

/// #{eigenvalues of J / sqrt(n) <= x}.
inline std::size_t eigen_count(const jclt::JacobiMatrix& m, double x) {
  const auto ev = eigenvalues(m);
  const long double s = x * std::sqrt(static_cast<long double>(m.n));
  return static_cast<std::size_t>(std::count_if(ev.begin(), ev.end(), [&](long double e) { return e <= s; }));
}

/// Levy concentration by brute force over left endpoints at sample points.
inline double levy_q(const std::vector<double>& s, double eps) {
  std::size_t best = 0;
  for (double left : s) {
    std::size_t c = 0;
    for (double x : s) {
      if (x >= left && x - left <= 2.0 * eps) ++c;
    }
    best = std::max(best, c);
  }
  return static_cast<double>(best) / static_cast<double>(s.size());
}

/// Composite Simpson rule.
template <class F>
double simpson(F&& f, double a, double b, std::size_t intervals) {
  if (intervals % 2 == 1) ++intervals;
  const double h = (b - a) / static_cast<double>(intervals);
  double acc = f(a) + f(b);
  for (std::size_t i = 1; i < intervals; ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * f(a + h * static_cast<double>(i));
  return acc * h / 3.0;
}

inline long double log_factorial(std::size_t n) {
  long double s = 0.0L;
  for (std::size_t i = 2; i <= n; ++i) s += std::log(static_cast<long double>(i));
  return s;
}

}  // namespace oracle
