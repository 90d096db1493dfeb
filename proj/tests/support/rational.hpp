#pragma once

// Exact rational arithmetic for small test oracles.
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d = 1) : num(n), den(d) { normalize(); }

  void normalize() {
    if (den == 0) throw std::domain_error("zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }
  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }

  friend Rational operator+(Rational a, Rational b) {
    return Rational(a.num * b.den + b.num * a.den, a.den * b.den);
  }
  friend Rational operator-(Rational a, Rational b) {
    return Rational(a.num * b.den - b.num * a.den, a.den * b.den);
  }
  friend Rational operator*(Rational a, Rational b) {
    return Rational(a.num * b.num, a.den * b.den);
  }
  friend Rational operator/(Rational a, Rational b) {
    return Rational(a.num * b.den, a.den * b.num);
  }
  friend bool operator==(Rational a, Rational b) { return a.num == b.num && a.den == b.den; }
};

// Gauss-Jordan elimination over the rationals; the matrix must be nonsingular.
inline std::vector<Rational> solve_exact(std::vector<std::vector<Rational>> a,
                                         std::vector<Rational> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    while (a[p][c].num == 0) ++p;
    std::swap(a[p], a[c]);
    std::swap(b[p], b[c]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c || a[r][c].num == 0) continue;
      const Rational f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] = a[r][k] - f * a[c][k];
      b[r] = b[r] - f * b[c];
    }
  }
  for (std::size_t i = 0; i < n; ++i) b[i] = b[i] / a[i][i];
  return b;
}

// Order-i finite-difference weights from the Vandermonde system, exactly.
inline std::vector<Rational> exact_order_coefficients(int order) {
  std::vector<std::vector<Rational>> a(order, std::vector<Rational>(order));
  std::vector<Rational> b(order, Rational(0));
  b[0] = Rational(1);
  for (int k = 1; k <= order; ++k) {
    for (int j = 1; j <= order; ++j) {
      std::int64_t p = 1;
      for (int e = 0; e < k; ++e) p *= j;
      a[k - 1][j - 1] = Rational(p);
    }
  }
  return solve_exact(a, b);
}
