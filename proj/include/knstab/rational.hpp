// Exact rational arithmetic for the torus-weight classifier and rational
// spectrum checks.  Desk-scale only: long long with gcd normalization.
#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace knstab {

struct Rational {
  long long num = 0;
  long long den = 1;

  Rational() = default;
  Rational(long long n) : num(n), den(1) {}
  Rational(long long n, long long d) : num(n), den(d) { normalize(); }

  void normalize() {
    if (den == 0) throw std::domain_error("Rational: zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    long long g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }

  bool zero() const { return num == 0; }
  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }

  friend Rational operator+(Rational a, Rational b) {
    return Rational(a.num * b.den + b.num * a.den, a.den * b.den);
  }
  friend Rational operator-(Rational a, Rational b) {
    return Rational(a.num * b.den - b.num * a.den, a.den * b.den);
  }
  friend Rational operator*(Rational a, Rational b) { return Rational(a.num * b.num, a.den * b.den); }
  friend Rational operator/(Rational a, Rational b) {
    if (b.num == 0) throw std::domain_error("Rational: division by zero");
    return Rational(a.num * b.den, a.den * b.num);
  }
  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num == b.num && a.den == b.den;
  }
  bool positive() const { return num > 0; }
  bool negative() const { return num < 0; }
};

using RatMatrix = std::vector<std::vector<Rational>>;

// Rank by fraction-free Gaussian elimination.
inline int rational_rank(RatMatrix m) {
  if (m.empty()) return 0;
  const size_t rows = m.size(), cols = m[0].size();
  int rank = 0;
  size_t prow = 0;
  for (size_t c = 0; c < cols && prow < rows; ++c) {
    size_t pivot = prow;
    while (pivot < rows && m[pivot][c].zero()) ++pivot;
    if (pivot == rows) continue;
    std::swap(m[prow], m[pivot]);
    for (size_t r = prow + 1; r < rows; ++r) {
      if (m[r][c].zero()) continue;
      Rational f = m[r][c] / m[prow][c];
      for (size_t cc = c; cc < cols; ++cc) m[r][cc] = m[r][cc] - f * m[prow][cc];
    }
    ++prow;
    ++rank;
  }
  return rank;
}

// Solve a square rational system in place; returns false when singular.
inline bool rational_solve(RatMatrix a, std::vector<Rational> rhs, std::vector<Rational>& out) {
  const size_t n = a.size();
  for (size_t c = 0; c < n; ++c) {
    size_t pivot = c;
    while (pivot < n && a[pivot][c].zero()) ++pivot;
    if (pivot == n) return false;
    std::swap(a[c], a[pivot]);
    std::swap(rhs[c], rhs[pivot]);
    for (size_t r = 0; r < n; ++r) {
      if (r == c || a[r][c].zero()) continue;
      Rational f = a[r][c] / a[c][c];
      for (size_t cc = c; cc < n; ++cc) a[r][cc] = a[r][cc] - f * a[c][cc];
      rhs[r] = rhs[r] - f * rhs[c];
    }
  }
  out.assign(n, Rational());
  for (size_t i = 0; i < n; ++i) out[i] = rhs[i] / a[i][i];
  return true;
}

}  // namespace knstab
