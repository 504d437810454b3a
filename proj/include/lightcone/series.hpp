#ifndef LIGHTCONE_SERIES_HPP
#define LIGHTCONE_SERIES_HPP

// Truncated power series arithmetic and Taylor coefficient extraction by
// Cauchy integrals (trapezoid rule on a circle = DFT, spectrally accurate
// for analytic integrands).

#include <cmath>
#include <functional>
#include <vector>

#include "lightcone/common.hpp"

namespace lightcone {

// Taylor coefficients c_0..c_N of F about `center`, sampled on the circle
// |z - center| = radius.  F must be analytic on the closed disk.
inline std::vector<Complex> taylor_coeffs(
    const std::function<Complex(Complex)>& F, Complex center, Real radius,
    int N, int samples = 0) {
  int M = samples > 0 ? samples : std::max(4 * (N + 1), 64);
  std::vector<Complex> val(M);
  for (int j = 0; j < M; ++j) {
    Real phi = 2.0 * PI * j / M;
    val[j] = F(center + radius * std::polar(1.0, phi));
  }
  std::vector<Complex> out(N + 1);
  for (int k = 0; k <= N; ++k) {
    Complex acc = 0.0;
    for (int j = 0; j < M; ++j) {
      Real phi = 2.0 * PI * j / M;
      acc += val[j] * std::polar(1.0, -phi * k);
    }
    out[k] = acc / (Real(M) * std::pow(radius, k));
  }
  return out;
}

// --- truncated power series (fixed order = size-1) ---------------------

namespace tps {

using Series = std::vector<Complex>;

inline Series mul(const Series& a, const Series& b) {
  size_t n = std::max(a.size(), b.size());
  Series out(n, 0.0);
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size() && i + j < n; ++j)
      out[i + j] += a[i] * b[j];
  return out;
}

inline Series add(Series a, const Series& b) {
  if (b.size() > a.size()) a.resize(b.size(), 0.0);
  for (size_t i = 0; i < b.size(); ++i) a[i] += b[i];
  return a;
}

inline Series scale(Series a, Complex w) {
  for (auto& v : a) v *= w;
  return a;
}

// a(g(x)) with g(0) = 0, truncated at the length of a.
inline Series compose(const Series& a, const Series& g) {
  size_t n = a.size();
  Series out(n, 0.0), pw(n, 0.0);
  pw[0] = 1.0;
  out[0] = a[0];
  for (size_t k = 1; k < n; ++k) {
    pw = mul(pw, g);
    for (size_t i = 0; i < n; ++i) out[i] += a[k] * pw[i];
  }
  return out;
}

// log of a series with a[0] != 0.
inline Series log(const Series& a) {
  size_t n = a.size();
  Series b(n, 0.0);
  b[0] = std::log(a[0]);
  // k a_k = sum_{j=1..k} j b_j a_{k-j}   (from a b' = a' with b = log a)
  for (size_t k = 1; k < n; ++k) {
    Complex acc = Real(k) * a[k];
    for (size_t j = 1; j < k; ++j) acc -= Real(j) * b[j] * a[k - j];
    b[k] = acc / (Real(k) * a[0]);
  }
  return b;
}

inline Series exp(const Series& a) {
  size_t n = a.size();
  Series e(n, 0.0);
  e[0] = std::exp(a[0]);
  for (size_t k = 1; k < n; ++k) {
    Complex acc = 0.0;
    for (size_t j = 1; j <= k; ++j) acc += Real(j) * a[j] * e[k - j];
    e[k] = acc / Real(k);
  }
  return e;
}

// a^w for series with a[0] != 0, complex exponent.
inline Series pow(const Series& a, Complex w) {
  return exp(scale(log(a), w));
}

}  // namespace tps

}  // namespace lightcone

#endif  // LIGHTCONE_SERIES_HPP
