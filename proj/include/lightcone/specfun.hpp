#ifndef LIGHTCONE_SPECFUN_HPP
#define LIGHTCONE_SPECFUN_HPP

// Complex special functions used by the closed-form oracles and the
// Frobenius machinery: log-Gamma, stable Gamma ratios, and the Gauss
// hypergeometric function with its z <-> 1-z connection coefficients.

#include <algorithm>
#include <string>
#include <vector>

#include "lightcone/common.hpp"

namespace lightcone {

namespace detail {

// Lanczos approximation, g = 7, 9 coefficients.  Accurate to ~1e-14
// relative for Re z >= 0.5; reflection handles the left half plane.
inline const double kLanczos[9] = {
    0.99999999999980993,     676.5203681218851,    -1259.1392167224028,
    771.32342877765313,     -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};

inline Complex log_gamma_lanczos(Complex z) {
  // valid for Re z >= 0.5
  z -= 1.0;
  Complex x = kLanczos[0];
  for (int i = 1; i < 9; ++i) x += kLanczos[i] / (z + Real(i));
  Complex t = z + 7.5;  // g + 1/2
  return 0.5 * std::log(2.0 * PI) + (z + 0.5) * std::log(t) - t + std::log(x);
}

}  // namespace detail

// Principal-branch log Gamma.  The imaginary part is continuous on the
// right half plane; across the reflection the result is correct modulo
// 2*pi*i (exp of it is always Gamma(z)).
inline Complex log_gamma(Complex z) {
  if (near_nonpositive_integer(z, 1e-12))
    throw PoleOfGamma("log_gamma: argument at a Gamma pole");
  if (z.real() >= 0.5) return detail::log_gamma_lanczos(z);
  // Reflection: Gamma(z) Gamma(1-z) = pi / sin(pi z)
  return std::log(PI) - std::log(std::sin(PI * z)) -
         detail::log_gamma_lanczos(1.0 - z);
}

inline Complex gamma_fn(Complex z) { return std::exp(log_gamma(z)); }

// Stable product of Gammas, Prod Gamma(num_i) / Prod Gamma(den_j), via
// summed log-Gammas.  Arguments sitting exactly on Gamma poles are allowed
// when a numerator pole cancels a denominator pole; the pair is replaced by
// its finite limit lim_{e->0} Gamma(-a+e)/Gamma(-b+e) = (-1)^(a-b) b!/a!.
inline Complex gamma_ratio(std::vector<Complex> num, std::vector<Complex> den) {
  const Real tol = 1e-12;
  auto pole_index = [&](const std::vector<Complex>& v) {
    for (size_t i = 0; i < v.size(); ++i)
      if (near_nonpositive_integer(v[i], tol)) return static_cast<long>(i);
    return -1L;
  };
  Complex limit_factor = 1.0;
  for (;;) {
    long in = pole_index(num), id = pole_index(den);
    if (in < 0 && id < 0) break;
    if (in < 0 || id < 0)
      throw UncancelledPole("gamma_ratio: Gamma pole without a cancelling partner");
    long a = std::lround(-num[in].real());  // Gamma(-a), Gamma(-b)
    long b = std::lround(-den[id].real());
    // lim Gamma(-a+e)/Gamma(-b+e): residues (-1)^a/a! and (-1)^b/b!
    Real lf = ((a - b) % 2 == 0) ? 1.0 : -1.0;
    for (long k = std::min(a, b) + 1; k <= std::max(a, b); ++k)
      lf = (a > b) ? lf / Real(k) : lf * Real(k);
    limit_factor *= lf;
    num.erase(num.begin() + in);
    den.erase(den.begin() + id);
  }
  Complex s = 0.0;
  for (const Complex& z : num) s += log_gamma(z);
  for (const Complex& z : den) s -= log_gamma(z);
  return limit_factor * std::exp(s);
}

struct Hyp2F1Params {
  Complex a, b, c, z;
};

namespace detail {

// Maclaurin series of 2F1; caller guarantees |z| <= 0.75.
inline Complex hyp2f1_series(Complex a, Complex b, Complex c, Complex z) {
  if (near_nonpositive_integer(c, 1e-12))
    throw PoleOfGamma("hyp2f1: c is a non-positive integer");
  Complex term = 1.0, sum = 1.0;
  for (int k = 0; k < 700; ++k) {
    term *= (a + Real(k)) * (b + Real(k)) / ((c + Real(k)) * Real(k + 1)) * z;
    sum += term;
    if (std::abs(term) < 1e-14 * std::max(std::abs(sum), Real(1e-30)) &&
        k > 3) {
      // geometric tail bound: next terms shrink at least like |z|
      Real q = std::abs(z);
      if (std::abs(term) * q / (1 - q) <
          1e-14 * std::max(std::abs(sum), Real(1e-30)))
        return sum;
    }
  }
  throw NonConvergent("hyp2f1: series did not meet the tail bound");
}

}  // namespace detail

// Connection coefficients for F(a,b;c;z) =
//   C1 * F(a,b;a+b-c+1;1-z) + C2 * (1-z)^(c-a-b) * F(c-a,c-b;c-a-b+1;1-z).
inline std::pair<Complex, Complex> hyp2f1_connection(const Hyp2F1Params& p) {
  Complex cab = p.c - p.a - p.b;
  if (dist_from_integers(cab) < 1e-8)
    throw IntegerDegeneracy("hyp2f1_connection: c-a-b within 1e-8 of an integer");
  Complex C1 = gamma_ratio({p.c, cab}, {p.c - p.a, p.c - p.b});
  Complex C2 = gamma_ratio({p.c, -cab}, {p.a, p.b});
  return {C1, C2};
}

// Gauss hypergeometric function, principal branches (cut along (1,inf)).
// Evaluates the Maclaurin series after the standard linear transformation
// whose effective argument is smallest; near the corner points
// exp(+-i pi/3) every transformation leaves |argument| just below 1, so the
// series cap is generous.
inline Complex hyp2f1(const Hyp2F1Params& p) {
  const Complex a = p.a, b = p.b, c = p.c, z = p.z;
  const Complex one = 1.0;
  if (z.imag() == 0.0 && z.real() > 1.0)
    throw NonConvergent("hyp2f1: z on the branch cut (1,inf)");

  struct Cand {
    Real size;
    int which;
  };
  Complex zp = z / (z - one);
  std::vector<Cand> cands = {{std::abs(z), 0},
                             {std::abs(zp), 1},
                             {std::abs(one - z), 2},
                             {z == 0.0 ? 1e300 : 1.0 / std::abs(z), 3}};
  std::sort(cands.begin(), cands.end(),
            [](const Cand& x, const Cand& y) { return x.size < y.size; });

  std::string last_err;
  for (const auto& cd : cands) {
    if (cd.size > 0.95) break;  // series would converge too slowly
    try {
      switch (cd.which) {
        case 0:
          return detail::hyp2f1_series(a, b, c, z);
        case 1:  // Pfaff z -> z/(z-1)
          return std::pow(one - z, -a) *
                 detail::hyp2f1_series(a, c - b, c, zp);
        case 2: {  // 1-z connection
          auto [C1, C2] = hyp2f1_connection(p);
          Complex w = one - z;
          return C1 * detail::hyp2f1_series(a, b, a + b - c + one, w) +
                 C2 * std::pow(w, c - a - b) *
                     detail::hyp2f1_series(c - a, c - b, c - a - b + one, w);
        }
        case 3: {  // 1/z connection
          if (dist_from_integers(a - b) < 1e-8)
            throw IntegerDegeneracy(
                "hyp2f1: a-b within 1e-8 of an integer in 1/z region");
          Complex D1 = gamma_ratio({c, b - a}, {b, c - a});
          Complex D2 = gamma_ratio({c, a - b}, {a, c - b});
          Complex iz = one / z;
          return D1 * std::pow(-z, -a) *
                     detail::hyp2f1_series(a, a - c + one, a - b + one, iz) +
                 D2 * std::pow(-z, -b) *
                     detail::hyp2f1_series(b, b - c + one, b - a + one, iz);
        }
      }
    } catch (const IntegerDegeneracy& e) {
      last_err = e.what();  // try the next-best transformation
    }
  }
  if (!last_err.empty())
    throw IntegerDegeneracy("hyp2f1: all usable transformations degenerate: " +
                            last_err);
  throw NonConvergent("hyp2f1: no convergent representation for this z");
}

}  // namespace lightcone

#endif  // LIGHTCONE_SPECFUN_HPP
