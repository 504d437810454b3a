#ifndef LIGHTCONE_MODEL_HPP
#define LIGHTCONE_MODEL_HPP

// Mode-reduced operator family on the interval theta in (0,pi).
//
// The sphere at infinity of an (n+1)-dimensional ambient Lorentzian cone
// splits into two "cap" regions (theta < pi/4 and theta > 3pi/4), where the
// induced asymptotic geometry is hyperbolic, and a middle "belt"
// (pi/4 < theta < 3pi/4) carrying a Lorentzian (de Sitter-like) metric.  The
// light cones theta = pi/4, 3pi/4 separate them.  After separating off a
// spherical harmonic of degree ell, the global spectral-family operator
// becomes a second-order ODE  A(theta) w'' + B(theta) w' + C(theta) w  with
// regular singular points at theta = 0, pi/4, 3pi/4, pi.
//
// mu = cos(2 theta) is the transition function: mu > 0 on the caps, < 0 on
// the belt, with simple zeros at the light cones.

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "lightcone/common.hpp"
#include "lightcone/profile.hpp"

namespace lightcone {

// ---------------------------------------------------------------------------
// Spectral parameter bookkeeping.

struct SpectralPoint {
  Complex sigma;
  int n;  // boundary dimension; ambient space is R^{n+1}

  Complex sigma_shifted() const {  // sigma + i(n-1)/2
    return sigma + Complex(0.0, 0.5 * (n - 1));
  }
  Complex lambda() const {  // sigma^2 + ((n-1)/2)^2
    Real hn = 0.5 * (n - 1);
    return sigma * sigma + hn * hn;
  }
  Complex s_plus() const {  // (n-1)/2 - i sigma
    return Complex(0.5 * (n - 1), 0.0) - Complex(0.0, 1.0) * sigma;
  }
  Complex s_minus() const {  // (n-1)/2 + i sigma
    return Complex(0.5 * (n - 1), 0.0) + Complex(0.0, 1.0) * sigma;
  }
  // Distance of i*sigma from the integers.  When this degenerates the two
  // indicial roots at the light cones resonate and the connection problem
  // needs logarithmic terms, which we do not support.
  Real integer_margin() const {
    return dist_from_integers(Complex(0.0, 1.0) * sigma);
  }
  void require_margin(Real threshold = 1e-3) const {
    if (integer_margin() < threshold)
      throw IntegerDegeneracy("i*sigma is within " + std::to_string(threshold) +
                              " of an integer; indicial roots at the light "
                              "cones are resonant");
  }
};

inline Real angular_eigenvalue(int ell, int n) {  // ell(ell + n - 2)
  return Real(ell) * Real(ell + n - 2);
}

struct ModeProblem {
  SpectralPoint pt;
  int ell = 0;
  RadialProfile profile;

  Real lam() const { return angular_eigenvalue(ell, pt.n); }
  void validate() const {
    if (pt.n < 2) throw ConfigError("need n >= 2");
    if (ell < 0) throw ConfigError("need ell >= 0");
    profile.validate();
  }
};

enum class Region { XPlus, XZero, XMinus };

inline const char* region_name(Region r) {
  switch (r) {
    case Region::XPlus:
      return "X_plus";
    case Region::XZero:
      return "X_zero";
    case Region::XMinus:
      return "X_minus";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// ODE coefficient triple, evaluable at complex theta (all ingredients are
// analytic away from the four singular points, which is what lets us
// extract Taylor coefficients by Cauchy integrals).

struct OdeCoefficients {
  std::function<Complex(Complex)> A, B, C;
  int n = 3;
  int ell = 0;
  Complex sigma;

  // Singular points in (0,pi): poles of the spherical coordinate at 0 and
  // pi, light cones at pi/4 and 3pi/4.
  static std::array<Real, 4> singular_points() {
    return {0.0, PI / 4.0, 3.0 * PI / 4.0, PI};
  }
};

// Global (Mellin-reduced) operator for the full interval.
inline OdeCoefficients assemble_global_mode_ode(const ModeProblem& mp) {
  mp.validate();
  const int n = mp.pt.n;
  const Complex sigma = mp.pt.sigma;
  const Complex ist = Complex(0.0, 1.0) * sigma - Real(n - 1) / 2.0;  // i*(shifted sigma)
  const Real lam = mp.lam();
  const RadialProfile prof = mp.profile;

  // Volume-weight logarithmic derivative W'/W with
  // W = f(cos2theta)^{(n-1)/2} sin(theta)^{n-1}.
  auto wlog = [prof, n](Complex th, Complex c, Complex s) {
    return -Real(n - 1) * s * prof.fp(c) / prof.f(c) +
           Real(n - 1) * std::cos(th) / std::sin(th);
  };

  OdeCoefficients out;
  out.n = n;
  out.ell = mp.ell;
  out.sigma = sigma;
  out.A = [](Complex th) { return -std::cos(2.0 * th); };
  out.B = [wlog, sigma](Complex th) {
    Complex c = std::cos(2.0 * th), s = std::sin(2.0 * th);
    Complex wl = wlog(th, c, s);
    // (n-1) + 2*ist = 2 i sigma
    return -2.0 * Complex(0.0, 1.0) * sigma * s - (-2.0 * s + c * wl);
  };
  out.C = [wlog, ist, lam, prof, n](Complex th) {
    Complex c = std::cos(2.0 * th), s = std::sin(2.0 * th);
    Complex wl = wlog(th, c, s);
    Complex sn = std::sin(th);
    return ist * (Real(n - 1) + ist) * c - ist * (2.0 * c + s * wl) +
           lam / (prof.f(c) * sn * sn);
  };
  return out;
}

// Constituent operator of a single region, in the region's own normalization
// (x = sqrt(mu) on the caps, x = sqrt(-mu) on the belt):
//   caps:  P = -(Laplace_{g_region} + sigma^2 + ((n-1)/2)^2)
//   belt:  P = +Box_{g_region} + sigma^2 + ((n-1)/2)^2
// with the divergence-form Laplacian/d'Alembertian of the induced metric
//   caps:  dtheta^2/mu^2  + (f(mu) sin^2 theta / mu)      * round
//   belt:  dtheta^2/nu^2  - (f(cos2theta) sin^2 theta/nu) * round,  nu = -mu.
inline OdeCoefficients assemble_constituent_mode_ode(const ModeProblem& mp,
                                                     Region region) {
  mp.validate();
  const int n = mp.pt.n;
  const Real lam = mp.lam();
  const Real hn = 0.5 * (n - 1);
  const Complex shift = mp.pt.sigma * mp.pt.sigma + hn * hn;
  const RadialProfile prof = mp.profile;
  const Real sg = (region == Region::XZero) ? -1.0 : 1.0;  // mu_region = sg*cos2theta

  OdeCoefficients out;
  out.n = n;
  out.ell = mp.ell;
  out.sigma = mp.pt.sigma;

  // log-derivative of the volume density D = m^{-1} (f sin^2/m)^{(n-1)/2},
  // m = sg*cos2theta.
  auto dlog = [prof, n, sg](Complex th) {
    Complex c = std::cos(2.0 * th), s = std::sin(2.0 * th);
    Complex m = sg * c, mp_ = sg * (-2.0) * s;
    Complex cot = std::cos(th) / std::sin(th);
    // f is always evaluated at cos2theta (the global transition function)
    Complex flog = prof.fp(c) * (-2.0) * s / prof.f(c);
    return -mp_ / m + Real(n - 1) / 2.0 * (flog + 2.0 * cot - mp_ / m);
  };

  if (region == Region::XZero) {
    out.A = [](Complex th) { return std::pow(-std::cos(2.0 * th), 2); };
    out.B = [dlog](Complex th) {
      Complex nu = -std::cos(2.0 * th), nup = 2.0 * std::sin(2.0 * th);
      return nu * nu * dlog(th) + 2.0 * nu * nup;
    };
    out.C = [prof, lam, shift](Complex th) {
      Complex nu = -std::cos(2.0 * th);
      Complex sn = std::sin(th);
      return lam * nu / (prof.f(-nu) * sn * sn) + shift;
    };
  } else {
    out.A = [](Complex th) { return -std::pow(std::cos(2.0 * th), 2); };
    out.B = [dlog](Complex th) {
      Complex mu = std::cos(2.0 * th), mup = -2.0 * std::sin(2.0 * th);
      return -(mu * mu * dlog(th) + 2.0 * mu * mup);
    };
    out.C = [prof, lam, shift](Complex th) {
      Complex mu = std::cos(2.0 * th);
      Complex sn = std::sin(th);
      return lam * mu / (prof.f(mu) * sn * sn) - shift;
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Smooth test functions of theta with analytic first and second derivatives.

struct TrialFunction {
  std::function<Complex(Real)> value, d1, d2;
  Real lo = 0.0, hi = 0.0;  // nominal support interval

  static TrialFunction gaussian(Real center, Real width, Complex amp = 1.0) {
    TrialFunction t;
    t.lo = center - 6.0 * width;
    t.hi = center + 6.0 * width;
    t.value = [=](Real th) {
      Real u = (th - center) / width;
      return amp * std::exp(-u * u);
    };
    t.d1 = [=](Real th) {
      Real u = (th - center) / width;
      return amp * std::exp(-u * u) * (-2.0 * u / width);
    };
    t.d2 = [=](Real th) {
      Real u = (th - center) / width;
      return amp * std::exp(-u * u) * (4.0 * u * u - 2.0) / (width * width);
    };
    return t;
  }

  static TrialFunction constant(Complex amp, Real lo, Real hi) {
    TrialFunction t;
    t.lo = lo;
    t.hi = hi;
    t.value = [=](Real) { return amp; };
    t.d1 = [](Real) { return Complex(0.0); };
    t.d2 = [](Real) { return Complex(0.0); };
    return t;
  }
};

// Residual of the conjugation identity
//   x^{i sigma - (n-1)/2 - 2} P_region [ x^{-i sigma + (n-1)/2} trial ]
//     == P_global [ trial ],
// measured in sup-norm over the trial's support, relative to the sup of the
// right-hand side.  This pins down every sign and weight in the assembly.
inline Real verify_conjugation(const ModeProblem& mp, Region region,
                               const TrialFunction& trial,
                               int samples = 200) {
  OdeCoefficients glob = assemble_global_mode_ode(mp);
  OdeCoefficients cons = assemble_constituent_mode_ode(mp, region);
  const Real sg = (region == Region::XZero) ? -1.0 : 1.0;
  const Complex p = -Complex(0.0, 1.0) * mp.pt.sigma + Real(mp.pt.n - 1) / 2.0;

  Real worst = 0.0, scale = 0.0;
  for (int i = 1; i < samples; ++i) {
    Real th = trial.lo + (trial.hi - trial.lo) * i / samples;
    Complex g = trial.value(th), g1 = trial.d1(th), g2 = trial.d2(th);

    Complex rhs = glob.A(th) * g2 + glob.B(th) * g1 + glob.C(th) * g;

    // x = sqrt(m), m = sg*cos2theta; L = x'/x = m'/(2m).
    Complex m = sg * std::cos(2.0 * th);
    Complex m1 = sg * (-2.0) * std::sin(2.0 * th);
    Complex m2 = sg * (-4.0) * std::cos(2.0 * th);
    Complex L = m1 / (2.0 * m);
    Complex L1 = (m2 * m - m1 * m1) / (2.0 * m * m);
    Complex psi2 = g2 + 2.0 * p * L * g1 + (p * p * L * L + p * L1) * g;
    Complex psi1 = g1 + p * L * g;
    Complex lhs =
        (cons.A(th) * psi2 + cons.B(th) * psi1 + cons.C(th) * g) / m;

    worst = std::max(worst, std::abs(lhs - rhs));
    scale = std::max(scale, std::abs(rhs));
  }
  if (scale == 0.0) return worst;
  return worst / scale;
}

// ---------------------------------------------------------------------------
// Ambient finite-difference cross-check (exact model only).
//
// With u(z) = rho^{i sigma - (n-1)/2} * trial(theta) * Y_ell(yhat),
// rho = |z|, theta = angle from the z_{n+1} axis, yhat = z'/|z'|, and
// Y_ell(yhat) = (yhat_1 + i yhat_2)^ell, the ambient wave operator
// Box = d^2/dz_{n+1}^2 - Laplace_{z'} satisfies
//   Box u = rho^{i sigma - (n-1)/2 - 2} * (P_global trial) * Y_ell.
// We verify this with 4th-order central differences on a point cloud.

namespace detail {

inline Complex ambient_u(const ModeProblem& mp, const TrialFunction& trial,
                         const std::vector<Real>& z) {
  const int n = mp.pt.n;
  Real rho2 = 0.0;
  for (Real v : z) rho2 += v * v;
  Real rho = std::sqrt(rho2);
  Real rp = 0.0;
  for (int i = 0; i < n; ++i) rp += z[i] * z[i];
  rp = std::sqrt(rp);
  Real theta = std::atan2(rp, z[n]);
  Complex y12(z[0] / rp, z[1] / rp);
  Complex ylm = std::pow(y12, mp.ell);
  Complex expo = Complex(0.0, 1.0) * mp.pt.sigma - Real(n - 1) / 2.0;
  return std::pow(Complex(rho), expo) * trial.value(theta) * ylm;
}

}  // namespace detail

// Returns the max relative deviation over the cloud at spacing h; throws
// StepTooCoarse if the convergence order measured between 4h and 2h drops
// below 3.5.
inline Real validate_against_ambient(const ModeProblem& mp,
                                     const TrialFunction& trial,
                                     Real h = 1e-3) {
  if (!mp.profile.is_exact())
    throw ExactOnly("ambient cross-check requires the exact profile");
  const int n = mp.pt.n;
  OdeCoefficients glob = assemble_global_mode_ode(mp);

  // Deterministic point cloud inside the trial's support, off the z'=0 axis.
  std::vector<std::vector<Real>> cloud;
  const int nth = 7, nrho = 3;
  for (int i = 1; i <= nth; ++i) {
    Real theta = trial.lo + (trial.hi - trial.lo) * i / (nth + 1);
    for (int j = 0; j < nrho; ++j) {
      Real rho = 0.9 + 0.17 * j;
      std::vector<Real> z(n + 1, 0.0);
      // place yhat at a generic point of the sphere
      Real a = 0.6 + 0.05 * j, b = std::sqrt(1.0 - a * a);
      z[0] = rho * std::sin(theta) * a;
      z[1] = rho * std::sin(theta) * b;
      if (n >= 3) {
        // tilt slightly into the remaining coordinates
        Real c = 0.2;
        Real s = std::sqrt(1.0 - c * c);
        z[0] *= s;
        z[1] *= s;
        z[2] = rho * std::sin(theta) * c;
      }
      z[n] = rho * std::cos(theta);
      cloud.push_back(z);
    }
  }

  auto residual_at = [&](Real hh) {
    Real worst = 0.0, scale = 0.0;
    for (const auto& z : cloud) {
      // 4th-order second derivatives, signature (+ for z_{n+1}, - for z').
      Complex box = 0.0;
      for (int k = 0; k <= n; ++k) {
        Complex acc = -30.0 * detail::ambient_u(mp, trial, z);
        for (int s : {-2, -1, 1, 2}) {
          auto zz = z;
          zz[k] += s * hh;
          Real w = (std::abs(s) == 1) ? 16.0 : -1.0;
          acc += w * detail::ambient_u(mp, trial, zz);
        }
        acc /= 12.0 * hh * hh;
        box += (k == n) ? acc : -acc;
      }

      Real rho2 = 0.0;
      for (Real v : z) rho2 += v * v;
      Real rho = std::sqrt(rho2);
      Real rp = 0.0;
      for (int i = 0; i < n; ++i) rp += z[i] * z[i];
      rp = std::sqrt(rp);
      Real theta = std::atan2(rp, z[n]);
      Complex y12(z[0] / rp, z[1] / rp);
      Complex ylm = std::pow(y12, mp.ell);
      Complex expo =
          Complex(0.0, 1.0) * mp.pt.sigma - Real(n - 1) / 2.0 - 2.0;
      Complex ptrial = glob.A(theta) * trial.d2(theta) +
                       glob.B(theta) * trial.d1(theta) +
                       glob.C(theta) * trial.value(theta);
      Complex want = std::pow(Complex(rho), expo) * ptrial * ylm;
      worst = std::max(worst, std::abs(box - want));
      scale = std::max(scale, std::abs(want));
    }
    return worst / scale;
  };

  Real r4 = residual_at(4.0 * h), r2 = residual_at(2.0 * h);
  if (r4 > 1e-13) {  // skip order check below roundoff floor
    Real order = std::log2(r4 / r2);
    if (order < 3.5)
      throw StepTooCoarse("finite-difference convergence order " +
                          std::to_string(order) + " < 3.5");
  }
  return residual_at(h);
}

}  // namespace lightcone

#endif  // LIGHTCONE_MODEL_HPP
