#ifndef LIGHTCONE_ODECONNECT_HPP
#define LIGHTCONE_ODECONNECT_HPP

// Machinery for the connection problem of the mode ODE: local Frobenius
// expansions at the four regular singular points, numerical transport
// between them, and least-squares extraction of connection coefficients.

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "lightcone/common.hpp"
#include "lightcone/model.hpp"
#include "lightcone/ode.hpp"
#include "lightcone/series.hpp"

namespace lightcone {

// ---------------------------------------------------------------------------
// Local expansions  w(theta) = pref(delta)^root * sum_k c_k delta^k,
// delta = theta - anchor.  For non-integer (complex) roots the prefactor is
// |delta|^root, which solves the ODE on *both* sides of the anchor (the two
// one-sided branches differ by a constant factor, which this normalization
// fixes symmetrically).  Integer roots use plain signed powers.

struct FrobeniusExpansion {
  Real anchor = 0.0;
  Complex root = 0.0;
  bool integer_root = true;  // use delta^m instead of |delta|^root
  std::vector<Complex> coef;  // c_0 normalized to 1 for basis solutions
  Real radius = 0.075;        // max |delta| for evaluation

  bool empty() const { return coef.empty(); }

  // (w, w') at real theta with |theta - anchor| <= radius.
  std::pair<Complex, Complex> eval(Real theta) const {
    Real d = theta - anchor;
    if (std::abs(d) > radius * (1.0 + 1e-12))
      throw RadiusTooSmall("evaluation outside Frobenius radius");
    // Horner for S(d) and S'(d)
    Complex S = 0.0, Sp = 0.0;
    for (size_t k = coef.size(); k-- > 0;) {
      Sp = Sp * d + S;
      S = S * d + coef[k];
    }
    if (integer_root) {
      long m = std::lround(root.real());
      Real pref = 1.0, dpref = 0.0;
      if (m != 0) {
        pref = std::pow(d, Real(m));
        dpref = Real(m) * std::pow(d, Real(m - 1));
      }
      return {pref * S, dpref * S + pref * Sp};
    }
    Real ad = std::abs(d);
    Complex pref = std::pow(Complex(ad), root);
    // d/dtheta |d|^r = r |d|^r / d
    return {pref * S, pref * (root * S / d + Sp)};
  }
};

struct FrobeniusBasis {
  Real anchor = 0.0;
  Complex p0, q0;            // indicial data: I(x) = x(x-1) + p0 x + q0
  FrobeniusExpansion sing;   // nonzero root: i*sigma at light cones, ell at poles
  FrobeniusExpansion smooth; // root 0 (light cones only; empty at poles)
  bool at_light_cone = false;

  std::array<Complex, 2> roots() const {
    Complex b = p0 - 1.0;
    Complex disc = std::sqrt(b * b - 4.0 * q0);
    return {(-b + disc) / 2.0, (-b - disc) / 2.0};
  }
};

struct FrobeniusOptions {
  Real sample_radius = 0.35;  // circle for the Cauchy-integral Taylor data
  Real use_radius = 0.075;    // evaluation radius
  Real tail_tol = 1e-14;
  int max_order = 96;
  int min_order = 40;
};

namespace detail {

// Series coefficients for one exponent via the standard recurrence
//   I(root+k) c_k = -sum_{j<k} [ (root+j) p_{k-j} + q_{k-j} ] c_j.
// Returns empty vector when a resonant denominator is hit (only happens for
// the subdominant root at the poles, which we never need).
inline std::vector<Complex> frobenius_series(const std::vector<Complex>& p,
                                             const std::vector<Complex>& q,
                                             Complex root, int N) {
  auto I = [&](Complex x) { return x * (x - 1.0) + p[0] * x + q[0]; };
  std::vector<Complex> c(N + 1);
  c[0] = 1.0;
  for (int k = 1; k <= N; ++k) {
    Complex acc = 0.0;
    for (int j = 0; j < k; ++j)
      acc += ((root + Real(j)) * p[k - j] + q[k - j]) * c[j];
    Complex den = I(root + Real(k));
    if (std::abs(den) < 1e-8) return {};
    c[k] = -acc / den;
  }
  return c;
}

inline void check_tail(const std::vector<Complex>& c, Real r,
                       Real tol, const char* what) {
  if (c.empty()) return;
  Real maxterm = 0.0;
  for (size_t k = 0; k < c.size(); ++k)
    maxterm = std::max(maxterm, std::abs(c[k]) * std::pow(r, Real(k)));
  size_t N = c.size() - 1;
  Real tail = std::abs(c[N]) * std::pow(r, Real(N));
  if (tail > tol * std::max(maxterm, Real(1e-300)))
    throw RadiusTooSmall(std::string(what) +
                         ": Frobenius tail bound unmet at usage radius");
}

}  // namespace detail

inline FrobeniusBasis frobenius_at(const OdeCoefficients& ode, Real anchor,
                                   const FrobeniusOptions& opt = {}) {
  const Real lc1 = PI / 4.0, lc2 = 3.0 * PI / 4.0;
  bool at_lc = std::abs(anchor - lc1) < 1e-12 || std::abs(anchor - lc2) < 1e-12;
  if (at_lc) SpectralPoint{ode.sigma, ode.n}.require_margin();

  // Taylor data of p(d) = d*B/A and q(d) = d^2*C/A about the anchor.
  auto P = [&](Complex d) { return d * ode.B(anchor + d) / ode.A(anchor + d); };
  auto Q = [&](Complex d) {
    return d * d * ode.C(anchor + d) / ode.A(anchor + d);
  };
  int N = opt.max_order;
  auto p = taylor_coeffs(P, 0.0, opt.sample_radius, N);
  auto q = taylor_coeffs(Q, 0.0, opt.sample_radius, N);

  FrobeniusBasis out;
  out.anchor = anchor;
  out.p0 = p[0];
  out.q0 = q[0];
  out.at_light_cone = at_lc;

  auto make = [&](Complex root, bool integer_root) {
    FrobeniusExpansion e;
    e.anchor = anchor;
    e.root = root;
    e.integer_root = integer_root;
    e.radius = opt.use_radius;
    e.coef = detail::frobenius_series(p, q, root, N);
    detail::check_tail(e.coef, opt.use_radius, opt.tail_tol, "frobenius_at");
    return e;
  };

  if (at_lc) {
    // Indicial roots are {0, i sigma}; snap to the exact values (the Taylor
    // data reproduces them to machine precision, verified by tests).
    Complex isig = Complex(0.0, 1.0) * ode.sigma;
    out.sing = make(isig, false);
    out.smooth = make(0.0, true);
  } else {
    // Pole of the spherical coordinate: regular root is ell.
    out.sing = make(Real(ode.ell), true);
    if (out.sing.empty())
      throw NonConvergent("resonant recurrence for the regular root");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transport of solutions between annuli.

struct PathSample {
  Real theta;
  Complex w, dw;
  Complex abel;  // running integral of B/A from the start of the path
};

struct SolutionPath {
  std::vector<PathSample> samples;
  OdeStats stats;
  const PathSample& terminal() const { return samples.back(); }
};

// Integrate A w'' + B w' + C w = rhs_source (optional) from (theta0, w, w')
// through the sorted target list.  The third state component carries the
// Abel integral of B/A for Wronskian diagnostics.
inline SolutionPath integrate(const OdeCoefficients& ode, Real theta0,
                              Complex w, Complex dw,
                              const std::vector<Real>& targets,
                              const std::function<Complex(Real)>& source = {},
                              Real rtol = 1e-12) {
  OdeRhs rhs = [&ode, &source](Real t, const CVec& y, CVec& dy) {
    Complex a = ode.A(t), b = ode.B(t), c = ode.C(t);
    Complex f = source ? source(t) : Complex(0.0);
    dy[0] = y[1];
    dy[1] = (f - b * y[1] - c * y[0]) / a;
    dy[2] = b / a;
  };
  Dop853 solver;
  solver.rtol = rtol;
  solver.atol = 1e-14;
  SolutionPath path;
  solver.integrate(rhs, theta0, {w, dw, Complex(0.0)}, targets,
                   [&](Real t, const CVec& y) {
                     path.samples.push_back({t, y[0], y[1], y[2]});
                   });
  path.stats = solver.stats;
  return path;
}

// Convenience overload matching (from, to) with an internal sample grid.
inline SolutionPath integrate(const OdeCoefficients& ode, Real theta0,
                              Complex w, Complex dw, Real theta1,
                              int grid = 32,
                              const std::function<Complex(Real)>& source = {},
                              Real rtol = 1e-12) {
  std::vector<Real> targets;
  for (int i = 1; i <= grid; ++i)
    targets.push_back(theta0 + (theta1 - theta0) * i / grid);
  return integrate(ode, theta0, w, dw, targets, source, rtol);
}

// ---------------------------------------------------------------------------
// Connection coefficients by annulus collocation.

struct ConnectionData {
  Complex coeff_singular = 0.0;  // coordinate along basis.sing
  Complex coeff_smooth = 0.0;    // coordinate along basis.smooth
  Real condition = 1.0;          // SVD condition number of the design matrix
  Real residual = 0.0;           // relative fit residual
};

// Fit the path samples lying in the annulus [radius/2, radius] around the
// basis anchor against the two normalized Frobenius solutions.
inline ConnectionData connect(const FrobeniusBasis& basis,
                              const SolutionPath& path) {
  std::vector<const PathSample*> pts;
  Real r = basis.sing.radius;
  for (const auto& s : path.samples) {
    Real d = std::abs(s.theta - basis.anchor);
    if (d >= 0.5 * r - 1e-12 && d <= r + 1e-12) pts.push_back(&s);
  }
  if (pts.size() < 8)
    throw ConfigError("need >= 8 collocation samples in the annulus, got " +
                      std::to_string(pts.size()));
  const bool two = !basis.smooth.empty();
  Eigen::MatrixXcd Amat(2 * pts.size(), two ? 2 : 1);
  Eigen::VectorXcd bvec(2 * pts.size());
  for (size_t i = 0; i < pts.size(); ++i) {
    auto [s1, d1] = basis.sing.eval(pts[i]->theta);
    Amat(2 * i, 0) = s1;
    Amat(2 * i + 1, 0) = d1;
    if (two) {
      auto [s2, d2] = basis.smooth.eval(pts[i]->theta);
      Amat(2 * i, 1) = s2;
      Amat(2 * i + 1, 1) = d2;
    }
    bvec(2 * i) = pts[i]->w;
    bvec(2 * i + 1) = pts[i]->dw;
  }
  // equilibrate so the condition number measures column parallelism, not
  // the value/derivative scale mismatch
  Eigen::VectorXd colnorm(Amat.cols());
  for (int j = 0; j < Amat.cols(); ++j)
    colnorm(j) = std::max(Amat.col(j).norm(), 1e-300);
  for (int j = 0; j < Amat.cols(); ++j) Amat.col(j) /= colnorm(j);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(
      Amat, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Real cond = svd.singularValues()(0) /
              svd.singularValues()(svd.singularValues().size() - 1);
  if (cond > 1e8)
    throw IllConditioned("connection design matrix condition " +
                         std::to_string(cond));
  Eigen::VectorXcd x = svd.solve(bvec);
  ConnectionData out;
  out.condition = cond;
  out.residual = (Amat * x - bvec).norm() / std::max(bvec.norm(), 1e-300);
  for (int j = 0; j < Amat.cols(); ++j) x(j) /= colnorm(j);
  out.coeff_singular = x(0);
  out.coeff_smooth = two ? x(1) : Complex(0.0);
  return out;
}

// ---------------------------------------------------------------------------
// Taylor particular solution across a light cone: u = sum u_k delta^k with
//   I(k) u_k = g_k - sum_{j<k} [ j p_{k-j} + q_{k-j} ] u_j ,
// g = delta^2 * source / A (analytic; the simple zero of A eats one power).
// u_0 is a free smooth datum.  Denominators I(k) = k(k - i sigma) stay away
// from zero by the margin condition.
namespace detail {

inline FrobeniusExpansion particular_from_g(const OdeCoefficients& ode,
                                            Real anchor,
                                            const std::vector<Complex>& g,
                                            Complex u0,
                                            const FrobeniusOptions& opt) {
  SpectralPoint{ode.sigma, ode.n}.require_margin();
  auto P = [&](Complex d) { return d * ode.B(anchor + d) / ode.A(anchor + d); };
  auto Q = [&](Complex d) {
    return d * d * ode.C(anchor + d) / ode.A(anchor + d);
  };
  int N = opt.max_order;
  auto p = taylor_coeffs(P, 0.0, opt.sample_radius, N);
  auto q = taylor_coeffs(Q, 0.0, opt.sample_radius, N);

  auto I = [&](Real x) { return Complex(x * (x - 1.0)) + p[0] * x + q[0]; };
  std::vector<Complex> u(N + 1);
  u[0] = u0;
  for (int k = 1; k <= N; ++k) {
    Complex acc = k < (int)g.size() ? g[k] : Complex(0.0);
    for (int j = 0; j < k; ++j)
      acc -= (Real(j) * p[k - j] + q[k - j]) * u[j];
    Complex den = I(Real(k));
    if (std::abs(den) < 1e-8)
      throw IntegerDegeneracy("resonant denominator in particular solution");
    u[k] = acc / den;
  }
  FrobeniusExpansion e;
  e.anchor = anchor;
  e.root = 0.0;
  e.integer_root = true;
  e.coef = std::move(u);
  e.radius = opt.use_radius;
  return e;
}

}  // namespace detail

inline FrobeniusExpansion particular_solution(
    const OdeCoefficients& ode, Real anchor,
    const std::function<Complex(Complex)>& source, Complex u0 = 0.0,
    const FrobeniusOptions& opt = {}) {
  auto G = [&](Complex d) {
    return d * d * source(anchor + d) / ode.A(anchor + d);
  };
  auto g = taylor_coeffs(G, 0.0, opt.sample_radius, opt.max_order);
  return detail::particular_from_g(ode, anchor, g, u0, opt);
}

// Overload for sources given by their Taylor coefficients at the anchor
// (useful when the source is too sharply peaked for contour sampling, e.g. a
// narrow Gaussian: its values explode on the sampling circle even where the
// theta-axis values are negligible).
inline FrobeniusExpansion particular_solution(
    const OdeCoefficients& ode, Real anchor,
    const std::vector<Complex>& source_taylor, Complex u0 = 0.0,
    const FrobeniusOptions& opt = {}) {
  // g = delta^2 / A * source; the first factor is smooth and tame on the
  // sampling circle, so only it goes through contour sampling
  auto H = [&](Complex d) { return d * d / ode.A(anchor + d); };
  auto h = taylor_coeffs(H, 0.0, opt.sample_radius, opt.max_order);
  std::vector<Complex> src = source_taylor;
  src.resize(opt.max_order + 1, 0.0);
  auto g = tps::mul(src, h);
  return detail::particular_from_g(ode, anchor, g, u0, opt);
}

// ---------------------------------------------------------------------------
// Abel/Wronskian drift diagnostic: for two paths of the same ODE sampled at
// identical thetas, W(theta) * exp(int B/A) must be constant.
inline Real wronskian_drift(const SolutionPath& p1, const SolutionPath& p2) {
  if (p1.samples.size() != p2.samples.size())
    throw ConfigError("paths must share their sample grid");
  Complex ref = 0.0;
  Real worst = 0.0;
  for (size_t i = 0; i < p1.samples.size(); ++i) {
    const auto &a = p1.samples[i], &b = p2.samples[i];
    Complex wr = (a.w * b.dw - a.dw * b.w) * std::exp(a.abel);
    if (i == 0)
      ref = wr;
    else
      worst = std::max(worst, std::abs(wr - ref) / std::abs(ref));
  }
  return worst;
}

}  // namespace lightcone

#endif  // LIGHTCONE_ODECONNECT_HPP
