#include <catch2/catch_amalgamated.hpp>

#include "lightcone/inverse.hpp"

using namespace lightcone;
using Catch::Approx;

namespace {

ModeProblem make(int n, int ell, Complex sigma, RadialProfile prof) {
  return ModeProblem{SpectralPoint{sigma, n}, ell, std::move(prof)};
}

// Apply A u'' + B u' + C u at theta by a seven-point O(h^6) stencil; the
// high order keeps the truncation error below the roundoff floor for the
// narrow Gaussian sources used here.
Complex apply_operator(const OdeCoefficients& ode,
                       const std::function<Complex(Real)>& u, Real t,
                       Real h = 1e-3) {
  Complex v[7];
  for (int k = -3; k <= 3; ++k) v[k + 3] = u(t + k * h);
  Complex d1 = (-v[0] + 9.0 * v[1] - 45.0 * v[2] + 45.0 * v[4] - 9.0 * v[5] +
                v[6]) /
               (60.0 * h);
  Complex d2 = (2.0 * v[0] - 27.0 * v[1] + 270.0 * v[2] - 490.0 * v[3] +
                270.0 * v[4] - 27.0 * v[5] + 2.0 * v[6]) /
               (180.0 * h * h);
  return ode.A(t) * d2 + ode.B(t) * d1 + ode.C(t) * v[3];
}

}  // namespace

TEST_CASE("source descriptions know their supports and reject misfits") {
  auto g = ModeSource::gaussian(SupportTag::XZero, 1.5, 0.04);
  auto [lo, hi] = g.support();
  CHECK(lo == Approx(1.5 - 0.32));
  CHECK(hi == Approx(1.5 + 0.32));
  CHECK(std::abs(g.eval(Complex(1.5))) == Approx(1.0));

  // support must fit the tagged region
  CHECK_THROWS_AS(ModeSource::gaussian(SupportTag::XPlus, 0.7, 0.1),
                  ConfigError);
  CHECK_THROWS_AS(ModeSource::gaussian(SupportTag::XMinus, 2.0, 0.05),
                  ConfigError);
  CHECK_THROWS_AS(ModeSource::gaussian(SupportTag::XZero, 1.0, -0.1),
                  ConfigError);

  ModeSource p = ModeSource::polycos({1.0, 0.5});
  p.tag = SupportTag::XZero;
  CHECK_THROWS_AS(p.validate(), ConfigError);

  CHECK(ModeSource::zero().is_zero());
  CHECK(ModeSource::gaussian(SupportTag::XZero, 1.5, 0.04, 0.0).is_zero());
}

TEST_CASE("cap resolvent inverts the mode operator") {
  ModeProblem mp = make(3, 1, {1.2, 0.0}, RadialProfile::exact());
  ModeEngine eng(mp);
  auto src = ModeSource::gaussian(SupportTag::XPlus, 0.45, 0.03, {1.0, 0.5});
  auto u = [&](Real t) { return resolvent_hyperbolic_mode(mp, src, t); };

  for (Real t : {0.28, 0.40, 0.45, 0.52, 0.70}) {
    Complex lhs = apply_operator(eng.ode(), u, t);
    Complex rhs = src.eval(Complex(t));
    INFO("theta=" << t);
    CHECK(std::abs(lhs - rhs) < 1e-8 * std::abs(src.amplitude));
  }
}

TEST_CASE("cap resolvent output is a pole-regular multiple below the source "
          "and a smooth-branch multiple above it") {
  ModeProblem mp = make(3, 2, {0.9, 0.3}, RadialProfile::bump(0.1));
  ModeEngine eng(mp);
  auto src = ModeSource::gaussian(SupportTag::XPlus, 0.5, 0.02);
  CapGreen g(eng, Region::XPlus, src, true);

  // above the support the output is cone_coefficient times the branch that
  // is smooth at the light cone (normalized to 1 there)
  Complex c = g.cone_coefficient();
  for (Real t : {0.72, 0.76}) {
    Complex want = c * eng.basis(kY1).smooth.eval(t).first;
    CHECK(std::abs(g.eval(t) - want) < 1e-10 * std::abs(c));
  }
  // below the support the ratio to the pole-regular solution is constant
  Complex r1 = g.eval(0.2) / eng.eval_regular(Region::XPlus, 0.2).first;
  Complex r2 = g.eval(0.3) / eng.eval_regular(Region::XPlus, 0.3).first;
  CHECK(std::abs(r1 - r2) < 1e-9 * std::abs(r1));
}

TEST_CASE("cap resolvent rejects out-of-region sources and bad theta") {
  ModeProblem mp = make(3, 0, {1.0, 0.0}, RadialProfile::exact());
  auto src = ModeSource::gaussian(SupportTag::XZero, 1.5, 0.05);
  CHECK_THROWS_AS(resolvent_hyperbolic_mode(mp, src, 0.5), ConfigError);
  auto ok = ModeSource::gaussian(SupportTag::XPlus, 0.4, 0.02);
  CHECK_THROWS_AS(resolvent_hyperbolic_mode(mp, ok, 1.0), ConfigError);
}

TEST_CASE("zero source maps to zero for every solution operator") {
  ModeProblem mp = make(3, 1, {0.8, -0.2}, RadialProfile::exact());
  auto z = ModeSource::zero();
  CHECK(std::abs(resolvent_hyperbolic_mode(mp, z, 0.5)) == 0.0);
  CHECK(std::abs(backward_solution_desitter_mode(mp, z, 1.3)) == 0.0);
  CHECK(std::abs(global_inverse_assembled_mode(mp, z, 2.0)) == 0.0);
  CHECK(std::abs(global_inverse_direct_mode(mp, z, 2.0)) < 1e-12);
}

TEST_CASE("backward belt solution is causal and inverts the operator") {
  ModeProblem mp = make(3, 1, {1.1, 0.0}, RadialProfile::exact());
  ModeEngine eng(mp);
  auto src = ModeSource::gaussian(SupportTag::XZero, 1.6, 0.06);
  BeltBackward bb(eng, src);

  // exact vanishing below the support
  for (Real t : {0.85, 0.95, 1.05})
    CHECK(std::abs(bb.eval(t)) < 1e-12);

  auto u = [&](Real t) { return bb.eval(t); };
  for (Real t : {1.45, 1.60, 1.75, 2.25}) {
    Complex lhs = apply_operator(eng.ode(), u, t);
    Complex rhs = src.eval(Complex(t));
    INFO("theta=" << t);
    CHECK(std::abs(lhs - rhs) < 1e-8);
  }

  // IVP equivalence: integrating the inhomogeneous equation with zero data
  // from below the support reproduces the Volterra values
  auto src_fn = [&src](Real t) { return src.eval(Complex(t)); };
  for (Real t : {1.7, 2.2}) {
    auto path = integrate(eng.ode(), 1.0, 0.0, 0.0, t, 32, src_fn);
    CHECK(std::abs(bb.eval(t) - path.terminal().w) <
          1e-9 * std::max(std::abs(path.terminal().w), 1.0));
  }

  CHECK_THROWS_AS(bb.eval(0.5), ConfigError);
}

TEST_CASE("global assembled inverse solves the equation across all regions") {
  ModeProblem mp = make(3, 1, {1.2, 0.0}, RadialProfile::exact());
  ModeEngine eng(mp);

  struct Probe {
    ModeSource src;
    std::vector<Real> pts;
  };
  std::vector<Probe> probes = {
      {ModeSource::gaussian(SupportTag::XPlus, 0.45, 0.03), {0.3, 0.45, 0.7}},
      {ModeSource::gaussian(SupportTag::XZero, 1.5, 0.06), {1.0, 1.5, 2.2}},
      {ModeSource::gaussian(SupportTag::XMinus, 2.7, 0.03), {2.5, 2.7, 2.9}}};

  for (const auto& pr : probes) {
    GlobalInverseAssembled inv(eng, pr.src);
    auto u = [&](Real t) { return inv.eval(t); };
    for (Real t : pr.pts) {
      Complex lhs = apply_operator(eng.ode(), u, t);
      Complex rhs = pr.src.eval(Complex(t));
      INFO("tag=" << support_tag_name(pr.src.tag) << " theta=" << t);
      CHECK(std::abs(lhs - rhs) < 1e-7);
    }
  }
}

TEST_CASE("assembled and direct global inverses agree pointwise") {
  const std::vector<Real> grid = {0.2, 0.5, 0.7, 0.9,  1.2, 1.6,
                                  2.0, 2.3, 2.5, 2.75, 3.0};
  struct Case {
    ModeProblem mp;
    ModeSource src;
  };
  std::vector<Case> cases = {
      {make(3, 1, {1.2, 0.0}, RadialProfile::exact()),
       ModeSource::gaussian(SupportTag::XZero, 1.5, 0.06)},
      {make(3, 2, {0.8, -0.4}, RadialProfile::bump(0.1)),
       ModeSource::gaussian(SupportTag::XPlus, 0.45, 0.03)},
      {make(2, 0, {1.4, 0.3}, RadialProfile::bump(0.1)),
       ModeSource::gaussian(SupportTag::XMinus, 2.65, 0.03)}};

  for (const auto& c : cases) {
    ModeEngine eng(c.mp);
    GlobalInverseAssembled asmb(eng, c.src);
    GlobalInverseDirect dir(eng, c.src);
    Real scale = 0.0;
    for (Real t : grid) scale = std::max(scale, std::abs(dir.eval(t)));
    for (Real t : grid) {
      INFO("tag=" << support_tag_name(c.src.tag) << " theta=" << t);
      CHECK(std::abs(asmb.eval(t) - dir.eval(t)) < 1e-8 * scale);
    }
    CHECK(dir.smoothness_certificate() < 1e-9);
  }
}

TEST_CASE("direct inverse handles a source straddling the first light cone") {
  ModeProblem mp = make(3, 1, {1.1, 0.2}, RadialProfile::exact());
  ModeEngine eng(mp);
  ModeSource src;
  src.kind = ModeSource::Kind::Gaussian;
  src.tag = SupportTag::Global;
  src.center = kY1;
  src.width = 0.03;
  src.validate();

  GlobalInverseDirect inv(eng, src);
  auto u = [&](Real t) { return inv.eval(t); };
  for (Real t : {0.6, kY1 - 0.01, kY1 + 0.01, 1.1}) {
    Complex lhs = apply_operator(eng.ode(), u, t);
    Complex rhs = src.eval(Complex(t));
    INFO("theta=" << t);
    CHECK(std::abs(lhs - rhs) < 1e-7);
  }
  CHECK(inv.smoothness_certificate() < 1e-9);

  // the assembled pipeline cannot split a straddling source
  CHECK_THROWS_AS(GlobalInverseAssembled(eng, src), ConfigError);
}

TEST_CASE("restriction identities tie the global inverse to the regional "
          "operators") {
  ModeProblem mp = make(3, 1, {1.2, 0.0}, RadialProfile::exact());
  ModeEngine eng(mp);

  // cap-supported source: global restriction to the cap is the resolvent
  auto sp = ModeSource::gaussian(SupportTag::XPlus, 0.45, 0.03);
  GlobalInverseDirect dp(eng, sp);
  for (Real t : {0.3, 0.45, 0.6}) {
    Complex a = resolvent_hyperbolic_mode(mp, sp, t);
    CHECK(std::abs(dp.eval(t) - a) < 1e-8 * std::max(std::abs(a), 1.0));
  }

  // belt-supported source: global restriction to the belt is the backward
  // solution (the matched boundary value at the first cone vanishes)
  auto s0 = ModeSource::gaussian(SupportTag::XZero, 1.6, 0.06);
  GlobalInverseDirect d0(eng, s0);
  for (Real t : {1.0, 1.6, 2.2}) {
    Complex b = backward_solution_desitter_mode(mp, s0, t);
    CHECK(std::abs(d0.eval(t) - b) < 1e-8 * std::max(std::abs(b), 1.0));
  }
}

TEST_CASE("far-cap sources leave the upstream regions exactly dark") {
  ModeProblem mp = make(3, 2, {0.9, -0.3}, RadialProfile::bump(0.1));
  ModeEngine eng(mp);
  auto src = ModeSource::gaussian(SupportTag::XMinus, 2.7, 0.03);
  GlobalInverseAssembled inv(eng, src);
  for (Real t : {0.3, 0.7, 1.0, 1.8, 2.3})
    CHECK(std::abs(inv.eval(t)) < 1e-10);
  GlobalInverseDirect dir(eng, src);
  for (Real t : {0.3, 1.0, 1.8})
    CHECK(std::abs(dir.eval(t)) < 1e-10);
}

TEST_CASE("future-oriented inverse vanishes above the source support") {
  ModeProblem mp = make(3, 1, {1.2, 0.0}, RadialProfile::exact());
  ModeEngine eng(mp);
  auto src = ModeSource::gaussian(SupportTag::XZero, 1.3, 0.05);
  GlobalInverseDirect fut(eng, src, /*past=*/false);
  for (Real t : {1.9, 2.1, 2.3, 2.9})
    CHECK(std::abs(fut.eval(t)) < 1e-12);
  // and it is still an inverse below the support
  auto u = [&](Real t) { return fut.eval(t); };
  for (Real t : {1.0, 1.3}) {
    Complex lhs = apply_operator(eng.ode(), u, t);
    CHECK(std::abs(lhs - src.eval(Complex(t))) < 1e-7);
  }
}

TEST_CASE("connection determinants are holomorphic on test contours") {
  // polynomial fit on circle samples; a small residual certifies the
  // Cauchy-Riemann equations hold at the fit tolerance
  const Complex z0{1.2, -0.5};
  const Real r = 0.2;
  const int m = 32, deg = 14;
  Eigen::MatrixXcd V(m, deg + 1);
  Eigen::VectorXcd f(m);
  RadialProfile prof = RadialProfile::bump(0.1);
  for (int i = 0; i < m; ++i) {
    Complex z = z0 + r * std::exp(Complex(0.0, 2.0 * PI * i / m));
    Complex w = (z - z0) / r;
    for (int j = 0; j <= deg; ++j) V(i, j) = std::pow(w, j);
    f(i) = detail::pole_determinant(DeterminantKind::XPlus, z, 3, 1, prof);
  }
  Eigen::VectorXcd c = V.colPivHouseholderQr().solve(f);
  Real res = (V * c - f).norm() / f.norm();
  CHECK(res < 1e-8);
}

TEST_CASE("pole scan finds the half-integer resonance ladder in dimension 2") {
  Window w{-1.0, 1.0, -3.0, -0.1};
  auto rep = find_poles(2, 0, 1, RadialProfile::exact(), w,
                        DeterminantKind::XPlus);
  CHECK(rep.counts_consistent);
  // H^2 cap: sigma = -i(ell + 1/2 + k); match as a set since zeros on the
  // imaginary axis sort by a noise-level real part
  std::vector<std::pair<int, Real>> want = {
      {0, -0.5}, {0, -1.5}, {0, -2.5}, {1, -1.5}, {1, -2.5}};
  REQUIRE(rep.zeros.size() == want.size());
  for (const auto& [ell, im] : want) {
    INFO("expected zero ell=" << ell << " sigma=" << im << "i");
    int hits = 0;
    for (const auto& z : rep.zeros)
      if (z.ell == ell && std::abs(z.sigma - Complex(0.0, im)) < 1e-6) {
        ++hits;
        CHECK(z.mult == 1);
        CHECK(z.residual < 1e-9);
      }
    CHECK(hits == 1);
  }
}

TEST_CASE("pole scan window must avoid the real axis") {
  Window w{-1.0, 1.0, -1.0, 1.0};
  CHECK_THROWS_AS(find_poles(3, 0, 0, RadialProfile::exact(), w,
                             DeterminantKind::XPlus),
                  ConfigError);
}

TEST_CASE("global pole list equals the union of the cap lists") {
  Window w{-1.0, 1.0, -2.0, -0.1};
  RadialProfile prof = RadialProfile::exact();
  auto plus = find_poles(2, 0, 0, prof, w, DeterminantKind::XPlus);
  auto minus = find_poles(2, 0, 0, prof, w, DeterminantKind::XMinusRev);
  auto glob = find_poles(2, 0, 0, prof, w, DeterminantKind::Global);

  // the reversed far-cap family has its poles in the upper half plane, so
  // here the union is the near-cap ladder alone
  CHECK(minus.zeros.empty());
  REQUIRE(glob.zeros.size() == plus.zeros.size());
  for (size_t i = 0; i < glob.zeros.size(); ++i)
    CHECK(std::abs(glob.zeros[i].sigma - plus.zeros[i].sigma) < 1e-6);
}
