#include <catch2/catch_amalgamated.hpp>

#include "lightcone/model.hpp"

using namespace lightcone;

namespace {
ModeProblem mk(Complex sigma, int n, int ell,
               RadialProfile prof = RadialProfile::exact()) {
  return ModeProblem{SpectralPoint{sigma, n}, ell, prof};
}
}  // namespace

TEST_CASE("spectral point bookkeeping") {
  SpectralPoint sp{Complex(0.7, 0.3), 3};
  CHECK(std::abs(sp.lambda() - (Complex(0.7, 0.3) * Complex(0.7, 0.3) + 1.0)) <
        1e-15);
  CHECK(std::abs(sp.s_plus() + sp.s_minus() - Complex(2.0)) < 1e-15);
  // margin: i*sigma = -0.3 + 0.7i, distance from Z = hypot(0.3, 0.7)
  CHECK(sp.integer_margin() == Catch::Approx(std::hypot(0.3, 0.7)));
  CHECK_THROWS_AS((SpectralPoint{Complex(0.0, 1.0 + 1e-5), 3}.require_margin()),
                  IntegerDegeneracy);
}

TEST_CASE("global coefficients: exact model closed form") {
  // For f == 1 the coefficient functions have elementary closed forms:
  //   A = -cos 2theta
  //   B = -2 i sigma sin 2theta + 2 sin 2theta - cos 2theta (n-1) cot theta
  //   C = ist (n-1+ist) cos2theta - ist (2 cos2theta + sin2theta (n-1) cot)
  //       + lam / sin^2 theta
  int n = 3, ell = 2;
  Complex sigma(0.7, 0.3);
  auto ode = assemble_global_mode_ode(mk(sigma, n, ell));
  Complex ist = Complex(0.0, 1.0) * sigma - Real(n - 1) / 2.0;
  Real lam = angular_eigenvalue(ell, n);
  for (Real th : {0.3, 0.9, 1.7, 2.6}) {
    Real c = std::cos(2 * th), s = std::sin(2 * th), cot = std::cos(th) / std::sin(th);
    Complex wl = Real(n - 1) * cot;
    CHECK(std::abs(ode.A(th) - Complex(-c)) < 1e-14);
    Complex Bex = -2.0 * Complex(0, 1) * sigma * s - (-2.0 * s + c * wl);
    CHECK(std::abs(ode.B(th) - Bex) < 1e-12);
    Complex Cex = ist * (Real(n - 1) + ist) * c - ist * (2.0 * c + s * wl) +
                  lam / (std::sin(th) * std::sin(th));
    CHECK(std::abs(ode.C(th) - Cex) < 1e-12);
  }
}

TEST_CASE("reflection symmetry for even profiles") {
  // With f even in mu, theta -> pi - theta preserves A and C and flips B.
  auto prof = RadialProfile::poly({0.8, 0.0, 0.2});  // f = 0.8 + 0.2 mu^2
  auto ode = assemble_global_mode_ode(mk(Complex(0.4, -0.2), 4, 1, prof));
  for (Real th : {0.25, 0.6, 1.1}) {
    CHECK(std::abs(ode.A(PI - th) - ode.A(th)) < 1e-13);
    CHECK(std::abs(ode.B(PI - th) + ode.B(th)) < 1e-11);
    CHECK(std::abs(ode.C(PI - th) - ode.C(th)) < 1e-11);
  }
}

TEST_CASE("pole regularity of the coefficients") {
  // Near theta=0: C ~ lam/theta^2, and B/A ~ (n-1)/theta, so the regular
  // indicial root at the pole is ell.
  int n = 3, ell = 3;
  auto ode = assemble_global_mode_ode(mk(Complex(0.5, 0.1), n, ell));
  Real lam = angular_eigenvalue(ell, n);
  for (Real th : {1e-3, 1e-4}) {
    CHECK(std::abs(ode.C(th) * th * th / lam - 1.0) < 1e-5);
    CHECK(std::abs(ode.B(th) / ode.A(th) * th - Real(n - 1)) < 1e-5);
  }
}

TEST_CASE("belt constituent coefficients are real for real spectral data") {
  auto ode = assemble_constituent_mode_ode(mk(Complex(0.8, 0.0), 3, 1),
                                           Region::XZero);
  for (Real th : {0.9, 1.3, 2.1}) {
    CHECK(std::abs(ode.A(th).imag()) < 1e-14);
    CHECK(std::abs(ode.B(th).imag()) < 1e-12);
    CHECK(std::abs(ode.C(th).imag()) < 1e-12);
    // model symmetry theta -> pi - theta
    CHECK(std::abs(ode.A(PI - th) - ode.A(th)) < 1e-13);
    CHECK(std::abs(ode.C(PI - th) - ode.C(th)) < 1e-11);
  }
}

TEST_CASE("conjugation identity across all regions") {
  Complex sigma(0.7, 0.3);
  SECTION("exact profile") {
    auto mp = mk(sigma, 3, 2);
    CHECK(verify_conjugation(mp, Region::XPlus,
                             TrialFunction::gaussian(0.4, 0.05)) < 1e-9);
    CHECK(verify_conjugation(mp, Region::XZero,
                             TrialFunction::gaussian(PI / 2, 0.08)) < 1e-9);
    CHECK(verify_conjugation(mp, Region::XMinus,
                             TrialFunction::gaussian(PI - 0.4, 0.05)) < 1e-9);
  }
  SECTION("perturbed profile") {
    auto mp = mk(Complex(-0.5, 0.6), 4, 1, RadialProfile::bump(0.1));
    CHECK(verify_conjugation(mp, Region::XPlus,
                             TrialFunction::gaussian(0.35, 0.04)) < 1e-9);
    CHECK(verify_conjugation(mp, Region::XZero,
                             TrialFunction::gaussian(1.4, 0.06)) < 1e-9);
  }
  SECTION("zero trial gives zero residual") {
    auto mp = mk(sigma, 3, 0);
    CHECK(verify_conjugation(mp, Region::XPlus,
                             TrialFunction::constant(0.0, 0.3, 0.5)) == 0.0);
  }
}

TEST_CASE("ambient wave operator cross-check") {
  SECTION("n=3 residual at h=1e-3") {
    auto mp = mk(Complex(0.5, 0.5), 3, 1);
    Real res = validate_against_ambient(mp, TrialFunction::gaussian(0.5, 0.07),
                                        1e-3);
    CHECK(res < 1e-6);
  }
  SECTION("n=2, fourth-order convergence") {
    auto mp = mk(Complex(1.0, 0.0), 2, 0);
    auto trial = TrialFunction::gaussian(0.45, 0.06);
    Real r1 = validate_against_ambient(mp, trial, 4e-3);
    Real r2 = validate_against_ambient(mp, trial, 2e-3);
    CHECK(r1 / r2 > 10.0);  // ~16x per halving
  }
  SECTION("perturbed profile is rejected") {
    auto mp = mk(Complex(0.5, 0.5), 3, 1, RadialProfile::bump(0.1));
    CHECK_THROWS_AS(
        validate_against_ambient(mp, TrialFunction::gaussian(0.5, 0.07)),
        ExactOnly);
  }
}

TEST_CASE("profile validation") {
  CHECK_THROWS_AS(RadialProfile::poly({0.5}), InvalidProfile);   // f(1) != 1
  CHECK_THROWS_AS(RadialProfile::poly({-1.0, 2.0}), InvalidProfile);  // f(-1)<0
  CHECK_NOTHROW(RadialProfile::bump(0.1));
  auto b = RadialProfile::bump(0.2);
  CHECK(std::abs(b.f(Complex(1.0)) - 1.0) < 1e-15);
  // derivative consistency (complex step)
  Complex mu(0.3, 0.0);
  Complex fd = (b.f(mu + 1e-20 * Complex(0, 1))).imag() / 1e-20;
  CHECK(std::abs(fd - b.fp(mu)) < 1e-8 * std::abs(b.fp(mu)));
}
