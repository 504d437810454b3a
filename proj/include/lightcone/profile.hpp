#ifndef LIGHTCONE_PROFILE_HPP
#define LIGHTCONE_PROFILE_HPP

// Radial cross-section profile f(mu) of the metric family.  f multiplies the
// round metric on the S^{n-1} cross-section; f == 1 is the exact
// Minkowski/H^n/dS^n model.  Profiles are analytic expressions so that all
// ODE coefficients can be evaluated at complex arguments (needed for the
// Cauchy-integral Taylor expansions at the singular points).

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "lightcone/common.hpp"

namespace lightcone {

struct RadialProfile {
  enum class Kind { Exact, Poly, Bump };

  Kind kind = Kind::Exact;
  std::vector<Real> coeffs;  // poly: f(mu) = sum coeffs[k] mu^k
  Real epsilon = 0.0;        // bump: f(mu) = 1 + eps*mu*(mu-1)*exp(-mu^2)

  static RadialProfile exact() { return RadialProfile{}; }

  static RadialProfile poly(std::vector<Real> c) {
    RadialProfile p;
    p.kind = Kind::Poly;
    p.coeffs = std::move(c);
    p.validate();
    return p;
  }

  static RadialProfile bump(Real eps) {
    RadialProfile p;
    p.kind = Kind::Bump;
    p.epsilon = eps;
    p.validate();
    return p;
  }

  // f at complex argument (analytic continuation off [-1,1]).
  Complex f(Complex mu) const {
    switch (kind) {
      case Kind::Exact:
        return 1.0;
      case Kind::Poly: {
        Complex acc = 0.0;
        for (size_t k = coeffs.size(); k-- > 0;) acc = acc * mu + coeffs[k];
        return acc;
      }
      case Kind::Bump:
        return 1.0 + epsilon * mu * (mu - 1.0) * std::exp(-mu * mu);
    }
    return 1.0;
  }

  // df/dmu
  Complex fp(Complex mu) const {
    switch (kind) {
      case Kind::Exact:
        return 0.0;
      case Kind::Poly: {
        Complex acc = 0.0;
        for (size_t k = coeffs.size(); k-- > 1;)
          acc = acc * mu + Real(k) * coeffs[k];
        return acc;
      }
      case Kind::Bump: {
        Complex e = std::exp(-mu * mu);
        return epsilon * e * ((2.0 * mu - 1.0) - 2.0 * mu * mu * (mu - 1.0));
      }
    }
    return 0.0;
  }

  bool is_exact() const { return kind == Kind::Exact; }

  std::string name() const {
    switch (kind) {
      case Kind::Exact:
        return "exact";
      case Kind::Poly: {
        std::ostringstream os;
        os << "poly[";
        for (size_t i = 0; i < coeffs.size(); ++i)
          os << (i ? "," : "") << coeffs[i];
        os << "]";
        return os.str();
      }
      case Kind::Bump: {
        std::ostringstream os;
        os << "bump(eps=" << epsilon << ")";
        return os.str();
      }
    }
    return "?";
  }

  // Invariants: f(1) = 1 (smoothness at both poles of the sphere) and
  // f > 0 on [-1,1].
  void validate() const {
    Real f1 = f(Complex(1.0)).real();
    if (std::abs(f1 - 1.0) > 1e-12)
      throw InvalidProfile("profile must satisfy f(1) = 1, got f(1) = " +
                           std::to_string(f1));
    for (int i = 0; i <= 400; ++i) {
      Real mu = -1.0 + 2.0 * i / 400.0;
      Real v = f(Complex(mu)).real();
      if (!(v > 0.0))
        throw InvalidProfile("profile must be positive on [-1,1]; f(" +
                             std::to_string(mu) + ") = " + std::to_string(v));
    }
  }
};

}  // namespace lightcone

#endif  // LIGHTCONE_PROFILE_HPP
