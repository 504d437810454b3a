#ifndef LIGHTCONE_COMMON_HPP
#define LIGHTCONE_COMMON_HPP

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

namespace lightcone {

// Scalar precision is configured here; everything downstream uses Real/Complex.
using Real = double;
using Complex = std::complex<Real>;

inline constexpr Real PI = 3.14159265358979323846264338327950288;

// Base class for all computational failures. Subclasses mirror the
// documented error conditions of the library operations.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct PoleOfGamma : Error { using Error::Error; };
struct UncancelledPole : Error { using Error::Error; };
struct NonConvergent : Error { using Error::Error; };
struct IntegerDegeneracy : Error { using Error::Error; };
struct InvalidProfile : Error { using Error::Error; };
struct RadiusTooSmall : Error { using Error::Error; };
struct StiffnessFailure : Error { using Error::Error; };
struct IllConditioned : Error { using Error::Error; };
struct ResolventPole : Error { using Error::Error; };
struct GlobalPole : Error { using Error::Error; };
struct ExactOnly : Error { using Error::Error; };
struct StepTooCoarse : Error { using Error::Error; };
struct ContourThroughZero : Error { using Error::Error; };
struct NoConvergence : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

// Distance of a complex number from the integer lattice on the real axis
// (i.e. from the set of real integers inside C).
inline Real dist_from_integers(Complex z) {
  Real re = z.real();
  Real frac = re - std::round(re);
  return std::hypot(frac, z.imag());
}

inline bool near_nonpositive_integer(Complex z, Real tol) {
  if (z.real() > 0.5) return false;
  Real re = z.real();
  Real frac = re - std::round(re);
  return std::hypot(frac, z.imag()) < tol;
}

inline Real rel_dev(Complex got, Complex want) {
  Real scale = std::max(std::abs(want), Real(1e-300));
  return std::abs(got - want) / scale;
}

}  // namespace lightcone

#endif  // LIGHTCONE_COMMON_HPP
