#ifndef LIGHTCONE_INVERSE_HPP
#define LIGHTCONE_INVERSE_HPP

// Mode-level solution operators: the hyperbolic-cap resolvent (Green
// construction from the pole-regular and light-cone-adapted solutions), the
// causal backward belt solution (Volterra kernel), the global past inverse
// built two ways (piecewise assembly, and one linear solve), and pole
// localization for the connection determinants with argument-principle
// bookkeeping.

#include <algorithm>
#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "lightcone/parallel.hpp"
#include "lightcone/scattering.hpp"

namespace lightcone {

// ---------------------------------------------------------------------------
// Sources.

enum class SupportTag { XPlus, XZero, XMinus, Global };

inline const char* support_tag_name(SupportTag t) {
  switch (t) {
    case SupportTag::XPlus: return "x_plus";
    case SupportTag::XZero: return "x_zero";
    case SupportTag::XMinus: return "x_minus";
    case SupportTag::Global: return "global";
  }
  return "?";
}

struct ModeSource {
  enum class Kind { Zero, Gaussian, PolyCos };
  Kind kind = Kind::Zero;
  SupportTag tag = SupportTag::Global;
  Real center = 0.0, width = 0.1;
  Complex amplitude = 1.0;
  std::vector<Complex> coeffs;  // polynomial in cos 2 theta

  static ModeSource zero() { return {}; }
  static ModeSource gaussian(SupportTag tag, Real center, Real width,
                             Complex amplitude = 1.0) {
    ModeSource s;
    s.kind = Kind::Gaussian;
    s.tag = tag;
    s.center = center;
    s.width = width;
    s.amplitude = amplitude;
    s.validate();
    return s;
  }
  static ModeSource polycos(std::vector<Complex> coeffs) {
    ModeSource s;
    s.kind = Kind::PolyCos;
    s.tag = SupportTag::Global;
    s.coeffs = std::move(coeffs);
    return s;
  }

  bool is_zero() const {
    return kind == Kind::Zero ||
           (kind == Kind::PolyCos && coeffs.empty()) ||
           (kind == Kind::Gaussian && amplitude == Complex(0.0));
  }

  // entire in theta, so usable for series constructions
  Complex eval(Complex theta) const {
    switch (kind) {
      case Kind::Zero: return 0.0;
      case Kind::Gaussian: {
        Complex z = (theta - center) / width;
        return amplitude * std::exp(-z * z);
      }
      case Kind::PolyCos: {
        Complex c = std::cos(2.0 * theta), acc = 0.0;
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it)
          acc = acc * c + *it;
        return acc;
      }
    }
    return 0.0;
  }
  Complex operator()(Real theta) const { return eval(Complex(theta)); }

  // Taylor coefficients at an anchor.  For a Gaussian these follow the
  // first-order recurrence from g' = -2 (theta - center)/w^2 * g; contour
  // sampling would see the peaked function explode off the axis, while the
  // recurrence stays exact.
  std::vector<Complex> taylor_at(Real anchor, int count) const {
    if (kind != Kind::Gaussian)
      throw ConfigError("taylor_at is for Gaussian sources");
    std::vector<Complex> c(count + 1, 0.0);
    Real d = anchor - center, w2 = width * width;
    c[0] = eval(Complex(anchor));
    for (int k = 0; k < count; ++k)
      c[k + 1] = -(2.0 / w2) *
                 (d * c[k] + (k > 0 ? c[k - 1] : Complex(0.0))) / Real(k + 1);
    return c;
  }

  // Effective support: a Gaussian is below 1e-28 of its peak outside +-8w,
  // which keeps the causal-vanishing checks at the 1e-12 level with margin.
  std::pair<Real, Real> support() const {
    if (is_zero()) return {0.0, 0.0};
    if (kind == Kind::Gaussian)
      return {center - 8.0 * width, center + 8.0 * width};
    return {0.0, PI};
  }

  void validate() const {
    if (is_zero()) return;
    if (kind == Kind::PolyCos) {
      if (tag != SupportTag::Global)
        throw ConfigError("polynomial sources have global support");
      return;
    }
    if (width <= 0.0) throw ConfigError("source width must be positive");
    auto [lo, hi] = support();
    Real rlo = 0.0, rhi = PI;
    if (tag == SupportTag::XPlus) rhi = kY1;
    if (tag == SupportTag::XZero) rlo = kY1, rhi = kY2;
    if (tag == SupportTag::XMinus) rlo = kY2;
    if (lo < rlo || hi > rhi)
      throw ConfigError("source support [" + std::to_string(lo) + ", " +
                        std::to_string(hi) + "] exceeds its region");
  }
};

// ---------------------------------------------------------------------------
// Fixed Gauss-Legendre quadrature: panels sized to the integrand's scale.
// The integrands here are entire functions sampled along ODE sweeps, so a
// dense fixed rule reaches ~1e-13 without re-sweep adaptivity; the tests
// verify the inverse identities rather than trusting the rule.

namespace quad {

// 15-point Gauss-Legendre nodes/weights on [-1, 1]
inline const Real kX[15] = {
    -0.9879925180204854, -0.9372733924007060, -0.8482065834104272,
    -0.7244177313601701, -0.5709721726085388, -0.3941513470775634,
    -0.2011940939974345, 0.0,                 0.2011940939974345,
    0.3941513470775634,  0.5709721726085388,  0.7244177313601701,
    0.8482065834104272,  0.9372733924007060,  0.9879925180204854};
inline const Real kW[15] = {
    0.0307532419961173, 0.0703660474881081, 0.1071592204671719,
    0.1395706779261543, 0.1662692058169939, 0.1861610000155622,
    0.1984314853271116, 0.2025782419255613, 0.1984314853271116,
    0.1861610000155622, 0.1662692058169939, 0.1395706779261543,
    0.1071592204671719, 0.0703660474881081, 0.0307532419961173};

struct Rule {
  std::vector<Real> nodes;
  std::vector<Real> weights;
};

inline Rule panels(Real a, Real b, Real max_panel) {
  Rule r;
  if (b <= a) return r;
  int m = std::max(4, (int)std::ceil((b - a) / max_panel));
  for (int p = 0; p < m; ++p) {
    Real pa = a + (b - a) * p / m, pb = a + (b - a) * (p + 1) / m;
    for (int i = 0; i < 15; ++i) {
      r.nodes.push_back(0.5 * (pa + pb) + 0.5 * (pb - pa) * kX[i]);
      r.weights.push_back(0.5 * (pb - pa) * kW[i]);
    }
  }
  return r;
}

}  // namespace quad

// ---------------------------------------------------------------------------
// Basis sweeps: values of a solution (launched from given data) at an
// arbitrary set of points, via one integrator pass per direction.

namespace detail {

struct SweepValues {
  std::vector<Complex> w, dw;
};

inline SweepValues sweep(const OdeCoefficients& ode, Real t0, Complex w0,
                         Complex dw0, const std::vector<Real>& pts,
                         const std::function<Complex(Real)>& src = {}) {
  SweepValues out;
  out.w.assign(pts.size(), 0.0);
  out.dw.assign(pts.size(), 0.0);
  std::vector<size_t> up, down;
  for (size_t i = 0; i < pts.size(); ++i) {
    if (pts[i] > t0 + 1e-15)
      up.push_back(i);
    else if (pts[i] < t0 - 1e-15)
      down.push_back(i);
    else {
      out.w[i] = w0;
      out.dw[i] = dw0;
    }
  }
  auto run = [&](std::vector<size_t>& idx, bool ascending) {
    if (idx.empty()) return;
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
      return ascending ? pts[a] < pts[b] : pts[a] > pts[b];
    });
    std::vector<Real> targets;
    for (size_t i : idx) targets.push_back(pts[i]);
    size_t k = 0;
    auto path = integrate(ode, t0, w0, dw0, targets, src);
    for (const auto& s : path.samples) {
      out.w[idx[k]] = s.w;
      out.dw[idx[k]] = s.dw;
      ++k;
    }
  };
  run(up, true);
  run(down, false);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Cap Green construction.  With uL the solution adapted at the lower-theta
// end of the cap and uR at the upper end,
//   u(t) = uR(t) int_lo^t uL s/(A W) + uL(t) int_t^hi uR s/(A W),
//   W = uL uR' - uL' uR,
// is the unique solution matching both end conditions.  For X_plus the ends
// are (pole-regular, smooth-at-Y1); for the X_minus piece of the past
// inverse they are (pure-singular-at-Y2, pole-regular).

class CapGreen {
 public:
  CapGreen(const ModeEngine& eng, Region cap, const ModeSource& src,
           bool lc_smooth_branch)
      : eng_(eng), cap_(cap), smooth_branch_(lc_smooth_branch) {
    pole_ = (cap == Region::XPlus) ? 0.0 : PI;
    lc_ = (cap == Region::XPlus) ? kY1 : kY2;
    side_ = (cap == Region::XPlus) ? +1 : -1;  // pole -> cone direction
    src_fn_ = [src](Real t) { return src.eval(Complex(t)); };

    auto [lo, hi] = src.support();
    empty_ = src.is_zero();
    if (!empty_) {
      Real pole_clear = pole_ + side_ * (ModeEngine::kPoleRadius + 0.02);
      if (side_ * (lo - pole_clear) < 0.0 && side_ > 0)
        throw ConfigError("source support reaches too close to the pole");
      if (side_ < 0 && hi > pole_clear)
        throw ConfigError("source support reaches too close to the pole");
      Real cone_clear = lc_ - side_ * 0.7 * eng.lc_radius();
      lo_ = std::max(lo, std::min(pole_clear, cone_clear));
      hi_ = std::min(hi, std::max(pole_clear, cone_clear));
      if (hi_ <= lo_) empty_ = true;
      // the light-cone end may clip the tail; that is only sound where the
      // clipped values are negligible
      Real edge = (cap == Region::XPlus) ? hi_ : lo_;
      if (!empty_ && std::abs(src.eval(Complex(edge))) >
                         1e-12 * std::abs(src.amplitude))
        throw ConfigError(
            "source is not negligible at the light cone; the Green "
            "construction needs clearance");
    }
    if (empty_) return;

    Real panel = std::min(0.02, (src.kind == ModeSource::Kind::Gaussian)
                                    ? src.width / 2.0
                                    : 0.02);
    rule_ = quad::panels(lo_, hi_, panel);

    // pole-adapted solution
    const auto& pb = eng.basis(pole_);
    Real tp = pole_ + side_ * 0.8 * ModeEngine::kPoleRadius;
    auto [wp, dwp] = pb.sing.eval(tp);
    auto vp = detail::sweep(eng.ode(), tp, wp, dwp, rule_.nodes);

    // cone-adapted solution (selected branch)
    auto [tc, wc, dwc] = branch_launch();
    auto vc = detail::sweep(eng.ode(), tc, wc, dwc, rule_.nodes);

    // assign left/right by theta order
    const auto& vL = (cap == Region::XPlus) ? vp : vc;
    const auto& vR = (cap == Region::XPlus) ? vc : vp;

    IL_full_ = 0.0;
    IR_full_ = 0.0;
    for (size_t i = 0; i < rule_.nodes.size(); ++i) {
      Real t = rule_.nodes[i];
      Complex W = vL.w[i] * vR.dw[i] - vL.dw[i] * vR.w[i];
      Complex shat = src_fn_(t) / eng.ode().A(t) / W;
      IL_full_ += rule_.weights[i] * vL.w[i] * shat;  // multiplies uR
      IR_full_ += rule_.weights[i] * vR.w[i] * shat;  // multiplies uL
    }
  }

  bool empty() const { return empty_; }

  // coefficient of the cone-adapted branch in the output near the cone
  // (= the smooth boundary value for the smooth branch, since the branch is
  // normalized to 1 at the cone)
  Complex cone_coefficient() const {
    if (empty_) return 0.0;
    return (cap_ == Region::XPlus) ? IL_full_ : IR_full_;
  }

  Complex eval(Real theta) const {
    if (empty_) return 0.0;
    if (theta <= lo_ + 1e-14) {
      Complex c = IR_full_;  // coefficient of uL below the support
      return c * end_solution(/*left=*/true, theta);
    }
    if (theta >= hi_ - 1e-14) {
      Complex c = IL_full_;
      return c * end_solution(false, theta);
    }
    // inside the support: inhomogeneous continuation from the upper end
    auto [w, dw] = end_solution_with_deriv(false, hi_);
    auto path = integrate(eng_.ode(), hi_, IL_full_ * w, IL_full_ * dw, theta,
                          16, src_fn_);
    return path.terminal().w;
  }

 private:
  std::tuple<Real, Complex, Complex> branch_launch() const {
    const auto& lb = eng_.basis(lc_);
    const FrobeniusExpansion& br = smooth_branch_ ? lb.smooth : lb.sing;
    Real tc = lc_ - side_ * 0.8 * eng_.lc_radius();
    auto [w, dw] = br.eval(tc);
    return {tc, w, dw};
  }

  Complex end_solution(bool left, Real theta) const {
    return end_solution_with_deriv(left, theta).first;
  }

  std::pair<Complex, Complex> end_solution_with_deriv(bool left,
                                                      Real theta) const {
    bool pole_end = (cap_ == Region::XPlus) == left;
    if (pole_end) return eng_.eval_regular(cap_, theta);
    const auto& lb = eng_.basis(lc_);
    const FrobeniusExpansion& br = smooth_branch_ ? lb.smooth : lb.sing;
    if (std::abs(theta - lc_) <= eng_.lc_radius()) return br.eval(theta);
    auto [tc, wc, dwc] = branch_launch();
    auto v = detail::sweep(eng_.ode(), tc, wc, dwc, {theta});
    return {v.w[0], v.dw[0]};
  }

  const ModeEngine& eng_;
  Region cap_;
  bool smooth_branch_, empty_ = false;
  Real pole_ = 0.0, lc_ = 0.0, lo_ = 0.0, hi_ = 0.0;
  int side_ = +1;
  std::function<Complex(Real)> src_fn_;
  quad::Rule rule_;
  Complex IL_full_ = 0.0, IR_full_ = 0.0;
};

inline Complex resolvent_hyperbolic_mode(const ModeProblem& mp,
                                         const ModeSource& src, Real theta) {
  if (src.tag != SupportTag::XPlus && !src.is_zero())
    throw ConfigError("cap resolvent needs a source supported in X_plus");
  if (theta <= 0.0 || theta >= kY1) throw ConfigError("theta outside X_plus");
  ModeEngine eng(mp);
  const auto& cc = eng.cap_connection(Region::XPlus);
  if (std::abs(cc.singular) < 1e-10 * std::max(std::abs(cc.smooth), Real(1)))
    throw ResolventPole("cap resolvent pole");
  CapGreen g(eng, Region::XPlus, src, /*lc_smooth_branch=*/true);
  return g.eval(theta);
}

// ---------------------------------------------------------------------------
// Backward belt solution: the causal Volterra kernel with zero data at Y1,
//   u(t) = int_{Y1}^{t} [u1(t') u2(t) - u1(t) u2(t')] s(t') / (A W)(t') dt',
// with (u1, u2) the Y1 Frobenius pair; u vanishes identically below the
// source support.

class BeltBackward {
 public:
  BeltBackward(const ModeEngine& eng, const ModeSource& src) : eng_(eng) {
    src_fn_ = [src](Real t) { return src.eval(Complex(t)); };
    auto [slo, shi] = src.support();
    lo_ = std::max(slo, kY1 + 0.7 * eng.lc_radius());
    hi_ = std::min(shi, kY2 - 0.7 * eng.lc_radius());
    empty_ = src.is_zero() || hi_ <= lo_;
    if (empty_) return;
    if (std::max(std::abs(src.eval(Complex(lo_))),
                 std::abs(src.eval(Complex(hi_)))) >
        1e-12 * std::abs(src.amplitude))
      throw ConfigError(
          "source is not negligible at the light cones; the Volterra "
          "construction needs clearance");
    panel_ = std::min(0.02, (src.kind == ModeSource::Kind::Gaussian)
                                ? src.width / 2.0
                                : 0.02);
    std::tie(I1_full_, I2_full_) = integrals(lo_, hi_);
  }

  bool empty() const { return empty_; }

  Complex eval(Real theta) const {
    if (theta <= kY1 || theta >= kY2) throw ConfigError("theta not in belt");
    if (empty_ || theta <= lo_) return 0.0;
    Complex I1 = I1_full_, I2 = I2_full_;
    if (theta < hi_) std::tie(I1, I2) = integrals(lo_, theta);
    auto [u1, u2] = basis_at(theta);
    return u2 * I1 - u1 * I2;
  }

  // coefficients of the extension past the support in the Y1 basis pair
  // (delta-normalized singular, smooth)
  std::pair<Complex, Complex> extension_coefficients() const {
    return {-I2_full_, I1_full_};
  }

 private:
  std::pair<Complex, Complex> integrals(Real a, Real b) const {
    auto rule = quad::panels(a, b, panel_);
    const auto& lb = eng_.basis(kY1);
    Real t0 = kY1 + 0.8 * eng_.lc_radius();
    auto [w1, dw1] = lb.sing.eval(t0);
    auto [w2, dw2] = lb.smooth.eval(t0);
    auto v1 = detail::sweep(eng_.ode(), t0, w1, dw1, rule.nodes);
    auto v2 = detail::sweep(eng_.ode(), t0, w2, dw2, rule.nodes);
    Complex I1 = 0.0, I2 = 0.0;
    for (size_t i = 0; i < rule.nodes.size(); ++i) {
      Complex W = v1.w[i] * v2.dw[i] - v1.dw[i] * v2.w[i];
      Complex shat = src_fn_(rule.nodes[i]) / eng_.ode().A(rule.nodes[i]) / W;
      I1 += rule.weights[i] * v1.w[i] * shat;
      I2 += rule.weights[i] * v2.w[i] * shat;
    }
    return {I1, I2};
  }

  std::pair<Complex, Complex> basis_at(Real theta) const {
    const auto& lb = eng_.basis(kY1);
    if (std::abs(theta - kY1) <= eng_.lc_radius())
      return {lb.sing.eval(theta).first, lb.smooth.eval(theta).first};
    Real t0 = kY1 + 0.8 * eng_.lc_radius();
    auto [w1, dw1] = lb.sing.eval(t0);
    auto [w2, dw2] = lb.smooth.eval(t0);
    auto a = detail::sweep(eng_.ode(), t0, w1, dw1, {theta});
    auto b = detail::sweep(eng_.ode(), t0, w2, dw2, {theta});
    return {a.w[0], b.w[0]};
  }

  const ModeEngine& eng_;
  std::function<Complex(Real)> src_fn_;
  Real lo_ = 0.0, hi_ = 0.0, panel_ = 0.02;
  bool empty_ = true;
  Complex I1_full_ = 0.0, I2_full_ = 0.0;
};

inline Complex backward_solution_desitter_mode(const ModeProblem& mp,
                                               const ModeSource& src,
                                               Real theta) {
  if (src.tag != SupportTag::XZero && !src.is_zero())
    throw ConfigError("backward belt solve needs a source supported in X0");
  ModeEngine eng(mp);
  BeltBackward bb(eng, src);
  return bb.eval(theta);
}

// ---------------------------------------------------------------------------
// Global past inverse, assembled region by region: cap resolvent, then belt
// = backward Poisson of the matched face data + causal belt solution, then
// X_minus = Poisson multiple of the pi-regular solution + the Green piece
// that is pure-singular at Y2.

class GlobalInverseAssembled {
 public:
  GlobalInverseAssembled(const ModeEngine& eng, const ModeSource& src)
      : eng_(eng),
        cap_plus_(eng, Region::XPlus, restrict_to(src, SupportTag::XPlus),
                  /*lc_smooth_branch=*/true),
        belt_(eng, restrict_to(src, SupportTag::XZero)),
        cap_minus_(eng, Region::XMinus, restrict_to(src, SupportTag::XMinus),
                   /*lc_smooth_branch=*/false) {
    const auto& capP = eng.cap_connection(Region::XPlus);
    if (std::abs(capP.singular) <
        1e-10 * std::max(std::abs(capP.smooth), Real(1)))
      throw GlobalPole("X_plus resolvent pole");
    v_plus_ = cap_plus_.cone_coefficient();

    // Y2 face data of the belt piece: transfer the Poisson part (0, v+)
    // plus the Volterra extension coefficients
    auto [b_sing, b_smooth] = belt_.extension_coefficients();
    Complex data_sing = b_sing / eng.mu_factor(kY1);
    Complex data_smooth = b_smooth + v_plus_;
    auto y2 = eng.belt_transfer(data_sing, data_smooth);
    p_tot_ = y2.coeff_singular;
    q_tot_ = y2.coeff_smooth;

    const auto& capM = eng.cap_connection(Region::XMinus);
    if (std::abs(capM.smooth) <
        1e-10 * std::max(std::abs(capM.singular), Real(1)))
      throw GlobalPole("X_minus(-sigma) resolvent pole");
    kappa_ = q_tot_ / capM.smooth;
  }

  Complex eval(Real theta) const {
    if (theta <= 0.0 || theta >= PI) throw ConfigError("theta out of range");
    if (theta < kY1) return cap_plus_.eval(theta);
    if (theta < kY2) {
      // backward Poisson with the matched smooth value, plus the causal part
      Complex hom;
      if (std::abs(theta - kY1) <= eng_.lc_radius()) {
        hom = v_plus_ * eng_.basis(kY1).smooth.eval(theta).first;
      } else {
        auto [w0, dw0] = eng_.lc_launch(kY1, +1, 0.0, v_plus_);
        auto path = integrate(eng_.ode(), kY1 + 0.8 * eng_.lc_radius(), w0,
                              dw0, theta, 16);
        hom = path.terminal().w;
      }
      return hom + belt_.eval(theta);
    }
    return kappa_ * eng_.eval_regular(Region::XMinus, theta).first +
           cap_minus_.eval(theta);
  }

  Complex boundary_value_y1() const { return v_plus_; }

  // distributional split at Y2, for diagnostics
  Vec2 y2_split() const {
    Mat2 M = lightcone_matrix(eng_.problem().pt.sigma);
    const auto& capM = eng_.cap_connection(Region::XMinus);
    Complex cap_side = kappa_ * capM.singular +
                       cap_minus_.cone_coefficient() / eng_.mu_factor(kY2);
    Vec2 rhs;
    rhs << p_tot_, cap_side;
    return Vec2(M.colPivHouseholderQr().solve(rhs));
  }

 private:
  static ModeSource restrict_to(const ModeSource& src, SupportTag tag) {
    if (src.is_zero()) return ModeSource::zero();
    if (src.tag == tag) return src;
    if (src.tag != SupportTag::Global) return ModeSource::zero();
    if (src.kind == ModeSource::Kind::Gaussian) {
      auto [lo, hi] = src.support();
      Real rlo = 0.0, rhi = PI;
      if (tag == SupportTag::XPlus) rhi = kY1;
      if (tag == SupportTag::XZero) rlo = kY1, rhi = kY2;
      if (tag == SupportTag::XMinus) rlo = kY2;
      if (lo >= rlo && hi <= rhi) {
        ModeSource s = src;
        s.tag = tag;
        return s;
      }
      if (hi <= rlo || lo >= rhi) return ModeSource::zero();
      throw ConfigError(
          "assembled inverse needs sources clear of the light cones; "
          "use a sum of region-supported parts");
    }
    throw ConfigError("assembled inverse cannot split this source");
  }

  const ModeEngine& eng_;
  CapGreen cap_plus_;
  BeltBackward belt_;
  CapGreen cap_minus_;
  Complex v_plus_ = 0.0, p_tot_ = 0.0, q_tot_ = 0.0, kappa_ = 0.0;
};

inline Complex global_inverse_assembled_mode(const ModeProblem& mp,
                                             const ModeSource& src,
                                             Real theta) {
  ModeEngine eng(mp);
  return GlobalInverseAssembled(eng, src).eval(theta);
}

// ---------------------------------------------------------------------------
// Global past inverse as one linear solve.  Unknowns (c, a~+, a~-, kappa):
// cap piece u_P + c R_a, belt piece launched from the near light-cone face,
// far-cap piece u_PM + kappa R_b; equations: vanishing singular coefficient
// at the near cone, the exp-split matching at the far cone, and the
// smooth-value balance there.  The future variant mirrors the cone roles.

class GlobalInverseDirect {
 public:
  GlobalInverseDirect(const ModeEngine& eng, const ModeSource& src,
                      bool past = true)
      : eng_(eng), past_(past) {
    src.validate();
    src_fn_ = [src](Real t) { return src.eval(Complex(t)); };
    if (!src.is_zero()) {
      auto [lo, hi] = src.support();
      if (lo < ModeEngine::kPoleRadius + 0.02 ||
          hi > PI - ModeEngine::kPoleRadius - 0.02)
        throw ConfigError("source support reaches too close to a pole");
    }
    const auto& ode = eng.ode();
    const Complex sigma = eng.problem().pt.sigma;

    pole_a_ = past ? 0.0 : PI;
    lc_a_ = past ? kY1 : kY2;
    lc_b_ = past ? kY2 : kY1;
    cap_a_ = past ? Region::XPlus : Region::XMinus;
    cap_b_ = past ? Region::XMinus : Region::XPlus;
    sa_ = past ? +1 : -1;

    Real r = eng.lc_radius();
    Complex f_a = eng.mu_factor(lc_a_), f_b = eng.mu_factor(lc_b_);

    // Taylor-particular solutions where the source touches a light cone
    u_T_a_ = particular_near(lc_a_, src);
    u_T_b_ = particular_near(lc_b_, src);

    // cap A: inhomogeneous particular from the pole, fitted at lc_a
    auto fitA = fit_minus_taylor(
        lc_a_,
        integrate(ode, pole_a_ + sa_ * 0.8 * ModeEngine::kPoleRadius, 0.0,
                  0.0, detail::annulus_targets(lc_a_, -sa_, r), src_fn_),
        u_T_a_);
    alpha_ = fitA.coeff_singular / f_a;
    beta_ = fitA.coeff_smooth;
    const auto& ra = eng.cap_connection(cap_a_);

    // belt transfers to lc_b (belt side): inhomogeneous with the u_T_a
    // data, and the homogeneous smooth basis
    Real t0 = lc_a_ + sa_ * 0.8 * r;
    auto [wt, dwt] = taylor_value(u_T_a_, t0);
    auto T0 = fit_minus_taylor(
        lc_b_,
        integrate(ode, t0, wt, dwt, detail::annulus_targets(lc_b_, -sa_, r),
                  src_fn_),
        u_T_b_);
    auto [ws, dws] = eng.basis(lc_a_).smooth.eval(t0);
    auto T1 = fit_minus_taylor(
        lc_b_,
        integrate(ode, t0, ws, dws, detail::annulus_targets(lc_b_, -sa_, r)),
        std::nullopt);
    Complex p0 = T0.coeff_singular / f_b, q0 = T0.coeff_smooth;
    Complex p1 = T1.coeff_singular / f_b, q1 = T1.coeff_smooth;

    // cap B: inhomogeneous particular from the far pole, fitted at lc_b
    auto fitB = fit_minus_taylor(
        lc_b_,
        integrate(ode, (PI - pole_a_) - sa_ * 0.8 * ModeEngine::kPoleRadius,
                  0.0, 0.0, detail::annulus_targets(lc_b_, sa_, r), src_fn_),
        u_T_b_);
    Complex alpha_b = fitB.coeff_singular / f_b;
    Complex beta_b = fitB.coeff_smooth;
    const auto& rb = eng.cap_connection(cap_b_);

    Eigen::Matrix4cd A = Eigen::Matrix4cd::Zero();
    Eigen::Vector4cd rhs = Eigen::Vector4cd::Zero();
    Complex em = std::exp(-PI * sigma), ep = std::exp(PI * sigma);
    A(0, 0) = ra.singular;            // E1: alpha + c a_s = 0
    rhs(0) = -alpha_;
    A(1, 0) = -ra.smooth * p1;        // E2: exp-split = transferred singular
    A(1, 1) = em;
    A(1, 2) = ep;
    rhs(1) = p0 + beta_ * p1;
    A(2, 1) = 1.0;                    // E3: cap-side singular at lc_b
    A(2, 2) = 1.0;
    A(2, 3) = -rb.singular;
    rhs(2) = alpha_b;
    A(3, 0) = ra.smooth * q1;         // E4: smooth-value balance at lc_b
    A(3, 3) = -rb.smooth;
    rhs(3) = beta_b - q0 - beta_ * q1;

    Eigen::JacobiSVD<Eigen::Matrix4cd> svd(
        A, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Real cond = svd.singularValues()(0) / svd.singularValues()(3);
    if (!(cond < 1e10))
      throw GlobalPole("global solve matrix is singular (condition " +
                       std::to_string(cond) + ")");
    Eigen::Vector4cd x = svd.solve(rhs);
    c_ = x(0);
    a_tilde_ = {x(1), x(2)};
    kappa_ = x(3);
    v_ = beta_ + c_ * ra.smooth;
    smooth_certificate_ = std::abs(alpha_ + c_ * ra.singular);
  }

  Complex c() const { return c_; }
  Complex kappa() const { return kappa_; }
  Vec2 split_b() const { return Vec2(a_tilde_[0], a_tilde_[1]); }
  Real smoothness_certificate() const { return smooth_certificate_; }

  Complex eval(Real theta) const {
    if (theta <= 0.0 || theta >= PI) throw ConfigError("theta out of range");
    const auto& ode = eng_.ode();
    bool in_a = past_ ? (theta < kY1) : (theta > kY2);
    bool in_belt = theta > kY1 && theta < kY2;
    if (in_a) {
      Real t0 = pole_a_ + sa_ * 0.8 * ModeEngine::kPoleRadius;
      Complex up = 0.0;
      if (sa_ * (theta - t0) > 1e-12) {
        auto path = integrate(ode, t0, 0.0, 0.0, theta, 16, src_fn_);
        up = path.terminal().w;
      }
      return up + c_ * eng_.eval_regular(cap_a_, theta).first;
    }
    if (in_belt) {
      Real t0 = lc_a_ + sa_ * 0.8 * eng_.lc_radius();
      auto [wt, dwt] = taylor_value(u_T_a_, t0);
      auto [ws, dws] = eng_.basis(lc_a_).smooth.eval(t0);
      Complex w0 = wt + v_ * ws, dw0 = dwt + v_ * dws;
      if (std::abs(theta - t0) < 1e-12) return w0;
      auto path = integrate(ode, t0, w0, dw0, theta, 16, src_fn_);
      return path.terminal().w;
    }
    Real t0 = (PI - pole_a_) - sa_ * 0.8 * ModeEngine::kPoleRadius;
    Complex up = 0.0;
    if (-sa_ * (theta - t0) > 1e-12) {
      auto path = integrate(eng_.ode(), t0, 0.0, 0.0, theta, 16, src_fn_);
      up = path.terminal().w;
    }
    return up + kappa_ * eng_.eval_regular(cap_b_, theta).first;
  }

 private:
  std::optional<FrobeniusExpansion> particular_near(
      Real lc, const ModeSource& src) const {
    if (src.is_zero()) return std::nullopt;
    Real r = 1.5 * eng_.lc_radius();
    if (src.kind == ModeSource::Kind::Gaussian) {
      // only subtract the Taylor particular solution where the source is
      // actually felt near the cone; 5 widths out it is below 2e-11
      if (std::abs(src.center - lc) > r + 5.0 * src.width)
        return std::nullopt;
      if (src.width < eng_.lc_radius() / 4.5)
        throw ConfigError(
            "source too narrow to match across a light cone; widen it or "
            "keep it clear of the cones");
      FrobeniusOptions opt;
      return particular_solution(eng_.ode(), lc,
                                 src.taylor_at(lc, opt.max_order), 0.0, opt);
    }
    auto [lo, hi] = src.support();
    if (hi < lc - r || lo > lc + r) return std::nullopt;
    auto fn = [&src](Complex t) { return src.eval(t); };
    return particular_solution(eng_.ode(), lc, fn, 0.0);
  }

  static std::pair<Complex, Complex> taylor_value(
      const std::optional<FrobeniusExpansion>& uT, Real theta) {
    if (!uT) return {0.0, 0.0};
    return uT->eval(theta);
  }

  ConnectionData fit_minus_taylor(
      Real lc, SolutionPath path,
      const std::optional<FrobeniusExpansion>& uT) const {
    if (uT) {
      for (auto& s : path.samples) {
        auto [w, dw] = uT->eval(s.theta);
        s.w -= w;
        s.dw -= dw;
      }
    }
    return connect(eng_.basis(lc), path);
  }

  const ModeEngine& eng_;
  bool past_;
  std::function<Complex(Real)> src_fn_;
  Real pole_a_, lc_a_, lc_b_;
  Region cap_a_, cap_b_;
  int sa_;
  std::optional<FrobeniusExpansion> u_T_a_, u_T_b_;
  Complex alpha_ = 0.0, beta_ = 0.0, c_ = 0.0, kappa_ = 0.0, v_ = 0.0;
  std::array<Complex, 2> a_tilde_{};
  Real smooth_certificate_ = 0.0;
};

inline Complex global_inverse_direct_mode(const ModeProblem& mp,
                                          const ModeSource& src, Real theta,
                                          bool past = true) {
  ModeEngine eng(mp);
  return GlobalInverseDirect(eng, src, past).eval(theta);
}

// ---------------------------------------------------------------------------
// Pole localization.

enum class DeterminantKind { XPlus, XMinusRev, Global };

inline const char* determinant_name(DeterminantKind k) {
  switch (k) {
    case DeterminantKind::XPlus: return "x_plus";
    case DeterminantKind::XMinusRev: return "x_minus_rev";
    case DeterminantKind::Global: return "global";
  }
  return "?";
}

struct Window {
  Real re_lo, re_hi, im_lo, im_hi;
  bool contains(Complex z, Real pad = 0.0) const {
    return z.real() >= re_lo - pad && z.real() <= re_hi + pad &&
           z.imag() >= im_lo - pad && z.imag() <= im_hi + pad;
  }
};

struct PoleZero {
  Complex sigma;
  int mult = 1;
  Real residual = 0.0;
  int ell = 0;
};

struct PoleReport {
  Window window{};
  DeterminantKind which = DeterminantKind::XPlus;
  int ell_lo = 0, ell_hi = 0;
  std::vector<PoleZero> zeros;
  bool counts_consistent = true;
};

namespace detail {

// The connection determinant for one mode, as a function of sigma.
inline Complex pole_determinant(DeterminantKind which, Complex sigma, int n,
                                int ell, const RadialProfile& prof) {
  ModeProblem mp{SpectralPoint{sigma, n}, ell, prof};
  ModeEngine eng(mp);
  switch (which) {
    case DeterminantKind::XPlus:
      return eng.cap_connection(Region::XPlus).singular;
    case DeterminantKind::XMinusRev:
      // by the mu^{-i sigma} duality, the smooth coefficient of the
      // pi-regular sigma-solution is the singular coefficient at -sigma
      return eng.cap_connection(Region::XMinus).smooth;
    case DeterminantKind::Global: {
      const auto& ra = eng.cap_connection(Region::XPlus);
      const auto& rb = eng.cap_connection(Region::XMinus);
      auto T1 = eng.belt_transfer(0.0, 1.0);
      Eigen::Matrix4cd A = Eigen::Matrix4cd::Zero();
      Complex em = std::exp(-PI * sigma), ep = std::exp(PI * sigma);
      A(0, 0) = ra.singular;
      A(1, 0) = -ra.smooth * T1.coeff_singular;
      A(1, 1) = em;
      A(1, 2) = ep;
      A(2, 1) = 1.0;
      A(2, 2) = 1.0;
      A(2, 3) = -rb.singular;
      A(3, 0) = ra.smooth * T1.coeff_smooth;
      A(3, 3) = -rb.smooth;
      // divide out the sinh factor of the light-cone matrix so the zeros
      // are exactly the solvability obstructions, not the iZ artifacts of
      // the (e^{-pi sigma} - e^{pi sigma}) prefactor
      return A.determinant() / (em - ep);
    }
  }
  throw ConfigError("unknown determinant kind");
}

class DetCache {
 public:
  using Fn = std::function<Complex(Complex)>;
  explicit DetCache(Fn fn) : fn_(std::move(fn)) {}
  Complex operator()(Complex z) {
    std::pair<Real, Real> k{z.real(), z.imag()};
    {
      std::lock_guard<std::mutex> lk(mu_);
      auto it = map_.find(k);
      if (it != map_.end()) return it->second;
    }
    Complex v = fn_(z);
    std::lock_guard<std::mutex> lk(mu_);
    map_.emplace(k, v);
    return v;
  }

 private:
  struct Hash {
    size_t operator()(const std::pair<Real, Real>& p) const {
      std::hash<Real> h;
      return h(p.first) * 1000003u ^ h(p.second);
    }
  };
  Fn fn_;
  std::mutex mu_;
  std::unordered_map<std::pair<Real, Real>, Complex, Hash> map_;
};

struct Box {
  Real re_lo, re_hi, im_lo, im_hi;
  Real width() const { return re_hi - re_lo; }
  Real height() const { return im_hi - im_lo; }
  Complex center() const {
    return {0.5 * (re_lo + re_hi), 0.5 * (im_lo + im_hi)};
  }
};

// winding number of f along the box boundary, by adaptive phase tracking
inline int winding(DetCache& f, const Box& b, int depth_budget = 14) {
  const Complex corners[4] = {{b.re_lo, b.im_lo},
                              {b.re_hi, b.im_lo},
                              {b.re_hi, b.im_hi},
                              {b.re_lo, b.im_hi}};
  Real total = 0.0;
  std::function<Real(Complex, Complex, Complex, Complex, int)> seg =
      [&](Complex za, Complex zb, Complex fa, Complex fb, int depth) -> Real {
    if (std::abs(fa) == 0.0 || std::abs(fb) == 0.0)
      throw ContourThroughZero("determinant vanishes on the contour");
    Real d = std::arg(fb / fa);
    if (std::abs(d) < PI / 2.0) return d;
    if (depth >= depth_budget)
      throw ContourThroughZero("phase tracking failed to settle");
    Complex zm = 0.5 * (za + zb);
    Complex fm = f(zm);
    return seg(za, zm, fa, fm, depth + 1) + seg(zm, zb, fm, fb, depth + 1);
  };
  for (int e = 0; e < 4; ++e) {
    Complex z0 = corners[e], z1 = corners[(e + 1) % 4];
    const int m = 8;
    for (int i = 0; i < m; ++i) {
      Complex za = z0 + (z1 - z0) * (Real(i) / m);
      Complex zb = z0 + (z1 - z0) * (Real(i + 1) / m);
      total += seg(za, zb, f(za), f(zb), 0);
    }
  }
  return (int)std::lround(total / (2.0 * PI));
}

inline int winding_with_retry(DetCache& f, Box b) {
  for (int attempt = 0;; ++attempt) {
    try {
      return winding(f, b);
    } catch (const ContourThroughZero&) {
      if (attempt >= 3) throw;
      Real jx = 0.013 * b.width() * (attempt + 1);
      Real jy = 0.017 * b.height() * (attempt + 1);
      b = Box{b.re_lo - jx, b.re_hi + jx, b.im_lo - jy, b.im_hi + jy};
    }
  }
}

inline Complex newton_polish(DetCache& f, Complex z, Real* residual) {
  const Real h = 1e-6;
  for (int it = 0; it < 60; ++it) {
    Complex fv = f(z);
    Complex df = (f(z + h) - f(z - h)) / (2.0 * h);
    if (std::abs(df) == 0.0) break;
    Complex step = fv / df;
    z -= step;
    if (std::abs(step) < 1e-12 * (1.0 + std::abs(z))) break;
  }
  if (residual) *residual = std::abs(f(z));
  return z;
}

inline void find_zeros_in_box(DetCache& f, const Box& box,
                              std::vector<PoleZero>& out, int ell,
                              int depth = 0) {
  int w = winding_with_retry(f, box);
  if (w == 0) return;
  if (std::max(box.width(), box.height()) < 8e-4 ||
      (w == 1 && std::max(box.width(), box.height()) < 0.1)) {
    Real res = 0.0;
    Complex z = newton_polish(f, box.center(), &res);
    Box small{z.real() - 2e-4, z.real() + 2e-4, z.imag() - 2e-4,
              z.imag() + 2e-4};
    int mult = w;
    try {
      mult = winding_with_retry(f, small);
    } catch (const ContourThroughZero&) {
    }
    out.push_back(PoleZero{z, std::max(mult, 1), res, ell});
    return;
  }
  // split slightly off-center so zeros at round coordinates do not land on
  // the subdivision lines
  Real rm = box.re_lo + 0.5137 * box.width();
  Real im = box.im_lo + 0.4863 * box.height();
  Box quads[4] = {{box.re_lo, rm, box.im_lo, im},
                  {rm, box.re_hi, box.im_lo, im},
                  {box.re_lo, rm, im, box.im_hi},
                  {rm, box.re_hi, im, box.im_hi}};
  for (auto& q : quads) find_zeros_in_box(f, q, out, ell, depth + 1);
}

// decompose the window into boxes that keep clear of sigma in -i Z, where
// the margin guard (and, for integer dimensions, Gamma-type poles of the
// determinants themselves) forbids evaluation
inline std::vector<Box> decompose_window(const Window& w, Real excl = 0.04) {
  std::vector<Real> xs = {w.re_lo, w.re_hi};
  for (Real x = std::ceil(w.re_lo); x <= std::floor(w.re_hi) + 1e-9; x += 1.0)
    if (x != 0.0 && x > w.re_lo + 0.05 && x < w.re_hi - 0.05) xs.push_back(x);
  if (w.re_lo < -excl && w.re_hi > excl) {
    xs.push_back(-excl);
    xs.push_back(excl);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  std::vector<Real> ys = {w.im_lo, w.im_hi};
  for (Real k = std::ceil(w.im_lo); k <= std::floor(w.im_hi) + 1e-9; k += 1.0) {
    if (k - excl > w.im_lo + 1e-9 && k - excl < w.im_hi) ys.push_back(k - excl);
    if (k + excl > w.im_lo && k + excl < w.im_hi - 1e-9) ys.push_back(k + excl);
  }
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());

  std::vector<Box> boxes;
  for (size_t i = 0; i + 1 < xs.size(); ++i)
    for (size_t j = 0; j + 1 < ys.size(); ++j) {
      Box b{xs[i], xs[i + 1], ys[j], ys[j + 1]};
      Complex c = b.center();
      Real knear = std::round(-c.imag());
      if (std::abs(c.real()) < excl && std::abs(-c.imag() - knear) < excl)
        continue;  // excluded square around sigma = -i k
      boxes.push_back(b);
    }
  return boxes;
}

}  // namespace detail

inline PoleReport find_poles(int n, int ell_lo, int ell_hi,
                             const RadialProfile& prof, const Window& window,
                             DeterminantKind which) {
  if (window.im_hi > -0.05 && window.im_lo < 0.05)
    throw ConfigError("window must keep clear of the real axis");
  PoleReport rep;
  rep.window = window;
  rep.which = which;
  rep.ell_lo = ell_lo;
  rep.ell_hi = ell_hi;

  auto boxes = detail::decompose_window(window);
  struct Task {
    int ell;
    detail::Box box;
  };
  std::vector<Task> tasks;
  for (int ell = ell_lo; ell <= ell_hi; ++ell)
    for (const auto& b : boxes) tasks.push_back({ell, b});

  std::vector<std::unique_ptr<detail::DetCache>> caches;
  for (int ell = ell_lo; ell <= ell_hi; ++ell)
    caches.push_back(std::make_unique<detail::DetCache>(
        [which, n, ell, prof](Complex z) {
          return detail::pole_determinant(which, z, n, ell, prof);
        }));

  std::vector<std::vector<PoleZero>> results(tasks.size());
  std::atomic<bool> inconsistent{false};
  parallel_for(tasks.size(), [&](size_t i) {
    auto& cache = *caches[tasks[i].ell - ell_lo];
    std::vector<PoleZero> zs;
    int w = detail::winding_with_retry(cache, tasks[i].box);
    if (w != 0)
      detail::find_zeros_in_box(cache, tasks[i].box, zs, tasks[i].ell);
    int count = 0;
    for (auto& z : zs) count += z.mult;
    if (count != w) inconsistent = true;
    results[i] = std::move(zs);
  });

  for (auto& r : results)
    for (auto& z : r)
      if (window.contains(z.sigma, 1e-6)) rep.zeros.push_back(z);
  std::sort(rep.zeros.begin(), rep.zeros.end(),
            [](const PoleZero& a, const PoleZero& b) {
              if (a.ell != b.ell) return a.ell < b.ell;
              if (a.sigma.real() != b.sigma.real())
                return a.sigma.real() < b.sigma.real();
              return a.sigma.imag() < b.sigma.imag();
            });
  rep.zeros.erase(std::unique(rep.zeros.begin(), rep.zeros.end(),
                              [](const PoleZero& a, const PoleZero& b) {
                                return a.ell == b.ell &&
                                       std::abs(a.sigma - b.sigma) < 1e-8;
                              }),
                  rep.zeros.end());
  rep.counts_consistent = !inconsistent;
  return rep;
}

}  // namespace lightcone

#endif  // LIGHTCONE_INVERSE_HPP
