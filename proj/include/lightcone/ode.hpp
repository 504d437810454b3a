#ifndef LIGHTCONE_ODE_HPP
#define LIGHTCONE_ODE_HPP

// Explicit Dormand-Prince 8(5,3) integrator for complex-valued first-order
// systems, with step clamping so solutions are produced *exactly at* a
// sorted list of output points (no interpolation error enters the
// connection fits).

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "lightcone/common.hpp"

namespace lightcone {

using CVec = std::vector<Complex>;
using OdeRhs = std::function<void(Real, const CVec&, CVec&)>;

struct OdeStats {
  long steps = 0, accepted = 0, rejected = 0, evals = 0;
};

namespace dop853_detail {
// Dormand-Prince 8(5,3) tableau (Hairer, Norsett & Wanner).
constexpr Real c2 = 0.526001519587677318785587544488e-01,
               c3 = 0.789002279381515978178381316732e-01,
               c4 = 0.118350341907227396726757197510e+00,
               c5 = 0.281649658092772603273242802490e+00,
               c6 = 0.333333333333333333333333333333e+00, c7 = 0.25e+00,
               c8 = 0.307692307692307692307692307692e+00,
               c9 = 0.651282051282051282051282051282e+00, c10 = 0.6e+00,
               c11 = 0.857142857142857142857142857142e+00;
constexpr Real b1 = 5.42937341165687622380535766363e-2,
               b6 = 4.45031289275240888144113950566e0,
               b7 = 1.89151789931450038304281599044e0,
               b8 = -5.8012039600105847814672114227e0,
               b9 = 3.1116436695781989440891606237e-1,
               b10 = -1.52160949662516078556178806805e-1,
               b11 = 2.01365400804030348374776537501e-1,
               b12 = 4.47106157277725905176885569043e-2;
constexpr Real a21 = 5.26001519587677318785587544488e-2,
               a31 = 1.97250569845378994544595329183e-2,
               a32 = 5.91751709536136983633785987549e-2,
               a41 = 2.95875854768068491816892993775e-2,
               a43 = 8.87627564304205475450678981324e-2,
               a51 = 2.41365134159266685502369798665e-1,
               a53 = -8.84549479328286085344864962717e-1,
               a54 = 9.24834003261792003115737966543e-1,
               a61 = 3.7037037037037037037037037037e-2,
               a64 = 1.70828608729473871279604482173e-1,
               a65 = 1.25467687566822425016691814123e-1,
               a71 = 3.7109375e-2, a74 = 1.70252211019544039314978060272e-1,
               a75 = 6.02165389804559606850219397283e-2, a76 = -1.7578125e-2;
constexpr Real a81 = 3.70920001185047927108779319836e-2,
               a84 = 1.70383925712239993810214054705e-1,
               a85 = 1.07262030446373284651809199168e-1,
               a86 = -1.53194377486244017527936158236e-2,
               a87 = 8.27378916381402288758473766002e-3,
               a91 = 6.24110958716075717114429577812e-1,
               a94 = -3.36089262944694129406857109825e0,
               a95 = -8.68219346841726006818189891453e-1,
               a96 = 2.75920996994467083049415600797e1,
               a97 = 2.01540675504778934086186788979e1,
               a98 = -4.34898841810699588477366255144e1,
               a101 = 4.77662536438264365890433908527e-1,
               a104 = -2.48811461997166764192642586468e0,
               a105 = -5.90290826836842996371446475743e-1,
               a106 = 2.12300514481811942347288949897e1,
               a107 = 1.52792336328824235832596922938e1,
               a108 = -3.32882109689848629194453265587e1,
               a109 = -2.03312017085086261358222928593e-2;
constexpr Real a111 = -9.3714243008598732571704021658e-1,
               a114 = 5.18637242884406370830023853209e0,
               a115 = 1.09143734899672957818500254654e0,
               a116 = -8.14978701074692612513997267357e0,
               a117 = -1.85200656599969598641566180701e1,
               a118 = 2.27394870993505042818970056734e1,
               a119 = 2.49360555267965238987089396762e0,
               a1110 = -3.0467644718982195003823669022e0,
               a121 = 2.27331014751653820792359768449e0,
               a124 = -1.05344954667372501984066689879e1,
               a125 = -2.00087205822486249909675718444e0,
               a126 = -1.79589318631187989172765950534e1,
               a127 = 2.79488845294199600508499808837e1,
               a128 = -2.85899827713502369474065508674e0,
               a129 = -8.87285693353062954433549289258e0,
               a1210 = 1.23605671757943030647266201528e1,
               a1211 = 6.43392746015763530355970484046e-1;
constexpr Real bhh1 = 0.244094488188976377952755905512e+00,
               bhh2 = 0.733846688281611857341361741547e+00,
               bhh3 = 0.220588235294117647058823529412e-01;
constexpr Real er1 = 0.1312004499419488073250102996e-01,
               er6 = -0.1225156446376204440720569753e+01,
               er7 = -0.4957589496572501915214079952e+00,
               er8 = 0.1664377182454986536961530415e+01,
               er9 = -0.3503288487499736816886487290e+00,
               er10 = 0.3341791187130174790297318841e+00,
               er11 = 0.8192320648511571246570742613e-01,
               er12 = -0.2235530786388629525884427845e-01;
}  // namespace dop853_detail

class Dop853 {
 public:
  Real rtol = 1e-12, atol = 1e-14;
  Real hmin_floor = 1e-13;
  long max_steps = 2000000;
  OdeStats stats;

  // Integrate from t0 to the last entry of `targets` (strictly monotone,
  // same direction as t1-t0).  Calls on_target(t, y) at every target,
  // which is hit exactly by step clamping.
  void integrate(const OdeRhs& rhs, Real t0, const CVec& y0,
                 const std::vector<Real>& targets,
                 const std::function<void(Real, const CVec&)>& on_target) {
    if (targets.empty()) return;
    const size_t n = y0.size();
    const Real tend = targets.back();
    const Real dir = (tend > t0) ? 1.0 : -1.0;
    for (size_t i = 0; i < targets.size(); ++i) {
      Real prev = i ? targets[i - 1] : t0;
      if ((targets[i] - prev) * dir < -1e-15)
        throw ConfigError("integration targets must be monotone away from t0");
    }
    CVec y = y0, k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), k8(n),
         k9(n), k10(n), yw(n), ynew(n), yerr(n);
    Real t = t0;
    size_t itar = 0;
    rhs(t, y, k1);
    ++stats.evals;

    Real hmax = std::abs(tend - t0);
    Real h = dir * std::min(initial_step(rhs, t, y, k1, dir), hmax);
    Real facold = 1e-4;
    const Real beta = 0.0, safe = 0.9, fac1 = 1.0 / 3.0, fac2 = 6.0;
    const Real expo1 = 1.0 / 8.0 - beta * 0.2;

    // flush targets that coincide with t0
    while (itar < targets.size() && std::abs(targets[itar] - t) < 1e-15) {
      on_target(t, y);
      ++itar;
    }

    while (itar < targets.size()) {
      if (stats.steps++ > max_steps)
        throw NonConvergent("ODE step budget exhausted");
      if (std::abs(h) < hmin_floor)
        throw StiffnessFailure("step size underflow at t=" +
                               std::to_string(t));
      // clamp to next target
      bool hit = false;
      if ((t + h - targets[itar]) * dir >= 0.0) {
        h = targets[itar] - t;
        hit = true;
      }

      Real err = step(rhs, t, y, h, k1, k2, k3, k4, k5, k6, k7, k8, k9, k10,
                      yw, ynew, yerr);

      Real fac11 = std::pow(err, expo1);
      Real fac = fac11 / std::pow(facold, beta);
      fac = std::max(1.0 / fac2, std::min(1.0 / fac1, fac / safe));
      Real hnew = h / fac;

      if (err <= 1.0) {
        ++stats.accepted;
        facold = std::max(err, Real(1e-4));
        rhs(t + h, ynew, k4);
        ++stats.evals;
        std::swap(k1, k4);
        y = ynew;
        t += h;
        if (hit) {
          on_target(targets[itar], y);
          ++itar;
          t = targets[itar - 1];  // exact landing
        }
        if (std::abs(hnew) > hmax) hnew = dir * hmax;
        h = dir * std::abs(hnew);
      } else {
        ++stats.rejected;
        h = dir * std::abs(hnew);
      }
    }
  }

  // Convenience: integrate to a single point, return final state.
  CVec solve_to(const OdeRhs& rhs, Real t0, const CVec& y0, Real t1) {
    CVec out;
    integrate(rhs, t0, y0, {t1},
              [&](Real, const CVec& y) { out = y; });
    return out;
  }

 private:
  Real initial_step(const OdeRhs& rhs, Real t, const CVec& y, const CVec& f,
                    Real dir) {
    // Hairer's hinit, simplified.
    Real d0 = 0.0, d1 = 0.0;
    for (size_t i = 0; i < y.size(); ++i) {
      Real sk = atol + rtol * std::abs(y[i]);
      d0 += std::norm(y[i] / sk);
      d1 += std::norm(f[i] / sk);
    }
    Real h0 = (d0 < 1e-10 || d1 < 1e-10) ? 1e-6
                                         : 0.01 * std::sqrt(d0 / d1);
    CVec y1(y.size()), f1(y.size());
    for (size_t i = 0; i < y.size(); ++i) y1[i] = y[i] + dir * h0 * f[i];
    rhs(t + dir * h0, y1, f1);
    ++stats.evals;
    Real d2 = 0.0;
    for (size_t i = 0; i < y.size(); ++i) {
      Real sk = atol + rtol * std::abs(y[i]);
      d2 += std::norm((f1[i] - f[i]) / sk);
    }
    d2 = std::sqrt(d2) / h0;
    Real dm = std::max(std::sqrt(d1), d2);
    Real h1 = (dm <= 1e-15)
                  ? std::max(1e-6, h0 * 1e-3)
                  : std::pow(0.01 / dm, 1.0 / 8.0);
    // A state component sitting at exactly 0 (pure-atol scale) can make d1
    // astronomical and drive h0 below the step floor; the controller can
    // recover from an optimistic guess but not from an underflowed one.
    return std::max(std::min(100.0 * h0, h1), 1e-8);
  }

  static void axpy(CVec& out, const CVec& y, Real h,
                   std::initializer_list<std::pair<Real, const CVec*>> terms) {
    for (size_t i = 0; i < y.size(); ++i) {
      Complex acc = 0.0;
      for (auto& tp : terms) acc += tp.first * (*tp.second)[i];
      out[i] = y[i] + h * acc;
    }
  }

  // One trial step; returns the scaled local error estimate (accept if <= 1).
  Real step(const OdeRhs& rhs, Real t, const CVec& y, Real h, CVec& k1,
            CVec& k2, CVec& k3, CVec& k4, CVec& k5, CVec& k6, CVec& k7,
            CVec& k8, CVec& k9, CVec& k10, CVec& yw, CVec& ynew, CVec& yerr) {
    using namespace dop853_detail;
    const size_t n = y.size();
    axpy(yw, y, h, {{a21, &k1}});
    rhs(t + c2 * h, yw, k2);
    axpy(yw, y, h, {{a31, &k1}, {a32, &k2}});
    rhs(t + c3 * h, yw, k3);
    axpy(yw, y, h, {{a41, &k1}, {a43, &k3}});
    rhs(t + c4 * h, yw, k4);
    axpy(yw, y, h, {{a51, &k1}, {a53, &k3}, {a54, &k4}});
    rhs(t + c5 * h, yw, k5);
    axpy(yw, y, h, {{a61, &k1}, {a64, &k4}, {a65, &k5}});
    rhs(t + c6 * h, yw, k6);
    axpy(yw, y, h, {{a71, &k1}, {a74, &k4}, {a75, &k5}, {a76, &k6}});
    rhs(t + c7 * h, yw, k7);
    axpy(yw, y, h, {{a81, &k1}, {a84, &k4}, {a85, &k5}, {a86, &k6}, {a87, &k7}});
    rhs(t + c8 * h, yw, k8);
    axpy(yw, y, h,
         {{a91, &k1}, {a94, &k4}, {a95, &k5}, {a96, &k6}, {a97, &k7}, {a98, &k8}});
    rhs(t + c9 * h, yw, k9);
    axpy(yw, y, h,
         {{a101, &k1}, {a104, &k4}, {a105, &k5}, {a106, &k6}, {a107, &k7},
          {a108, &k8}, {a109, &k9}});
    rhs(t + c10 * h, yw, k10);
    axpy(yw, y, h,
         {{a111, &k1}, {a114, &k4}, {a115, &k5}, {a116, &k6}, {a117, &k7},
          {a118, &k8}, {a119, &k9}, {a1110, &k10}});
    rhs(t + c11 * h, yw, k2);  // reuse k2 as stage 11
    axpy(yw, y, h,
         {{a121, &k1}, {a124, &k4}, {a125, &k5}, {a126, &k6}, {a127, &k7},
          {a128, &k8}, {a129, &k9}, {a1210, &k10}, {a1211, &k2}});
    rhs(t + h, yw, k3);  // reuse k3 as stage 12
    stats.evals += 11;
    Real err = 0.0, err2 = 0.0;
    for (size_t i = 0; i < n; ++i) {
      Complex s = b1 * k1[i] + b6 * k6[i] + b7 * k7[i] + b8 * k8[i] +
                  b9 * k9[i] + b10 * k10[i] + b11 * k2[i] + b12 * k3[i];
      ynew[i] = y[i] + h * s;
      Real sk = atol + rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      // 3rd-order embedded difference
      Complex v2 = s - bhh1 * k1[i] - bhh2 * k9[i] - bhh3 * k3[i];
      err2 += std::norm(v2 / sk);
      // 5th-order embedded difference
      Complex v = er1 * k1[i] + er6 * k6[i] + er7 * k7[i] + er8 * k8[i] +
                  er9 * k9[i] + er10 * k10[i] + er11 * k2[i] + er12 * k3[i];
      err += std::norm(v / sk);
      yerr[i] = v;
    }
    Real deno = err + 0.01 * err2;
    if (deno <= 0.0) deno = 1.0;
    return std::abs(h) * err * std::sqrt(1.0 / (deno * Real(n)));
  }
};

}  // namespace lightcone

#endif  // LIGHTCONE_ODE_HPP
