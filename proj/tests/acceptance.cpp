// Acceptance suite: ten numbered end-to-end checks, one pass/fail line each.
// Exits nonzero if any check fails.  Run time is dominated by the scattering
// grid (1) and the determinant scans (6); both parallelize across cores
// (capped by LIGHTCONE_THREADS).

#include <array>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lightcone/inverse.hpp"
#include "lightcone/parallel.hpp"
#include "lightcone/scattering.hpp"

using namespace lightcone;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// --- shared grid ------------------------------------------------------------

constexpr Real kGridMargin = 0.05;
constexpr int kSigmaCount = 20;
constexpr int kEllMax = 20;
const std::array<int, 3> kDims = {2, 3, 4};

std::vector<Complex> sample_sigmas(int n) {
  std::mt19937 rng(811400 + n);
  std::uniform_real_distribution<Real> box(-3.0, 3.0);
  std::vector<Complex> out;
  while ((int)out.size() < kSigmaCount) {
    Complex s(box(rng), box(rng));
    if (std::abs(s) > 3.0) continue;
    if (SpectralPoint{s, n}.integer_margin() < kGridMargin) continue;
    out.push_back(s);
  }
  return out;
}

const std::vector<RadialProfile>& grid_profiles() {
  static const std::vector<RadialProfile> p = {RadialProfile::exact(),
                                               RadialProfile::bump(0.1)};
  return p;
}

struct GridEntry {
  ModeProblem mp;
  ModeScattering ms;
};

// results of the full (n, profile, ell, sigma) sweep, shared by checks 1-3
std::vector<GridEntry>& grid_results() {
  static std::vector<GridEntry> entries;
  return entries;
}

std::string fmt(Real v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

// 7-point O(h^6) finite-difference application of the mode operator
Complex apply_operator(const OdeCoefficients& ode,
                       const std::function<Complex(Real)>& u, Real theta) {
  const Real h = 1e-3;
  std::array<Complex, 7> v;
  for (int i = 0; i < 7; ++i) v[i] = u(theta + (i - 3) * h);
  Complex d1 = (-v[0] + 9.0 * v[1] - 45.0 * v[2] + 45.0 * v[4] - 9.0 * v[5] +
                v[6]) /
               (60.0 * h);
  Complex d2 = (2.0 * v[0] - 27.0 * v[1] + 270.0 * v[2] - 490.0 * v[3] +
                270.0 * v[4] - 27.0 * v[5] + 2.0 * v[6]) /
               (180.0 * h * h);
  return ode.A(theta) * d2 + ode.B(theta) * d1 + ode.C(theta) * u(theta);
}

// --- criterion 1: direct vs product global scattering matrix ----------------

Outcome check_product_formula() {
  auto t0 = std::chrono::steady_clock::now();
  auto& entries = grid_results();
  for (int n : kDims)
    for (const auto& prof : grid_profiles())
      for (Complex s : sample_sigmas(n))
        for (int ell = 0; ell <= kEllMax; ++ell)
          entries.push_back({ModeProblem{SpectralPoint{s, n}, ell, prof}, {}});

  std::atomic<bool> threw{false};
  std::string err;
  std::mutex err_mu;
  parallel_for(entries.size(), [&](size_t i) {
    try {
      entries[i].ms = mode_scattering(entries[i].mp);
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(err_mu);
      threw = true;
      err = e.what();
    }
  });
  Real elapsed = std::chrono::duration<Real>(std::chrono::steady_clock::now() -
                                             t0)
                     .count();
  if (threw) return {false, "exception: " + err};

  Real worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.ms.residual);
  bool pass = worst <= 1e-8 && elapsed <= 60.0;
  return {pass, std::to_string(entries.size()) + " modes, worst residual " +
                    fmt(worst) + ", " + fmt(elapsed) + " s"};
}

// --- criterion 2: closed-form oracle for the exact profile ------------------

Outcome check_closed_form() {
  Real worst = 0.0;
  std::vector<const GridEntry*> exact;
  for (const auto& e : grid_results())
    if (e.mp.profile.is_exact()) exact.push_back(&e);
  if (exact.empty()) return {false, "grid results unavailable"};
  std::vector<Real> devs(exact.size(), 0.0);
  parallel_for(exact.size(), [&](size_t i) {
    const auto& e = *exact[i];
    Complex want = smatrix_closed_form(e.mp, Region::XPlus);
    devs[i] = std::abs(e.ms.s_plus - want) / std::abs(want);
  });
  for (Real d : devs) worst = std::max(worst, d);
  return {worst <= 1e-10, std::to_string(exact.size()) +
                              " scalars, worst relative deviation " +
                              fmt(worst)};
}

// --- criterion 3: involution of the cap scalar ------------------------------

Outcome check_involution() {
  const auto& entries = grid_results();
  if (entries.empty()) return {false, "grid results unavailable"};
  std::vector<Real> devs(entries.size(), 0.0);
  std::atomic<bool> threw{false};
  parallel_for(entries.size(), [&](size_t i) {
    try {
      Complex rev = smatrix_hyperbolic(entries[i].mp, Region::XPlus, -1);
      devs[i] = std::abs(entries[i].ms.s_plus * rev - 1.0);
    } catch (const std::exception&) {
      threw = true;
    }
  });
  if (threw) return {false, "exception during reverse-sigma solves"};
  Real worst = 0.0;
  for (Real d : devs) worst = std::max(worst, d);
  return {worst <= 1e-9,
          std::to_string(entries.size()) + " products, worst |s+ s+' - 1| " +
              fmt(worst)};
}

// --- criterion 4: two-sided smooth Taylor coefficients at the light cone ----

Outcome check_matching_taylor() {
  struct Case {
    int n, ell;
  };
  std::vector<ModeProblem> cases;
  for (int n : kDims) {
    auto sig = sample_sigmas(n);
    for (const auto& prof : grid_profiles())
      for (int ell : {0, 3})
        for (int k : {0, 1})
          cases.push_back(ModeProblem{SpectralPoint{sig[k], n}, ell, prof});
  }
  std::vector<Real> devs(cases.size(), 0.0);
  std::atomic<bool> threw{false};
  parallel_for(cases.size(), [&](size_t i) {
    try {
      auto pair = matching_taylor_check(cases[i], 1.0, Complex(0.6, -0.3), 6);
      Real d = 0.0;
      for (int k = 0; k < 6; ++k) {
        Real scale = std::max(std::abs(pair.cap_side[k]),
                              std::abs(pair.belt_side[k]));
        if (scale < 1e-300) continue;
        d = std::max(d, std::abs(pair.cap_side[k] - pair.belt_side[k]) /
                            scale);
      }
      devs[i] = d;
    } catch (const std::exception&) {
      threw = true;
    }
  });
  if (threw) return {false, "exception during Taylor matching"};
  Real worst = 0.0;
  for (Real d : devs) worst = std::max(worst, d);
  return {worst <= 1e-8, std::to_string(cases.size()) +
                             " modes x 6 coefficients, worst relative "
                             "deviation " +
                             fmt(worst)};
}

// --- criterion 5: inverse identities -----------------------------------------

Outcome check_inverse_identities() {
  struct Case {
    ModeProblem mp;
    ModeSource src;
  };
  std::vector<Case> cases = {
      {ModeProblem{SpectralPoint{Complex(0.9, 0.3), 3}, 2,
                   RadialProfile::bump(0.1)},
       ModeSource::gaussian(SupportTag::XPlus, 0.45, 0.03)},
      {ModeProblem{SpectralPoint{Complex(1.1, -0.4), 2}, 0,
                   RadialProfile::exact()},
       ModeSource::gaussian(SupportTag::XZero, 1.5, 0.06)},
      {ModeProblem{SpectralPoint{Complex(0.7, 0.2), 4}, 1,
                   RadialProfile::bump(0.1)},
       ModeSource::gaussian(SupportTag::XMinus, 2.7, 0.03)},
  };

  Real worst_op = 0.0, worst_pair = 0.0;
  try {
    for (const auto& c : cases) {
      ModeEngine eng(c.mp);
      GlobalInverseAssembled asmb(eng, c.src);
      GlobalInverseDirect dir(eng, c.src);

      // operator applied to both pipeline outputs reproduces the source
      Real amp = std::abs(c.src.eval(Complex(c.src.center, 0.0)));
      for (int i = -2; i <= 2; ++i) {
        Real th = c.src.center + 0.4 * c.src.width * i;
        auto ua = [&](Real t) { return asmb.eval(t); };
        auto ud = [&](Real t) { return dir.eval(t); };
        Complex f = c.src.eval(Complex(th, 0.0));
        worst_op = std::max(
            worst_op, std::abs(apply_operator(eng.ode(), ua, th) - f) / amp);
        worst_op = std::max(
            worst_op, std::abs(apply_operator(eng.ode(), ud, th) - f) / amp);
      }

      // the two pipelines agree pointwise across all three regions
      std::vector<Real> thetas;
      for (Real t = 0.2; t < 3.05; t += 0.28) {
        if (std::abs(t - kY1) < 0.05 || std::abs(t - kY2) < 0.05) continue;
        thetas.push_back(t);
      }
      Real scale = 0.0;
      std::vector<Complex> va(thetas.size()), vd(thetas.size());
      for (size_t i = 0; i < thetas.size(); ++i) {
        va[i] = asmb.eval(thetas[i]);
        vd[i] = dir.eval(thetas[i]);
        scale = std::max(scale, std::abs(vd[i]));
      }
      for (size_t i = 0; i < thetas.size(); ++i)
        worst_pair =
            std::max(worst_pair, std::abs(va[i] - vd[i]) / scale);
    }
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
  bool pass = worst_op <= 1e-7 && worst_pair <= 1e-8;
  return {pass, "operator residual " + fmt(worst_op) +
                    ", assembled-vs-direct " + fmt(worst_pair)};
}

// --- criterion 6: pole union and argument-principle counts ------------------

Outcome check_pole_union() {
  const Window win{-3.0, 3.0, -3.0, -0.1};
  const RadialProfile prof = RadialProfile::exact();
  const int n = 2, lmax = 5;
  PoleReport plus, minus, glob;
  try {
    plus = find_poles(n, 0, lmax, prof, win, DeterminantKind::XPlus);
    minus = find_poles(n, 0, lmax, prof, win, DeterminantKind::XMinusRev);
    glob = find_poles(n, 0, lmax, prof, win, DeterminantKind::Global);
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
  if (!plus.counts_consistent || !minus.counts_consistent ||
      !glob.counts_consistent)
    return {false, "argument-principle counts inconsistent with refinement"};

  // expected constituent ladder for n = 2, exact profile: sigma =
  // -i(ell + 1/2 + m) inside the window, all from the X_plus side
  std::vector<PoleZero> expect;
  for (int ell = 0; ell <= lmax; ++ell)
    for (int m = 0;; ++m) {
      Real im = -(ell + 0.5 + m);
      if (im < win.im_lo) break;
      if (im > win.im_hi) continue;
      expect.push_back({Complex(0.0, im), 1, 0.0, ell});
    }
  auto match = [](const std::vector<PoleZero>& a,
                  const std::vector<PoleZero>& b) {
    if (a.size() != b.size()) return false;
    for (const auto& za : a) {
      int hits = 0;
      for (const auto& zb : b)
        if (za.ell == zb.ell && std::abs(za.sigma - zb.sigma) < 1e-6 &&
            za.mult == zb.mult)
          ++hits;
      if (hits != 1) return false;
    }
    return true;
  };
  std::vector<PoleZero> uni = plus.zeros;
  uni.insert(uni.end(), minus.zeros.begin(), minus.zeros.end());
  bool ladder_ok = match(plus.zeros, expect);
  bool union_ok = match(glob.zeros, uni);
  std::string d = std::to_string(glob.zeros.size()) + " global zeros, " +
                  std::to_string(plus.zeros.size()) + "+" +
                  std::to_string(minus.zeros.size()) + " constituent";
  if (!ladder_ok) d += ", ladder mismatch";
  if (!union_ok) d += ", union mismatch";
  return {ladder_ok && union_ok, d};
}

// --- criterion 7: symbol-order content ---------------------------------------

Outcome check_symbol_order() {
  struct Case {
    SpectralPoint sp;
    RadialProfile prof;
  };
  std::vector<Case> cases;
  for (int n : {2, 3})
    for (Complex s : {Complex(0.7, 0.3), Complex(1.1, -0.4)})
      for (const auto& prof : grid_profiles())
        cases.push_back({SpectralPoint{s, n}, prof});
  std::vector<SymbolCheck> res(cases.size());
  std::atomic<bool> threw{false};
  parallel_for(cases.size(), [&](size_t i) {
    try {
      res[i] = symbol_order_check(cases[i].sp, cases[i].prof, 40);
    } catch (const std::exception&) {
      threw = true;
    }
  });
  if (threw) return {false, "exception during symbol check"};
  Real worst = 0.0;
  bool bounded = true;
  for (const auto& r : res) {
    worst = std::max(worst, r.defect);
    bounded = bounded && r.bounded;
  }
  bool pass = worst <= 1e-4 && bounded;
  return {pass, std::to_string(cases.size()) + " points, worst defect " +
                    fmt(worst) +
                    (bounded ? ", renormalized entries bounded"
                             : ", unbounded renormalized entries")};
}

// --- criterion 8: operator assembly validation -------------------------------

Outcome check_assembly() {
  Real worst_conj = 0.0;
  try {
    for (int n : kDims) {
      Complex s = sample_sigmas(n)[0];
      for (const auto& prof : grid_profiles())
        for (int ell : {0, 2}) {
          ModeProblem mp{SpectralPoint{s, n}, ell, prof};
          worst_conj = std::max(
              worst_conj, verify_conjugation(mp, Region::XPlus,
                                             TrialFunction::gaussian(0.4,
                                                                     0.05)));
          worst_conj = std::max(
              worst_conj, verify_conjugation(mp, Region::XZero,
                                             TrialFunction::gaussian(PI / 2,
                                                                     0.08)));
          worst_conj = std::max(
              worst_conj,
              verify_conjugation(mp, Region::XMinus,
                                 TrialFunction::gaussian(PI - 0.4, 0.05)));
        }
    }
  } catch (const std::exception& e) {
    return {false, std::string("conjugation exception: ") + e.what()};
  }

  Real worst_amb = 0.0;
  try {
    for (int n : {2, 3})
      for (int ell : {0, 2}) {
        ModeProblem mp{SpectralPoint{Complex(0.8, 0.2), n}, ell,
                       RadialProfile::exact()};
        // validate_against_ambient enforces >= order 3.5 between 4h and 2h
        worst_amb = std::max(
            worst_amb, validate_against_ambient(
                           mp, TrialFunction::gaussian(0.5, 0.07), 1e-3));
      }
  } catch (const std::exception& e) {
    return {false, std::string("ambient validator exception: ") + e.what()};
  }
  bool pass = worst_conj <= 1e-9 && worst_amb <= 1e-6;
  return {pass, "conjugation residual " + fmt(worst_conj) +
                    ", ambient finite-difference residual " + fmt(worst_amb)};
}

// --- criterion 9: indicial roots at the light cones --------------------------

Outcome check_indicial_roots() {
  struct Case {
    ModeProblem mp;
  };
  std::vector<ModeProblem> cases;
  for (int n : kDims)
    for (Complex s : sample_sigmas(n))
      for (const auto& prof : grid_profiles())
        for (int ell : {0, 7})
          cases.push_back(ModeProblem{SpectralPoint{s, n}, ell, prof});

  std::vector<Real> devs(cases.size(), 0.0);
  std::atomic<bool> threw{false};
  parallel_for(cases.size(), [&](size_t i) {
    try {
      auto ode = assemble_global_mode_ode(cases[i]);
      Real d = 0.0;
      for (Real anchor : {kY1, kY2}) {
        // leading Taylor data of p = d B/A and q = d^2 C/A at the anchor,
        // computed independently of the Frobenius machinery's snapping
        auto P = [&](Complex dd) {
          return dd * ode.B(anchor + dd) / ode.A(anchor + dd);
        };
        auto Q = [&](Complex dd) {
          return dd * dd * ode.C(anchor + dd) / ode.A(anchor + dd);
        };
        Complex p0 = taylor_coeffs(P, 0.0, 0.35, 2)[0];
        Complex q0 = taylor_coeffs(Q, 0.0, 0.35, 2)[0];
        Complex b = p0 - 1.0;
        Complex disc = std::sqrt(b * b - 4.0 * q0);
        std::array<Complex, 2> roots = {(-b + disc) / 2.0,
                                        (-b - disc) / 2.0};
        for (Complex want : {Complex(0.0, 0.0),
                             Complex(0.0, 1.0) * cases[i].pt.sigma}) {
          Real best = 1e300;
          for (Complex r : roots) best = std::min(best, std::abs(r - want));
          d = std::max(d, best / std::max(std::abs(want), Real(1.0)));
        }
      }
      devs[i] = d;
    } catch (const std::exception&) {
      threw = true;
    }
  });
  if (threw) return {false, "exception during indicial-root checks"};
  Real worst = 0.0;
  for (Real d : devs) worst = std::max(worst, d);
  return {worst <= 1e-10, std::to_string(2 * cases.size()) +
                              " light-cone anchors, worst root deviation " +
                              fmt(worst)};
}

// --- criterion 10: numerical hygiene -----------------------------------------

Outcome check_hygiene() {
  Real worst_wr = 0.0, worst_overlap = 0.0;
  try {
    for (int n : {2, 3}) {
      ModeProblem mp{SpectralPoint{sample_sigmas(n)[1], n}, 2,
                     RadialProfile::bump(0.1)};
      ModeEngine eng(mp);
      Real r = eng.lc_radius();

      // Abel/Wronskian constancy across the belt for two independent launches
      std::vector<Real> targets;
      for (int i = 0; i <= 40; ++i)
        targets.push_back(kY1 + 0.8 * r +
                          (kY2 - kY1 - 1.6 * r) * i / 40.0);
      auto [w1, dw1] = eng.lc_launch(kY1, +1, 1.0, 0.0);
      auto [w2, dw2] = eng.lc_launch(kY1, +1, 0.0, 1.0);
      auto p1 = integrate(eng.ode(), kY1 + 0.8 * r, w1, dw1, targets);
      auto p2 = integrate(eng.ode(), kY1 + 0.8 * r, w2, dw2, targets);
      worst_wr = std::max(worst_wr, wronskian_drift(p1, p2));

      // Frobenius series vs integration on the overlap annulus
      const auto& b = eng.basis(kY1);
      for (const auto* e : {&b.sing, &b.smooth}) {
        auto [w0, dw0] = e->eval(kY1 + 0.9 * r);
        std::vector<Real> overlap;
        for (int i = 0; i <= 12; ++i)
          overlap.push_back(kY1 + (0.9 - 0.4 * i / 12.0) * r);
        auto path = integrate(eng.ode(), kY1 + 0.9 * r, w0, dw0, overlap);
        for (const auto& smp : path.samples) {
          auto [ws, dws] = e->eval(smp.theta);
          worst_overlap = std::max(
              worst_overlap, std::abs(smp.w - ws) / std::abs(ws));
        }
      }
    }
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }

  // CLI determinism: identical invocations produce identical bytes, and a
  // single-threaded run matches a parallel one
  bool cli_ok = false;
  std::string cli_note;
  const char* cli = std::getenv("LIGHTCONE_CLI");
  if (!cli) {
    cli_note = "LIGHTCONE_CLI not set";
  } else {
    auto capture = [&](const std::string& prefix) -> std::string {
      std::string cmd = prefix + std::string(cli) +
                        " verify-product --n 3 --lmax 3 --sigma 0.7+0.3i "
                        "--profile bump:0.1 2>&1";
      FILE* pipe = popen(cmd.c_str(), "r");
      if (!pipe) return {};
      std::string out;
      std::array<char, 4096> buf;
      while (size_t got = fread(buf.data(), 1, buf.size(), pipe))
        out.append(buf.data(), got);
      pclose(pipe);
      return out;
    };
    std::string a = capture(""), bb = capture(""),
                c = capture("LIGHTCONE_THREADS=1 ");
    cli_ok = !a.empty() && a == bb && a == c;
    cli_note = cli_ok ? "CLI output bit-identical" : "CLI output differs";
  }

  bool pass = worst_wr <= 1e-10 && worst_overlap <= 1e-10 && cli_ok;
  return {pass, "Wronskian drift " + fmt(worst_wr) + ", overlap deviation " +
                    fmt(worst_overlap) + ", " + cli_note};
}

}  // namespace

int main() {
  struct Criterion {
    const char* label;
    Outcome (*run)();
  };
  const std::vector<Criterion> criteria = {
      {"product formula (direct vs product global scattering matrix)",
       check_product_formula},
      {"closed-form oracle for exact-profile cap scalars",
       check_closed_form},
      {"involution s+(sigma) s+(-sigma) = 1", check_involution},
      {"two-sided smooth Taylor coefficients at the light cone",
       check_matching_taylor},
      {"inverse identities (operator residual, assembled vs direct)",
       check_inverse_identities},
      {"global pole set = union of constituent pole sets",
       check_pole_union},
      {"symbol-order content (c_sigma defect, bounded renormalization)",
       check_symbol_order},
      {"operator assembly (conjugation + ambient finite differences)",
       check_assembly},
      {"indicial roots {0, i sigma} at both light cones",
       check_indicial_roots},
      {"numerical hygiene (Wronskian, overlap, CLI determinism)",
       check_hygiene},
  };

  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("uncaught exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("criterion %2zu: %s - %s (%s)\n", i + 1,
                o.pass ? "PASS" : "FAIL", criteria[i].label,
                o.detail.c_str());
    std::fflush(stdout);
  }
  if (failures)
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  else
    std::printf("all %zu criteria passed\n", criteria.size());
  return failures == 0 ? 0 : 1;
}
