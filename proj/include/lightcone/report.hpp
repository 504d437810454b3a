#ifndef LIGHTCONE_REPORT_HPP
#define LIGHTCONE_REPORT_HPP

// JSON / CSV serialization of the computation reports.  Key order is fixed
// (ordered_json) and doubles round-trip exactly, so identical runs produce
// bit-identical artifacts; anything time- or host-dependent would go into a
// metadata block, which we deliberately do not emit.

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lightcone/inverse.hpp"
#include "lightcone/scattering.hpp"

namespace lightcone {

using json = nlohmann::ordered_json;

namespace report {

inline json put(Complex z) { return json::array({z.real(), z.imag()}); }

inline json put(const Mat2& m) {
  return json::array({json::array({put(m(0, 0)), put(m(0, 1))}),
                      json::array({put(m(1, 0)), put(m(1, 1))})});
}

inline Complex get_complex(const json& j) {
  return {j.at(0).get<Real>(), j.at(1).get<Real>()};
}

inline json profile_json(const RadialProfile& p) {
  json j;
  switch (p.kind) {
    case RadialProfile::Kind::Exact:
      j["kind"] = "exact";
      break;
    case RadialProfile::Kind::Poly:
      j["kind"] = "poly";
      j["coeffs"] = p.coeffs;
      break;
    case RadialProfile::Kind::Bump:
      j["kind"] = "bump";
      j["epsilon"] = p.epsilon;
      break;
  }
  return j;
}

inline RadialProfile profile_from_json(const json& j) {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "exact") return RadialProfile::exact();
  if (kind == "poly")
    return RadialProfile::poly(j.at("coeffs").get<std::vector<Real>>());
  if (kind == "bump")
    return RadialProfile::bump(j.at("epsilon").get<Real>());
  throw ConfigError("unknown profile kind '" + kind + "'");
}

inline json scattering_json(const ModeProblem& mp, const ModeScattering& ms) {
  json j;
  j["n"] = mp.pt.n;
  j["ell"] = mp.ell;
  j["sigma"] = put(mp.pt.sigma);
  j["profile"] = profile_json(mp.profile);
  j["s_plus"] = put(ms.s_plus);
  j["s_minus_rev"] = put(ms.s_minus_rev);
  j["S0"] = put(ms.S0);
  j["S_direct"] = put(ms.S_direct);
  j["S_product"] = put(ms.S_product);
  j["residual"] = ms.residual;
  return j;
}

inline json pole_report_json(int n, const RadialProfile& prof,
                             const PoleReport& rep) {
  json j;
  j["n"] = n;
  j["profile"] = profile_json(prof);
  j["which"] = determinant_name(rep.which);
  j["window"] = {{"re_lo", rep.window.re_lo},
                 {"re_hi", rep.window.re_hi},
                 {"im_lo", rep.window.im_lo},
                 {"im_hi", rep.window.im_hi}};
  j["ell_lo"] = rep.ell_lo;
  j["ell_hi"] = rep.ell_hi;
  j["counts_consistent"] = rep.counts_consistent;
  json zs = json::array();
  for (const auto& z : rep.zeros) {
    json e;
    e["ell"] = z.ell;
    e["sigma"] = put(z.sigma);
    e["mult"] = z.mult;
    e["residual"] = z.residual;
    zs.push_back(e);
  }
  j["zeros"] = zs;
  return j;
}

inline json symbol_json(const SpectralPoint& sp, const RadialProfile& prof,
                        int ell_max, const SymbolCheck& sc) {
  json j;
  j["n"] = sp.n;
  j["sigma"] = put(sp.sigma);
  j["profile"] = profile_json(prof);
  j["ell_max"] = ell_max;
  j["c_sigma"] = put(sc.c_sigma);
  j["defect"] = sc.defect;
  j["renorm_max"] = sc.renorm_max;
  j["bounded"] = sc.bounded;
  return j;
}

// ---------------------------------------------------------------------------
// CSV: complex values as paired re/im columns, 17 significant digits.
// Column orders are documented in the README and must stay stable.

inline std::string csv_num(Real v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline const char* kScatteringCsvHeader =
    "n,ell,sigma_re,sigma_im,profile,"
    "s_plus_re,s_plus_im,s_minus_rev_re,s_minus_rev_im,"
    "S0_00_re,S0_00_im,S0_01_re,S0_01_im,S0_10_re,S0_10_im,S0_11_re,S0_11_im,"
    "Sdir_00_re,Sdir_00_im,Sdir_01_re,Sdir_01_im,Sdir_10_re,Sdir_10_im,"
    "Sdir_11_re,Sdir_11_im,"
    "Sprod_00_re,Sprod_00_im,Sprod_01_re,Sprod_01_im,Sprod_10_re,Sprod_10_im,"
    "Sprod_11_re,Sprod_11_im,residual";

inline std::string scattering_csv_row(const ModeProblem& mp,
                                      const ModeScattering& ms) {
  std::ostringstream os;
  os << mp.pt.n << ',' << mp.ell << ',' << csv_num(mp.pt.sigma.real()) << ','
     << csv_num(mp.pt.sigma.imag()) << ',' << mp.profile.name();
  auto c = [&](Complex z) {
    os << ',' << csv_num(z.real()) << ',' << csv_num(z.imag());
  };
  c(ms.s_plus);
  c(ms.s_minus_rev);
  for (const Mat2* m : {&ms.S0, &ms.S_direct, &ms.S_product})
    for (int r = 0; r < 2; ++r)
      for (int col = 0; col < 2; ++col) c((*m)(r, col));
  os << ',' << csv_num(ms.residual);
  return os.str();
}

inline const char* kPoleCsvHeader =
    "n,profile,which,ell,sigma_re,sigma_im,mult,residual";

inline std::string pole_csv_row(int n, const RadialProfile& prof,
                                DeterminantKind which, const PoleZero& z) {
  std::ostringstream os;
  os << n << ',' << prof.name() << ',' << determinant_name(which) << ','
     << z.ell << ',' << csv_num(z.sigma.real()) << ','
     << csv_num(z.sigma.imag()) << ',' << z.mult << ','
     << csv_num(z.residual);
  return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file '" + path + "'");
  out << text;
  if (!out) throw ConfigError("failed writing '" + path + "'");
}

}  // namespace report

}  // namespace lightcone

#endif  // LIGHTCONE_REPORT_HPP
