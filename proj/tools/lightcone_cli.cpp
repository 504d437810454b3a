// Command-line driver: configuration, grid orchestration, and artifact
// output for the mode-level scattering and inverse computations.
//
// Exit codes: 0 all residual targets met, 2 target violation, 1 error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <algorithm>
#include <cctype>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lightcone/parallel.hpp"
#include "lightcone/report.hpp"

using namespace lightcone;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitTarget = 2;

Complex parse_complex(std::string s) {
  // forms: "1.2", "-0.5i", "0.7+0.3i", "0.7-0.3i", "i", "-i"
  s.erase(std::remove_if(s.begin(), s.end(),
                         [](char c) { return std::isspace(c); }),
          s.end());
  auto num = [&](std::string t, Real unit) -> Real {
    if (t.empty() || t == "+") return unit;
    if (t == "-") return -unit;
    size_t pos = 0;
    Real v;
    try {
      v = std::stod(t, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (pos != t.size())
      throw ConfigError("cannot parse complex number '" + s + "'");
    return v;
  };
  if (s.empty()) throw ConfigError("empty complex number");
  if (s.back() != 'i') return {num(s, 0.0), 0.0};
  std::string body = s.substr(0, s.size() - 1);
  // split at the last +/- that starts the imaginary term (not an exponent
  // sign and not a leading sign)
  size_t split = std::string::npos;
  for (size_t i = body.size(); i-- > 1;) {
    char c = body[i];
    if ((c == '+' || c == '-') && body[i - 1] != 'e' && body[i - 1] != 'E') {
      split = i;
      break;
    }
  }
  if (split == std::string::npos) return {0.0, num(body, 1.0)};
  return {num(body.substr(0, split), 0.0), num(body.substr(split), 1.0)};
}

RadialProfile parse_profile(const std::string& s) {
  if (s == "exact") return RadialProfile::exact();
  if (s.rfind("bump:", 0) == 0)
    return RadialProfile::bump(std::stod(s.substr(5)));
  if (s.rfind("poly:", 0) == 0) {
    std::vector<Real> c;
    std::string rest = s.substr(5);
    size_t pos = 0;
    while (pos < rest.size()) {
      size_t next = rest.find(',', pos);
      if (next == std::string::npos) next = rest.size();
      c.push_back(std::stod(rest.substr(pos, next - pos)));
      pos = next + 1;
    }
    return RadialProfile::poly(std::move(c));
  }
  throw ConfigError("unknown profile '" + s +
                    "' (use exact | bump:EPS | poly:C0,C1,...)");
}

struct RunConfig {
  int n = 3;
  int ell = 0;
  int lmax = -1;  // if >= 0, grid ell = 0..lmax
  std::vector<std::string> sigma = {"1.2"};
  std::string profile = "exact";
  Real margin = 1e-3;
  Real target = -1.0;  // command default if < 0
  std::string out;     // empty = stdout
  std::string format = "json";

  // resonances
  std::string which = "global";
  std::string window = "-3:3:-3:-0.1";

  // invert / poisson-check
  std::string source = "gaussian";
  std::string tag = "x_zero";
  Real center = 1.5, width = 0.06;
  std::string amplitude = "1";
  std::string bplus = "1", bminus = "0.5";
  int grid_points = 24;

  // symbol-check
  int L = 40;

  std::vector<int> ells() const {
    std::vector<int> out_;
    if (lmax >= 0)
      for (int l = 0; l <= lmax; ++l) out_.push_back(l);
    else
      out_.push_back(ell);
    return out_;
  }
  std::vector<Complex> sigmas() const {
    std::vector<Complex> out_;
    for (const auto& s : sigma) out_.push_back(parse_complex(s));
    return out_;
  }
};

void apply_json_config(RunConfig& rc, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("config parse error in '" + path + "': " + e.what());
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("n", rc.n);
  get("ell", rc.ell);
  get("lmax", rc.lmax);
  get("sigma", rc.sigma);
  get("margin", rc.margin);
  get("target", rc.target);
  get("out", rc.out);
  get("format", rc.format);
  get("which", rc.which);
  get("window", rc.window);
  get("source", rc.source);
  get("tag", rc.tag);
  get("center", rc.center);
  get("width", rc.width);
  get("amplitude", rc.amplitude);
  get("bplus", rc.bplus);
  get("bminus", rc.bminus);
  get("grid_points", rc.grid_points);
  get("L", rc.L);
  if (j.contains("profile")) {
    if (j["profile"].is_string())
      rc.profile = j["profile"].get<std::string>();
    else
      rc.profile = "";  // structured form handled below
  }
  if (j.contains("profile") && !j["profile"].is_string()) {
    RadialProfile p = report::profile_from_json(j["profile"]);
    rc.profile = p.name() == "exact" ? "exact" : rc.profile;
    // store canonical flag form
    if (p.kind == RadialProfile::Kind::Bump)
      rc.profile = "bump:" + std::to_string(p.epsilon);
    if (p.kind == RadialProfile::Kind::Poly) {
      std::string s = "poly:";
      for (size_t i = 0; i < p.coeffs.size(); ++i)
        s += (i ? "," : "") + std::to_string(p.coeffs[i]);
      rc.profile = s;
    }
  }
}

Window parse_window(const std::string& s) {
  // reLo:reHi:imLo:imHi
  std::vector<Real> v;
  size_t pos = 0;
  while (pos <= s.size()) {
    size_t next = s.find(':', pos);
    if (next == std::string::npos) next = s.size();
    v.push_back(std::stod(s.substr(pos, next - pos)));
    pos = next + 1;
  }
  if (v.size() != 4)
    throw ConfigError("window must be reLo:reHi:imLo:imHi, got '" + s + "'");
  return Window{v[0], v[1], v[2], v[3]};
}

void emit(const RunConfig& rc, const json& j,
          const std::string& csv = std::string()) {
  std::string text;
  if (rc.format == "json")
    text = j.dump(2) + "\n";
  else if (rc.format == "csv") {
    if (csv.empty())
      throw ConfigError("csv output is not available for this command");
    text = csv;
  } else {
    throw ConfigError("unknown format '" + rc.format + "'");
  }
  if (rc.out.empty())
    std::cout << text;
  else
    report::write_text(rc.out, text);
}

void check_margins(const RunConfig& rc) {
  if (rc.margin < 1e-3) throw ConfigError("margin must be >= 1e-3");
  for (Complex s : rc.sigmas())
    SpectralPoint{s, rc.n}.require_margin(rc.margin);
}

// grid of ModeProblems, deterministic order (sigma outer, ell inner)
std::vector<ModeProblem> make_grid(const RunConfig& rc) {
  RadialProfile prof = parse_profile(rc.profile);
  std::vector<ModeProblem> grid;
  for (Complex s : rc.sigmas())
    for (int l : rc.ells())
      grid.push_back(ModeProblem{SpectralPoint{s, rc.n}, l, prof});
  return grid;
}

int cmd_validate(const RunConfig& rc) {
  parse_profile(rc.profile).validate();
  check_margins(rc);
  if (rc.n < 2) throw ConfigError("need n >= 2");
  json j;
  j["status"] = "ok";
  j["n"] = rc.n;
  j["profile"] = report::profile_json(parse_profile(rc.profile));
  j["sigma_count"] = rc.sigmas().size();
  emit(rc, j);
  return kExitOk;
}

int cmd_smatrix(const RunConfig& rc, bool gate) {
  check_margins(rc);
  Real target = rc.target > 0 ? rc.target : 1e-8;
  auto grid = make_grid(rc);
  std::vector<ModeScattering> results(grid.size());
  parallel_for(grid.size(),
               [&](size_t i) { results[i] = mode_scattering(grid[i]); });

  json arr = json::array();
  std::string csv = std::string(report::kScatteringCsvHeader) + "\n";
  Real worst = 0.0;
  for (size_t i = 0; i < grid.size(); ++i) {
    arr.push_back(report::scattering_json(grid[i], results[i]));
    csv += report::scattering_csv_row(grid[i], results[i]) + "\n";
    worst = std::max(worst, results[i].residual);
  }
  json j;
  j["command"] = gate ? "verify-product" : "smatrix";
  j["target"] = target;
  j["worst_residual"] = worst;
  j["modes"] = arr;
  emit(rc, j, csv);
  return (gate && worst > target) ? kExitTarget : kExitOk;
}

int cmd_poisson_check(const RunConfig& rc) {
  check_margins(rc);
  Real target = rc.target > 0 ? rc.target : 1e-9;
  Complex bp = parse_complex(rc.bplus), bm = parse_complex(rc.bminus);
  auto grid = make_grid(rc);

  json arr = json::array();
  Real worst = 0.0;
  for (const auto& mp : grid) {
    Complex sp = smatrix_hyperbolic(mp, Region::XPlus, +1);
    Complex ep = std::exp(PI * mp.pt.sigma), em = 1.0 / ep;
    Real cap = 0.0, belt = 0.0;
    for (Real t : {0.3, 0.55, 0.75}) {
      Complex g = poisson_eval(mp, PoissonKind::GlobalBackward, {bp, bm}, t);
      Complex x = poisson_eval(mp, PoissonKind::XPlus, {bp + bm}, t);
      cap = std::max(cap, std::abs(g - x) / std::max(std::abs(x), Real(1)));
    }
    for (Real t : {0.9, 1.5, 2.2}) {
      Complex g = poisson_eval(mp, PoissonKind::GlobalBackward, {bp, bm}, t);
      Complex x = poisson_eval(mp, PoissonKind::X0Backward,
                               {em * bp + ep * bm, sp * (bp + bm)}, t);
      belt = std::max(belt, std::abs(g - x) / std::max(std::abs(x), Real(1)));
    }
    json e;
    e["n"] = mp.pt.n;
    e["ell"] = mp.ell;
    e["sigma"] = report::put(mp.pt.sigma);
    e["cap_restriction_residual"] = cap;
    e["belt_restriction_residual"] = belt;
    arr.push_back(e);
    worst = std::max(worst, std::max(cap, belt));
  }
  json j;
  j["command"] = "poisson-check";
  j["b_plus"] = report::put(bp);
  j["b_minus"] = report::put(bm);
  j["target"] = target;
  j["worst_residual"] = worst;
  j["modes"] = arr;
  emit(rc, j);
  return worst > target ? kExitTarget : kExitOk;
}

int cmd_invert(const RunConfig& rc) {
  check_margins(rc);
  Real target = rc.target > 0 ? rc.target : 1e-8;
  if (rc.sigmas().size() != 1 || rc.lmax >= 0)
    throw ConfigError("invert runs one (sigma, ell) mode at a time");
  ModeProblem mp{SpectralPoint{rc.sigmas()[0], rc.n}, rc.ell,
                 parse_profile(rc.profile)};

  ModeSource src;
  if (rc.source == "zero") {
    src = ModeSource::zero();
  } else if (rc.source == "gaussian") {
    SupportTag tag;
    if (rc.tag == "x_plus")
      tag = SupportTag::XPlus;
    else if (rc.tag == "x_zero")
      tag = SupportTag::XZero;
    else if (rc.tag == "x_minus")
      tag = SupportTag::XMinus;
    else if (rc.tag == "global")
      tag = SupportTag::Global;
    else
      throw ConfigError("unknown support tag '" + rc.tag + "'");
    src = ModeSource::gaussian(tag, rc.center, rc.width,
                               parse_complex(rc.amplitude));
  } else {
    throw ConfigError("unknown source '" + rc.source + "'");
  }

  ModeEngine eng(mp);
  GlobalInverseAssembled asmb(eng, src);
  GlobalInverseDirect dir(eng, src);

  int m = std::max(rc.grid_points, 4);
  std::vector<Real> thetas;
  for (int i = 1; i <= m; ++i) {
    Real t = PI * i / (m + 1);
    if (std::abs(t - kY1) < 0.02 || std::abs(t - kY2) < 0.02) continue;
    thetas.push_back(t);
  }
  json pts = json::array();
  Real scale = 0.0, worst = 0.0;
  std::vector<Complex> ua(thetas.size()), ud(thetas.size());
  for (size_t i = 0; i < thetas.size(); ++i) {
    ua[i] = asmb.eval(thetas[i]);
    ud[i] = dir.eval(thetas[i]);
    scale = std::max(scale, std::abs(ud[i]));
  }
  for (size_t i = 0; i < thetas.size(); ++i) {
    worst = std::max(worst, std::abs(ua[i] - ud[i]));
    json e;
    e["theta"] = thetas[i];
    e["u_assembled"] = report::put(ua[i]);
    e["u_direct"] = report::put(ud[i]);
    pts.push_back(e);
  }
  Real rel = worst / std::max(scale, 1e-300);

  std::string csv =
      "theta,u_assembled_re,u_assembled_im,u_direct_re,u_direct_im\n";
  for (size_t i = 0; i < thetas.size(); ++i) {
    csv += report::csv_num(thetas[i]) + ',' + report::csv_num(ua[i].real()) +
           ',' + report::csv_num(ua[i].imag()) + ',' +
           report::csv_num(ud[i].real()) + ',' +
           report::csv_num(ud[i].imag()) + "\n";
  }

  json j;
  j["command"] = "invert";
  j["n"] = mp.pt.n;
  j["ell"] = mp.ell;
  j["sigma"] = report::put(mp.pt.sigma);
  j["profile"] = report::profile_json(mp.profile);
  j["source"] = {{"kind", rc.source},
                 {"tag", rc.tag},
                 {"center", rc.center},
                 {"width", rc.width},
                 {"amplitude", report::put(parse_complex(rc.amplitude))}};
  j["target"] = target;
  j["smoothness_certificate"] = dir.smoothness_certificate();
  j["max_pipeline_difference"] = rel;
  j["points"] = pts;
  emit(rc, j, csv);
  return rel > target ? kExitTarget : kExitOk;
}

int cmd_resonances(const RunConfig& rc) {
  if (rc.margin < 1e-3) throw ConfigError("margin must be >= 1e-3");
  DeterminantKind which;
  if (rc.which == "x_plus")
    which = DeterminantKind::XPlus;
  else if (rc.which == "x_minus_rev")
    which = DeterminantKind::XMinusRev;
  else if (rc.which == "global")
    which = DeterminantKind::Global;
  else
    throw ConfigError("unknown determinant '" + rc.which +
                      "' (use x_plus | x_minus_rev | global)");
  Window w = parse_window(rc.window);
  RadialProfile prof = parse_profile(rc.profile);
  int lhi = rc.lmax >= 0 ? rc.lmax : rc.ell;
  PoleReport rep = find_poles(rc.n, 0, lhi, prof, w, which);

  std::string csv = std::string(report::kPoleCsvHeader) + "\n";
  for (const auto& z : rep.zeros)
    csv += report::pole_csv_row(rc.n, prof, which, z) + "\n";
  emit(rc, report::pole_report_json(rc.n, prof, rep), csv);
  return rep.counts_consistent ? kExitOk : kExitTarget;
}

int cmd_symbol_check(const RunConfig& rc) {
  Real target = rc.target > 0 ? rc.target : 1e-4;
  if (rc.sigmas().size() != 1)
    throw ConfigError("symbol-check runs one sigma at a time");
  SpectralPoint sp{rc.sigmas()[0], rc.n};
  sp.require_margin(rc.margin);
  RadialProfile prof = parse_profile(rc.profile);
  SymbolCheck sc = symbol_order_check(sp, prof, rc.L);
  json j = report::symbol_json(sp, prof, rc.L, sc);
  j["command"] = "symbol-check";
  j["target"] = target;
  emit(rc, j);
  return (sc.defect <= target && sc.bounded) ? kExitOk : kExitTarget;
}

void add_common(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--config", "JSON config file (flags override)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--n", rc.n, "sphere dimension parameter n >= 2");
  cmd->add_option("--ell", rc.ell, "single angular mode");
  cmd->add_option("--lmax", rc.lmax, "angular grid 0..lmax (overrides --ell)");
  cmd->add_option("--sigma", rc.sigma,
                  "spectral parameter(s), e.g. 0.7+0.3i")
      ->delimiter(',');
  cmd->add_option("--profile", rc.profile,
                  "exact | bump:EPS | poly:C0,C1,...");
  cmd->add_option("--margin", rc.margin, "minimum distance of i*sigma from Z");
  cmd->add_option("--target", rc.target, "residual target for exit code 2");
  cmd->add_option("--out", rc.out, "output path (default stdout)");
  cmd->add_option("--format", rc.format, "json | csv");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "mode-level scattering matrices, solution operators, and resonance "
      "scans for a two-cap/belt geometry"};
  app.require_subcommand(1);

  RunConfig rc;

  auto* validate = app.add_subcommand("validate", "check a configuration");
  auto* smatrix =
      app.add_subcommand("smatrix", "scattering matrices over a grid");
  auto* verify = app.add_subcommand(
      "verify-product", "direct vs product-formula scattering matrices");
  auto* poisson = app.add_subcommand(
      "poisson-check", "restriction identities of the backward solution");
  auto* invert = app.add_subcommand(
      "invert", "global inverse, assembled and direct pipelines");
  auto* reson =
      app.add_subcommand("resonances", "pole scan of connection determinants");
  auto* symbol = app.add_subcommand(
      "symbol-check", "large-ell symbol normalization of the scattering data");

  for (CLI::App* c : {validate, smatrix, verify, poisson, invert, reson,
                      symbol})
    add_common(c, rc);

  poisson->add_option("--bplus", rc.bplus, "b+ boundary datum");
  poisson->add_option("--bminus", rc.bminus, "b- boundary datum");
  invert->add_option("--source", rc.source, "zero | gaussian");
  invert->add_option("--tag", rc.tag, "x_plus | x_zero | x_minus | global");
  invert->add_option("--center", rc.center, "source center (theta)");
  invert->add_option("--width", rc.width, "source width");
  invert->add_option("--amplitude", rc.amplitude, "source amplitude");
  invert->add_option("--grid-points", rc.grid_points, "evaluation grid size");
  reson->add_option("--which", rc.which, "x_plus | x_minus_rev | global");
  reson->add_option("--window", rc.window, "reLo:reHi:imLo:imHi");
  symbol->add_option("--L", rc.L, "largest ell in the extrapolation ladder");

  // The config file seeds defaults; explicit flags override. Load it before
  // CLI11 parses so that parsed flags land on top of the config values.
  try {
    for (int i = 1; i < argc; ++i) {
      std::string a = argv[i];
      if (a == "--config" && i + 1 < argc)
        apply_json_config(rc, argv[i + 1]);
      else if (a.rfind("--config=", 0) == 0)
        apply_json_config(rc, a.substr(9));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "validate") return cmd_validate(rc);
    if (name == "smatrix") return cmd_smatrix(rc, false);
    if (name == "verify-product") return cmd_smatrix(rc, true);
    if (name == "poisson-check") return cmd_poisson_check(rc);
    if (name == "invert") return cmd_invert(rc);
    if (name == "resonances") return cmd_resonances(rc);
    if (name == "symbol-check") return cmd_symbol_check(rc);
    throw ConfigError("unknown command '" + name + "'");
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
