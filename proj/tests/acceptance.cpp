// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion ...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fcntl.h>
#include <unistd.h>

#include "rcfm/cli.hpp"
#include "rcfm/config.hpp"
#include "rcfm/cylinders.hpp"
#include "rcfm/dimension.hpp"
#include "rcfm/errors.hpp"
#include "rcfm/measures.hpp"
#include "rcfm/pressure.hpp"

namespace fs = std::filesystem;
using namespace rcfm;

namespace {

const fs::path kConfigs = fs::path(RCFM_SOURCE_DIR) / "configs";

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

struct Loaded {
  RandomFamily family;
  BaseSystem base;
};

Loaded load(const std::string& name) {
  const ExperimentConfig c = load_config((kConfigs / name).string());
  return {make_family(c.family), make_base(c.base)};
}

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

// 1: t = 0 exactness on every family/base combination

void t0_exactness(Outcome& out) {
  const std::vector<std::pair<std::string, RandomFamily>> families{
      {"example", build_example_family(0.2, 0.8, {{0.35, 0.65, 0}}, {3.2, 6.0})},
      {"full_cover", build_example_family(0.2, 0.8, {{0.2, 0.5, 0}, {0.5, 0.8, 1}}, {3.2, 6.0})},
      {"two_blocks", build_example_family(0.2, 0.8, {{0.3, 0.45, 0}, {0.55, 0.7, 1}}, {3.2, 6.0})},
      {"cantor", RandomFamily::constant(
                     build_affine_cookie_cutter({{0.0, 1.0 / 3, {}}, {2.0 / 3, 1.0, {}}}), "cookie_cutter")},
      {"golden", RandomFamily::constant(build_affine_cookie_cutter({{0.0, 0.5, {}}, {0.75, 1.0, {}}}),
                                        "cookie_cutter")}};
  const std::vector<std::pair<std::string, BaseSystem>> bases{
      {"dirac", BaseSystem::dirac(3.5)},
      {"rotation", BaseSystem::rotation(3.2, 6.0, 1)},
      {"bernoulli", BaseSystem::bernoulli({{3.5, 0.5}, {5.0, 0.5}}, 1)}};

  // t = 0 weights are all 1, so the resolution does not matter
  SolverConfig sc;
  sc.bins = 256;
  sc.burn_in = 60;
  sc.n_samples = 2;
  const SolveOptions o = sc.solve_options(sc.k_max);

  double worst_lambda = 0.0, worst_ep = 0.0, worst_mass = 0.0;
  int combos = 0;
  for (const auto& [fname, fam] : families)
    for (const auto& [bname, base] : bases) {
      const double G = static_cast<double>(fam.branch_count());
      const auto r = solve_conformal(base.sample_path(0, required_path_length(o), 0), fam, 0.0, o);
      for (double l : r.lambdas) worst_lambda = std::max(worst_lambda, std::abs(l - G));
      for (const auto& cm : cylinder_masses(r, 5))
        worst_mass = std::max(worst_mass, std::abs(cm.mass - std::pow(G, -5)));
      const PressurePoint p = expected_pressure(base, fam, 0.0, sc.k_max, sc);
      worst_ep = std::max(worst_ep, std::abs(p.value - std::log(G)));
      ++combos;
    }
  out.detail << combos << " combos, max|lambda-#G|=" << fmt(worst_lambda) << " max|EP(0)-log#G|="
             << fmt(worst_ep) << " max|mass-#G^-5|=" << fmt(worst_mass);
  out.require(worst_lambda <= 1e-10, "lambda");
  out.require(worst_ep <= 1e-10, "EP(0)");
  out.require(worst_mass <= 1e-10, "depth-5 masses");
}

// 2: Moran oracles

void moran(Outcome& out) {
  const SolverConfig sc;
  const Loaded cc = load("cookie_cutter.json");
  double worst_ep = 0.0;
  for (double t : {0.0, 0.5, 1.0}) {
    const PressurePoint p = expected_pressure(cc.base, cc.family, t, sc.k_max, sc);
    worst_ep = std::max(worst_ep, std::abs(p.value - (std::log(2.0) - t * std::log(3.0))));
  }
  const double s = std::log(2.0) / std::log(3.0);
  const BowenResult b = bowen_parameter(cc.base, cc.family, sc);
  DimensionConfig dc;
  dc.n_omega = 1;
  const auto dims = sample_dimensions(cc.base, cc.family, dc);
  const double cyl = dims.at(0).cylinder_dim();
  const double box = dims.at(0).box_dim();

  const Loaded g = load("cookie_cutter_golden.json");
  const BowenResult gb = bowen_parameter(g.base, g.family, sc);
  const double golden = std::log((1 + std::sqrt(5.0)) / 2) / std::log(2.0);

  out.detail << "max|EP-(log2-t log3)|=" << fmt(worst_ep) << " b_T=" << fmt(b.b_T, 6) << " (exact "
             << fmt(s, 6) << ") cyl=" << fmt(cyl, 6) << " box=" << fmt(box, 4)
             << " golden b_T=" << fmt(gb.b_T, 6) << " (exact " << fmt(golden, 6) << ")";
  out.require(worst_ep <= 1e-3, "EP");
  out.require(std::abs(b.b_T - s) <= 0.005, "b_T");
  out.require(std::abs(cyl - s) <= 0.002, "cylinder dim");
  out.require(std::abs(box - s) <= 0.03, "box dim");
  out.require(std::abs(gb.b_T - 0.6942) <= 0.005, "golden b_T");
}

// 3: full cover versus gap

void full_cover(Outcome& out) {
  const SolverConfig sc;
  DimensionConfig dc;
  dc.n_omega = 4;
  dc.eps_schedule = {1e-3};

  const Loaded fc = load("full_cover.json");
  const BowenResult fb = bowen_parameter(fc.base, fc.family, sc);
  double box_min = 1.0;
  for (const auto& d : sample_dimensions(fc.base, fc.family, dc)) {
    out.require(!d.error, "full cover sample error");
    if (!d.error) box_min = std::min(box_min, d.box_dim());
  }

  const Loaded gp = load("gapped.json");
  const BowenResult gb = bowen_parameter(gp.base, gp.family, sc);
  double est_max = 0.0;
  for (const auto& d : sample_dimensions(gp.base, gp.family, dc)) {
    out.require(!d.error, "gapped sample error");
    if (!d.error) est_max = std::max({est_max, d.cylinder_dim(), d.box_dim()});
  }

  out.detail << "full cover: detected=" << (fb.full_cover ? "yes" : "no") << " b_T=" << fmt(fb.b_T, 6)
             << " min box=" << fmt(box_min) << "; gapped: b_T=" << fmt(gb.b_T, 5)
             << " max estimator=" << fmt(est_max);
  out.require(fb.full_cover && fb.b_T == 1.0, "full-cover b_T");
  out.require(box_min >= 0.98, "full-cover box dim");
  out.require(!gb.full_cover && gb.b_T <= 0.99, "gapped b_T");
  out.require(est_max < 1.0, "gapped estimators");
}

// 4: Bowen cross-validation on a random system

void bowen_cross(Outcome& out) {
  const SolverConfig sc;
  const Loaded rb = load("random_two_blocks.json");
  const BowenResult b = bowen_parameter(rb.base, rb.family, sc);
  const DimensionConfig dc;
  const DimensionReport rep = bowen_check(rb.base, rb.family, b, dc);
  int close = 0;
  out.detail << "b_T=" << fmt(b.b_T, 5) << " +- " << fmt(b.uncertainty, 2) << " cyl:";
  for (const auto& s : rep.samples) {
    if (s.error) {
      out.detail << " error";
      continue;
    }
    out.detail << " " << fmt(s.cylinder_dim(), 4);
    if (std::abs(s.cylinder_dim() - b.b_T) < 0.05) ++close;
  }
  out.detail << " within 0.05: " << close << "/" << rep.samples.size() << " std=" << fmt(rep.cylinder_std, 3);
  out.require(rep.samples.size() == 8, "8 samples");
  out.require(close >= 7, "agreement count");
  out.require(rep.cylinder_std < 0.03, "std");
}

// 5: pressure curve structure

void pressure_structure(Outcome& out) {
  SolverConfig sc;
  sc.bins = 2048;
  const Loaded rb = load("random_two_blocks.json");
  std::vector<double> grid;
  for (int i = 0; i <= 12; ++i) grid.push_back(0.1 * i);
  const PressureCurve c = pressure_curve(rb.base, rb.family, grid, sc);
  const int K = c.largest_k();
  const double logA = std::log(rb.family.partition->bigA);

  double min_dec = 1e300, worst_lip = -1e300, worst_k = -1e300;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const PressurePoint& p = c.at(i, K);
    const PressurePoint& q = c.at(i + 1, K);
    const double dec = p.value - q.value;
    min_dec = std::min(min_dec, dec);
    worst_lip = std::max(worst_lip, dec - ((grid[i + 1] - grid[i]) * logA +
                                           4 * std::max(p.std_error, q.std_error)));
  }
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = 0; j + 1 < sc.k_schedule.size(); ++j) {
      const PressurePoint& lo = c.at(i, sc.k_schedule[j]);
      const PressurePoint& hi = c.at(i, sc.k_schedule[j + 1]);
      worst_k = std::max(worst_k, lo.value - hi.value - 2 * std::max(lo.std_error, hi.std_error));
    }
  out.detail << "13 t x " << sc.k_schedule.size() << " k, min decrement=" << fmt(min_dec)
             << " Lipschitz slack=" << fmt(-worst_lip) << " k-monotone slack=" << fmt(-worst_k)
             << " EP(1.2)=" << fmt(c.at(12, K).value);
  out.require(min_dec >= 0.0, "monotone");
  out.require(worst_lip <= 0.0, "Lipschitz bound");
  out.require(worst_k <= 0.0, "monotone in k");
}

// 6: conformality residual

void residual(Outcome& out) {
  const Loaded fc = load("full_cover.json");
  SolveOptions o;
  o.n_out = 10;
  auto at = [&](int bins) {
    o.bins = bins;
    return conformality_residual(
        solve_conformal(fc.base.sample_path(0, required_path_length(o), 0), fc.family, 1.0, o), 3);
  };
  const double r1 = at(4096);
  const double r2 = at(8192);
  const double ratio = r2 / r1;
  out.detail << "residual(4096)=" << fmt(r1) << " residual(8192)=" << fmt(r2) << " ratio=" << fmt(ratio, 3);
  out.require(r1 <= 0.02, "residual <= 2%");
  out.require(ratio >= 0.35 && ratio <= 0.65, "halving");
}

// 7: distortion sandwich

void distortion(Outcome& out) {
  const double eta = 0.05;
  const double K = distortion_constant(eta);
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(eta, 1.0 - eta);
  int checks = 0, failures = 0;
  double worst = 1.0;
  for (const char* name : {"example.json", "random_two_blocks.json", "rotation.json", "full_cover.json"}) {
    const Loaded l = load(name);
    for (std::uint64_t sample = 0; sample < 5; ++sample) {
      const auto fibers = realize_fibers(l.family, l.base.sample_path(0, 16, sample), 0, 16);
      for (int trial = 0; trial < 50; ++trial) {
        CylinderCode code;
        const int depth = 1 + static_cast<int>(rng() % 15);
        for (int i = 0; i < depth; ++i)
          code.symbols.push_back(static_cast<std::uint16_t>(rng() % fibers[static_cast<std::size_t>(i)].size()));
        const double x = u(rng), y = u(rng);
        const double r = std::abs(pullback_point(fibers, code, y).deriv / pullback_point(fibers, code, x).deriv);
        worst = std::max({worst, r, 1.0 / r});
        if (!(r <= K && r >= 1.0 / K)) ++failures;
        ++checks;
      }
    }
  }
  out.detail << checks << " checks, " << failures << " outside [1/K, K], worst ratio=" << fmt(worst)
             << " K=" << fmt(K);
  out.require(checks == 1000, "1000 checks");
  out.require(failures == 0, "sandwich");
}

// 8: invariant measure and Lyapunov exponent

void lyapunov(Outcome& out) {
  SolveOptions o;
  o.bins = 4096;
  o.n_out = 20;
  const BaseSystem dirac = BaseSystem::dirac(0.0);
  auto chi = [&](const RandomFamily& fam, const BaseSystem& base, double t) {
    const auto r = solve_conformal(base.sample_path(0, required_path_length(o), 0), fam, t, o);
    return lyapunov_exponent(invariant_measure(r, 10), r.fibers);
  };
  struct Oracle {
    const char* name;
    MapInstance map;
    double exact;
  };
  const double phi = (1 + std::sqrt(5.0)) / 2;
  const std::vector<Oracle> oracles{
      {"cantor", build_affine_cookie_cutter({{0.0, 1.0 / 3, {}}, {2.0 / 3, 1.0, {}}}), std::log(3.0)},
      {"doubling", build_affine_cookie_cutter({{0.0, 0.5, {}}, {0.5, 1.0, {}}}), std::log(2.0)},
      {"golden", build_affine_cookie_cutter({{0.0, 0.5, {}}, {0.75, 1.0, {}}}),
       std::log(2.0) / phi + std::log(4.0) / (phi * phi)}};
  double worst = 0.0;
  for (const auto& orc : oracles) {
    std::vector<double> ratios;
    for (const auto& b : orc.map.branches()) ratios.push_back(b.length());
    const double c = chi(RandomFamily::constant(orc.map, orc.name), dirac, moran_root(ratios));
    out.detail << orc.name << "=" << fmt(c, 5) << " (exact " << fmt(orc.exact, 5) << ") ";
    worst = std::max(worst, std::abs(c - orc.exact));
    out.require(c > 0.0, std::string(orc.name) + " positivity");
  }
  double min_random = 1e300;
  o.bins = 2048;
  for (const char* name : {"full_cover.json", "random_two_blocks.json", "rotation.json"}) {
    const Loaded l = load(name);
    for (double t : {0.5, 1.0}) min_random = std::min(min_random, chi(l.family, l.base, t));
  }
  out.detail << "max error=" << fmt(worst) << " min chi on random runs=" << fmt(min_random);
  out.require(worst <= 0.02, "oracle error");
  out.require(min_random > 0.0, "positivity");
}

// 9: determinism of the command-line outputs

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void determinism(Outcome& out) {
  const fs::path root = fs::temp_directory_path() / ("rcfm_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const std::vector<std::string> fast{"--set", "numerics.bins=512", "--set", "numerics.burn_in=120",
                                      "--set", "numerics.n_samples=2"};
  const std::vector<std::vector<std::string>> commands{
      {"validate", "random_two_blocks.json"},
      {"cylinders", "example.json"},
      {"conformal", "random_two_blocks.json", "--set", "numerics.dump_measures=true"},
      {"pressure-curve", "random_two_blocks.json", "--set", "numerics.t_grid=[0.0,0.5,1.0]"},
      {"bowen-check", "random_two_blocks.json", "--set", "numerics.bisection_tol=0.02", "--set",
       "numerics.n_omega=3", "--set", "numerics.eps_schedule=[0.01,0.001]"}};
  auto run_all = [&](const fs::path& dir, const std::string& threads) {
    for (auto cmd : commands) {
      cmd[1] = (kConfigs / cmd[1]).string();
      if (cmd[0] != "validate" && cmd[0] != "cylinders") cmd.insert(cmd.end(), fast.begin(), fast.end());
      cmd.insert(cmd.begin(), "rcfm");
      cmd.insert(cmd.end(), {"--out", dir.string(), "--threads", threads});
      std::vector<char*> argv;
      for (auto& a : cmd) argv.push_back(a.data());
      if (cli::run(static_cast<int>(argv.size()), argv.data()) != 0) return false;
    }
    return true;
  };
  std::fflush(stdout);
  const int saved = ::dup(1);
  const int devnull = ::open("/dev/null", O_WRONLY);
  ::dup2(devnull, 1);
  const bool ran = run_all(root / "a", "1") && run_all(root / "b", "1") && run_all(root / "c", "2");
  std::fflush(stdout);
  ::dup2(saved, 1);
  ::close(devnull);
  ::close(saved);
  out.require(ran, "all commands exit 0");
  int files = 0, differing = 0;
  if (ran) {
    for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
      if (!e.is_regular_file()) continue;
      const fs::path rel = fs::relative(e.path(), root / "a");
      const std::string ref = slurp(e.path());
      for (const char* other : {"b", "c"}) {
        const fs::path q = root / other / rel;
        if (!fs::exists(q) || slurp(q) != ref) ++differing;
      }
      ++files;
    }
  }
  fs::remove_all(root);
  out.detail << files << " files x 3 runs (threads 1, 1, 2), " << differing << " differ";
  out.require(files >= 10, "outputs produced");
  out.require(differing == 0, "byte identical");
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0: none
  std::function<void(Outcome&)> body;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "t=0 exactness", 10, t0_exactness},
      {2, "Moran oracle", 120, moran},
      {3, "full-cover dichotomy", 180, full_cover},
      {4, "Bowen cross-validation", 900, bowen_cross},
      {5, "pressure structure", 600, pressure_structure},
      {6, "conformality residual", 120, residual},
      {7, "distortion sandwich", 60, distortion},
      {8, "invariant measure and Lyapunov", 120, lyapunov},
      {9, "determinism", 0, determinism},
  };
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!pick.empty() && !pick.count(c.id)) continue;
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.body(out);
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0 && secs > c.budget_s) {
      out.pass = false;
      out.detail << " [over budget " << c.budget_s << " s]";
    }
    if (!out.pass) ++failed;
    std::printf("%s %d %s: %s (%.1f s)\n", out.pass ? "PASS" : "FAIL", c.id, c.name, out.detail.str().c_str(),
                secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
