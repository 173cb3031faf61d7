#include "rcfm/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "rcfm/config.hpp"
#include "rcfm/cylinders.hpp"
#include "rcfm/dimension.hpp"
#include "rcfm/errors.hpp"
#include "rcfm/measures.hpp"
#include "rcfm/parallel.hpp"
#include "rcfm/pressure.hpp"

namespace rcfm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path default_output_root() {
  if (const char* env = std::getenv("RCFM_OUT"); env && *env) return env;
  return "rcfm-runs";
}

void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw Error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

fs::path create_run_dir(const fs::path& root, const std::string& hash) {
  const fs::path parent = root / hash;
  fs::create_directories(parent);
  int next = 1;
  for (const auto& e : fs::directory_iterator(parent)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("run-", 0) == 0) next = std::max(next, std::atoi(name.c_str() + 4) + 1);
  }
  for (;; ++next) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "run-%03d", next);
    if (fs::create_directory(parent / buf)) return parent / buf;
  }
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string csv_document(const std::string& hash, std::uint64_t seed,
                         const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  out << "# config_hash=" << hash << " seed=" << seed << '\n';
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
  return out.str();
}

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json to_json(const ValidationReport& r, double parameter) {
  json entries = json::array();
  for (const auto& e : r.entries) {
    json j = {{"condition", e.condition},
              {"passed", e.passed},
              {"waived", e.waived},
              {"detail", e.detail}};
    j["witness"] = e.witness ? finite_or_null(*e.witness) : json(nullptr);
    entries.push_back(j);
  }
  return {{"parameter", parameter},   {"all_passed", r.all_passed()}, {"relaxed_mode", r.relaxed_mode},
          {"kappa", r.kappa},         {"bigA", r.bigA},                {"s", r.s},
          {"entries", entries}};
}

json to_json(const PressurePoint& p) {
  return {{"t", p.t},
          {"k", p.k},
          {"value", p.value},
          {"stderr", p.std_error},
          {"n_birkhoff", p.n_birkhoff},
          {"n_samples", p.n_samples}};
}

json to_json(const Admissibility& a) {
  return {{"admissible", a.admissible}, {"margin", a.margin}, {"vacuous", a.vacuous}};
}

json to_json(const BowenResult& b) {
  json evals = json::array();
  for (const auto& p : b.evaluations) evals.push_back(to_json(p));
  json adm = b.admissible_at_root ? to_json(*b.admissible_at_root) : json(nullptr);
  return {{"b_T", b.b_T},
          {"bracket", {b.bracket.first, b.bracket.second}},
          {"lipschitz", b.lipschitz},
          {"uncertainty", b.uncertainty},
          {"chi0", b.chi0},
          {"full_cover", b.full_cover},
          {"relaxed_mode", b.relaxed_mode},
          {"admissible_range_checked", adm},
          {"evaluations", evals}};
}

json to_json(const DimensionSample& s) {
  json cyl = json::array();
  for (const auto& [eps, v] : s.cylinder) cyl.push_back({{"eps", eps}, {"value", v}});
  json box = json::array();
  for (const auto& [n, fit] : s.box) {
    json counts = json::array();
    for (const auto& c : fit.counts) counts.push_back({{"delta", c.delta}, {"count", c.count}});
    box.push_back({{"n_iter", n},
                   {"slope", fit.slope},
                   {"intercept", fit.intercept},
                   {"r2", fit.r2},
                   {"counts", counts}});
  }
  json j = {{"omega_index", s.omega_index}, {"cylinder", cyl}, {"box", box}, {"flags", s.flags}};
  j["error"] = s.error ? json(*s.error) : json(nullptr);
  if (!s.error) {
    j["cylinder_dim"] = s.cylinder_dim();
    j["box_dim"] = s.box_dim();
  }
  return j;
}

struct Context {
  ExperimentConfig config;
  std::string hash;
  std::uint64_t seed = 0;
  int threads = 1;
  fs::path root;
  fs::path run_dir;

  fs::path open_run() {
    run_dir = create_run_dir(root, hash);
    json cfg = rcfm::to_json(config);
    cfg["config_hash"] = hash;
    write_atomic(run_dir / "config.json", cfg.dump(2) + "\n");
    return run_dir;
  }

  void write_json(const std::string& name, json body) const {
    body["config_hash"] = hash;
    body["seed"] = seed;
    write_atomic(run_dir / name, body.dump(2) + "\n");
    std::cout << (run_dir / name).string() << '\n';
  }

  void write_csv(const std::string& name, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) const {
    write_atomic(run_dir / name, csv_document(hash, seed, header, rows));
    std::cout << (run_dir / name).string() << '\n';
  }
};

std::vector<double> validation_parameters(const ExperimentConfig& c, const BaseSystem& base) {
  if (c.family.kind == "cookie_cutter") return {0.0};
  if (c.base.kind == "dirac") return {c.base.param};
  if (c.base.kind == "bernoulli") {
    std::vector<double> out;
    for (const auto& a : c.base.alphabet) out.push_back(a.param);
    return out;
  }
  std::vector<double> out{c.base.param_range.first, c.base.param_range.second};
  for (int i = 0; i < c.numerics.n_omega; ++i)
    out.push_back(base.sample_path(0, 0, static_cast<std::uint64_t>(i)).at(0));
  return out;
}

int cmd_validate(Context& ctx) {
  const RandomFamily family = make_family(ctx.config.family);
  const BaseSystem base = make_base(ctx.config.base);
  json maps = json::array();
  bool all = true;
  for (double p : validation_parameters(ctx.config, base)) {
    const MapInstance m = family.realize(p);
    const ValidationReport r =
        validate_map(m, ctx.config.numerics.validate_grid, ctx.config.numerics.validate_tol);
    all = all && r.all_passed();
    for (const auto& e : r.entries)
      std::cout << "omega=" << num(p) << ' ' << e.condition << ' '
                << (e.waived ? "waived" : e.passed ? "pass" : "FAIL") << '\n';
    maps.push_back(to_json(r, p));
  }
  ctx.open_run();
  ctx.write_json("validation.json", {{"family", family.kind},
                                     {"relaxed_mode", family.partition->relaxed_mode},
                                     {"all_passed", all},
                                     {"maps", maps}});
  return all ? kOk : kValidationFailed;
}

int cmd_cylinders(Context& ctx) {
  const NumericsConfig& n = ctx.config.numerics;
  const RandomFamily family = make_family(ctx.config.family);
  const BaseSystem base = make_base(ctx.config.base);
  const auto fibers =
      realize_fibers(family, base.sample_path(0, n.cylinder_depth, 0), 0, n.cylinder_depth);
  CylinderStop stop;
  stop.max_depth = n.cylinder_depth;
  stop.leaf_cap = n.leaf_cap;
  stop.eta = n.eta;
  const auto leaves = expand_cylinder_tree(fibers, stop);
  std::vector<std::vector<std::string>> rows;
  std::vector<double> diams;
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (const auto& l : leaves) {
    rows.push_back({l.code.str(), std::to_string(l.code.depth()), num(l.lo), num(l.hi), num(l.diam),
                    num(l.deriv_at_mid)});
    diams.push_back(l.diam);
    lo = std::min(lo, l.diam);
    hi = std::max(hi, l.diam);
    sum += l.diam;
  }
  ctx.open_run();
  ctx.write_csv("cylinders.csv", {"code", "depth", "lo", "hi", "diam", "deriv_at_mid"}, rows);
  ctx.write_json("cylinders.json", {{"depth", n.cylinder_depth},
                                    {"leaves", leaves.size()},
                                    {"sum_diam", sum},
                                    {"min_diam", leaves.empty() ? 0.0 : lo},
                                    {"max_diam", leaves.empty() ? 0.0 : hi},
                                    {"moran_root", moran_root(diams)},
                                    {"eta", n.eta},
                                    {"K_eta", distortion_constant(n.eta)},
                                    {"relaxed_mode", family.partition->relaxed_mode}});
  return kOk;
}

int cmd_conformal(Context& ctx) {
  const NumericsConfig& n = ctx.config.numerics;
  const RandomFamily family = make_family(ctx.config.family);
  const BaseSystem base = make_base(ctx.config.base);
  SolverConfig sc = make_solver_config(n, ctx.threads);
  sc.n_birkhoff = n.n_out;
  const SolveOptions opts = sc.solve_options(n.k_max);
  const BasePath path = base.sample_path(0, required_path_length(opts), 0);
  const ConformalSolveResult r = solve_conformal(path, family, n.t, opts);
  const double residual = conformality_residual(r, n.residual_depth);
  const InvariantMeasures mu = invariant_measure(r, std::min(r.n_out() + 1, 20));
  const double chi = lyapunov_exponent(mu, r.fibers);
  const Diagnostics& d = r.diagnostics;
  json diag = {{"kappa", d.kappa},
               {"bigA", d.bigA},
               {"beta1", d.beta1},
               {"beta2", d.beta2},
               {"K_eta", d.K_eta},
               {"Q_G", d.Q_G},
               {"min_central_mass", d.min_central_mass},
               {"chi0", chi0(base, family, n.chi0_samples).estimate}};
  diag["gamma_plus"] = d.gamma_plus ? json(*d.gamma_plus) : json(nullptr);
  diag["gamma0_plus"] = d.gamma0_plus ? json(*d.gamma0_plus) : json(nullptr);

  ctx.open_run();
  if (n.dump_measures) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t j = 0; j < r.measures.size(); ++j) {
      const FiberMeasure& m = r.measures[j];
      for (int c = 0; c < m.bins(); ++c)
        rows.push_back({std::to_string(j), num(m.support.grid->lo(c)), num(m.support.grid->hi(c)),
                        num(m.mass[static_cast<std::size_t>(c)])});
    }
    ctx.write_csv("measures.csv", {"offset", "cell_lo", "cell_hi", "mass"}, rows);
  }
  ctx.write_json("conformal.json", {{"t", r.t},
                                    {"k", r.k},
                                    {"lambda_seq", r.lambdas},
                                    {"residual", residual},
                                    {"residual_depth", n.residual_depth},
                                    {"beta1", d.beta1},
                                    {"beta2", d.beta2},
                                    {"bins", r.bins},
                                    {"cells", r.measures.front().bins()},
                                    {"burn_in", r.burn_in},
                                    {"tv_residual", r.tv_residual},
                                    {"lyapunov", chi},
                                    {"relaxed_mode", family.partition->relaxed_mode},
                                    {"diagnostics", diag}});
  return kOk;
}

int cmd_pressure_curve(Context& ctx) {
  const NumericsConfig& n = ctx.config.numerics;
  const RandomFamily family = make_family(ctx.config.family);
  const BaseSystem base = make_base(ctx.config.base);
  const PressureCurve curve =
      pressure_curve(base, family, n.t_grid, make_solver_config(n, ctx.threads));
  std::vector<std::vector<std::string>> rows;
  json points = json::array();
  for (const auto& p : curve.points) {
    rows.push_back({num(p.t), std::to_string(p.k), num(p.value), num(p.std_error),
                    std::to_string(p.n_birkhoff), std::to_string(p.n_samples)});
    points.push_back(to_json(p));
  }
  json adm = json::array();
  for (double t : curve.grid) {
    json a = to_json(admissible(t, curve));
    a["t"] = t;
    adm.push_back(a);
  }
  ctx.open_run();
  ctx.write_csv("pressure_curve.csv", {"t", "k", "value", "stderr", "n_birkhoff", "n_samples"},
                rows);
  json summary = {{"grid", curve.grid},
                  {"k_schedule", n.k_schedule},
                  {"chi0", curve.chi0},
                  {"relaxed_mode", curve.relaxed_mode},
                  {"lipschitz", std::log(family.partition->bigA)},
                  {"points", points},
                  {"admissibility", adm}};
  summary["gamma_plus"] = curve.gamma_plus ? json(*curve.gamma_plus) : json(nullptr);
  ctx.write_json("pressure_curve.json", summary);
  return kOk;
}

int cmd_bowen(Context& ctx) {
  const RandomFamily family = make_family(ctx.config.family);
  const BaseSystem base = make_base(ctx.config.base);
  const BowenResult b =
      bowen_parameter(base, family, make_solver_config(ctx.config.numerics, ctx.threads));
  std::cout << "b_T = " << num(b.b_T) << " +- " << num(b.uncertainty) << '\n';
  ctx.open_run();
  ctx.write_json("bowen.json", to_json(b));
  return kOk;
}

int cmd_dim(Context& ctx) {
  const RandomFamily family = make_family(ctx.config.family);
  const BaseSystem base = make_base(ctx.config.base);
  const auto samples =
      sample_dimensions(base, family, make_dimension_config(ctx.config.numerics), ctx.threads);
  std::vector<std::vector<std::string>> rows;
  json js = json::array();
  std::vector<double> cyl, box;
  int failed = 0;
  for (const auto& s : samples) {
    if (s.error) {
      ++failed;
    } else {
      cyl.push_back(s.cylinder_dim());
      box.push_back(s.box_dim());
    }
    const std::string id = std::to_string(s.omega_index);
    for (const auto& [eps, v] : s.cylinder) rows.push_back({id, "cylinder", num(eps), num(v)});
    for (const auto& [n, fit] : s.box) {
      rows.push_back({id, "box_slope", std::to_string(n), num(fit.slope)});
      rows.push_back({id, "box_r2", std::to_string(n), num(fit.r2)});
    }
    if (!s.box.empty())
      for (const auto& c : s.box.back().second.counts)
        rows.push_back({id, "box_count", num(c.delta), std::to_string(c.count)});
    js.push_back(to_json(s));
  }
  ctx.open_run();
  ctx.write_csv("dim.csv", {"sample", "estimator", "depth_or_delta", "value"}, rows);
  auto mean_sd = [](const std::vector<double>& v) -> json {
    if (v.empty()) return {{"mean", nullptr}, {"std", nullptr}};
    double m = 0.0, q = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    for (double x : v) q += (x - m) * (x - m);
    const double sd = v.size() > 1 ? std::sqrt(q / static_cast<double>(v.size() - 1)) : 0.0;
    return {{"mean", m}, {"std", sd}};
  };
  ctx.write_json("dim.json", {{"n_omega", samples.size()},
                              {"failed", failed},
                              {"cylinder", mean_sd(cyl)},
                              {"box", mean_sd(box)},
                              {"samples", js}});
  return kOk;
}

int cmd_bowen_check(Context& ctx) {
  const RandomFamily family = make_family(ctx.config.family);
  const BaseSystem base = make_base(ctx.config.base);
  const BowenResult b =
      bowen_parameter(base, family, make_solver_config(ctx.config.numerics, ctx.threads));
  const DimensionConfig dc = make_dimension_config(ctx.config.numerics);
  const DimensionReport rep = bowen_check(base, family, b, dc, ctx.threads);
  json js = json::array();
  for (const auto& s : rep.samples) js.push_back(to_json(s));
  std::cout << "b_T = " << num(rep.b_T) << ", discrepancy = " << num(rep.discrepancy)
            << ", flagged = " << rep.flagged << '\n';
  ctx.open_run();
  ctx.write_json("bowen_check.json", {{"b_T", rep.b_T},
                                      {"b_T_uncertainty", rep.b_T_uncertainty},
                                      {"bracket", {b.bracket.first, b.bracket.second}},
                                      {"tolerance", dc.tolerance},
                                      {"discrepancy", rep.discrepancy},
                                      {"cylinder_discrepancy", rep.cylinder_discrepancy},
                                      {"box_discrepancy", rep.box_discrepancy},
                                      {"cylinder_std", rep.cylinder_std},
                                      {"flagged", rep.flagged},
                                      {"samples", js}});
  return kOk;
}

json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

void digest_line(std::ostream& out, const std::string& name, const json& j) {
  out << name << ':';
  for (const auto& [k, v] : j.items())
    if (v.is_primitive() && k != "config_hash") out << ' ' << k << '=' << v.dump();
  out << '\n';
}

int cmd_report(Context& ctx, const std::string& run_arg) {
  // Without --run every earlier run of this config is bundled.
  std::vector<fs::path> runs;
  if (!run_arg.empty()) {
    if (!fs::is_directory(run_arg)) throw ConfigError("--run", "not a directory: " + run_arg);
    runs.push_back(run_arg);
  } else {
    const fs::path parent = ctx.root / ctx.hash;
    if (fs::is_directory(parent))
      for (const auto& e : fs::directory_iterator(parent))
        if (e.is_directory() && !fs::exists(e.path() / "report.json")) runs.push_back(e.path());
    if (runs.empty()) throw ConfigError("--run", "no runs under " + parent.string());
    std::sort(runs.begin(), runs.end());
  }

  json bundle = json::object();
  std::ostringstream digest;
  digest << "config_hash=" << ctx.hash << " runs=" << runs.size() << '\n';
  for (const auto& run : runs) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(run))
      if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    json entry = json::object();
    for (const auto& f : files) {
      const json j = read_json_file(f);
      entry[f.filename().string()] = j;
      if (f.filename() != "config.json")
        digest_line(digest, run.filename().string() + "/" + f.filename().string(), j);
    }
    bundle[run.filename().string()] = std::move(entry);
  }
  ctx.open_run();
  ctx.write_json("report.json", {{"runs", bundle}});
  write_atomic(ctx.run_dir / "report.txt", digest.str());
  std::cout << (ctx.run_dir / "report.txt").string() << '\n' << digest.str();
  return kOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Random critically finite interval maps: conformal measures, pressure and dimension"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string out;
  std::string run_arg;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"validate", "check conditions M1-M7 on realized maps"},
      {"cylinders", "enumerate depth-n cylinders of a sampled fiber"},
      {"conformal", "solve for the t-conformal measure along one path"},
      {"pressure-curve", "expected pressure on the t grid for every k in the schedule"},
      {"bowen", "Bowen parameter by bisection"},
      {"dim", "cylinder-cover and box-counting dimension estimates"},
      {"bowen-check", "compare both dimension estimators with the Bowen parameter"},
      {"report", "bundle the JSON outputs of a run"}};
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, desc] : commands) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--set", overrides, "override a dotted key, e.g. numerics.bins=2048");
    sub->add_option("--seed", seed, "base seed (overrides base.seed)");
    sub->add_option("--threads", threads, "worker threads, 0 = all cores");
    sub->add_option("--out", out, "output root (default $RCFM_OUT or ./rcfm-runs)");
    if (name == "report") sub->add_option("--run", run_arg, "run directory to bundle");
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  std::string command;
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) command = name;

  Context ctx;
  try {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("<file>", "cannot open " + config_path);
    json doc;
    try {
      doc = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
      throw ConfigError("<file>", std::string("malformed JSON: ") + e.what());
    }
    for (const auto& o : overrides) apply_override(doc, o);
    if (seed) apply_override(doc, "base.seed=" + std::to_string(*seed));
    ctx.config = parse_config(doc);
    ctx.hash = config_hash(ctx.config);
    ctx.seed = ctx.config.base.seed;
    ctx.threads = resolve_threads(threads);
    ctx.root = out.empty() ? default_output_root() : fs::path(out);
    if (threads < 0) throw ConfigError("--threads", "must be >= 0");

    if (command == "validate") return cmd_validate(ctx);
    if (command == "cylinders") return cmd_cylinders(ctx);
    if (command == "conformal") return cmd_conformal(ctx);
    if (command == "pressure-curve") return cmd_pressure_curve(ctx);
    if (command == "bowen") return cmd_bowen(ctx);
    if (command == "dim") return cmd_dim(ctx);
    if (command == "bowen-check") return cmd_bowen_check(ctx);
    return cmd_report(ctx, run_arg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const BadGeometry& e) {
    std::cerr << "config error: family: " << e.what() << '\n';
    return kConfigError;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericalFailure;
  }
}

}  // namespace rcfm::cli
