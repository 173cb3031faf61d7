#include "rcfm/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "rcfm/errors.hpp"

namespace rcfm {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so that
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "expected an object");
  }

  std::string key(const std::string& k) const { return prefix_.empty() ? k : prefix_ + "." + k; }

  template <class T>
  void get(const std::string& k, T& out) {
    if (!j_.contains(k)) return;
    seen_.insert(k);
    try {
      out = j_.at(k).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(key(k), "has the wrong type");
    }
  }

  void get(const std::string& k, std::pair<double, double>& out) {
    std::vector<double> v{out.first, out.second};
    get(k, v);
    if (v.size() != 2) throw ConfigError(key(k), "expected [lo, hi]");
    out = {v[0], v[1]};
  }

  const json* child(const std::string& k) {
    if (!j_.contains(k)) return nullptr;
    seen_.insert(k);
    return &j_.at(k);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(key(k), "unknown key");
  }

 private:
  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& key, const std::string& msg) {
  if (!ok) throw ConfigError(key, msg);
}

template <class T>
bool strictly_ascending(const std::vector<T>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) return false;
  return true;
}

FamilyConfig parse_family(const json& j) {
  FamilyConfig f;
  Section s(j, "family");
  s.get("kind", f.kind);
  s.get("a", f.a);
  s.get("b", f.b);
  s.get("omega_range", f.omega_range);
  if (const json* blocks = s.child("blocks")) {
    require(blocks->is_array(), "family.blocks", "expected an array");
    f.blocks.clear();
    for (std::size_t i = 0; i < blocks->size(); ++i) {
      Section b((*blocks)[i], "family.blocks[" + std::to_string(i) + "]");
      CriticalBlock blk{0.0, 0.0, 0};
      b.get("lo", blk.lo);
      b.get("hi", blk.hi);
      b.get("target", blk.target);
      b.finish();
      f.blocks.push_back(blk);
    }
  }
  if (const json* iv = s.child("intervals")) {
    require(iv->is_array(), "family.intervals", "expected an array");
    for (std::size_t i = 0; i < iv->size(); ++i) {
      Section b((*iv)[i], "family.intervals[" + std::to_string(i) + "]");
      AffinePiece p{0.0, 0.0, std::nullopt};
      b.get("lo", p.lo);
      b.get("hi", p.hi);
      bool inc = false;
      if ((*iv)[i].contains("increasing")) {
        b.get("increasing", inc);
        p.increasing = inc;
      }
      b.finish();
      f.intervals.push_back(p);
    }
  }
  s.finish();

  require(f.kind == "example" || f.kind == "cookie_cutter", "family.kind",
          "must be \"example\" or \"cookie_cutter\"");
  if (f.kind == "example") {
    require(f.a > 0.0 && f.a < 1.0, "family.a", "must lie in (0, 1)");
    require(f.b > f.a && f.b < 1.0, "family.b", "must lie in (a, 1)");
    require(!f.blocks.empty(), "family.blocks", "needs at least one critical block");
    for (const auto& blk : f.blocks) {
      require(blk.lo >= f.a && blk.hi <= f.b && blk.lo < blk.hi, "family.blocks",
              "each block must be a non-empty interval inside [a, b]");
      require(blk.target == 0 || blk.target == 1, "family.blocks", "target must be 0 or 1");
    }
    require(f.omega_range.first > 3.0 && f.omega_range.second >= f.omega_range.first,
            "family.omega_range", "must satisfy 3 < lo <= hi");
    require(f.intervals.empty(), "family.intervals", "only used by the cookie_cutter kind");
  } else {
    require(!f.intervals.empty(), "family.intervals", "needs at least one interval");
    for (const auto& p : f.intervals)
      require(p.lo >= 0.0 && p.hi <= 1.0 && p.lo < p.hi, "family.intervals",
              "each interval must be a non-empty subinterval of [0, 1]");
  }
  return f;
}

BaseConfig parse_base(const json& j) {
  BaseConfig b;
  Section s(j, "base");
  s.get("kind", b.kind);
  s.get("param", b.param);
  s.get("alpha", b.alpha);
  s.get("param_range", b.param_range);
  s.get("seed", b.seed);
  if (const json* al = s.child("alphabet")) {
    require(al->is_array(), "base.alphabet", "expected an array");
    for (std::size_t i = 0; i < al->size(); ++i) {
      Section e((*al)[i], "base.alphabet[" + std::to_string(i) + "]");
      AlphabetEntry a{0.0, 0.0};
      e.get("param", a.param);
      e.get("prob", a.prob);
      e.finish();
      b.alphabet.push_back(a);
    }
  }
  s.finish();

  require(b.kind == "dirac" || b.kind == "rotation" || b.kind == "bernoulli", "base.kind",
          "must be dirac, rotation or bernoulli");
  require(std::isfinite(b.param), "base.param", "must be finite");
  if (b.kind == "rotation") {
    require(b.alpha > 0.0 && b.alpha < 1.0, "base.alpha", "must lie in (0, 1)");
    require(b.param_range.first < b.param_range.second, "base.param_range",
            "must satisfy lo < hi");
  }
  if (b.kind == "bernoulli") {
    require(!b.alphabet.empty(), "base.alphabet", "needs at least one symbol");
    double sum = 0.0;
    for (const auto& a : b.alphabet) {
      require(a.prob >= 0.0, "base.alphabet", "probabilities must be >= 0");
      sum += a.prob;
    }
    require(std::abs(sum - 1.0) <= 1e-12, "base.alphabet", "probabilities must sum to 1");
  } else {
    require(b.alphabet.empty(), "base.alphabet", "only used by the bernoulli kind");
  }
  return b;
}

NumericsConfig parse_numerics(const json& j) {
  NumericsConfig n;
  Section s(j, "numerics");
  s.get("bins", n.bins);
  s.get("grade", n.grade);
  s.get("burn_in", n.burn_in);
  s.get("n_birkhoff", n.n_birkhoff);
  s.get("n_samples", n.n_samples);
  s.get("tol", n.tol);
  s.get("k_schedule", n.k_schedule);
  s.get("k_max", n.k_max);
  s.get("bisection_tol", n.bisection_tol);
  s.get("t_grid", n.t_grid);
  s.get("t", n.t);
  s.get("n_out", n.n_out);
  s.get("residual_depth", n.residual_depth);
  s.get("dump_measures", n.dump_measures);
  s.get("cylinder_depth", n.cylinder_depth);
  s.get("eps_schedule", n.eps_schedule);
  s.get("n_iter_schedule", n.n_iter_schedule);
  s.get("delta_grid", n.delta_grid);
  s.get("n_omega", n.n_omega);
  s.get("max_depth", n.max_depth);
  s.get("leaf_cap", n.leaf_cap);
  s.get("dim_tolerance", n.dim_tolerance);
  s.get("eta", n.eta);
  s.get("chi0_samples", n.chi0_samples);
  s.get("validate_grid", n.validate_grid);
  s.get("validate_tol", n.validate_tol);
  s.finish();

  require(n.bins >= 256 && n.bins <= (1 << 20), "numerics.bins", "must lie in [256, 2^20]");
  require(n.grade >= 0.0 && n.grade <= 1.0, "numerics.grade", "must lie in [0, 1]");
  require(n.burn_in >= 20, "numerics.burn_in", "must be >= 20");
  require(n.n_birkhoff >= 50, "numerics.n_birkhoff", "must be >= 50");
  require(n.n_samples >= 1, "numerics.n_samples", "must be >= 1");
  require(n.tol > 0.0 && n.tol < 1.0, "numerics.tol", "must lie in (0, 1)");
  require(!n.k_schedule.empty() && strictly_ascending(n.k_schedule) && n.k_schedule.front() >= 1,
          "numerics.k_schedule", "must be a non-empty ascending list of positive integers");
  require(n.k_max >= 1, "numerics.k_max", "must be >= 1");
  require(n.bisection_tol > 0.0 && n.bisection_tol < 0.5, "numerics.bisection_tol",
          "must lie in (0, 0.5)");
  require(!n.t_grid.empty() && strictly_ascending(n.t_grid), "numerics.t_grid",
          "must be a non-empty ascending list");
  require(n.t_grid.front() >= 0.0 && n.t_grid.back() <= 1.2, "numerics.t_grid",
          "values must lie in [0, 1.2]");
  require(n.t >= 0.0 && n.t <= 1.2, "numerics.t", "must lie in [0, 1.2]");
  require(n.n_out >= 1, "numerics.n_out", "must be >= 1");
  require(n.residual_depth >= 0 && n.residual_depth <= 6 && n.residual_depth <= n.n_out,
          "numerics.residual_depth", "must lie in [0, min(6, n_out)]");
  require(n.cylinder_depth >= 1 && n.cylinder_depth <= 24, "numerics.cylinder_depth",
          "must lie in [1, 24]");
  require(!n.eps_schedule.empty(), "numerics.eps_schedule", "must not be empty");
  for (std::size_t i = 0; i < n.eps_schedule.size(); ++i) {
    require(n.eps_schedule[i] >= 1e-6 && n.eps_schedule[i] <= 0.1, "numerics.eps_schedule",
            "values must lie in [1e-6, 0.1]");
    require(i == 0 || n.eps_schedule[i] < n.eps_schedule[i - 1], "numerics.eps_schedule",
            "must be descending");
  }
  require(!n.n_iter_schedule.empty() && strictly_ascending(n.n_iter_schedule) &&
              n.n_iter_schedule.front() >= 10,
          "numerics.n_iter_schedule", "must be ascending with values >= 10");
  require(n.delta_grid.size() >= 4, "numerics.delta_grid", "needs at least 4 values");
  double dmin = 1.0, dmax = 0.0;
  for (double d : n.delta_grid) {
    require(d > 0.0 && d < 1.0, "numerics.delta_grid", "values must lie in (0, 1)");
    dmin = std::min(dmin, d);
    dmax = std::max(dmax, d);
  }
  require(dmax / dmin >= 100.0 * (1.0 - 1e-12), "numerics.delta_grid",
          "must span at least two decades");
  require(n.n_omega >= 1, "numerics.n_omega", "must be >= 1");
  require(n.max_depth >= 1 && n.max_depth <= 10000, "numerics.max_depth",
          "must lie in [1, 10000]");
  require(n.leaf_cap >= 1, "numerics.leaf_cap", "must be >= 1");
  require(n.dim_tolerance > 0.0, "numerics.dim_tolerance", "must be > 0");
  require(n.eta > 0.0 && n.eta < 0.5, "numerics.eta", "must lie in (0, 0.5)");
  require(n.chi0_samples >= 2, "numerics.chi0_samples", "must be >= 2");
  require(n.validate_grid >= 100, "numerics.validate_grid", "must be >= 100");
  require(n.validate_tol > 0.0, "numerics.validate_tol", "must be > 0");
  return n;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  Section s(j, "");
  if (const json* f = s.child("family")) c.family = parse_family(*f);
  else c.family = parse_family(json::object());
  if (const json* b = s.child("base")) c.base = parse_base(*b);
  if (const json* n = s.child("numerics")) c.numerics = parse_numerics(*n);
  s.finish();
  return c;
}

json to_json(const ExperimentConfig& c) {
  json fam = {{"kind", c.family.kind},
              {"a", c.family.a},
              {"b", c.family.b},
              {"omega_range", {c.family.omega_range.first, c.family.omega_range.second}},
              {"blocks", json::array()},
              {"intervals", json::array()}};
  for (const auto& blk : c.family.blocks)
    fam["blocks"].push_back({{"lo", blk.lo}, {"hi", blk.hi}, {"target", blk.target}});
  for (const auto& p : c.family.intervals) {
    json e = {{"lo", p.lo}, {"hi", p.hi}};
    if (p.increasing) e["increasing"] = *p.increasing;
    fam["intervals"].push_back(e);
  }

  json base = {{"kind", c.base.kind},
               {"param", c.base.param},
               {"alpha", c.base.alpha},
               {"param_range", {c.base.param_range.first, c.base.param_range.second}},
               {"alphabet", json::array()},
               {"seed", c.base.seed}};
  for (const auto& a : c.base.alphabet)
    base["alphabet"].push_back({{"param", a.param}, {"prob", a.prob}});

  const NumericsConfig& n = c.numerics;
  json num = {{"bins", n.bins},
              {"grade", n.grade},
              {"burn_in", n.burn_in},
              {"n_birkhoff", n.n_birkhoff},
              {"n_samples", n.n_samples},
              {"tol", n.tol},
              {"k_schedule", n.k_schedule},
              {"k_max", n.k_max},
              {"bisection_tol", n.bisection_tol},
              {"t_grid", n.t_grid},
              {"t", n.t},
              {"n_out", n.n_out},
              {"residual_depth", n.residual_depth},
              {"dump_measures", n.dump_measures},
              {"cylinder_depth", n.cylinder_depth},
              {"eps_schedule", n.eps_schedule},
              {"n_iter_schedule", n.n_iter_schedule},
              {"delta_grid", n.delta_grid},
              {"n_omega", n.n_omega},
              {"max_depth", n.max_depth},
              {"leaf_cap", n.leaf_cap},
              {"dim_tolerance", n.dim_tolerance},
              {"eta", n.eta},
              {"chi0_samples", n.chi0_samples},
              {"validate_grid", n.validate_grid},
              {"validate_tol", n.validate_tol}};
  return {{"family", fam}, {"base", base}, {"numerics", num}};
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path);
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError(assignment, "override must look like key.path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &doc;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError(path, "empty key segment");
    parts.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    json& next = (*node)[parts[i]];
    if (next.is_null()) next = json::object();
    if (!next.is_object()) throw ConfigError(path, "cannot descend into a non-object");
    node = &next;
  }
  (*node)[parts.back()] = value;
}

std::string config_hash(const ExperimentConfig& c) {
  const std::string text = to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RandomFamily make_family(const FamilyConfig& f) {
  if (f.kind == "cookie_cutter")
    return RandomFamily::constant(build_affine_cookie_cutter(f.intervals), "cookie_cutter");
  return build_example_family(f.a, f.b, f.blocks, f.omega_range);
}

BaseSystem make_base(const BaseConfig& b) {
  if (b.kind == "rotation")
    return BaseSystem::rotation(b.param_range.first, b.param_range.second, b.seed, b.alpha);
  if (b.kind == "bernoulli") {
    std::vector<std::pair<double, double>> al;
    for (const auto& a : b.alphabet) al.emplace_back(a.param, a.prob);
    return BaseSystem::bernoulli(std::move(al), b.seed);
  }
  return BaseSystem::dirac(b.param, b.seed);
}

SolverConfig make_solver_config(const NumericsConfig& n, int threads) {
  SolverConfig s;
  s.bins = n.bins;
  s.grade = n.grade;
  s.burn_in = n.burn_in;
  s.n_birkhoff = n.n_birkhoff;
  s.n_samples = n.n_samples;
  s.tol = n.tol;
  s.k_schedule = n.k_schedule;
  s.k_max = n.k_max;
  s.bisection_tol = n.bisection_tol;
  s.chi0_samples = n.chi0_samples;
  s.eta = n.eta;
  s.threads = threads;
  return s;
}

DimensionConfig make_dimension_config(const NumericsConfig& n) {
  DimensionConfig d;
  d.n_omega = n.n_omega;
  d.eps_schedule = n.eps_schedule;
  d.n_iter_schedule = n.n_iter_schedule;
  d.delta_grid = n.delta_grid;
  d.max_depth = n.max_depth;
  d.leaf_cap = n.leaf_cap;
  d.tolerance = n.dim_tolerance;
  return d;
}

}  // namespace rcfm
