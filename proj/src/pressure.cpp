#include "rcfm/pressure.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

#include "rcfm/errors.hpp"
#include "rcfm/parallel.hpp"

namespace rcfm {

SolveOptions SolverConfig::solve_options(int k) const {
  SolveOptions o;
  o.k = k;
  o.burn_in = burn_in;
  o.bins = bins;
  o.grade = grade;
  o.n_out = n_birkhoff;
  o.tol = tol;
  o.eta = eta;
  return o;
}

PressurePoint expected_pressure(const BaseSystem& base, const RandomFamily& family, double t,
                                int k, const SolverConfig& cfg) {
  if (!(t >= 0.0)) throw std::invalid_argument("t must be >= 0");
  if (cfg.n_birkhoff < 50) throw std::invalid_argument("n_birkhoff must be >= 50");
  if (cfg.n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  PressurePoint pt;
  pt.t = t;
  pt.k = k;
  pt.n_birkhoff = cfg.n_birkhoff;
  pt.n_samples = base.is_dirac() ? 1 : cfg.n_samples;
  const SolveOptions opts = cfg.solve_options(k);
  const int len = required_path_length(opts);
  std::vector<double> averages(static_cast<std::size_t>(pt.n_samples));
  parallel_for(averages.size(), resolve_threads(cfg.threads), [&](std::size_t i) {
    const BasePath path = base.sample_path(0, len, i);
    try {
      const ConformalSolveResult r = solve_conformal(path, family, t, opts);
      double s = 0.0;
      for (double l : r.lambdas) s += std::log(l);
      averages[i] = s / static_cast<double>(r.lambdas.size());
    } catch (const NoConvergence& e) {
      throw NoConvergence(std::string(e.what()) + " (sample " + std::to_string(i) + ", k = " +
                              std::to_string(k) + ")",
                          e.achieved());
    }
  });
  const double n = static_cast<double>(averages.size());
  pt.value = std::accumulate(averages.begin(), averages.end(), 0.0) / n;
  if (averages.size() > 1) {
    double ss = 0.0;
    for (double a : averages) ss += (a - pt.value) * (a - pt.value);
    pt.std_error = std::sqrt(ss / (n - 1.0) / n);
  }
  return pt;
}

const PressurePoint& PressureCurve::at(std::size_t t_index, int k) const {
  const double t = grid.at(t_index);
  for (const auto& p : points)
    if (p.t == t && p.k == k) return p;
  throw std::out_of_range("no pressure point at t = " + std::to_string(t) +
                          ", k = " + std::to_string(k));
}

int PressureCurve::largest_k() const {
  if (points.empty()) throw std::out_of_range("empty pressure curve");
  int k = points.front().k;
  for (const auto& p : points) k = std::max(k, p.k);
  return k;
}

PressureCurve pressure_curve(const BaseSystem& base, const RandomFamily& family,
                             std::vector<double> grid, const SolverConfig& cfg) {
  if (grid.empty()) throw ConfigError("numerics.t_grid", "empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw ConfigError("numerics.t_grid", "must be ascending");
  if (cfg.k_schedule.empty()) throw ConfigError("numerics.k_schedule", "empty schedule");

  PressureCurve curve;
  curve.grid = std::move(grid);
  curve.chi0 = chi0(base, family, cfg.chi0_samples).estimate;
  curve.gamma_plus = family.partition->gamma_plus;
  curve.relaxed_mode = family.partition->relaxed_mode;
  for (double t : curve.grid)
    for (int k : cfg.k_schedule) curve.points.push_back(expected_pressure(base, family, t, k, cfg));
  return curve;
}

Admissibility admissible(double t, const PressureCurve& curve) {
  if (curve.grid.empty() || t < curve.grid.front() || t > curve.grid.back())
    throw OutOfGrid("t = " + std::to_string(t) + " is outside the pressure grid");
  Admissibility a;
  const int k = curve.largest_k();
  std::size_t i = 0;
  while (i + 1 < curve.grid.size() && curve.grid[i + 1] < t) ++i;
  double p = curve.at(i, k).value;
  if (i + 1 < curve.grid.size() && t > curve.grid[i]) {
    const double t0 = curve.grid[i];
    const double t1 = curve.grid[i + 1];
    const double w = (t - t0) / (t1 - t0);
    p = (1.0 - w) * p + w * curve.at(i + 1, k).value;
  }
  if (curve.relaxed_mode || !curve.gamma_plus) {
    a.vacuous = true;
    a.admissible = true;
    a.margin = p;
    return a;
  }
  a.margin = p + t * curve.chi0 / (1.0 + *curve.gamma_plus);
  a.admissible = a.margin > 0.0;
  return a;
}

BowenResult bowen_parameter(const BaseSystem& base, const RandomFamily& family,
                            const SolverConfig& cfg) {
  BowenResult res;
  const PartitionSpec& part = *family.partition;
  res.lipschitz = std::log(part.bigA);
  res.chi0 = chi0(base, family, cfg.chi0_samples).estimate;
  res.full_cover = part.full_cover();
  res.relaxed_mode = part.relaxed_mode;
  const int k = cfg.k_max;

  auto eval = [&](double t) {
    res.evaluations.push_back(expected_pressure(base, family, t, k, cfg));
    return res.evaluations.back();
  };
  eval(0.0);
  const PressurePoint p1 = eval(1.0);

  if (res.full_cover) {
    res.b_T = 1.0;
    res.bracket = {1.0, 1.0};
  } else if (p1.value > 3.0 * p1.std_error) {
    throw NoRoot("pressure at t = 1 is " + std::to_string(p1.value) +
                 " > 0 although the branches leave gaps");
  } else if (p1.value >= 0.0) {
    res.b_T = 1.0;
    res.bracket = {1.0, 1.0};
    res.uncertainty = 3.0 * p1.std_error / res.lipschitz;
  } else {
    double lo = 0.0;
    double hi = 1.0;
    double se = p1.std_error;
    while (hi - lo >= cfg.bisection_tol) {
      const double mid = 0.5 * (lo + hi);
      const PressurePoint p = eval(mid);
      se = p.std_error;
      if (std::abs(p.value) < 2.0 * p.std_error) {
        lo = hi = mid;
        break;
      }
      (p.value > 0.0 ? lo : hi) = mid;
    }
    res.b_T = 0.5 * (lo + hi);
    res.bracket = {lo, hi};
    res.uncertainty = 0.5 * (hi - lo) + 2.0 * se / res.lipschitz;
  }

  PressureCurve probe;
  std::map<double, PressurePoint> by_t;
  for (const auto& p : res.evaluations) by_t[p.t] = p;
  for (const auto& [t, p] : by_t) {
    probe.grid.push_back(t);
    probe.points.push_back(p);
  }
  probe.chi0 = res.chi0;
  probe.gamma_plus = part.gamma_plus;
  probe.relaxed_mode = part.relaxed_mode;
  res.admissible_at_root = admissible(res.b_T, probe);
  return res;
}

}  // namespace rcfm
