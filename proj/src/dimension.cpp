#include "rcfm/dimension.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rcfm/errors.hpp"
#include "rcfm/parallel.hpp"

namespace rcfm {

double cylinder_dimension(std::span<const MapInstance> fibers, double eps, std::size_t leaf_cap) {
  if (!(eps >= 1e-6 && eps <= 0.1)) throw std::invalid_argument("eps must lie in [1e-6, 0.1]");
  CylinderStop stop;
  stop.max_depth = static_cast<int>(fibers.size());
  stop.eps = eps;
  stop.leaf_cap = leaf_cap;
  const auto leaves = expand_cylinder_tree(fibers, stop);
  std::vector<double> diams;
  diams.reserve(leaves.size());
  for (const auto& l : leaves) diams.push_back(l.diam);
  return moran_root(diams);
}

std::vector<double> geometric_deltas(double base, int j_lo, int j_hi) {
  std::vector<double> out;
  for (int j = j_lo; j <= j_hi; ++j) out.push_back(std::pow(base, -j));
  return out;
}

namespace {

class Survival {
 public:
  Survival(std::span<const MapInstance> fibers, int n_iter) : fibers_(fibers), n_iter_(n_iter) {}

  bool operator()(double lo, double hi, int j) const {
    const double slack = 1e-9 * (hi - lo);
    for (const Branch& br : fibers_[static_cast<std::size_t>(j)].branches()) {
      const double a = std::max(lo, br.lo());
      const double b = std::min(hi, br.hi());
      if (!(b - a > slack)) continue;
      if (j == n_iter_) return true;
      double ya = br.value(a);
      double yb = br.value(b);
      if (ya > yb) std::swap(ya, yb);
      if (covers_branch(ya, yb, j + 1) || (*this)(ya, yb, j + 1)) return true;
    }
    return false;
  }

 private:
  // A whole branch inside the image maps onto [0, 1], so survivors exist.
  bool covers_branch(double lo, double hi, int j) const {
    for (const Branch& br : fibers_[static_cast<std::size_t>(j)].branches())
      if (lo <= br.lo() && br.hi() <= hi) return true;
    return false;
  }

  std::span<const MapInstance> fibers_;
  int n_iter_;
};

}  // namespace

BoxCountResult box_counting_dim(std::span<const MapInstance> fibers, int n_iter,
                                const std::vector<double>& delta_grid) {
  if (n_iter < 0) throw std::invalid_argument("n_iter must be >= 0");
  if (fibers.size() < static_cast<std::size_t>(n_iter) + 2)
    throw std::invalid_argument("box counting needs n_iter + 2 fibers");
  const Survival survives(fibers, n_iter);
  BoxCountResult res;
  std::vector<double> xs;
  std::vector<double> ys;
  for (double delta : delta_grid) {
    if (!(delta > 0.0 && delta < 1.0)) continue;
    const auto boxes = static_cast<long>(std::ceil(1.0 / delta - 1e-9));
    long count = 0;
    for (long i = 0; i < boxes; ++i) {
      const double lo = static_cast<double>(i) * delta;
      const double hi = std::min(1.0, static_cast<double>(i + 1) * delta);
      if (survives(lo, hi, 0)) ++count;
    }
    res.counts.push_back({delta, count});
    if (count > 0) {
      xs.push_back(-std::log(delta));
      ys.push_back(std::log(static_cast<double>(count)));
    }
  }
  if (xs.size() < 4)
    throw DegenerateFit("box counting has " + std::to_string(xs.size()) +
                        " usable scales, need 4");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw DegenerateFit("box counting scales are all equal");
  res.slope = sxy / sxx;
  res.intercept = my - res.slope * mx;
  res.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return res;
}

std::vector<DimensionSample> sample_dimensions(const BaseSystem& base, const RandomFamily& family,
                                               const DimensionConfig& cfg, int threads) {
  if (cfg.n_omega < 1) throw std::invalid_argument("n_omega must be >= 1");
  if (cfg.eps_schedule.empty() || cfg.n_iter_schedule.empty())
    throw std::invalid_argument("empty estimator schedule");
  std::vector<DimensionSample> samples(static_cast<std::size_t>(cfg.n_omega));
  const int max_iter = *std::max_element(cfg.n_iter_schedule.begin(), cfg.n_iter_schedule.end());
  const int len = std::max(cfg.max_depth, max_iter + 2);

  parallel_for(samples.size(), resolve_threads(threads), [&](std::size_t i) {
    DimensionSample& s = samples[i];
    s.omega_index = i;
    try {
      const BasePath path = base.sample_path(0, len, i);
      const auto fibers = realize_fibers(family, path, 0, len);
      for (double eps : cfg.eps_schedule)
        s.cylinder.emplace_back(eps, cylinder_dimension(fibers, eps, cfg.leaf_cap));
      for (int n : cfg.n_iter_schedule)
        s.box.emplace_back(n, box_counting_dim(fibers, n, cfg.delta_grid));
    } catch (const Error& e) {
      s.cylinder.clear();
      s.box.clear();
      s.error = e.what();
      s.flags.push_back("error");
      return;
    }
    double smin = s.box.front().second.slope;
    double smax = smin;
    for (const auto& [n, fit] : s.box) {
      smin = std::min(smin, fit.slope);
      smax = std::max(smax, fit.slope);
    }
    if (smax - smin > cfg.stability_tol) s.flags.push_back("box_unstable");
  });
  return samples;
}

DimensionReport bowen_check(const BaseSystem& base, const RandomFamily& family,
                            const BowenResult& bowen, const DimensionConfig& cfg, int threads) {
  DimensionReport rep;
  rep.b_T = bowen.b_T;
  rep.b_T_uncertainty = bowen.uncertainty;
  rep.samples = sample_dimensions(base, family, cfg, threads);
  for (auto& s : rep.samples) {
    if (s.error) continue;
    if (std::abs(s.cylinder_dim() - rep.b_T) > cfg.tolerance) s.flags.push_back("cylinder_off");
    if (std::abs(s.box_dim() - rep.b_T) > cfg.tolerance) s.flags.push_back("box_off");
  }

  std::vector<double> cyl;
  for (const auto& s : rep.samples) {
    if (!s.flags.empty()) ++rep.flagged;
    if (s.error) continue;
    cyl.push_back(s.cylinder_dim());
    rep.cylinder_discrepancy = std::max(rep.cylinder_discrepancy, std::abs(s.cylinder_dim() - rep.b_T));
    rep.box_discrepancy = std::max(rep.box_discrepancy, std::abs(s.box_dim() - rep.b_T));
  }
  rep.discrepancy = std::max(rep.cylinder_discrepancy, rep.box_discrepancy);
  if (cyl.size() > 1) {
    const double m = std::accumulate(cyl.begin(), cyl.end(), 0.0) / static_cast<double>(cyl.size());
    double ss = 0.0;
    for (double c : cyl) ss += (c - m) * (c - m);
    rep.cylinder_std = std::sqrt(ss / static_cast<double>(cyl.size() - 1));
  }
  return rep;
}

}  // namespace rcfm
