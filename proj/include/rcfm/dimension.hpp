#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rcfm/base_dynamics.hpp"
#include "rcfm/cylinders.hpp"
#include "rcfm/interval_maps.hpp"
#include "rcfm/pressure.hpp"

namespace rcfm {

/// Cover exponent: the s in [0, 1] with sum over leaves of diam^s = 1, where
/// leaves are the cylinders first reaching diameter < eps.
double cylinder_dimension(std::span<const MapInstance> fibers, double eps,
                          std::size_t leaf_cap = 10'000'000);

struct BoxCount {
  double delta;
  long count;
};

struct BoxCountResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::vector<BoxCount> counts;
};

/// delta = base^{-j} for j in [j_lo, j_hi].
std::vector<double> geometric_deltas(double base, int j_lo, int j_hi);

/// Counts boxes [i delta, (i+1) delta] containing a point x with
/// T^j(x) in I_* for j = 0 .. n_iter, then fits log N against log(1/delta).
/// Survival is decided exactly on intervals: each branch piece of a box is
/// mapped forward and the box survives as soon as an image covers a whole
/// branch of the next fiber.
BoxCountResult box_counting_dim(std::span<const MapInstance> fibers, int n_iter,
                                const std::vector<double>& delta_grid);

struct DimensionConfig {
  int n_omega = 8;
  std::vector<double> eps_schedule{1e-2, 1e-3, 1e-4};
  std::vector<int> n_iter_schedule{10, 15, 20};
  std::vector<double> delta_grid = geometric_deltas(2.0, 6, 14);
  int max_depth = 400;
  std::size_t leaf_cap = 10'000'000;
  double tolerance = 0.05;
  double stability_tol = 0.02;
};

struct DimensionSample {
  std::uint64_t omega_index = 0;
  std::vector<std::pair<double, double>> cylinder;  // (eps, s)
  std::vector<std::pair<int, BoxCountResult>> box;  // (n_iter, fit)
  std::vector<std::string> flags;
  std::optional<std::string> error;

  /// Estimates at the finest eps and the largest n_iter.
  double cylinder_dim() const { return cylinder.back().second; }
  double box_dim() const { return box.back().second.slope; }
};

/// Both estimators on each of `cfg.n_omega` sampled base paths. Errors are
/// stored per sample.
std::vector<DimensionSample> sample_dimensions(const BaseSystem& base, const RandomFamily& family,
                                               const DimensionConfig& cfg, int threads = 1);

struct DimensionReport {
  double b_T = 0.0;
  double b_T_uncertainty = 0.0;
  std::vector<DimensionSample> samples;
  double cylinder_discrepancy = 0.0;  // max |cylinder_dim - b_T|
  double box_discrepancy = 0.0;
  double discrepancy = 0.0;
  double cylinder_std = 0.0;
  int flagged = 0;
};

/// Runs both estimators on `n_omega` sampled base paths and compares them
/// with a previously computed Bowen parameter. Per-sample failures are
/// recorded in the sample and do not abort the batch.
DimensionReport bowen_check(const BaseSystem& base, const RandomFamily& family,
                            const BowenResult& bowen, const DimensionConfig& cfg, int threads = 1);

}  // namespace rcfm
