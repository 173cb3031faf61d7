#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "rcfm/base_dynamics.hpp"
#include "rcfm/interval_maps.hpp"
#include "rcfm/measures.hpp"

namespace rcfm {

struct SolverConfig {
  int bins = 4096;
  double grade = 1.0 / 32;
  int burn_in = 240;
  int n_birkhoff = 50;
  int n_samples = 4;  // a Dirac base always uses one
  double tol = 1e-8;
  std::vector<int> k_schedule{5, 10, 20, 40, 60};
  int k_max = 60;
  double bisection_tol = 2e-3;
  int chi0_samples = 4096;
  double eta = 0.05;
  int threads = 1;

  SolveOptions solve_options(int k) const;
};

struct PressurePoint {
  double t = 0.0;
  int k = 0;
  double value = 0.0;
  double std_error = 0.0;
  int n_birkhoff = 0;
  int n_samples = 0;
};

/// Monte Carlo estimate of EP_k(t) from Birkhoff averages of log lambda
/// along `n_samples` sampled base paths. At t = 0 the value is log #G.
PressurePoint expected_pressure(const BaseSystem& base, const RandomFamily& family, double t,
                                int k, const SolverConfig& cfg);

struct PressureCurve {
  std::vector<double> grid;
  std::vector<PressurePoint> points;  // t-major, k in schedule order
  double chi0 = 0.0;
  std::optional<double> gamma_plus;
  bool relaxed_mode = false;

  /// Point for (grid index, k); throws std::out_of_range if absent.
  const PressurePoint& at(std::size_t t_index, int k) const;
  int largest_k() const;
};

PressureCurve pressure_curve(const BaseSystem& base, const RandomFamily& family,
                             std::vector<double> grid, const SolverConfig& cfg);

struct Admissibility {
  bool admissible = false;
  double margin = 0.0;   // EP(t) + t chi0 / (1 + gamma_plus)
  bool vacuous = false;  // relaxed mode: no critical branches
};

/// Largest-k pressure interpolated linearly on the grid.
Admissibility admissible(double t, const PressureCurve& curve);

struct BowenResult {
  double b_T = 0.0;
  std::pair<double, double> bracket{0.0, 0.0};
  double lipschitz = 0.0;  // log A
  double uncertainty = 0.0;
  double chi0 = 0.0;
  bool full_cover = false;
  bool relaxed_mode = false;
  std::optional<Admissibility> admissible_at_root;
  std::vector<PressurePoint> evaluations;  // in evaluation order
};

/// Bisection for the zero of the largest-k pressure on [0, 1].
BowenResult bowen_parameter(const BaseSystem& base, const RandomFamily& family,
                            const SolverConfig& cfg);

}  // namespace rcfm
