#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "rcfm/base_dynamics.hpp"
#include "rcfm/cylinders.hpp"
#include "rcfm/interval_maps.hpp"

namespace rcfm {

/// Cell edges on [0,1]: `bins` equal cells, optionally graded geometrically
/// towards both endpoints, where the transfer weights of critical branches
/// are singular. With grade rho the cells within ceil(1/rho)/bins of an
/// endpoint shrink by the factor 1/(1 + rho) down to width 1e-13.
class CellGrid {
 public:
  static std::shared_ptr<const CellGrid> uniform(int bins);
  static std::shared_ptr<const CellGrid> graded(int bins, double rho);

  int size() const noexcept { return static_cast<int>(edges_.size()) - 1; }
  int bins() const noexcept { return bins_; }
  double lo(int c) const noexcept { return edges_[static_cast<std::size_t>(c)]; }
  double hi(int c) const noexcept { return edges_[static_cast<std::size_t>(c) + 1]; }
  const std::vector<double>& edges() const noexcept { return edges_; }
  /// Cell containing x (right-closed at 1).
  int locate(double x) const noexcept;

 private:
  std::vector<double> edges_;
  int bins_ = 0;
};

/// Where mass may live on one fiber: for every cell, the convex hull of
/// cell ∩ I_* ∩ U_omega(k). An empty hull has eff_hi <= eff_lo.
struct FiberSupport {
  std::shared_ptr<const CellGrid> grid;
  std::vector<double> eff_lo;
  std::vector<double> eff_hi;
  double trunc_point = 0.0;

  int bins() const noexcept { return static_cast<int>(eff_lo.size()); }
  double effective_length(int cell) const noexcept {
    return std::max(0.0, eff_hi[static_cast<std::size_t>(cell)] -
                             eff_lo[static_cast<std::size_t>(cell)]);
  }
};

FiberSupport make_support(const MapInstance& map, double trunc_point,
                          std::shared_ptr<const CellGrid> grid);

/// Binned measure on the cells of a CellGrid. Mass in a cell is spread uniformly over the
/// cell's effective hull.
struct FiberMeasure {
  std::vector<double> mass;
  FiberSupport support;

  int bins() const noexcept { return static_cast<int>(mass.size()); }
  double total() const noexcept;
  /// Divides by the total; returns the old total.
  double normalize();
  /// Measure of [a, b] under the piecewise-uniform density.
  double mass_in(double a, double b) const noexcept;

  static FiberMeasure uniform(const FiberSupport& support);
};

double total_variation(const FiberMeasure& a, const FiberMeasure& b);

/// Sparse, nonnegative dual transfer operator for one fiber step, split by
/// inverse branch: new_mass[target] += weight * old_mass[source].
struct PullbackOperator {
  struct Entry {
    std::uint32_t target;
    std::uint32_t source;
    double weight;
  };
  std::vector<std::vector<Entry>> per_branch;
  int bins = 0;

  std::vector<double> apply(std::span<const double> source) const;
  std::vector<double> apply_branch(std::size_t branch, std::span<const double> source) const;
};

/// Weights are exact cell integrals: a source cell C contributes to a target
/// cell D through branch Delta with
///   (1/|C|) \int_{D ∩ T_Delta^{-1}(C) ∩ U_omega(k)} |T'(x)|^{1-t} dx,
/// the change of variables of \int_C |(T_Delta^{-1})'|^t dnu.
PullbackOperator build_pullback_operator(const FiberSupport& source, const MapInstance& map,
                                         const FiberSupport& target, double t);

/// (L_{t,k,omega} g)(x) at the cell midpoints of fiber theta(omega); `g` is
/// sampled on the cells of fiber omega. Only preimages y >= trunc_point count.
std::vector<double> transfer_apply(std::span<const double> g, const CellGrid& grid,
                                   const MapInstance& map, double t, double trunc_point);

/// Cell averages (1/|C|) \int_C L_{t,k,omega} 1 over the effective cells of
/// `target` (fiber theta(omega)), integrated on the image side in closed form.
std::vector<double> transfer_cell_average_of_one(const MapInstance& map, double t,
                                                 double trunc_point,
                                                 const FiberSupport& target);

struct DualPullback {
  FiberMeasure measure;  // unnormalized
  double mass;
};

DualPullback dual_pullback(const FiberMeasure& nu, const MapInstance& map, double t,
                           double trunc_point);

/// k <= 0 means no truncation.
inline constexpr int kUntruncated = 0;

struct SolveOptions {
  int k = 60;
  int burn_in = 240;
  int bins = 4096;
  double grade = 1.0 / 32;  // 0 gives equal-width cells
  int n_out = 50;
  double tol = 1e-8;
  double eta = 0.05;
};

struct Diagnostics {
  double kappa = 0.0;
  double bigA = 0.0;
  std::optional<double> gamma_plus;
  std::optional<double> gamma0_plus;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double K_eta = 0.0;
  double Q_G = 0.0;
  /// min over output fibers of nu_omega([eta, 1-eta]).
  double min_central_mass = 0.0;
  std::optional<double> chi0;
};

struct ConformalSolveResult {
  double t = 0.0;
  int k = kUntruncated;  // resolved truncation level
  int bins = 0;  // equal-width cell count; the graded grid has more cells
  int burn_in = 0;
  BasePath path;
  std::vector<MapInstance> fibers;  // fibers[j] = T_{theta^j omega}
  std::vector<double> trunc_points;  // per fiber in [0, n_out + burn_in]
  std::vector<FiberMeasure> measures;  // nu at offsets 0 .. n_out
  std::vector<double> lambdas;         // lambda at offsets 0 .. n_out-1
  double tv_residual = 0.0;
  Diagnostics diagnostics;

  int n_out() const noexcept { return static_cast<int>(lambdas.size()); }
};

/// Pullback power iteration for the (truncated) t-conformal random measure.
/// At t = 0 truncation is switched off: every weight is 1 and the measure is
/// the unique 0-conformal one.
ConformalSolveResult solve_conformal(const BasePath& path, const RandomFamily& family, double t,
                                     const SolveOptions& opts);

/// Path length a solve with these options consumes.
int required_path_length(const SolveOptions& opts);

struct CylinderMass {
  CylinderCode code;
  double mass;      // nu_omega(T^{-n}_{omega,Gamma}(I)), through the pullback
  double integral;  // lambda^{-n} \int |(T^{-n})'|^t dnu_{theta^n omega}
};

/// Masses of all depth-n cylinders at offset 0, with the conformality
/// right-hand side integrated cell by cell.
std::vector<CylinderMass> cylinder_masses(const ConformalSolveResult& result, int depth);

/// Max relative conformality error over depth-n cylinders of mass >= 10/bins.
double conformality_residual(const ConformalSolveResult& result, int depth);

/// nu_omega(V_omega(ell)) at offset 0.
double mass_near_zero(const ConformalSolveResult& result, int ell);

struct InvariantMeasures {
  int first_offset = 0;
  std::vector<FiberMeasure> mu;  // mu[i] lives on fiber first_offset + i
};

/// Cesàro averages of pushforwards of nu along the path.
InvariantMeasures invariant_measure(const ConformalSolveResult& result, int n_avg);

/// Push a measure on fiber omega forward by T_omega onto `target`'s cells.
FiberMeasure push_forward(const FiberMeasure& m, const MapInstance& map,
                          const FiberSupport& target);

/// Average over fibers of \int log|T_omega'| dmu_omega.
double lyapunov_exponent(const InvariantMeasures& mu, std::span<const MapInstance> fibers);

}  // namespace rcfm
