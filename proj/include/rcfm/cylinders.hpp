#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rcfm/interval_maps.hpp"

namespace rcfm {

/// Branch indices (Gamma_0, ..., Gamma_{n-1}); Gamma_j is a branch of the
/// map on fiber theta^j(omega).
struct CylinderCode {
  std::vector<std::uint16_t> symbols;

  std::size_t depth() const noexcept { return symbols.size(); }
  /// Dot-separated form, "" for the empty code.
  std::string str() const;
  auto operator<=>(const CylinderCode&) const = default;
};

struct CylinderInterval {
  CylinderCode code;
  double lo = 0.0;
  double hi = 1.0;
  double diam = 1.0;
  double deriv_at_mid = 1.0;
};

struct Pullback {
  double x;
  double deriv;
};

/// x = T^{-n}_{omega,Gamma}(y) and |(T^{-n}_{omega,Gamma})'(y)|.
/// `fibers[j]` is the map on theta^j(omega); needs fibers.size() >= depth.
Pullback pullback_point(std::span<const MapInstance> fibers, const CylinderCode& code, double y);

/// Left endpoint of U_omega(k): T^{-k}_{omega,0}(1).
double truncation_point(std::span<const MapInstance> fibers, int k);

/// I_omega(j) = [T^{-j}_{omega,0}(1), T^{-(j-1)}_{omega,0}(1)].
std::pair<double, double> truncation_interval(std::span<const MapInstance> fibers, int j);

struct CylinderStop {
  int max_depth = 25;
  double eps = 0.0;  // 0 disables the diameter criterion
  std::size_t leaf_cap = 10'000'000;
  double eta = 0.05;
};

/// Breadth-first refinement of the cylinder tree. A node becomes a leaf once
/// its diameter drops below `eps` or it reaches `max_depth` (capped by the
/// number of fibers). Leaves are returned in code order.
std::vector<CylinderInterval> expand_cylinder_tree(std::span<const MapInstance> fibers,
                                                   const CylinderStop& stop);

/// K_eta = ((1 + eta) / eta)^2.
double distortion_constant(double eta);

}  // namespace rcfm
