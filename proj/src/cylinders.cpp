#include "rcfm/cylinders.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rcfm/errors.hpp"

namespace rcfm {

std::string CylinderCode::str() const {
  std::string out;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i) out += '.';
    out += std::to_string(symbols[i]);
  }
  return out;
}

Pullback pullback_point(std::span<const MapInstance> fibers, const CylinderCode& code, double y) {
  if (fibers.size() < code.depth())
    throw std::out_of_range("pullback needs " + std::to_string(code.depth()) + " fibers");
  double x = y;
  double d = 1.0;
  for (std::size_t i = code.depth(); i-- > 0;) {
    const Branch& b = fibers[i].branch(code.symbols[i]);
    d *= b.inverse_derivative(x);
    x = b.inverse(x);
  }
  return {x, d};
}

double truncation_point(std::span<const MapInstance> fibers, int k) {
  if (k < 0 || static_cast<std::size_t>(k) > fibers.size())
    throw std::out_of_range("truncation level " + std::to_string(k) + " exceeds fiber window");
  double x = 1.0;
  for (int i = k; i-- > 0;) x = fibers[static_cast<std::size_t>(i)].zero_branch().inverse(x);
  return x;
}

std::pair<double, double> truncation_interval(std::span<const MapInstance> fibers, int j) {
  if (j < 1) throw std::invalid_argument("I_omega(j) needs j >= 1");
  return {truncation_point(fibers, j), truncation_point(fibers, j - 1)};
}

std::vector<CylinderInterval> expand_cylinder_tree(std::span<const MapInstance> fibers,
                                                   const CylinderStop& stop) {
  if (fibers.empty()) throw std::invalid_argument("cylinder tree needs at least one fiber");
  const int depth_cap = std::min<int>(stop.max_depth, static_cast<int>(fibers.size()));
  if (depth_cap < 1) throw std::invalid_argument("max_depth must be >= 1");
  const double mid = 0.5;

  struct Node {
    CylinderCode code;
    double lo, hi;
  };
  std::vector<Node> frontier{{CylinderCode{}, 0.0, 1.0}};
  std::vector<CylinderInterval> leaves;

  for (int depth = 0; depth < depth_cap && !frontier.empty(); ++depth) {
    std::vector<Node> next;
    const MapInstance& fiber = fibers[static_cast<std::size_t>(depth)];
    for (const Node& node : frontier) {
      for (std::size_t b = 0; b < fiber.size(); ++b) {
        const Branch& br = fiber.branch(b);
        const double e1 = pullback_point(fibers, node.code, br.lo()).x;
        const double e2 = pullback_point(fibers, node.code, br.hi()).x;
        Node child{node.code, std::min(e1, e2), std::max(e1, e2)};
        child.code.symbols.push_back(static_cast<std::uint16_t>(b));
        const double diam = child.hi - child.lo;
        if (diam < 1e-14) continue;
        const bool leaf = depth + 1 == depth_cap || (stop.eps > 0.0 && diam < stop.eps);
        if (leaf) {
          const double d = pullback_point(fibers, child.code, mid).deriv;
          leaves.push_back({child.code, child.lo, child.hi, diam, d});
        } else {
          next.push_back(std::move(child));
        }
      }
      if (leaves.size() + next.size() > stop.leaf_cap)
        throw Explosion("cylinder tree exceeds the leaf cap of " +
                        std::to_string(stop.leaf_cap) + " at depth " +
                        std::to_string(depth + 1));
    }
    frontier = std::move(next);
  }
  std::sort(leaves.begin(), leaves.end(),
            [](const CylinderInterval& a, const CylinderInterval& b) { return a.code < b.code; });
  return leaves;
}

double distortion_constant(double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
  const double r = (1.0 + eta) / eta;
  return r * r;
}

}  // namespace rcfm
