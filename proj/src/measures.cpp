#include "rcfm/measures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "quadrature.hpp"
#include "rcfm/errors.hpp"

namespace rcfm {
namespace {

// Spread `amount` uniformly over [a, b] onto the cells of `grid`.
void deposit(std::vector<double>& out, const CellGrid& grid, double a, double b,
             double amount) {
  if (!(b - a > 1e-300)) {
    out[static_cast<std::size_t>(grid.locate(a))] += amount;
    return;
  }
  const int c0 = grid.locate(a);
  const int c1 = grid.locate(b);
  const double inv = amount / (b - a);
  for (int c = c0; c <= c1; ++c) {
    const double lo = std::max(a, grid.lo(c));
    const double hi = std::min(b, grid.hi(c));
    if (hi > lo) out[static_cast<std::size_t>(c)] += (hi - lo) * inv;
  }
}

std::string fmt_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

std::pair<double, double> sorted_pair(double a, double b) {
  return a <= b ? std::pair{a, b} : std::pair{b, a};
}

}  // namespace

// ---------------------------------------------------------------------------
// Grids, supports and measures

std::shared_ptr<const CellGrid> CellGrid::uniform(int bins) { return graded(bins, 0.0); }

std::shared_ptr<const CellGrid> CellGrid::graded(int bins, double rho) {
  if (bins < 1) throw std::invalid_argument("bins must be positive");
  if (!(rho >= 0.0) || rho > 1.0) throw std::invalid_argument("grade must lie in [0, 1]");
  auto g = std::make_shared<CellGrid>();
  g->bins_ = bins;
  constexpr double min_width = 1e-13;
  std::vector<double> left;  // graded edges near 0, descending
  int flat = 0;
  if (rho > 0.0) {
    flat = std::min(static_cast<int>(std::ceil(1.0 / rho)), bins / 4);
    for (double e = static_cast<double>(flat) / bins / (1.0 + rho); e > min_width;
         e /= 1.0 + rho)
      left.push_back(e);
  }
  auto& edges = g->edges_;
  edges.push_back(0.0);
  for (auto it = left.rbegin(); it != left.rend(); ++it) edges.push_back(*it);
  for (int j = std::max(flat, 1); j <= bins - std::max(flat, 1); ++j)
    edges.push_back(static_cast<double>(j) / bins);
  for (double e : left) edges.push_back(1.0 - e);
  edges.push_back(1.0);
  return g;
}

int CellGrid::locate(double x) const noexcept {
  const auto it = std::upper_bound(edges_.begin(), edges_.end(), x);
  const auto c = static_cast<int>(it - edges_.begin()) - 1;
  return std::clamp(c, 0, size() - 1);
}

FiberSupport make_support(const MapInstance& map, double trunc_point,
                          std::shared_ptr<const CellGrid> grid) {
  if (!grid) throw std::invalid_argument("missing cell grid");
  const int n = grid->size();
  FiberSupport s;
  s.trunc_point = trunc_point;
  s.eff_lo.resize(static_cast<std::size_t>(n));
  s.eff_hi.resize(static_cast<std::size_t>(n));
  for (int c = 0; c < n; ++c) {
    const double l = grid->lo(c);
    const double h = grid->hi(c);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const Branch& br : map.branches()) {
      const double a = std::max({l, br.lo(), trunc_point});
      const double b = std::min(h, br.hi());
      if (b > a) {
        lo = std::min(lo, a);
        hi = std::max(hi, b);
      }
    }
    if (!(hi > lo)) lo = hi = l;
    s.eff_lo[static_cast<std::size_t>(c)] = lo;
    s.eff_hi[static_cast<std::size_t>(c)] = hi;
  }
  s.grid = std::move(grid);
  return s;
}

double FiberMeasure::total() const noexcept {
  return std::accumulate(mass.begin(), mass.end(), 0.0);
}

double FiberMeasure::normalize() {
  const double t = total();
  if (t > 0.0)
    for (double& m : mass) m /= t;
  return t;
}

double FiberMeasure::mass_in(double a, double b) const noexcept {
  if (!(b > a)) return 0.0;
  const CellGrid& grid = *support.grid;
  double sum = 0.0;
  for (int c = grid.locate(a); c <= grid.locate(b); ++c) {
    const auto i = static_cast<std::size_t>(c);
    const double len = support.effective_length(c);
    if (len <= 0.0 || mass[i] == 0.0) continue;
    const double lo = std::max(a, support.eff_lo[i]);
    const double hi = std::min(b, support.eff_hi[i]);
    if (hi > lo) sum += mass[i] * (hi - lo) / len;
  }
  return sum;
}

FiberMeasure FiberMeasure::uniform(const FiberSupport& support) {
  FiberMeasure m;
  m.support = support;
  m.mass.resize(static_cast<std::size_t>(support.bins()));
  for (int c = 0; c < support.bins(); ++c)
    m.mass[static_cast<std::size_t>(c)] = support.effective_length(c);
  m.normalize();
  return m;
}

double total_variation(const FiberMeasure& a, const FiberMeasure& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.mass.size(); ++i) sum += std::abs(a.mass[i] - b.mass[i]);
  return 0.5 * sum;
}

// ---------------------------------------------------------------------------
// Operators

std::vector<double> PullbackOperator::apply(std::span<const double> source) const {
  std::vector<double> out(static_cast<std::size_t>(bins), 0.0);
  for (const auto& entries : per_branch)
    for (const Entry& e : entries) out[e.target] += e.weight * source[e.source];
  return out;
}

std::vector<double> PullbackOperator::apply_branch(std::size_t branch,
                                                   std::span<const double> source) const {
  std::vector<double> out(static_cast<std::size_t>(bins), 0.0);
  for (const Entry& e : per_branch.at(branch)) out[e.target] += e.weight * source[e.source];
  return out;
}

PullbackOperator build_pullback_operator(const FiberSupport& source, const MapInstance& map,
                                         const FiberSupport& target, double t) {
  const int bins = source.bins();
  if (source.grid != target.grid) throw std::invalid_argument("fibers use different grids");
  const CellGrid& grid = *target.grid;
  const double q = 1.0 - t;
  const double trunc = target.trunc_point;
  PullbackOperator op;
  op.bins = bins;
  op.per_branch.resize(map.size());
  for (std::size_t bi = 0; bi < map.size(); ++bi) {
    const Branch& br = map.branch(bi);
    auto& entries = op.per_branch[bi];
    entries.reserve(static_cast<std::size_t>(bins) * 2);
    for (int c = 0; c < bins; ++c) {
      const double len = source.effective_length(c);
      if (len <= 0.0) continue;
      const auto ci = static_cast<std::size_t>(c);
      auto [xa, xb] = sorted_pair(br.inverse(source.eff_lo[ci]), br.inverse(source.eff_hi[ci]));
      xa = std::max(xa, trunc);
      if (!(xb > xa)) continue;
      const int d0 = grid.locate(xa);
      const int d1 = grid.locate(xb);
      for (int d = d0; d <= d1; ++d) {
        const double pa = std::max(xa, grid.lo(d));
        const double pb = std::min(xb, grid.hi(d));
        if (!(pb > pa)) continue;
        const double w = br.integral_abs_derivative_pow(pa, pb, q) / len;
        if (w > 0.0)
          entries.push_back({static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(c), w});
      }
    }
  }
  return op;
}

std::vector<double> transfer_apply(std::span<const double> g, const CellGrid& grid,
                                   const MapInstance& map, double t, double trunc_point) {
  const int bins = grid.size();
  if (static_cast<int>(g.size()) != bins) throw std::invalid_argument("g does not match grid");
  std::vector<double> out(g.size(), 0.0);
  for (int c = 0; c < bins; ++c) {
    const double x = 0.5 * (grid.lo(c) + grid.hi(c));
    double sum = 0.0;
    for (const Branch& br : map.branches()) {
      const double y = br.inverse(x);
      if (y < trunc_point) continue;
      const double d = std::abs(br.derivative(y));
      if (t > 0.0 && !(d >= 1e-300))
        throw SingularWeight("|T'| vanishes at a preimage inside the truncated support");
      sum += g[static_cast<std::size_t>(grid.locate(y))] * (t == 0.0 ? 1.0 : std::pow(d, -t));
    }
    out[static_cast<std::size_t>(c)] = sum;
  }
  return out;
}

std::vector<double> transfer_cell_average_of_one(const MapInstance& map, double t,
                                                 double trunc_point,
                                                 const FiberSupport& target) {
  const int bins = target.bins();
  std::vector<double> out(static_cast<std::size_t>(bins), 0.0);
  for (const Branch& br : map.branches()) {
    const double xlo = std::max(br.lo(), trunc_point);
    if (!(br.hi() > xlo)) continue;
    const auto [ylo, yhi] = sorted_pair(br.value(xlo), br.value(br.hi()));
    for (int c = 0; c < bins; ++c) {
      const double len = target.effective_length(c);
      if (len <= 0.0) continue;
      const auto ci = static_cast<std::size_t>(c);
      const double a = std::max(target.eff_lo[ci], ylo);
      const double b = std::min(target.eff_hi[ci], yhi);
      if (b > a) out[ci] += br.integral_inverse_derivative_pow(a, b, t) / len;
    }
  }
  return out;
}

DualPullback dual_pullback(const FiberMeasure& nu, const MapInstance& map, double t,
                           double trunc_point) {
  FiberSupport target = make_support(map, trunc_point, nu.support.grid);
  const PullbackOperator op = build_pullback_operator(nu.support, map, target, t);
  FiberMeasure out;
  out.mass = op.apply(nu.mass);
  out.support = std::move(target);
  const double mass = out.total();
  return {std::move(out), mass};
}

// ---------------------------------------------------------------------------
// Conformal solve

int required_path_length(const SolveOptions& opts) {
  return opts.n_out + opts.burn_in + 2 + std::max(opts.k, 0);
}

ConformalSolveResult solve_conformal(const BasePath& path, const RandomFamily& family, double t,
                                     const SolveOptions& opts) {
  if (!(t >= 0.0)) throw std::invalid_argument("t must be >= 0");
  if (opts.bins < 256) throw std::invalid_argument("bins must be >= 256");
  if (opts.burn_in < 20) throw std::invalid_argument("burn_in must be >= 20");
  if (opts.n_out < 1) throw std::invalid_argument("n_out must be >= 1");

  ConformalSolveResult res;
  res.t = t;
  res.k = t == 0.0 ? kUntruncated : opts.k;
  res.bins = opts.bins;
  res.burn_in = opts.burn_in;
  res.path = path;

  SolveOptions eff = opts;
  eff.k = res.k;
  const int count = required_path_length(eff);
  if (path.n_future() + 1 < count)
    throw std::invalid_argument("base path too short: need " + std::to_string(count) +
                                " future entries");
  res.fibers = realize_fibers(family, path, 0, count);
  const std::span<const MapInstance> fibers(res.fibers);

  const int N = opts.n_out + opts.burn_in;
  const auto grid = CellGrid::graded(opts.bins, opts.grade);
  std::vector<FiberSupport> supports;
  supports.reserve(static_cast<std::size_t>(N + 2));
  for (int j = 0; j <= N + 1; ++j) {
    const double p =
        res.k > 0 ? truncation_point(fibers.subspan(static_cast<std::size_t>(j)), res.k) : 0.0;
    res.trunc_points.push_back(p);
    supports.push_back(make_support(res.fibers[static_cast<std::size_t>(j)], p, grid));
  }

  // Two starts one step apart: a is F_k^{N-j}(uniform), b is F_k^{N+1-j}(uniform).
  auto step = [&](const FiberMeasure& m, int j, const PullbackOperator& op) {
    FiberMeasure out;
    out.mass = op.apply(m.mass);
    out.support = supports[static_cast<std::size_t>(j)];
    return out;
  };
  FiberMeasure a = FiberMeasure::uniform(supports[static_cast<std::size_t>(N)]);
  FiberMeasure b = FiberMeasure::uniform(supports[static_cast<std::size_t>(N + 1)]);
  {
    const auto op = build_pullback_operator(b.support, res.fibers[static_cast<std::size_t>(N)],
                                            supports[static_cast<std::size_t>(N)], t);
    b = step(b, N, op);
    b.normalize();
  }

  res.measures.resize(static_cast<std::size_t>(opts.n_out + 1));
  res.lambdas.resize(static_cast<std::size_t>(opts.n_out));
  for (int j = N - 1; j >= 0; --j) {
    const auto op = build_pullback_operator(supports[static_cast<std::size_t>(j + 1)],
                                            res.fibers[static_cast<std::size_t>(j)],
                                            supports[static_cast<std::size_t>(j)], t);
    a = step(a, j, op);
    const double lambda = a.normalize();
    if (!(lambda > 0.0) || !std::isfinite(lambda))
      throw NoConvergence("pullback lost all mass at offset " + std::to_string(j), lambda);
    if (j >= opts.n_out) {
      b = step(b, j, op);
      b.normalize();
    }
    if (j == opts.n_out) {
      res.tv_residual = total_variation(a, b);
      b = FiberMeasure{};
    }
    if (j <= opts.n_out) res.measures[static_cast<std::size_t>(j)] = a;
    if (j < opts.n_out) res.lambdas[static_cast<std::size_t>(j)] = lambda;
  }
  if (res.tv_residual > opts.tol)
    throw NoConvergence("fixed-point iteration at t = " + std::to_string(t) +
                            " did not converge: TV residual " + fmt_sci(res.tv_residual),
                        res.tv_residual);

  const PartitionSpec& part = family.partition ? *family.partition : res.fibers[0].partition();
  Diagnostics& dg = res.diagnostics;
  dg.kappa = part.kappa;
  dg.bigA = part.bigA;
  dg.gamma_plus = part.gamma_plus;
  dg.gamma0_plus = part.gamma0_plus;
  dg.beta1 = *std::min_element(res.lambdas.begin(), res.lambdas.end());
  dg.beta2 = *std::max_element(res.lambdas.begin(), res.lambdas.end());
  dg.K_eta = distortion_constant(opts.eta);
  dg.Q_G = 0.5 * std::pow(part.kappa / part.bigA, 2.0 * t);
  dg.min_central_mass = std::numeric_limits<double>::infinity();
  for (int j = 0; j < opts.n_out; ++j)
    dg.min_central_mass = std::min(
        dg.min_central_mass, res.measures[static_cast<std::size_t>(j)].mass_in(opts.eta,
                                                                               1.0 - opts.eta));
  return res;
}

// ---------------------------------------------------------------------------
// Conformality checks

namespace {

// Integral of |(T^{-n}_{omega,Gamma})'|^t over [a, b] in the image variable.
double pulled_weight_integral(std::span<const MapInstance> fibers, const CylinderCode& code,
                              double a, double b, double t) {
  if (!(b > a)) return 0.0;
  if (t == 0.0) return b - a;
  const double ga = pullback_point(fibers, code, a).x;
  const double gb = pullback_point(fibers, code, b).x;
  if (t == 1.0) return std::abs(gb - ga);
  const auto [xa, xb] = sorted_pair(ga, gb);
  // Substituting x = T^{-n}(y) turns the weight into |(T^n)'(x)|^{1-t}.
  auto integrand = [&](double x) {
    double d = 1.0;
    for (std::size_t i = 0; i < code.depth(); ++i) {
      const Branch& br = fibers[i].branch(code.symbols[i]);
      d *= std::abs(br.derivative(x));
      x = br.value(x);
    }
    return std::pow(d, 1.0 - t);
  };
  return detail::gauss_legendre(integrand, xa, xb, 2);
}

// Image-side interval of points whose pullback along `code` stays in the
// truncated domain at every step.
std::optional<std::pair<double, double>> admissible_image(const ConformalSolveResult& r,
                                                          const CylinderCode& code) {
  double ya = 0.0;
  double yb = 1.0;
  for (std::size_t i = 0; i < code.depth(); ++i) {
    const Branch& br = r.fibers[i].branch(code.symbols[i]);
    double xa = std::max(br.lo(), r.trunc_points[i]);
    double xb = br.hi();
    xa = std::max(xa, ya);
    xb = std::min(xb, yb);
    if (!(xb > xa)) return std::nullopt;
    std::tie(ya, yb) = sorted_pair(br.value(xa), br.value(xb));
  }
  return std::pair{ya, yb};
}

}  // namespace

std::vector<CylinderMass> cylinder_masses(const ConformalSolveResult& result, int depth) {
  if (depth < 0 || depth > result.n_out())
    throw std::invalid_argument("cylinder depth exceeds the solved window");
  const std::span<const MapInstance> fibers(result.fibers);
  const auto nd = static_cast<std::size_t>(depth);

  std::vector<PullbackOperator> ops;
  double lambda_n = 1.0;
  for (std::size_t i = 0; i < nd; ++i) {
    ops.push_back(build_pullback_operator(result.measures[i + 1].support, result.fibers[i],
                                          result.measures[i].support, result.t));
    lambda_n *= result.lambdas[i];
  }
  const FiberMeasure& far = result.measures[nd];

  std::vector<CylinderMass> out;
  CylinderCode code;
  code.symbols.assign(nd, 0);
  const std::size_t branches = result.fibers[0].size();

  std::function<void(std::size_t, const std::vector<double>&)> descend =
      [&](std::size_t level, const std::vector<double>& v) {
        // v lives on fiber `level`.
        if (level == 0) {
          CylinderMass cm;
          cm.code = code;
          cm.mass = std::accumulate(v.begin(), v.end(), 0.0) / lambda_n;
          double rhs = 0.0;
          if (const auto img = admissible_image(result, code)) {
            for (int c = 0; c < far.bins(); ++c) {
              const auto ci = static_cast<std::size_t>(c);
              const double len = far.support.effective_length(c);
              if (far.mass[ci] == 0.0 || len <= 0.0) continue;
              const double a = std::max(far.support.eff_lo[ci], img->first);
              const double b = std::min(far.support.eff_hi[ci], img->second);
              if (b > a)
                rhs += far.mass[ci] / len * pulled_weight_integral(fibers, code, a, b, result.t);
            }
          }
          cm.integral = rhs / lambda_n;
          out.push_back(std::move(cm));
          return;
        }
        for (std::size_t b = 0; b < branches; ++b) {
          code.symbols[level - 1] = static_cast<std::uint16_t>(b);
          descend(level - 1, ops[level - 1].apply_branch(b, v));
        }
      };
  descend(nd, far.mass);
  std::sort(out.begin(), out.end(),
            [](const CylinderMass& x, const CylinderMass& y) { return x.code < y.code; });
  return out;
}

double conformality_residual(const ConformalSolveResult& result, int depth) {
  if (depth > 6) throw std::invalid_argument("residual depth must be <= 6");
  if (depth == 0) return 0.0;
  const double floor = 10.0 / result.bins;
  double worst = 0.0;
  for (const auto& cm : cylinder_masses(result, depth))
    if (cm.mass >= floor) worst = std::max(worst, std::abs(cm.mass - cm.integral) / cm.mass);
  return worst;
}

double mass_near_zero(const ConformalSolveResult& result, int ell) {
  const double p = truncation_point(std::span<const MapInstance>(result.fibers), ell);
  return result.measures.front().mass_in(0.0, p);
}

// ---------------------------------------------------------------------------
// Invariant measures

FiberMeasure push_forward(const FiberMeasure& m, const MapInstance& map,
                          const FiberSupport& target) {
  FiberMeasure out;
  out.support = target;
  out.mass.assign(static_cast<std::size_t>(target.bins()), 0.0);
  for (int c = 0; c < m.bins(); ++c) {
    const auto ci = static_cast<std::size_t>(c);
    if (m.mass[ci] == 0.0) continue;
    const double ya = m.support.eff_lo[ci];
    const double yb = m.support.eff_hi[ci];
    double covered = 0.0;
    for (const Branch& br : map.branches())
      covered += std::max(0.0, std::min(yb, br.hi()) - std::max(ya, br.lo()));
    if (!(covered > 0.0)) continue;
    for (const Branch& br : map.branches()) {
      const double pa = std::max(ya, br.lo());
      const double pb = std::min(yb, br.hi());
      if (!(pb > pa)) continue;
      const auto [ia, ib] = sorted_pair(br.value(pa), br.value(pb));
      deposit(out.mass, *target.grid, ia, ib, m.mass[ci] * (pb - pa) / covered);
    }
  }
  return out;
}

InvariantMeasures invariant_measure(const ConformalSolveResult& result, int n_avg) {
  const int n_out = result.n_out();
  if (n_avg < 1 || n_avg > n_out + 1)
    throw std::invalid_argument("n_avg must lie in [1, n_out + 1]");
  InvariantMeasures inv;
  inv.first_offset = n_avg - 1;
  for (int J = n_avg - 1; J <= n_out; ++J) {
    FiberMeasure acc = result.measures[static_cast<std::size_t>(J - n_avg + 1)];
    for (int i = J - n_avg + 2; i <= J; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      acc = push_forward(acc, result.fibers[ii - 1], result.measures[ii].support);
      for (std::size_t c = 0; c < acc.mass.size(); ++c) acc.mass[c] += result.measures[ii].mass[c];
    }
    acc.normalize();
    inv.mu.push_back(std::move(acc));
  }
  return inv;
}

double lyapunov_exponent(const InvariantMeasures& mu, std::span<const MapInstance> fibers) {
  if (mu.mu.empty()) throw std::invalid_argument("no invariant measures supplied");
  double sum = 0.0;
  for (std::size_t i = 0; i < mu.mu.size(); ++i) {
    const FiberMeasure& m = mu.mu[i];
    const MapInstance& map = fibers[static_cast<std::size_t>(mu.first_offset) + i];
    double acc = 0.0;
    double weight = 0.0;
    for (int c = 0; c < m.bins(); ++c) {
      const auto ci = static_cast<std::size_t>(c);
      if (m.mass[ci] == 0.0) continue;
      double covered = 0.0;
      double logsum = 0.0;
      for (const Branch& br : map.branches()) {
        const double pa = std::max(m.support.eff_lo[ci], br.lo());
        const double pb = std::min(m.support.eff_hi[ci], br.hi());
        if (!(pb > pa)) continue;
        covered += pb - pa;
        logsum += (pb - pa) * std::log(std::abs(br.derivative(0.5 * (pa + pb))));
      }
      if (!(covered > 0.0)) continue;
      acc += m.mass[ci] * logsum / covered;
      weight += m.mass[ci];
    }
    sum += acc / weight;
  }
  return sum / static_cast<double>(mu.mu.size());
}

}  // namespace rcfm
