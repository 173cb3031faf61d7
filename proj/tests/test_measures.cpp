#include <doctest.h>

#include <cmath>
#include <numeric>

#include "rcfm/base_dynamics.hpp"
#include "rcfm/cylinders.hpp"
#include "rcfm/errors.hpp"
#include "rcfm/measures.hpp"

using namespace rcfm;

namespace {

MapInstance cantor() { return build_affine_cookie_cutter({{0.0, 1.0 / 3, {}}, {2.0 / 3, 1.0, {}}}); }
MapInstance doubling() { return build_affine_cookie_cutter({{0.0, 0.5, {}}, {0.5, 1.0, {}}}); }

RandomFamily full_cover() {
  return build_example_family(0.2, 0.8, {{0.2, 0.5, 0}, {0.5, 0.8, 1}}, {3.2, 6.0});
}
RandomFamily gapped() {
  return build_example_family(0.2, 0.8, {{0.3, 0.45, 0}, {0.55, 0.7, 1}}, {3.2, 6.0});
}

SolveOptions small(int bins = 1024) {
  SolveOptions o;
  o.bins = bins;
  o.n_out = 10;
  o.burn_in = 120;
  o.k = 40;
  return o;
}

ConformalSolveResult solve(const RandomFamily& fam, const BaseSystem& base, double t, const SolveOptions& o) {
  return solve_conformal(base.sample_path(0, required_path_length(o), 0), fam, t, o);
}

const BaseSystem kBernoulli = BaseSystem::bernoulli({{3.5, 0.5}, {5.0, 0.5}}, 3);
const BaseSystem kDirac = BaseSystem::dirac(0.0);

}  // namespace

TEST_CASE("cell grids") {
  const auto u = CellGrid::uniform(512);
  CHECK(u->size() == 512);
  CHECK(u->lo(0) == 0.0);
  CHECK(u->hi(511) == 1.0);
  CHECK(u->hi(100) == doctest::Approx(101.0 / 512).epsilon(1e-15));
  const auto g = CellGrid::graded(512, 1.0 / 32);
  CHECK(g->size() > 512);
  CHECK(g->bins() == 512);
  CHECK(g->hi(0) < 1e-12);
  CHECK(1.0 - g->lo(g->size() - 1) < 1e-12);
  for (int c = 0; c < g->size(); ++c) {
    REQUIRE(g->lo(c) < g->hi(c));
    CHECK(g->locate(0.5 * (g->lo(c) + g->hi(c))) == c);
  }
  CHECK(g->locate(1.0) == g->size() - 1);
  CHECK(g->locate(0.0) == 0);
}

TEST_CASE("transfer_apply examples") {
  const auto grid = CellGrid::graded(1024, 1.0 / 32);
  const std::vector<double> one(static_cast<std::size_t>(grid->size()), 1.0);
  const MapInstance fc = full_cover().realize(4.0);
  for (double v : transfer_apply(one, *grid, fc, 0.0, 0.0)) CHECK(v == 6.0);
  for (double v : transfer_apply(one, *grid, cantor(), 1.0, 0.0)) CHECK(v == doctest::Approx(2.0 / 3).epsilon(1e-14));
  const std::vector<double> zero(one.size(), 0.0);
  for (double v : transfer_apply(zero, *grid, fc, 0.7, 0.01)) CHECK(v == 0.0);
}

TEST_CASE("dual_pullback examples") {
  const auto grid = CellGrid::graded(4096, 1.0 / 32);
  const MapInstance fc = full_cover().realize(4.0);
  const FiberMeasure leb = FiberMeasure::uniform(make_support(fc, 0.0, grid));
  const DualPullback d0 = dual_pullback(leb, fc, 0.0, 0.0);
  CHECK(d0.mass == doctest::Approx(6.0).epsilon(1e-13));

  // Lebesgue is 1-conformal for full branches
  const double trunc = truncation_point(std::vector<MapInstance>(60, fc), 60);
  const DualPullback d1 = dual_pullback(leb, fc, 1.0, trunc);
  CHECK(std::abs(d1.mass - 1.0) < 1e-3);

  // one cell of mass through one affine branch
  const MapInstance cc = cantor();
  const FiberSupport sup = make_support(cc, 0.0, grid);
  FiberMeasure point;
  point.support = sup;
  point.mass.assign(static_cast<std::size_t>(grid->size()), 0.0);
  const int c = grid->locate(0.8);
  point.mass[static_cast<std::size_t>(c)] = 1.0;
  const PullbackOperator op = build_pullback_operator(sup, cc, sup, 0.7);
  const auto img = op.apply_branch(0, point.mass);
  CHECK(std::accumulate(img.begin(), img.end(), 0.0) == doctest::Approx(std::pow(3.0, -0.7)).epsilon(1e-12));
  for (int i = 0; i < grid->size(); ++i)
    if (img[static_cast<std::size_t>(i)] > 0.0) {
      CHECK(grid->hi(i) > grid->lo(c) / 3 - 1e-15);
      CHECK(grid->lo(i) < grid->hi(c) / 3 + 1e-15);
    }
}

TEST_CASE("duality identity") {
  const auto grid = CellGrid::graded(1024, 1.0 / 32);
  for (double t : {0.0, 0.4, 1.0, 1.2}) {
    const MapInstance m = gapped().realize(4.6);
    const double trunc = t == 0.0 ? 0.0 : truncation_point(std::vector<MapInstance>(30, m), 30);
    FiberMeasure nu = FiberMeasure::uniform(make_support(m, trunc, grid));
    for (std::size_t i = 0; i < nu.mass.size(); ++i) nu.mass[i] *= 1.0 + 0.5 * std::sin(0.01 * i);
    nu.normalize();
    const DualPullback d = dual_pullback(nu, m, t, trunc);
    const auto avg = transfer_cell_average_of_one(m, t, trunc, nu.support);
    double expect = 0.0;
    for (std::size_t i = 0; i < nu.mass.size(); ++i) expect += nu.mass[i] * avg[i];
    CHECK(d.mass == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("t = 0 is exact") {
  for (const auto& fam : {full_cover(), gapped(), RandomFamily::constant(cantor(), "cc")}) {
    const auto r = solve(fam, kBernoulli, 0.0, small(512));
    const double G = static_cast<double>(fam.branch_count());
    for (double l : r.lambdas) CHECK(l == doctest::Approx(G).epsilon(1e-12));
    for (const auto& cm : cylinder_masses(r, 5)) {
      CHECK(std::abs(cm.mass - std::pow(G, -5)) < 1e-10);
      CHECK(std::abs(cm.integral - std::pow(G, -5)) < 1e-10);
    }
    CHECK(conformality_residual(r, 5) <= 1e-10);
    CHECK(conformality_residual(r, 0) == 0.0);
  }
}

TEST_CASE("lambda examples") {
  const double s = std::log(2.0) / std::log(3.0);
  const auto cc = RandomFamily::constant(cantor(), "cc");
  const auto r = solve(cc, kDirac, s, small());
  for (double l : r.lambdas) CHECK(std::abs(l - 1.0) < 1e-3);
  for (double t : {0.3, 1.1}) {
    const auto q = solve(cc, kDirac, t, small());
    for (double l : q.lambdas) CHECK(l == doctest::Approx(2.0 * std::pow(3.0, -t)).epsilon(1e-10));
  }
  const auto f = solve(full_cover(), kBernoulli, 1.0, small(4096));
  for (double l : f.lambdas) CHECK(std::abs(l - 1.0) < 2e-3);
}

TEST_CASE("lambda bounds and diagnostics") {
  const auto r = solve(gapped(), kBernoulli, 0.8, small());
  const Diagnostics& d = r.diagnostics;
  CHECK(d.beta1 > 0.0);
  CHECK(d.beta1 <= d.beta2);
  for (double l : r.lambdas) {
    CHECK(l >= d.beta1);
    CHECK(l <= d.beta2);
  }
  CHECK(d.Q_G > 0.0);
  CHECK(d.Q_G <= 0.5);
  CHECK(d.K_eta == doctest::Approx(441.0));
  CHECK(d.min_central_mass >= d.Q_G);
  CHECK(r.tv_residual <= 1e-8);
  for (const auto& m : r.measures) CHECK(m.total() == doctest::Approx(1.0).epsilon(1e-12));

  // doubling bins leaves lambda stable
  const auto r2 = solve(gapped(), kBernoulli, 0.8, small(2048));
  for (std::size_t j = 0; j < r.lambdas.size(); ++j)
    CHECK(r2.lambdas[j] == doctest::Approx(r.lambdas[j]).epsilon(1e-3));
}

TEST_CASE("mass stays inside the truncated support") {
  const auto r = solve(gapped(), kBernoulli, 1.0, small(512));
  for (std::size_t j = 0; j < r.measures.size(); ++j) {
    const FiberMeasure& m = r.measures[j];
    for (int c = 0; c < m.bins(); ++c) {
      CHECK(m.mass[static_cast<std::size_t>(c)] >= 0.0);
      if (m.support.effective_length(c) == 0.0) CHECK(m.mass[static_cast<std::size_t>(c)] == 0.0);
    }
    CHECK(m.mass_in(0.0, r.trunc_points[j]) == 0.0);
  }
}

TEST_CASE("measure decays near zero") {
  const auto r = solve(gapped(), kBernoulli, 0.8, small());
  double prev = 1.0;
  for (int ell = 1; ell <= 40; ++ell) {
    const double m = mass_near_zero(r, ell);
    CHECK(m <= prev + 1e-15);
    prev = m;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("solver preconditions and convergence failure") {
  SolveOptions o = small();
  o.bins = 128;
  CHECK_THROWS_AS(solve(gapped(), kBernoulli, 1.0, o), std::invalid_argument);
  o = small();
  o.burn_in = 10;
  CHECK_THROWS_AS(solve(gapped(), kBernoulli, 1.0, o), std::invalid_argument);
  o = small(512);
  o.burn_in = 20;
  o.tol = 1e-15;
  CHECK_THROWS_AS(solve(gapped(), kBernoulli, 1.0, o), NoConvergence);
  CHECK_THROWS_AS(solve_conformal(kBernoulli.sample_path(0, 10, 0), gapped(), 1.0, small()),
                  std::invalid_argument);
}

TEST_CASE("conformality residual on the full cover") {
  const auto r = solve(full_cover(), kBernoulli, 1.0, small(4096));
  CHECK(conformality_residual(r, 3) <= 0.02);
  const double r1 = conformality_residual(solve(full_cover(), kBernoulli, 1.0, small(1024)), 3);
  const double r2 = conformality_residual(solve(full_cover(), kBernoulli, 1.0, small(2048)), 3);
  CHECK(r2 < r1);
}

TEST_CASE("invariant measures") {
  const auto r = solve(full_cover(), kBernoulli, 1.0, small(1024));
  const auto one = invariant_measure(r, 1);
  REQUIRE(one.mu.size() == r.measures.size());
  for (std::size_t j = 0; j < one.mu.size(); ++j)
    for (std::size_t c = 0; c < one.mu[j].mass.size(); ++c)
      CHECK(one.mu[j].mass[c] == doctest::Approx(r.measures[j].mass[c]).epsilon(1e-12));

  const auto mu = invariant_measure(r, 10);
  CHECK(lyapunov_exponent(mu, r.fibers) > 0.0);

  // piecewise affine full branches preserve Lebesgue
  const auto affine = RandomFamily::constant(
      build_affine_cookie_cutter({{0.0, 0.3, {}}, {0.3, 0.55, {}}, {0.55, 1.0, {}}}), "affine");
  const auto a = solve(affine, kDirac, 1.0, small(1024));
  for (const auto& m : invariant_measure(a, 10).mu)
    CHECK(total_variation(m, FiberMeasure::uniform(m.support)) < 0.05);

  const double s = std::log(2.0) / std::log(3.0);
  const auto c = solve(RandomFamily::constant(cantor(), "cc"), kDirac, s, small());
  const auto cmu = invariant_measure(c, 10);
  const double floor = 10.0 / c.bins;
  for (std::size_t i = 0; i < cmu.mu.size(); ++i) {
    const FiberMeasure& nu = c.measures[i + static_cast<std::size_t>(cmu.first_offset)];
    for (std::size_t k = 0; k < nu.mass.size(); ++k)
      if (cmu.mu[i].mass[k] > floor) CHECK(nu.mass[k] > 0.0);
  }
}

TEST_CASE("lyapunov oracles") {
  const double s = std::log(2.0) / std::log(3.0);
  const auto c = solve(RandomFamily::constant(cantor(), "cc"), kDirac, s, small());
  CHECK(std::abs(lyapunov_exponent(invariant_measure(c, 10), c.fibers) - std::log(3.0)) < 0.02);
  const auto d = solve(RandomFamily::constant(doubling(), "dbl"), kDirac, 1.0, small());
  CHECK(lyapunov_exponent(invariant_measure(d, 10), d.fibers) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}
