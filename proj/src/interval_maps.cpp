#include "rcfm/interval_maps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "quadrature.hpp"
#include "rcfm/errors.hpp"

namespace rcfm {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// \int_{ua}^{ub} u^e du for 0 <= ua <= ub.
double power_integral(double ua, double ub, double e) {
  if (!(ub > ua)) return 0.0;
  const double e1 = e + 1.0;
  if (e1 > 1e-14) return (std::pow(ub, e1) - std::pow(ua, e1)) / e1;
  if (ua <= 0.0)
    throw SingularWeight("non-integrable weight at a critical point (exponent " +
                         std::to_string(e) + ")");
  if (std::abs(e1) <= 1e-14) return std::log(ub / ua);
  return (std::pow(ua, e1) - std::pow(ub, e1)) / (-e1);
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Branch

Branch Branch::affine(double lo, double hi, bool increasing) {
  if (!(lo < hi) || lo < 0.0 || hi > 1.0)
    throw BadGeometry("affine branch [" + fmt(lo) + "," + fmt(hi) + "] not inside [0,1]");
  Branch b;
  b.lo_ = lo;
  b.hi_ = hi;
  b.kind_ = BranchKind::Expanding;
  b.increasing_ = increasing;
  b.eval_ = Affine{};
  return b;
}

Branch Branch::power(double lo, double hi, CriticalSide side, int critical_value,
                     double exponent) {
  if (!(lo < hi) || lo < 0.0 || hi > 1.0)
    throw BadGeometry("power branch [" + fmt(lo) + "," + fmt(hi) + "] not inside [0,1]");
  if (side == CriticalSide::None)
    throw BadGeometry("critical point must sit at a branch endpoint");
  if (critical_value != 0 && critical_value != 1)
    throw BadGeometry("critical value must be 0 or 1");
  if (!(exponent > 1.0)) throw BadGeometry("power-law exponent must exceed 1");
  Branch b;
  b.lo_ = lo;
  b.hi_ = hi;
  b.kind_ = BranchKind::Critical;
  b.side_ = side;
  b.critical_value_ = critical_value;
  // u grows away from c; f = u^p rises iff c is on the left.
  b.increasing_ = (side == CriticalSide::Left) == (critical_value == 0);
  b.eval_ = Power{exponent};
  return b;
}

Branch Branch::user(double lo, double hi, BranchKind kind, CriticalSide side, int critical_value,
                    UserBranchFunctions fns) {
  if (!(lo < hi) || lo < 0.0 || hi > 1.0)
    throw BadGeometry("user branch [" + fmt(lo) + "," + fmt(hi) + "] not inside [0,1]");
  if (!fns.f || !fns.inverse) throw BadGeometry("user branch needs f and its inverse");
  if (kind == BranchKind::Critical && side == CriticalSide::None)
    throw BadGeometry("critical point must sit at a branch endpoint");
  Branch b;
  b.lo_ = lo;
  b.hi_ = hi;
  b.kind_ = kind;
  b.side_ = kind == BranchKind::Critical ? side : CriticalSide::None;
  b.critical_value_ = kind == BranchKind::Critical ? critical_value : -1;
  b.increasing_ = fns.f(hi) > fns.f(lo);
  b.eval_ = User{std::make_shared<const UserBranchFunctions>(std::move(fns))};
  return b;
}

double Branch::critical_point() const noexcept {
  switch (side_) {
    case CriticalSide::Left:
      return lo_;
    case CriticalSide::Right:
      return hi_;
    default:
      return kNaN;
  }
}

double Branch::exponent() const noexcept {
  if (const auto* p = std::get_if<Power>(&eval_)) return p->p;
  return kNaN;
}

double Branch::u_of(double x) const noexcept {
  return clamp01(std::abs(x - critical_point()) / length());
}

double Branch::value(double x) const {
  if (std::holds_alternative<Affine>(eval_)) {
    const double v = (x - lo_) / length();
    return increasing_ ? v : 1.0 - v;
  }
  if (const auto* p = std::get_if<Power>(&eval_)) {
    const double up = std::pow(u_of(x), p->p);
    return critical_value_ == 0 ? up : 1.0 - up;
  }
  return std::get<User>(eval_).fns->f(x);
}

double Branch::derivative(double x) const {
  if (std::holds_alternative<Affine>(eval_)) return (increasing_ ? 1.0 : -1.0) / length();
  if (const auto* p = std::get_if<Power>(&eval_)) {
    const double sv = critical_value_ == 0 ? 1.0 : -1.0;
    const double sigma = side_ == CriticalSide::Left ? 1.0 : -1.0;
    return sv * sigma * p->p * std::pow(u_of(x), p->p - 1.0) / length();
  }
  const auto& fns = *std::get<User>(eval_).fns;
  if (fns.derivative) return fns.derivative(x);
  const double h = 1e-6;
  return (fns.f(x + h) - fns.f(x - h)) / (2.0 * h);
}

double Branch::second_derivative(double x) const {
  if (std::holds_alternative<Affine>(eval_)) return 0.0;
  if (const auto* p = std::get_if<Power>(&eval_)) {
    const double sv = critical_value_ == 0 ? 1.0 : -1.0;
    const double len = length();
    return sv * p->p * (p->p - 1.0) * std::pow(u_of(x), p->p - 2.0) / (len * len);
  }
  const auto& f = std::get<User>(eval_).fns->f;
  const double h = 1e-4 * length();
  return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

double Branch::third_derivative(double x) const {
  if (std::holds_alternative<Affine>(eval_)) return 0.0;
  if (const auto* p = std::get_if<Power>(&eval_)) {
    const double sv = critical_value_ == 0 ? 1.0 : -1.0;
    const double sigma = side_ == CriticalSide::Left ? 1.0 : -1.0;
    const double len = length();
    return sv * sigma * p->p * (p->p - 1.0) * (p->p - 2.0) * std::pow(u_of(x), p->p - 3.0) /
           (len * len * len);
  }
  const auto& f = std::get<User>(eval_).fns->f;
  const double h = 1e-4 * length();
  return (f(x + 2 * h) - 2.0 * f(x + h) + 2.0 * f(x - h) - f(x - 2 * h)) / (2.0 * h * h * h);
}

double Branch::inverse(double y) const {
  y = clamp01(y);
  if (std::holds_alternative<Affine>(eval_))
    return increasing_ ? lo_ + length() * y : hi_ - length() * y;
  if (const auto* p = std::get_if<Power>(&eval_)) {
    const double w = critical_value_ == 0 ? y : 1.0 - y;
    const double u = std::pow(w, 1.0 / p->p);
    return side_ == CriticalSide::Left ? lo_ + length() * u : hi_ - length() * u;
  }
  return std::get<User>(eval_).fns->inverse(y);
}

double Branch::inverse_derivative(double y) const {
  y = clamp01(y);
  if (std::holds_alternative<Affine>(eval_)) return length();
  if (const auto* p = std::get_if<Power>(&eval_)) {
    const double w = critical_value_ == 0 ? y : 1.0 - y;
    if (w <= 0.0) return std::numeric_limits<double>::infinity();
    return length() / p->p * std::pow(w, 1.0 / p->p - 1.0);
  }
  return 1.0 / std::abs(derivative(inverse(y)));
}

double Branch::integral_abs_derivative_pow(double x1, double x2, double q) const {
  if (x2 < x1) std::swap(x1, x2);
  x1 = std::max(x1, lo_);
  x2 = std::min(x2, hi_);
  if (!(x2 > x1)) return 0.0;
  if (std::holds_alternative<Affine>(eval_)) return std::pow(length(), -q) * (x2 - x1);
  if (const auto* p = std::get_if<Power>(&eval_)) {
    double ua = u_of(x1);
    double ub = u_of(x2);
    if (ub < ua) std::swap(ua, ub);
    const double len = length();
    return len * std::pow(p->p / len, q) * power_integral(ua, ub, (p->p - 1.0) * q);
  }
  return detail::gauss_legendre(
      [&](double x) { return std::pow(std::abs(derivative(x)), q); }, x1, x2);
}

double Branch::integral_inverse_derivative_pow(double y1, double y2, double t) const {
  if (y2 < y1) std::swap(y1, y2);
  y1 = clamp01(y1);
  y2 = clamp01(y2);
  if (!(y2 > y1)) return 0.0;
  if (std::holds_alternative<Affine>(eval_)) return std::pow(length(), t) * (y2 - y1);
  if (const auto* p = std::get_if<Power>(&eval_)) {
    double wa = critical_value_ == 0 ? y1 : 1.0 - y2;
    double wb = critical_value_ == 0 ? y2 : 1.0 - y1;
    wa = std::max(wa, 0.0);
    return std::pow(length() / p->p, t) * power_integral(wa, wb, t * (1.0 / p->p - 1.0));
  }
  return detail::gauss_legendre(
      [&](double y) { return std::pow(inverse_derivative(y), t); }, y1, y2);
}

double Branch::normal_form_coefficient(double x) const {
  if (kind_ != BranchKind::Critical) return kNaN;
  const double c = critical_point();
  const double p = is_power() ? exponent() : kNaN;
  const double d = std::abs(x - c);
  if (d <= 0.0 || std::isnan(p)) return kNaN;
  return (value(x) - critical_value_) / std::pow(d, p);
}

// ---------------------------------------------------------------------------
// Partition and maps

bool PartitionSpec::full_cover() const noexcept {
  if (branches.empty()) return false;
  double reach = 0.0;
  for (const auto& b : branches) {
    if (b.lo > reach + 1e-12) return false;
    reach = std::max(reach, b.hi);
  }
  return reach >= 1.0 - 1e-12;
}

bool PartitionSpec::has_critical() const noexcept {
  return std::any_of(branches.begin(), branches.end(),
                     [](const BranchSpec& b) { return b.kind == BranchKind::Critical; });
}

MapInstance::MapInstance(std::shared_ptr<const PartitionSpec> partition,
                         std::vector<Branch> branches, double parameter)
    : partition_(std::move(partition)), branches_(std::move(branches)), parameter_(parameter) {
  if (!partition_ || partition_->size() != branches_.size())
    throw BadGeometry("map branches do not match the partition");
}

std::optional<std::size_t> MapInstance::locate(double x) const noexcept {
  for (std::size_t i = 0; i < branches_.size(); ++i)
    if (branches_[i].contains(x)) return i;
  return std::nullopt;
}

RandomFamily RandomFamily::constant(const MapInstance& map, std::string kind) {
  RandomFamily fam;
  fam.kind = std::move(kind);
  fam.partition = map.partition_ptr();
  fam.realize = [map](double) { return map; };
  fam.parameter_range = {map.parameter(), map.parameter()};
  return fam;
}

PartitionSpec derive_partition(std::vector<BranchSpec> specs,
                               const std::vector<std::vector<Branch>>& samples,
                               bool relaxed_mode) {
  if (specs.empty()) throw BadGeometry("empty partition");
  std::vector<std::size_t> order(specs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i + 1 < specs.size(); ++i)
    if (specs[i].lo > specs[i + 1].lo) throw BadGeometry("branches must be ordered by position");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& b = specs[i];
    if (!(b.lo < b.hi) || b.lo < 0.0 || b.hi > 1.0)
      throw BadGeometry("branch " + std::to_string(i) + " is not a subinterval of [0,1]");
    if (i + 1 < specs.size() && b.hi > specs[i + 1].lo + 1e-15)
      throw BadGeometry("branches " + std::to_string(i) + " and " + std::to_string(i + 1) +
                        " overlap");
  }

  PartitionSpec part;
  part.relaxed_mode = relaxed_mode;
  if (specs.front().lo > 0.0) throw BadGeometry("0 is not covered by any branch");
  if (specs.back().hi < 1.0) throw BadGeometry("1 is not covered by any branch");
  part.zero_index = 0;
  part.one_index = specs.size() - 1;
  if (part.zero_index == part.one_index && !relaxed_mode)
    throw BadGeometry("0 and 1 must lie in different branches");

  const double len0 = specs[part.zero_index].hi - specs[part.zero_index].lo;
  const double len1 = specs[part.one_index].hi - specs[part.one_index].lo;

  double s = 0.0;
  for (const auto& br : samples) s = std::max(s, br[part.zero_index].inverse(std::max(len0, len1)));

  const int grid = 2001;
  double kappa = std::numeric_limits<double>::infinity();
  double bigA = 0.0;
  for (const auto& br : samples) {
    for (std::size_t i = 0; i < br.size(); ++i) {
      const Branch& b = br[i];
      for (int g = 0; g < grid; ++g) {
        const double x = b.lo() + b.length() * g / (grid - 1);
        const double d = std::abs(b.derivative(x));
        if (std::isfinite(d)) bigA = std::max(bigA, d);
        const bool collar = x <= s || x >= 1.0 - s;
        if (b.kind() == BranchKind::Expanding || collar) kappa = std::min(kappa, d);
      }
      if (b.is_power()) {
        const double coef = std::abs(b.normal_form_coefficient(b.lo() + 0.5 * b.length()));
        bigA = std::max({bigA, coef, 1.0 / coef});
      }
    }
    kappa = std::min(kappa, std::abs(br[part.zero_index].derivative(0.0)));
    kappa = std::min(kappa, std::abs(br[part.one_index].derivative(1.0)));
    for (const auto& b : br) {
      if (!b.is_power()) continue;
      const double gamma = b.exponent() - 1.0;
      part.gamma_plus = std::max(part.gamma_plus.value_or(0.0), gamma);
      if (b.critical_value() == 0)
        part.gamma0_plus = std::max(part.gamma0_plus.value_or(0.0), gamma);
    }
  }
  part.kappa = kappa;
  part.bigA = bigA;
  part.s = s;
  part.branches = std::move(specs);
  return part;
}

namespace {

BranchSpec spec_of(const Branch& b) {
  return BranchSpec{b.lo(), b.hi(), b.kind(), b.critical_side(), b.critical_value()};
}

}  // namespace

RandomFamily build_example_family(double a, double b, const std::vector<CriticalBlock>& blocks,
                                  std::pair<double, double> omega_range) {
  if (!(0.0 < a && a < b && b < 1.0)) throw BadGeometry("need 0 < a < b < 1");
  if (!(omega_range.first > 1.0) || omega_range.second < omega_range.first)
    throw BadGeometry("exponent range must be an interval above 1");
  std::vector<CriticalBlock> sorted = blocks;
  std::sort(sorted.begin(), sorted.end(),
            [](const CriticalBlock& x, const CriticalBlock& y) { return x.lo < y.lo; });
  double reach = a;
  for (const auto& blk : sorted) {
    if (!(blk.lo < blk.hi)) throw BadGeometry("block with empty interior");
    if (blk.lo < a - 1e-15 || blk.hi > b + 1e-15)
      throw BadGeometry("block [" + fmt(blk.lo) + "," + fmt(blk.hi) + "] escapes [a,b]");
    if (blk.lo < reach - 1e-15) throw BadGeometry("blocks overlap");
    if (blk.target != 0 && blk.target != 1) throw BadGeometry("block target must be 0 or 1");
    reach = blk.hi;
  }

  auto make = [a, b, sorted](double omega) {
    std::vector<Branch> br;
    br.push_back(Branch::affine(0.0, a, true));
    for (const auto& blk : sorted) {
      const double mid = 0.5 * (blk.lo + blk.hi);
      br.push_back(Branch::power(blk.lo, mid, CriticalSide::Right, blk.target, omega));
      br.push_back(Branch::power(mid, blk.hi, CriticalSide::Left, blk.target, omega));
    }
    br.push_back(Branch::affine(b, 1.0, false));
    return br;
  };

  std::vector<std::vector<Branch>> samples;
  for (int i = 0; i <= 4; ++i)
    samples.push_back(
        make(omega_range.first + (omega_range.second - omega_range.first) * i / 4.0));
  std::vector<BranchSpec> specs;
  for (const auto& br : samples.front()) specs.push_back(spec_of(br));
  auto part = std::make_shared<const PartitionSpec>(derive_partition(specs, samples, false));

  RandomFamily fam;
  fam.kind = "example";
  fam.partition = part;
  fam.parameter_range = omega_range;
  fam.realize = [part, make, omega_range](double omega) {
    omega = std::clamp(omega, omega_range.first, omega_range.second);
    return MapInstance(part, make(omega), omega);
  };
  return fam;
}

MapInstance build_affine_cookie_cutter(const std::vector<AffinePiece>& pieces) {
  if (pieces.empty()) throw BadGeometry("cookie-cutter needs at least one interval");
  std::vector<AffinePiece> sorted = pieces;
  std::sort(sorted.begin(), sorted.end(),
            [](const AffinePiece& x, const AffinePiece& y) { return x.lo < y.lo; });
  std::vector<Branch> br;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& p = sorted[i];
    if (i > 0 && p.lo < sorted[i - 1].hi - 1e-15) throw BadGeometry("intervals overlap");
    const bool holds_one = p.hi >= 1.0 && sorted.size() > 1;
    br.push_back(Branch::affine(p.lo, p.hi, p.increasing.value_or(!holds_one)));
  }
  std::vector<BranchSpec> specs;
  for (const auto& b : br) specs.push_back(spec_of(b));
  auto part = std::make_shared<const PartitionSpec>(derive_partition(specs, {br}, true));
  return MapInstance(part, std::move(br), 0.0);
}

RandomFamily build_mixture_family(std::vector<RandomFamily> members) {
  if (members.empty()) throw BadGeometry("mixture needs members");
  const std::size_t n = members.front().branch_count();
  auto part = std::make_shared<PartitionSpec>(*members.front().partition);
  for (const auto& m : members) {
    if (m.branch_count() != n) throw BadGeometry("mixture members differ in branch count");
    part->kappa = std::min(part->kappa, m.partition->kappa);
    part->bigA = std::max(part->bigA, m.partition->bigA);
    part->s = std::max(part->s, m.partition->s);
    part->relaxed_mode = part->relaxed_mode || m.partition->relaxed_mode;
    if (m.partition->gamma_plus)
      part->gamma_plus = std::max(part->gamma_plus.value_or(0.0), *m.partition->gamma_plus);
    if (m.partition->gamma0_plus)
      part->gamma0_plus = std::max(part->gamma0_plus.value_or(0.0), *m.partition->gamma0_plus);
  }
  std::shared_ptr<const PartitionSpec> shared = part;
  RandomFamily fam;
  fam.kind = "mixture";
  fam.partition = shared;
  fam.parameter_range = {0.0, static_cast<double>(members.size() - 1)};
  fam.realize = [members = std::move(members), shared](double idx) {
    const auto i = static_cast<std::size_t>(
        std::clamp(std::lround(idx), 0L, static_cast<long>(members.size() - 1)));
    MapInstance m = members[i].realize(members[i].parameter_range.first);
    return MapInstance(shared, m.branches(), idx);
  };
  return fam;
}

double moran_root(const std::vector<double>& ratios, double tol) {
  auto excess = [&](double s) {
    double sum = 0.0;
    for (double r : ratios) sum += std::pow(r, s);
    return sum - 1.0;
  };
  if (excess(1.0) >= 0.0) return 1.0;
  double lo = 0.0;
  double hi = 1.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Schwarzian and validation

double schwarzian(const MapInstance& map, std::size_t branch, double x) {
  const Branch& b = map.branch(branch);
  const double d1 = b.derivative(x);
  if (std::abs(d1) < 1e-300 || !std::isfinite(d1))
    throw NonDifferentiable("f'(x) vanishes at x = " + fmt(x));
  const double d2 = b.second_derivative(x);
  const double d3 = b.third_derivative(x);
  const double r = d2 / d1;
  return d3 / d1 - 1.5 * r * r;
}

bool ValidationReport::all_passed() const noexcept {
  return std::all_of(entries.begin(), entries.end(),
                     [](const ValidationEntry& e) { return e.passed; });
}

const ValidationEntry* ValidationReport::find(const std::string& condition) const noexcept {
  for (const auto& e : entries)
    if (e.condition == condition) return &e;
  return nullptr;
}

ValidationReport validate_map(const MapInstance& map, int grid_points, double tol) {
  const PartitionSpec& part = map.partition();
  ValidationReport rep;
  rep.relaxed_mode = part.relaxed_mode;
  rep.kappa = part.kappa;
  rep.bigA = part.bigA;
  rep.s = part.s;
  grid_points = std::max(grid_points, 100);

  auto fail = [](ValidationEntry& e, const std::string& why, double at) {
    if (e.passed) {
      e.passed = false;
      e.detail = why;
      e.witness = at;
    }
  };
  auto grid = [&](const Branch& b, int g) { return b.lo() + b.length() * g / (grid_points - 1); };

  ValidationEntry geom{"partition", true, false, "", std::nullopt};
  if (part.zero_index == part.one_index) {
    if (part.relaxed_mode) {
      geom.detail = "0 and 1 share a branch (relaxed_mode)";
    } else {
      fail(geom, "0 and 1 lie in the same branch", 0.0);
    }
  }
  rep.entries.push_back(geom);

  ValidationEntry m1{"M1", true, false, "", std::nullopt};
  ValidationEntry m2{"M2", true, false, "", std::nullopt};
  ValidationEntry m3{"M3", true, false, "", std::nullopt};
  ValidationEntry m4{"M4", true, false, "", std::nullopt};
  ValidationEntry m5b{"M5b", true, false, "", std::nullopt};
  ValidationEntry m6{"M6", true, false, "", std::nullopt};

  for (std::size_t i = 0; i < map.size(); ++i) {
    const Branch& b = map.branch(i);
    const double f_lo = b.value(b.lo());
    const double f_hi = b.value(b.hi());
    const bool onto = (std::abs(f_lo) <= tol && std::abs(f_hi - 1.0) <= tol) ||
                      (std::abs(f_lo - 1.0) <= tol && std::abs(f_hi) <= tol);
    if (!onto)
      fail(m1, "branch " + std::to_string(i) + " image [" + fmt(std::min(f_lo, f_hi)) + "," +
                   fmt(std::max(f_lo, f_hi)) + "] is not [0,1]",
           b.lo());
    const double c = b.critical_point();
    double prev = f_lo;
    for (int g = 0; g < grid_points; ++g) {
      const double x = grid(b, g);
      const double fx = b.value(x);
      // Equal neighbours are allowed only where f rounds to a constant.
      const double step = b.increasing() ? fx - prev : prev - fx;
      const double ulp = 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(fx), 1e-300);
      if (g > 0 && (step < 0.0 || (step == 0.0 && std::abs(b.derivative(x)) * b.length() /
                                                          (grid_points - 1) > ulp)))
        fail(m1, "branch " + std::to_string(i) + " not strictly monotone", x);
      prev = fx;
      // Near a critical point f^{-1} amplifies the rounding of f(x) by 1/|f'(x)|.
      const double conditioning =
          8.0 * std::numeric_limits<double>::epsilon() * std::abs(fx) / std::abs(b.derivative(x));
      if (std::abs(b.inverse(fx) - x) > 1e-10 + conditioning)
        fail(m1, "branch " + std::to_string(i) + " inverse round trip error", x);
      const double d = std::abs(b.derivative(x));
      if (d > part.bigA * (1.0 + tol)) fail(m5b, "|f'| = " + fmt(d) + " exceeds A", x);
      if (b.kind() == BranchKind::Expanding && d < part.kappa * (1.0 - tol))
        fail(m2, "|f'| = " + fmt(d) + " below kappa on expanding branch " + std::to_string(i),
             x);
      const bool at_critical = b.kind() == BranchKind::Critical && std::abs(x - c) < 1e-15;
      if (g > 0 && g + 1 < grid_points && !at_critical) {
        const double sch = schwarzian(map, i, x);
        // Affine branches sit on the boundary S = 0.
        if (sch > tol * std::max(1.0, std::abs(sch)))
          fail(m1, "Schwarzian " + fmt(sch) + " > 0 on branch " + std::to_string(i), x);
      }
      if (b.kind() == BranchKind::Critical && !at_critical && d <= 0.0)
        fail(m3, "second critical point on branch " + std::to_string(i), x);
    }
    if (b.kind() == BranchKind::Critical) {
      if (std::abs(b.derivative(c)) > 1e-8)
        fail(m3, "f'(c) != 0 on branch " + std::to_string(i), c);
      const double fc = b.value(c);
      if (std::abs(fc) > tol && std::abs(fc - 1.0) > tol)
        fail(m4, "f(c) = " + fmt(fc) + " not in {0,1}", c);
      if (b.is_power()) {
        const double coef = std::abs(b.normal_form_coefficient(b.lo() + 0.5 * b.length()));
        if (coef < 1.0 / part.bigA * (1.0 - tol) || coef > part.bigA * (1.0 + tol))
          fail(m6, "|A_Delta| = " + fmt(coef) + " outside [1/A, A]", c);
      } else {
        m6.waived = true;
        m6.detail = "user critical branch: normal form not checked";
      }
    }
  }
  if (m6.passed && !m6.waived && part.has_critical())
    m6.detail = "constant coefficient A_Delta; derivative bound not applicable";
  const Branch& last = map.branch(part.one_index);
  if (std::abs(last.value(1.0)) > tol) fail(m4, "f(1) != 0", 1.0);

  ValidationEntry m5a{"M5a", true, false, "", std::nullopt};
  const Branch& first = map.zero_branch();
  if (std::abs(first.value(0.0)) > tol) fail(m5a, "f(0) != 0", 0.0);
  if (first.derivative(0.0) < part.kappa * (1.0 - tol) || !(part.kappa > 1.0))
    fail(m5a, "f'(0) = " + fmt(first.derivative(0.0)) + " below kappa > 1", 0.0);
  if (last.derivative(1.0) > -part.kappa * (1.0 - tol))
    fail(m5a, "f'(1) = " + fmt(last.derivative(1.0)) + " above -kappa", 1.0);

  ValidationEntry m5c{"M5c", true, false, "", std::nullopt};
  const double big = std::max(map.branch(part.zero_index).length(),
                              map.branch(part.one_index).length());
  const double need = first.inverse(big);
  if (!(part.s > 0.0 && part.s <= 0.45))
    fail(m5c, "no s <= 0.45 satisfies the collar conditions (s = " + fmt(part.s) + ")", part.s);
  if (need > part.s + tol) fail(m5c, "f_0^{-1}(max|Delta|) exceeds s", need);
  for (int g = 0; g < grid_points && m5c.passed; ++g) {
    const double x = part.s * g / (grid_points - 1);
    for (const double pt : {x, 1.0 - x}) {
      const auto idx = map.locate(pt);
      if (!idx) continue;
      if (std::abs(map.branch(*idx).derivative(pt)) < part.kappa * (1.0 - tol))
        fail(m5c, "|f'| below kappa inside the collar", pt);
    }
  }

  ValidationEntry m7{"M7", true, false, "", std::nullopt};
  const bool has_crit0 = std::any_of(part.branches.begin(), part.branches.end(),
                                     [](const BranchSpec& b) {
                                       return b.kind == BranchKind::Critical &&
                                              b.critical_value == 0;
                                     });
  if (!has_crit0) {
    if (part.relaxed_mode) {
      m7.waived = true;
      m7.detail = "waived: relaxed_mode (no critical point mapping to 0)";
    } else {
      fail(m7, "no critical point mapping to 0", 0.0);
    }
  }

  for (auto* e : {&m1, &m2, &m3, &m4, &m5a, &m5b, &m5c, &m6, &m7}) rep.entries.push_back(*e);
  return rep;
}

}  // namespace rcfm
