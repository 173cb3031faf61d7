#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace rcfm {

enum class BranchKind { Expanding, Critical };

/// Which endpoint of a critical branch carries the critical point.
enum class CriticalSide { None, Left, Right };

/// Closed-form pieces supplied by the caller for a branch outside the
/// built-in affine/power-law classes. `derivative` may be left empty, in
/// which case central differences (h = 1e-6) are used.
struct UserBranchFunctions {
  std::function<double(double)> f;
  std::function<double(double)> inverse;
  std::function<double(double)> derivative;
};

/// One realized full branch f: [lo, hi] -> [0, 1].
///
/// Power-law branches use the normal form
///   f(x) = v + sign * (|x - c| / len)^p,  v in {0, 1},
/// with the critical point c at one endpoint. Their exponent p = 1 + gamma
/// is real here so that the example family (p = omega) fits directly.
class Branch {
 public:
  static Branch affine(double lo, double hi, bool increasing);
  static Branch power(double lo, double hi, CriticalSide side, int critical_value,
                      double exponent);
  static Branch user(double lo, double hi, BranchKind kind, CriticalSide side,
                     int critical_value, UserBranchFunctions fns);

  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  double length() const noexcept { return hi_ - lo_; }
  BranchKind kind() const noexcept { return kind_; }
  CriticalSide critical_side() const noexcept { return side_; }
  /// 0 or 1 for critical branches, -1 otherwise.
  int critical_value() const noexcept { return critical_value_; }
  /// Position of the critical point; NaN for expanding branches.
  double critical_point() const noexcept;
  /// p for power branches, NaN otherwise.
  double exponent() const noexcept;
  bool increasing() const noexcept { return increasing_; }
  bool is_power() const noexcept { return std::holds_alternative<Power>(eval_); }
  bool is_affine() const noexcept { return std::holds_alternative<Affine>(eval_); }
  bool contains(double x) const noexcept { return x >= lo_ && x <= hi_; }

  double value(double x) const;
  double derivative(double x) const;
  double second_derivative(double x) const;
  double third_derivative(double x) const;
  double inverse(double y) const;
  /// |(f^{-1})'(y)|; +inf at a critical value of a power branch.
  double inverse_derivative(double y) const;

  /// \int_{x1}^{x2} |f'(x)|^q dx over a subinterval of the branch.
  /// Closed form for affine and power branches, Gauss-Legendre otherwise.
  double integral_abs_derivative_pow(double x1, double x2, double q) const;
  /// \int_{y1}^{y2} |(f^{-1})'(y)|^t dy over a subinterval of [0, 1].
  double integral_inverse_derivative_pow(double y1, double y2, double t) const;

  /// A_Delta(x) = (f(x) - f(c)) / |x - c|^p for critical branches.
  double normal_form_coefficient(double x) const;

 private:
  struct Affine {};
  struct Power {
    double p;
  };
  struct User {
    std::shared_ptr<const UserBranchFunctions> fns;
  };

  Branch() = default;
  double u_of(double x) const noexcept;

  double lo_ = 0.0;
  double hi_ = 1.0;
  BranchKind kind_ = BranchKind::Expanding;
  CriticalSide side_ = CriticalSide::None;
  int critical_value_ = -1;
  bool increasing_ = true;
  std::variant<Affine, Power, User> eval_;
};

struct BranchSpec {
  double lo = 0.0;
  double hi = 1.0;
  BranchKind kind = BranchKind::Expanding;
  CriticalSide critical_side = CriticalSide::None;
  int critical_value = -1;
};

/// The interval collection G with the class constants derived from the
/// realized maps.
struct PartitionSpec {
  std::vector<BranchSpec> branches;
  double kappa = 0.0;
  double bigA = 0.0;
  double s = 0.0;
  std::optional<double> gamma_plus;
  std::optional<double> gamma0_plus;
  bool relaxed_mode = false;
  std::size_t zero_index = 0;
  std::size_t one_index = 0;

  std::size_t size() const noexcept { return branches.size(); }
  /// True when the branch intervals tile [0, 1] (up to 1e-12).
  bool full_cover() const noexcept;
  bool has_critical() const noexcept;
};

/// One fiber map T_omega.
class MapInstance {
 public:
  MapInstance(std::shared_ptr<const PartitionSpec> partition, std::vector<Branch> branches,
              double parameter);

  const PartitionSpec& partition() const noexcept { return *partition_; }
  const std::shared_ptr<const PartitionSpec>& partition_ptr() const noexcept {
    return partition_;
  }
  std::size_t size() const noexcept { return branches_.size(); }
  const Branch& branch(std::size_t i) const { return branches_.at(i); }
  const std::vector<Branch>& branches() const noexcept { return branches_; }
  const Branch& zero_branch() const { return branches_[partition_->zero_index]; }
  double parameter() const noexcept { return parameter_; }

  /// Index of the first branch containing x, if any.
  std::optional<std::size_t> locate(double x) const noexcept;

 private:
  std::shared_ptr<const PartitionSpec> partition_;
  std::vector<Branch> branches_;
  double parameter_;
};

/// omega -> T_omega. The partition is shared by every realized map.
struct RandomFamily {
  std::string kind;
  std::shared_ptr<const PartitionSpec> partition;
  std::function<MapInstance(double)> realize;
  std::pair<double, double> parameter_range{0.0, 0.0};

  std::size_t branch_count() const { return partition->size(); }
  static RandomFamily constant(const MapInstance& map, std::string kind);
};

struct CriticalBlock {
  double lo;
  double hi;
  int target;  // 0 or 1

  bool operator==(const CriticalBlock&) const = default;
};

/// Affine on [0,a] and [b,1]; each block [a_j,b_j] is split at its centre
/// into two power-law branches with exponent omega.
RandomFamily build_example_family(double a, double b, const std::vector<CriticalBlock>& blocks,
                                  std::pair<double, double> omega_range);

struct AffinePiece {
  double lo;
  double hi;
  std::optional<bool> increasing;  // default: decreasing on the branch holding 1

  bool operator==(const AffinePiece&) const = default;
};

/// Deterministic oracle map: every interval mapped affinely onto [0,1].
/// Always relaxed (no critical branches).
MapInstance build_affine_cookie_cutter(const std::vector<AffinePiece>& pieces);

/// Family whose parameter is an index into `members` (rounded). All members
/// must have the same branch count. Used for mixtures of geometries.
RandomFamily build_mixture_family(std::vector<RandomFamily> members);

/// Compute kappa, A, s and gamma constants from sample realizations and
/// attach them to a partition. Used by the family builders.
PartitionSpec derive_partition(std::vector<BranchSpec> specs,
                               const std::vector<std::vector<Branch>>& samples,
                               bool relaxed_mode);

/// Moran root of sum r_i^s = 1 by bisection on [0, 1]; returns 1 when
/// sum r_i >= 1.
double moran_root(const std::vector<double>& ratios, double tol = 1e-13);

// ---------------------------------------------------------------------------

double schwarzian(const MapInstance& map, std::size_t branch, double x);

struct ValidationEntry {
  std::string condition;
  bool passed = true;
  bool waived = false;
  std::string detail;
  std::optional<double> witness;
};

struct ValidationReport {
  std::vector<ValidationEntry> entries;
  bool relaxed_mode = false;
  double kappa = 0.0;
  double bigA = 0.0;
  double s = 0.0;

  bool all_passed() const noexcept;
  const ValidationEntry* find(const std::string& condition) const noexcept;
};

ValidationReport validate_map(const MapInstance& map, int grid_points = 1000, double tol = 1e-8);

}  // namespace rcfm
