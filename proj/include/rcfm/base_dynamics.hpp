#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rcfm/interval_maps.hpp"

namespace rcfm {

struct DiracBase {
  double param;
};

/// Rotation x -> x + alpha (mod 1) with alpha = numerator / denominator.
/// The denominator is at least 1e9, so the rotation is periodic only on
/// scales far beyond any window we materialize.
struct RotationBase {
  std::uint64_t numerator;
  std::uint64_t denominator;
  double param_lo;
  double param_hi;
  double alpha() const noexcept {
    return static_cast<double>(numerator) / static_cast<double>(denominator);
  }
};

struct BernoulliBase {
  std::vector<std::pair<double, double>> alphabet;  // (parameter, probability)
};

/// Finite window of a base orbit: parameters of theta^j(omega) for
/// j in [-n_past, n_future].
class BasePath {
 public:
  BasePath() = default;
  BasePath(std::vector<double> params, int n_past, std::uint64_t seed,
           std::uint64_t sample_index);

  double at(int j) const;
  int n_past() const noexcept { return n_past_; }
  int n_future() const noexcept { return static_cast<int>(params_.size()) - n_past_ - 1; }
  std::size_t size() const noexcept { return params_.size(); }
  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t sample_index() const noexcept { return sample_index_; }
  /// Path centred at theta^j(omega): shifted(j).at(i) == at(i + j).
  BasePath shifted(int j) const;

 private:
  std::vector<double> params_;
  int n_past_ = 0;
  std::uint64_t seed_ = 0;
  std::uint64_t sample_index_ = 0;
};

class BaseSystem {
 public:
  using Kind = std::variant<DiracBase, RotationBase, BernoulliBase>;

  BaseSystem(Kind kind, std::uint64_t seed);

  static BaseSystem dirac(double param, std::uint64_t seed = 0);
  /// Golden-ratio conjugate as the default rotation number.
  static BaseSystem rotation(double param_lo, double param_hi, std::uint64_t seed,
                             double alpha = 0.6180339887498949);
  static BaseSystem bernoulli(std::vector<std::pair<double, double>> alphabet,
                              std::uint64_t seed);

  const Kind& kind() const noexcept { return kind_; }
  std::uint64_t seed() const noexcept { return seed_; }
  bool is_dirac() const noexcept { return std::holds_alternative<DiracBase>(kind_); }
  std::string name() const;

  /// Deterministic in (seed, sample_index); entry j depends only on the
  /// absolute coordinate j, so overlapping windows agree.
  BasePath sample_path(int n_past, int n_future, std::uint64_t sample_index) const;

 private:
  double param_at(std::int64_t j, std::uint64_t sample_index) const;

  Kind kind_;
  std::uint64_t seed_;
};

/// Counter-based 64-bit mix (splitmix64 finalizer).
std::uint64_t mix64(std::uint64_t x) noexcept;
/// Uniform in [0, 1) from the three counters.
double hashed_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept;

struct Chi0Estimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo estimate of the expected log|T_omega'(0)|.
Chi0Estimate chi0(const BaseSystem& base, const RandomFamily& family, int n_samples);

/// Realize T_{theta^j omega} for j = first .. first + count - 1.
std::vector<MapInstance> realize_fibers(const RandomFamily& family, const BasePath& path,
                                        int first, int count);

}  // namespace rcfm
