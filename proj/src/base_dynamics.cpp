#include "rcfm/base_dynamics.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rcfm/errors.hpp"

namespace rcfm {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double hashed_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept {
  const std::uint64_t h = mix64(mix64(mix64(seed) ^ a) ^ b);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

BasePath::BasePath(std::vector<double> params, int n_past, std::uint64_t seed,
                   std::uint64_t sample_index)
    : params_(std::move(params)), n_past_(n_past), seed_(seed), sample_index_(sample_index) {}

double BasePath::at(int j) const {
  const long idx = static_cast<long>(j) + n_past_;
  if (idx < 0 || idx >= static_cast<long>(params_.size()))
    throw std::out_of_range("base path index " + std::to_string(j) + " outside window");
  return params_[static_cast<std::size_t>(idx)];
}

BasePath BasePath::shifted(int j) const {
  BasePath p = *this;
  p.n_past_ = n_past_ + j;
  if (p.n_past_ < 0 || p.n_past_ >= static_cast<int>(params_.size()))
    throw std::out_of_range("shift leaves the window");
  return p;
}

BaseSystem::BaseSystem(Kind kind, std::uint64_t seed) : kind_(std::move(kind)), seed_(seed) {
  if (const auto* b = std::get_if<BernoulliBase>(&kind_)) {
    if (b->alphabet.empty()) throw ConfigError("base.alphabet", "empty alphabet");
    double sum = 0.0;
    for (const auto& [param, prob] : b->alphabet) {
      if (!(prob >= 0.0)) throw ConfigError("base.alphabet", "negative probability");
      sum += prob;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw ConfigError("base.alphabet", "probabilities sum to " + std::to_string(sum));
  }
  if (const auto* r = std::get_if<RotationBase>(&kind_)) {
    if (r->denominator < 1000000000ULL || r->numerator == 0 || r->numerator >= r->denominator)
      throw ConfigError("base.alpha", "rotation number must lie in (0,1) with denominator >= 1e9");
    if (!(r->param_lo < r->param_hi)) throw ConfigError("base.param_range", "empty range");
  }
}

BaseSystem BaseSystem::dirac(double param, std::uint64_t seed) {
  return BaseSystem(DiracBase{param}, seed);
}

BaseSystem BaseSystem::rotation(double param_lo, double param_hi, std::uint64_t seed,
                                double alpha) {
  constexpr std::uint64_t den = 1000000000000ULL;
  const auto num = static_cast<std::uint64_t>(std::llround(alpha * static_cast<double>(den)));
  return BaseSystem(RotationBase{num, den, param_lo, param_hi}, seed);
}

BaseSystem BaseSystem::bernoulli(std::vector<std::pair<double, double>> alphabet,
                                 std::uint64_t seed) {
  return BaseSystem(BernoulliBase{std::move(alphabet)}, seed);
}

std::string BaseSystem::name() const {
  if (std::holds_alternative<DiracBase>(kind_)) return "dirac";
  if (std::holds_alternative<RotationBase>(kind_)) return "rotation";
  return "bernoulli";
}

double BaseSystem::param_at(std::int64_t j, std::uint64_t sample_index) const {
  if (const auto* d = std::get_if<DiracBase>(&kind_)) return d->param;
  if (const auto* r = std::get_if<RotationBase>(&kind_)) {
    const auto den = static_cast<__int128>(r->denominator);
    const auto start = static_cast<__int128>(mix64(mix64(seed_) ^ sample_index) % r->denominator);
    __int128 pos = (start + static_cast<__int128>(j) * r->numerator) % den;
    if (pos < 0) pos += den;
    const double x = static_cast<double>(pos) / static_cast<double>(r->denominator);
    return r->param_lo + (r->param_hi - r->param_lo) * x;
  }
  const auto& b = std::get<BernoulliBase>(kind_);
  const double u = hashed_uniform(seed_, sample_index, static_cast<std::uint64_t>(j));
  double acc = 0.0;
  for (const auto& [param, prob] : b.alphabet) {
    acc += prob;
    if (u < acc) return param;
  }
  return b.alphabet.back().first;
}

BasePath BaseSystem::sample_path(int n_past, int n_future, std::uint64_t sample_index) const {
  if (n_past < 0 || n_future < 0) throw std::invalid_argument("window sizes must be >= 0");
  std::vector<double> params;
  params.reserve(static_cast<std::size_t>(n_past + n_future + 1));
  for (int j = -n_past; j <= n_future; ++j) params.push_back(param_at(j, sample_index));
  return BasePath(std::move(params), n_past, seed_, sample_index);
}

Chi0Estimate chi0(const BaseSystem& base, const RandomFamily& family, int n_samples) {
  auto log_slope = [&](double param) {
    const MapInstance m = family.realize(param);
    return std::log(std::abs(m.zero_branch().derivative(0.0)));
  };
  if (base.is_dirac()) return {log_slope(std::get<DiracBase>(base.kind()).param), 0.0};
  if (n_samples < 2) throw std::invalid_argument("chi0 needs at least two samples");
  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i)
    vals.push_back(log_slope(base.sample_path(0, 0, static_cast<std::uint64_t>(i)).at(0)));
  const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / n_samples;
  double ss = 0.0;
  for (double v : vals) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n_samples - 1));
  return {mean, sd / std::sqrt(static_cast<double>(n_samples))};
}

std::vector<MapInstance> realize_fibers(const RandomFamily& family, const BasePath& path,
                                        int first, int count) {
  std::vector<MapInstance> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int j = first; j < first + count; ++j) out.push_back(family.realize(path.at(j)));
  return out;
}

}  // namespace rcfm
