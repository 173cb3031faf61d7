#pragma once

#include <array>

namespace rcfm::detail {

// 8-point Gauss-Legendre rule on [-1, 1].
inline constexpr std::array<double, 8> kGaussNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
inline constexpr std::array<double, 8> kGaussWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

/// Composite Gauss-Legendre over [a, b] with `panels` equal panels.
template <class F>
double gauss_legendre(F&& f, double a, double b, int panels = 4) {
  if (!(b > a)) return 0.0;
  const double step = (b - a) / panels;
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * step;
    const double mid = lo + 0.5 * step;
    const double half = 0.5 * step;
    for (std::size_t i = 0; i < kGaussNodes.size(); ++i)
      sum += kGaussWeights[i] * f(mid + half * kGaussNodes[i]);
  }
  return sum * 0.5 * step;
}

}  // namespace rcfm::detail
