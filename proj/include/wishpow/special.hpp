#pragma once

#include <array>
#include <cmath>
#include <numbers>

#include "wishpow/error.hpp"

namespace wishpow {

/// Gamma function, Lanczos approximation with g = 7 and 9 coefficients.
/// Relative accuracy is about 1e-15 on the positive reals.
inline double lanczos_gamma(double x) {
  static constexpr std::array<double, 9> kCoef = {
      0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
      771.32342877765313,   -176.61502916214059,   12.507343278686905,
      -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  constexpr double kG = 7.0;
  if (x < 0.5) {
    // reflection
    return std::numbers::pi / (std::sin(std::numbers::pi * x) * lanczos_gamma(1.0 - x));
  }
  x -= 1.0;
  double a = kCoef[0];
  const double t = x + kG + 0.5;
  for (std::size_t i = 1; i < kCoef.size(); ++i) a += kCoef[i] / (x + static_cast<double>(i));
  return std::sqrt(2.0 * std::numbers::pi) * std::pow(t, x + 0.5) * std::exp(-t) * a;
}

/// ell_alpha = E|Z|^alpha for standard normal Z, via 2^(a/2) Gamma((a+1)/2) / sqrt(pi).
inline double ell_alpha(double alpha) {
  if (!(alpha >= 0.0)) throw InvalidArgument("ell_alpha requires alpha >= 0");
  if (alpha == 0.0) return 1.0;
  return std::exp2(0.5 * alpha) * lanczos_gamma(0.5 * (alpha + 1.0)) / std::sqrt(std::numbers::pi);
}

/// Fixed-level tanh-sinh rule on [0, length].
///
/// The integrand receives the distances (from_left, from_right) of the node
/// to both endpoints, each computed without cancellation, so power-law
/// endpoint singularities are resolved to full precision.
template <class Fn>
double tanh_sinh(double length, Fn&& f, double step = 1.0 / 64.0, double t_max = 4.5) {
  const int half = static_cast<int>(t_max / step);
  double sum = 0.0;
  for (int k = -half; k <= half; ++k) {
    const double t = k * step;
    const double u = 0.5 * std::numbers::pi * std::sinh(t);
    const double from_left = length / (1.0 + std::exp(-2.0 * u));
    const double from_right = length / (1.0 + std::exp(2.0 * u));
    if (from_left <= 0.0 || from_right <= 0.0) continue;
    const double cu = std::cosh(u);
    const double w = 0.5 * length * step * 0.5 * std::numbers::pi * std::cosh(t) / (cu * cu);
    if (w == 0.0) continue;
    sum += w * f(from_left, from_right);
  }
  return sum;
}

}  // namespace wishpow
