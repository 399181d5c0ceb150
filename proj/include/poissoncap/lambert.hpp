#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace poissoncap {

namespace detail {

/// Halley refinement for w e^w = z from a branch-appropriate start.
inline double lambert_halley(double w, double z) {
  for (int k = 0; k < 40; ++k) {
    const double ew = std::exp(w);
    const double f = w * ew - z;
    if (f == 0.0) break;
    const double wp1 = w + 1.0;
    if (std::abs(wp1) < 1e-12) break;  // at the branch point the start is already series-exact
    const double denom = ew * wp1 - f * (w + 2.0) / (2.0 * wp1);
    const double dw = f / denom;
    w -= dw;
    if (std::abs(dw) <= 3e-16 * (1.0 + std::abs(w))) break;
  }
  return w;
}

/// Series around the branch point z = -1/e in p = +-sqrt(2(1 + e z)).
inline double lambert_branch_series(double p) {
  return -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 + p * (-43.0 / 540.0))));
}

}  // namespace detail

/// Principal branch W0: w >= -1 with w e^w = z, for z >= -1/e.
inline double lambert_w0(double z) {
  constexpr double inv_e = 1.0 / std::numbers::e;
  if (std::isnan(z) || z < -inv_e - 1e-14)
    throw std::domain_error("lambert_w0: z below -1/e");
  if (z <= -inv_e) return -1.0;
  const double p2 = 2.0 * (1.0 + std::numbers::e * z);
  if (p2 <= 0.0) return -1.0;
  double w;
  if (z < -0.25) {
    w = detail::lambert_branch_series(std::sqrt(p2));
    if (p2 < 1e-6) return w;  // series error ~ p^5, below double roundoff here
  } else if (z <= 2.0) {
    w = z >= 0.0 ? z / (1.0 + z) : z;  // first-order start
  } else {
    const double l1 = std::log(z);
    const double l2 = std::log(l1);
    w = l1 - l2 + l2 / l1;
  }
  return detail::lambert_halley(w, z);
}

/// Lower branch W-1: w <= -1 with w e^w = z, for z in [-1/e, 0).
inline double lambert_wm1(double z) {
  constexpr double inv_e = 1.0 / std::numbers::e;
  if (std::isnan(z) || z < -inv_e - 1e-14 || z >= 0.0)
    throw std::domain_error("lambert_wm1: z outside [-1/e, 0)");
  if (z <= -inv_e) return -1.0;
  const double p2 = 2.0 * (1.0 + std::numbers::e * z);
  if (p2 <= 0.0) return -1.0;
  double w;
  if (z < -0.25) {
    w = detail::lambert_branch_series(-std::sqrt(p2));
    if (p2 < 1e-6) return w;
  } else {
    const double l1 = std::log(-z);
    const double l2 = std::log(-l1);
    w = l1 - l2;
  }
  return detail::lambert_halley(w, z);
}

}  // namespace poissoncap
