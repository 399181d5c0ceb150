#pragma once

#include <cmath>
#include <numbers>
#include <optional>

#include "poissoncap/lambert.hpp"
#include "poissoncap/types.hpp"

namespace poissoncap {

enum class SupportRegime { two_point, general, boundary };

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

inline SupportRegime classify_regime(const ChannelParams& params, double boundary_tol = 1e-12) {
  const double s = params.amplitude + params.dark_current;
  if (std::abs(s - std::numbers::e) <= boundary_tol) return SupportRegime::boundary;
  return s < std::numbers::e ? SupportRegime::two_point : SupportRegime::general;
}

struct LocationBounds {
  Interval lambert;  // x-coordinates, clipped to [0, A]
  Interval simple;   // the wider closed-form interval containing it
};

/// Interval bounds on interior support points (all of supp \ {0, A}) for
/// A + lambda > e, from the two Lambert-W branches at -1/(A+lambda) and the
/// enclosing elementary bounds.  No interval exists otherwise.
inline std::optional<LocationBounds> interior_location_bounds(const ChannelParams& params) {
  params.validate();
  if (classify_regime(params) != SupportRegime::general) return std::nullopt;
  const double s = params.amplitude + params.dark_current;
  const double lam = params.dark_current;
  const double shifted_simple_lo = std::exp(-std::sqrt(2.0 * (std::log(s) - 1.0)));
  const double shifted_lam_lo = s * std::exp(lambert_wm1(-1.0 / s));
  const double shifted_lam_hi = s * std::exp(lambert_w0(-1.0 / s));
  const double shifted_simple_hi = s - 1.0;
  const auto clip = [&](double shifted) {
    return std::min(std::max(shifted - lam, 0.0), params.amplitude);
  };
  LocationBounds b;
  b.lambert = Interval{clip(shifted_lam_lo), clip(shifted_lam_hi)};
  b.simple = Interval{clip(shifted_simple_lo), clip(shifted_simple_hi)};
  return b;
}

/// Support-size upper bound.  Exactly 2 for A + lambda < e; the closed-form
/// floor expression otherwise; no formula on the A + lambda = e boundary.
inline std::optional<int> support_upper_bound(const ChannelParams& params) {
  params.validate();
  const SupportRegime regime = classify_regime(params);
  if (regime == SupportRegime::two_point) return 2;
  if (regime == SupportRegime::boundary) return std::nullopt;
  const double A = params.amplitude;
  const double lam = params.dark_current;
  const double s = A + lam;
  double log_product;  // log of the product inside log(1 + .)
  if (lam == 0.0) {
    log_product = std::log(A) + (2.0 * std::numbers::e * A + 1.0) +
                  std::log(std::log(A) + std::sqrt(2.0 * (std::log(A) - 1.0)));
  } else {
    log_product = std::log(std::numbers::e * s + 2.0 * lam) +
                  2.0 * (std::numbers::e * s + lam) + std::log(std::log(s / lam));
  }
  const double value =
      log_product > 40.0 ? 3.0 + log_product : 3.0 + std::log1p(std::exp(log_product));
  return static_cast<int>(std::floor(value));
}

/// Lower bound on e^{C(A, lambda)}:
/// sqrt(2A/(pi e^3)) (1 + 3/A)^{1 + A/3} e^{-sqrt((l + 1/12)/A)(pi/4 + log(2)/2)}.
inline double lapidoth_exp_capacity_lower(const ChannelParams& params) {
  params.validate();
  const double A = params.amplitude;
  const double lam = params.dark_current;
  const double f1 = std::sqrt(2.0 * A / (std::numbers::pi * std::exp(3.0)));
  const double f2 = std::exp((1.0 + A / 3.0) * std::log1p(3.0 / A));
  const double f3 = std::exp(-std::sqrt((lam + 1.0 / 12.0) / A) *
                             (std::numbers::pi / 4.0 + 0.5 * std::numbers::ln2));
  return f1 * f2 * f3;
}

/// ceil(max{2, e^C}); uses the solved capacity when available and the
/// closed-form e^C lower bound otherwise.
inline int support_lower_bound(const ChannelParams& params,
                               std::optional<double> capacity_nats = std::nullopt) {
  params.validate();
  const double exp_c =
      capacity_nats ? std::exp(*capacity_nats) : lapidoth_exp_capacity_lower(params);
  return static_cast<int>(std::ceil(std::max(2.0, exp_c)));
}

struct BoundsReport {
  SupportRegime regime = SupportRegime::two_point;
  std::optional<Interval> interior_interval_lambert;
  std::optional<Interval> interior_interval_simple;
  std::optional<int> support_upper;
  int support_lower = 2;
  double lapidoth_exp_capacity = 0.0;
};

inline BoundsReport evaluate_bounds(const ChannelParams& params,
                                    std::optional<double> capacity_nats = std::nullopt) {
  BoundsReport r;
  r.regime = classify_regime(params);
  if (const auto loc = interior_location_bounds(params)) {
    r.interior_interval_lambert = loc->lambert;
    r.interior_interval_simple = loc->simple;
  }
  r.support_upper = support_upper_bound(params);
  r.support_lower = support_lower_bound(params, capacity_nats);
  r.lapidoth_exp_capacity = lapidoth_exp_capacity_lower(params);
  return r;
}

}  // namespace poissoncap
