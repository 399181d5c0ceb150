#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace poissoncap {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();
inline constexpr double pos_inf = std::numeric_limits<double>::infinity();

/// log(sum_i exp(v[i])) with max-shift; tolerates -inf entries.
inline double log_sum_exp(std::span<const double> v) {
  double m = neg_inf;
  for (double x : v) m = std::max(m, x);
  if (m == neg_inf || !std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline double log_sum_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (a == neg_inf) return neg_inf;
  return a + std::log1p(std::exp(b - a));
}

/// Cached log(y!) = lgamma(y+1) for y = 0..y_max.  std::lgamma keeps the
/// relative error well under 1e-13 on this range.
class LogFactorialTable {
 public:
  explicit LogFactorialTable(int y_max) : table_(static_cast<std::size_t>(y_max) + 1) {
    for (int y = 0; y <= y_max; ++y)
      table_[static_cast<std::size_t>(y)] = std::lgamma(static_cast<double>(y) + 1.0);
  }
  double operator()(int y) const { return table_[static_cast<std::size_t>(y)]; }
  int y_max() const { return static_cast<int>(table_.size()) - 1; }

 private:
  std::vector<double> table_;
};

}  // namespace poissoncap
