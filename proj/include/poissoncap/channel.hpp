#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "poissoncap/types.hpp"

namespace poissoncap {

/// log P(Y=y | X=x) in nats.  The x + lambda = 0 channel degenerates to the
/// point mass at y = 0 (0^0 = 1 convention), reported as 0 / -inf.
inline double log_pmf(int y, double x, const ChannelParams& params) {
  if (y < 0) throw std::domain_error("log_pmf: y must be nonnegative");
  if (!(x >= 0.0) || !(x <= params.amplitude))
    throw std::domain_error("log_pmf: x outside [0, amplitude]");
  const double mean = x + params.dark_current;
  if (mean == 0.0) return y == 0 ? 0.0 : neg_inf;
  return static_cast<double>(y) * std::log(mean) - mean -
         std::lgamma(static_cast<double>(y) + 1.0);
}

namespace detail {

/// log of the Chernoff bound on P[Poisson(mean) >= m]; valid and decreasing
/// in m for m >= mean.
inline double log_poisson_tail_chernoff(double mean, int m) {
  return -mean + static_cast<double>(m) * (1.0 + std::log(mean) - std::log(static_cast<double>(m)));
}

}  // namespace detail

/// P[Poisson(mean) > m] by direct summation.  Terms decay geometrically past
/// the mode, so the stopping rule certifies the partial sum to ~1e-18 relative.
inline double poisson_tail_direct(double mean, int m) {
  if (!(mean > 0.0)) return 0.0;
  double log_term = static_cast<double>(m + 1) * std::log(mean) - mean -
                    std::lgamma(static_cast<double>(m) + 2.0);
  double term = std::exp(log_term);
  double tail = 0.0;
  for (int y = m + 1;; ++y) {
    tail += term;
    term *= mean / static_cast<double>(y + 1);
    if (static_cast<double>(y) > mean && term <= tail * 1e-18 + 1e-320) break;
  }
  return tail;
}

/// Smallest y_max certified by the Chernoff bound to retain all but
/// tail_epsilon of the Poisson(A + lambda) mass, then re-checked by one
/// direct-summation pass.
inline TruncationPolicy choose_truncation(const ChannelParams& params, double tail_epsilon) {
  params.validate();
  if (!(tail_epsilon > 0.0) || !(tail_epsilon < 1.0))
    throw std::domain_error("choose_truncation: tail_epsilon must lie in (0, 1)");
  const double mean = params.amplitude + params.dark_current;
  const double log_eps = std::log(tail_epsilon);
  int m = std::max(1, static_cast<int>(std::ceil(mean)));
  while (detail::log_poisson_tail_chernoff(mean, m) > log_eps) ++m;
  while (poisson_tail_direct(mean, m) > tail_epsilon) ++m;
  return TruncationPolicy{tail_epsilon, m};
}

/// P(y | x) rows on the truncated alphabet with cached log-factorials.
class RowEvaluator {
 public:
  RowEvaluator(const ChannelParams& params, int y_cap)
      : params_(params), log_factorial_(y_cap) {}

  const ChannelParams& params() const { return params_; }
  int y_cap() const { return log_factorial_.y_max(); }
  double log_factorial(int y) const { return log_factorial_(y); }

  /// Fills out[y] = log P(y | x) for y = 0..out.size()-1 (at most y_cap+1 rows).
  void fill_log_row(double x, std::span<double> out) const {
    const double mean = x + params_.dark_current;
    const int n = static_cast<int>(out.size());
    if (mean == 0.0) {
      if (n > 0) out[0] = 0.0;
      for (int y = 1; y < n; ++y) out[static_cast<std::size_t>(y)] = neg_inf;
      return;
    }
    const double log_mean = std::log(mean);
    for (int y = 0; y < n; ++y)
      out[static_cast<std::size_t>(y)] =
          static_cast<double>(y) * log_mean - mean - log_factorial_(y);
  }

 private:
  ChannelParams params_;
  LogFactorialTable log_factorial_;
};

/// Mixture output law P_Y(y) = sum_i p_i P(y | x_i), y = 0..y_max, log domain.
inline OutputPmf output_pmf(const DiscreteInput& input, const ChannelParams& params,
                            const TruncationPolicy& trunc) {
  input.validate(params);
  const std::size_t n = input.size();
  std::vector<double> log_p(n), log_mean(n), mean(n);
  for (std::size_t i = 0; i < n; ++i) {
    mean[i] = input.points[i] + params.dark_current;
    log_mean[i] = mean[i] > 0.0 ? std::log(mean[i]) : neg_inf;
    log_p[i] = std::log(input.probs[i]);
  }
  OutputPmf out;
  out.tail_epsilon = trunc.tail_epsilon;
  out.log_probs.resize(static_cast<std::size_t>(trunc.y_max) + 1);
  const LogFactorialTable lg(trunc.y_max);
  std::vector<double> terms(n);
  for (int y = 0; y <= trunc.y_max; ++y) {
    for (std::size_t i = 0; i < n; ++i) {
      const double yl = (y == 0) ? 0.0 : static_cast<double>(y) * log_mean[i];
      terms[i] = log_p[i] + yl - mean[i];
    }
    out.log_probs[static_cast<std::size_t>(y)] = log_sum_exp(terms) - lg(y);
  }
  return out;
}

namespace detail {

/// Posterior row log P(X = x_i | Y = y) over the input atoms, written to out.
/// Returns the log-normalizer log sum_i p_i (x_i+l)^y e^{-(x_i+l)}, which
/// equals log(y! P_Y(y)).
inline double fill_log_posterior_row(const DiscreteInput& input, double dark_current, int y,
                                     std::span<double> out) {
  const std::size_t n = input.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double mean = input.points[i] + dark_current;
    const double yl = (y == 0) ? 0.0 : (mean > 0.0 ? static_cast<double>(y) * std::log(mean) : neg_inf);
    out[i] = std::log(input.probs[i]) + yl - mean;
  }
  const double norm = log_sum_exp(out.first(n));
  if (norm == neg_inf) return norm;  // no conditioning event: P_Y(y) = 0
  for (std::size_t i = 0; i < n; ++i) out[i] -= norm;
  return norm;
}

}  // namespace detail

}  // namespace poissoncap
