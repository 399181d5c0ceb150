#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "poissoncap/info.hpp"

namespace poissoncap {

/// Posterior of X given each retained output symbol.  Rows run to y_max + 2:
/// the second-derivative series and the cumulant ratio at y_max index one and
/// two rows past the retained alphabet.
class PosteriorTable {
 public:
  int rows() const { return rows_; }
  int atoms() const { return static_cast<int>(points_.size()); }
  double dark_current() const { return dark_current_; }
  double point(int i) const { return points_[static_cast<std::size_t>(i)]; }

  double log_posterior(int y, int i) const {
    return log_post_[static_cast<std::size_t>(y) * points_.size() + static_cast<std::size_t>(i)];
  }
  /// E[X | Y=y]; equals the first conditional cumulant kappa_1(X | Y=y).
  double cond_mean(int y) const { return cond_mean_[static_cast<std::size_t>(y)]; }
  double kappa1(int y) const { return cond_mean(y); }
  /// log(kappa_1(X|Y=y) + dark_current)
  double log_mean_shift(int y) const { return log_mean_shift_[static_cast<std::size_t>(y)]; }
  /// log P_Y(y), y = 0..y_max+2.
  double log_output(int y) const { return log_output_[static_cast<std::size_t>(y)]; }
  double log_factorial(int y) const { return (*log_factorial_table_)(y); }
  /// True for the point mass at 0 with zero dark current (P_Y = delta_0;
  /// rows y >= 1 condition on a null event).
  bool degenerate() const { return degenerate_; }

 private:
  friend PosteriorTable build_posterior(const DiscreteInput&, const ChannelParams&,
                                        const TruncationPolicy&);
  int rows_ = 0;
  double dark_current_ = 0.0;
  bool degenerate_ = false;
  std::vector<double> points_;
  std::vector<double> log_post_;        // row-major [y][i]
  std::vector<double> cond_mean_;       // per row
  std::vector<double> log_mean_shift_;  // per row
  std::vector<double> log_output_;      // per row
  std::shared_ptr<const LogFactorialTable> log_factorial_table_;
};

inline PosteriorTable build_posterior(const DiscreteInput& input, const ChannelParams& params,
                                      const TruncationPolicy& trunc) {
  input.validate(params);
  PosteriorTable t;
  t.rows_ = trunc.y_max + 3;
  t.dark_current_ = params.dark_current;
  t.points_ = input.points;
  t.degenerate_ = input.size() == 1 && input.points[0] + params.dark_current == 0.0;
  const std::size_t n = input.size();
  t.log_post_.resize(static_cast<std::size_t>(t.rows_) * n);
  t.cond_mean_.resize(static_cast<std::size_t>(t.rows_));
  t.log_mean_shift_.resize(static_cast<std::size_t>(t.rows_));
  t.log_output_.resize(static_cast<std::size_t>(t.rows_));
  t.log_factorial_table_ = std::make_shared<const LogFactorialTable>(t.rows_ - 1);
  for (int y = 0; y < t.rows_; ++y) {
    std::span<double> row(t.log_post_.data() + static_cast<std::size_t>(y) * n, n);
    const double norm = detail::fill_log_posterior_row(input, params.dark_current, y, row);
    t.log_output_[static_cast<std::size_t>(y)] = norm - (*t.log_factorial_table_)(y);
    double mean = 0.0;
    if (norm == neg_inf) {
      // null conditioning event (degenerate input); posterior is the atom itself
      row[0] = 0.0;
      mean = input.points[0];
    } else {
      for (std::size_t i = 0; i < n; ++i) mean += std::exp(row[i]) * input.points[i];
    }
    t.cond_mean_[static_cast<std::size_t>(y)] = mean;
    const double shifted = mean + params.dark_current;
    t.log_mean_shift_[static_cast<std::size_t>(y)] = shifted > 0.0 ? std::log(shifted) : neg_inf;
  }
  return t;
}

struct IdentityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;  // lhs - rhs
};

/// E[X|Y=y] via the posterior row against (y+1) P_Y(y+1) / P_Y(y) - lambda.
inline IdentityCheck turing_identity_check(const PosteriorTable& table, int y) {
  if (y < 0 || y > table.rows() - 2)
    throw std::domain_error("turing_identity_check: y outside tabulated range");
  if (table.log_output(y) == neg_inf)
    throw std::domain_error("turing_identity_check: P_Y(y) = 0");
  const double lhs = table.cond_mean(y);
  const double rhs = static_cast<double>(y + 1) *
                         std::exp(table.log_output(y + 1) - table.log_output(y)) -
                     table.dark_current();
  return IdentityCheck{lhs, rhs, lhs - rhs};
}

inline IdentityCheck turing_identity_check(const DiscreteInput& input, const ChannelParams& params,
                                           const TruncationPolicy& trunc, int y) {
  return turing_identity_check(build_posterior(input, params, trunc), y);
}

/// Second-moment product identity (k = 2 case):
/// E[(X+l)^2 | Y=y] = E[X+l | Y=y] * E[X+l | Y=y+1].
inline IdentityCheck product_identity_check(const PosteriorTable& table, int y) {
  if (y < 0 || y > table.rows() - 2)
    throw std::domain_error("product_identity_check: y outside tabulated range");
  if (table.log_output(y) == neg_inf || table.log_output(y + 1) == neg_inf)
    throw std::domain_error("product_identity_check: P_Y(y) = 0");
  const double lam = table.dark_current();
  double lhs = 0.0;  // direct second moment from the posterior row
  for (int i = 0; i < table.atoms(); ++i) {
    const double m = table.point(i) + lam;
    lhs += std::exp(table.log_posterior(y, i)) * m * m;
  }
  const double rhs = (table.cond_mean(y) + lam) * (table.cond_mean(y + 1) + lam);
  return IdentityCheck{lhs, rhs, lhs - rhs};
}

inline IdentityCheck product_identity_check(const DiscreteInput& input, const ChannelParams& params,
                                            const TruncationPolicy& trunc, int y) {
  return product_identity_check(build_posterior(input, params, trunc), y);
}

/// (kappa_1(X|Y=y) + lambda) / (kappa_1(X|Y=y+1) + lambda); lies in (0, 1].
inline double cumulant_ratio(const PosteriorTable& table, int y) {
  if (y < 0 || y > table.rows() - 2)
    throw std::domain_error("cumulant_ratio: y outside tabulated range");
  const double lam = table.dark_current();
  const double den = table.kappa1(y + 1) + lam;
  if (!(den > 0.0))
    throw std::domain_error("cumulant_ratio: degenerate input (point mass at 0, lambda = 0)");
  return (table.kappa1(y) + lam) / den;
}

inline double cumulant_ratio(const DiscreteInput& input, const ChannelParams& params,
                             const TruncationPolicy& trunc, int y) {
  if (y < 0 || y > trunc.y_max) throw std::domain_error("cumulant_ratio: y exceeds y_max");
  return cumulant_ratio(build_posterior(input, params, trunc), y);
}

struct Lemma2Eval {
  double G = 0.0;
  double G_prime = 0.0;
  double G_second = 0.0;
  double i_prime = 0.0;
  double i_second = 0.0;
  double series_tail_bound = 0.0;  // certified remainder of the truncated series
};

namespace detail {

/// Bound on the discarded series mass: tail weight (Chernoff at y_max - 1,
/// so it also covers the y-weighted tail via E[Y 1{Y>m}] = mean P[Y >= m])
/// times the largest per-term log factor, the latter bounded through the
/// monotonicity of y -> kappa_1(y) + lambda.
inline double lemma2_tail_bound(const PosteriorTable& table, const ChannelParams& params,
                                const TruncationPolicy& trunc, double x) {
  const double mean_max = params.amplitude + params.dark_current;
  const double eps = std::min(1.0, std::exp(log_poisson_tail_chernoff(
                                       mean_max, std::max(1, trunc.y_max - 1))));
  const double kappa_tail = table.kappa1(trunc.y_max) + params.dark_current;
  const double log_hi = std::abs(std::log(mean_max));
  const double log_lo = kappa_tail > 0.0 ? std::abs(std::log(kappa_tail)) : 700.0;
  const double per_term = std::max(log_hi, log_lo) + std::abs(std::log(x + params.dark_current)) +
                          mean_max + 1.0;
  return eps * (mean_max + 1.0) * per_term;
}

}  // namespace detail

/// G, G', G'' and i', i'' at x in (0, A], all series truncated at y_max.
///   G(x)   = sum_y P(y|x) log(1 / (y! P_Y(y)))
///   G'(x)  = sum_y P(y|x) log(1 / E[X+l | Y=y])
///   G''(x) = sum_y P(y|x) log((kappa_1(y)+l) / (kappa_1(y+1)+l))
///   i'(x)  = G'(x) + log(x+l)
///   i''(x) = sum_y P(y|x) log((x+l) / E[X+l | Y=y+1]) - i'(x) + 1/(x+l)
inline Lemma2Eval lemma2_functions(const PosteriorTable& table, const ChannelParams& params,
                                   const TruncationPolicy& trunc, double x) {
  if (!(x > 0.0)) throw std::domain_error("lemma2_functions: x must be positive");
  if (!(x <= params.amplitude))
    throw std::domain_error("lemma2_functions: x outside (0, amplitude]");
  if (table.degenerate())
    throw std::domain_error("lemma2_functions: degenerate input law (P_Y = delta_0)");
  const double mean = x + params.dark_current;
  const double log_mean = std::log(mean);
  Lemma2Eval r;
  double cross = 0.0;  // sum_y P(y|x) log((x+l)/(kappa_1(y+1)+l))
  for (int y = 0; y <= trunc.y_max; ++y) {
    const double w = std::exp(y * log_mean - mean - table.log_factorial(y));
    r.G += w * (-table.log_factorial(y) - table.log_output(y));
    r.G_prime += w * (-table.log_mean_shift(y));
    r.G_second += w * (table.log_mean_shift(y) - table.log_mean_shift(y + 1));
    cross += w * (log_mean - table.log_mean_shift(y + 1));
  }
  r.i_prime = r.G_prime + log_mean;
  r.i_second = cross - r.i_prime + 1.0 / mean;
  r.series_tail_bound = detail::lemma2_tail_bound(table, params, trunc, x);
  return r;
}

inline Lemma2Eval lemma2_functions(const DiscreteInput& input, const ChannelParams& params,
                                   const TruncationPolicy& trunc, double x) {
  return lemma2_functions(build_posterior(input, params, trunc), params, trunc, x);
}

/// g(x) = (x + lambda) G''(x) + 1.  Zeros of g on (0, A] drive the
/// support-size diagnostic.
inline double g_function(const PosteriorTable& table, const ChannelParams& params,
                         const TruncationPolicy& trunc, double x) {
  if (!(x > 0.0) || !(x <= params.amplitude))
    throw std::domain_error("g_function: x outside (0, amplitude]");
  if (table.degenerate()) throw std::domain_error("g_function: degenerate input law");
  const double mean = x + params.dark_current;
  const double log_mean = std::log(mean);
  double g_second = 0.0;
  for (int y = 0; y <= trunc.y_max; ++y) {
    const double w = std::exp(y * log_mean - mean - table.log_factorial(y));
    g_second += w * (table.log_mean_shift(y) - table.log_mean_shift(y + 1));
  }
  return mean * g_second + 1.0;
}

inline double g_function(const DiscreteInput& input, const ChannelParams& params,
                         const TruncationPolicy& trunc, double x) {
  return g_function(build_posterior(input, params, trunc), params, trunc, x);
}

struct ZeroCountDiagnostic {
  int sign_changes = 0;
  int chain_bound = 0;  // sign_changes + 3
  bool support_within_bound = false;
  int grid_used = 0;
};

/// Counts strict sign changes of g on a uniform grid over (0, A] with a
/// 1e-12 dead band, and compares |supp| against sign_changes + 3.  Tangential
/// zeros are invisible to sign counting, so a violation triggers grid
/// refinement and is reported rather than enforced.
inline ZeroCountDiagnostic zero_count_diagnostic(const DiscreteInput& input,
                                                 const ChannelParams& params,
                                                 const TruncationPolicy& trunc, int grid_size) {
  if (grid_size < 2) throw std::domain_error("zero_count_diagnostic: grid_size too small");
  const PosteriorTable table = build_posterior(input, params, trunc);
  const int support = static_cast<int>(input.size());
  constexpr double dead_band = 1e-12;
  int grid = grid_size;
  ZeroCountDiagnostic d;
  for (int attempt = 0; attempt < 3; ++attempt) {
    int changes = 0;
    double last_sign = 0.0;
    for (int k = 1; k <= grid; ++k) {
      const double x = params.amplitude * (static_cast<double>(k) / static_cast<double>(grid));
      const double g = g_function(table, params, trunc, x);
      if (std::abs(g) <= dead_band) continue;
      const double s = g > 0.0 ? 1.0 : -1.0;
      if (last_sign != 0.0 && s != last_sign) ++changes;
      last_sign = s;
    }
    d.sign_changes = changes;
    d.chain_bound = changes + 3;
    d.support_within_bound = support <= d.chain_bound;
    d.grid_used = grid;
    if (d.support_within_bound) break;
    grid *= 10;
  }
  return d;
}

/// Randomized check of the moment-ratio bound |E[g(X)]/E[f(X)]| <= max |g/f|
/// for discrete laws on [lo, hi], with attainment by a point mass at the
/// maximizer.  f must be positive on the interval.
inline bool moment_ratio_property(const std::function<double(double)>& f,
                                  const std::function<double(double)>& g, double lo, double hi,
                                  int trials, unsigned seed = 20240901u) {
  if (!(lo < hi)) throw std::domain_error("moment_ratio_property: empty interval");
  constexpr int grid_n = 1000;
  std::vector<double> grid_x(grid_n + 1), grid_ratio(grid_n + 1);
  double grid_max = 0.0;
  double arg_max = lo;
  for (int k = 0; k <= grid_n; ++k) {
    const double x = lo + (hi - lo) * static_cast<double>(k) / grid_n;
    const double fx = f(x);
    if (!(fx > 0.0)) throw std::domain_error("moment_ratio_property: f must be positive");
    grid_x[static_cast<std::size_t>(k)] = x;
    const double r = std::abs(g(x) / fx);
    grid_ratio[static_cast<std::size_t>(k)] = r;
    if (r > grid_max) {
      grid_max = r;
      arg_max = x;
    }
  }

  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> ux(lo, hi);
  std::uniform_real_distribution<double> up(0.01, 1.0);
  std::uniform_int_distribution<int> un(1, 6);
  for (int t = 0; t < trials; ++t) {
    const int n = un(rng);
    std::vector<double> xs(static_cast<std::size_t>(n)), ps(static_cast<std::size_t>(n));
    double psum = 0.0;
    for (int i = 0; i < n; ++i) {
      xs[static_cast<std::size_t>(i)] = ux(rng);
      ps[static_cast<std::size_t>(i)] = up(rng);
      psum += ps[static_cast<std::size_t>(i)];
    }
    double ef = 0.0, eg = 0.0, atom_max = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = xs[static_cast<std::size_t>(i)];
      const double p = ps[static_cast<std::size_t>(i)] / psum;
      const double fx = f(x);
      if (!(fx > 0.0)) throw std::domain_error("moment_ratio_property: f must be positive");
      ef += p * fx;
      eg += p * g(x);
      atom_max = std::max(atom_max, std::abs(g(x) / fx));
    }
    const double bound = std::max(grid_max, atom_max);
    if (!(std::abs(eg / ef) <= bound + 1e-12)) return false;
  }
  // attainment: the point mass at the grid maximizer meets the bound exactly
  const double attained = std::abs(g(arg_max) / f(arg_max));
  return std::abs(attained - grid_max) <= 1e-12 * std::max(1.0, grid_max);
}

}  // namespace poissoncap
