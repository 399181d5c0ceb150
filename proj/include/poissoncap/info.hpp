#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "poissoncap/channel.hpp"

namespace poissoncap {

/// Relative entropy D(p || q) in nats between log-domain pmfs on a shared
/// alphabet.  Returns +inf when p charges a symbol with q = 0 (support
/// violation sentinel); throws only on mismatched alphabets.
inline double relative_entropy(std::span<const double> log_p, std::span<const double> log_q) {
  if (log_p.size() != log_q.size())
    throw std::domain_error("relative_entropy: alphabet size mismatch");
  double kl = 0.0;
  for (std::size_t y = 0; y < log_p.size(); ++y) {
    if (log_p[y] == neg_inf) continue;
    if (log_q[y] == neg_inf) return pos_inf;
    kl += std::exp(log_p[y]) * (log_p[y] - log_q[y]);
  }
  return kl;
}

inline double relative_entropy(const OutputPmf& p, const OutputPmf& q) {
  return relative_entropy(std::span<const double>(p.log_probs),
                          std::span<const double>(q.log_probs));
}

/// i(x; P) = D(P_{Y|X=x} || P_Y) on the retained alphabet.
inline double info_density(double x, const OutputPmf& output, const ChannelParams& params) {
  if (!(x >= 0.0) || !(x <= params.amplitude))
    throw std::domain_error("info_density: x outside [0, amplitude]");
  const double mean = x + params.dark_current;
  const int y_max = output.y_max();
  if (mean == 0.0) return -output.log_probs[0];
  const double log_mean = std::log(mean);
  double kl = 0.0;
  for (int y = 0; y <= y_max; ++y) {
    const double lr = static_cast<double>(y) * log_mean - mean -
                      std::lgamma(static_cast<double>(y) + 1.0);
    const double lq = output.log_probs[static_cast<std::size_t>(y)];
    if (lq == neg_inf) return pos_inf;
    kl += std::exp(lr) * (lr - lq);
  }
  return kl;
}

inline double info_density(double x, const DiscreteInput& input, const ChannelParams& params,
                           const TruncationPolicy& trunc) {
  return info_density(x, output_pmf(input, params, trunc), params);
}

/// I(X; Y) = sum_i p_i i(x_i; P) on the retained alphabet.
inline double mutual_information(const DiscreteInput& input, const ChannelParams& params,
                                 const TruncationPolicy& trunc) {
  const OutputPmf out = output_pmf(input, params, trunc);
  double mi = 0.0;
  for (std::size_t i = 0; i < input.size(); ++i)
    mi += input.probs[i] * info_density(input.points[i], out, params);
  return mi;
}

struct ChainRuleCheck {
  double lhs = 0.0;  // D(P_X || Q_X)
  double rhs = 0.0;  // D(P_Y || Q_Y) + D(P_{X|Y} || Q_{X|Y} | P_Y)
  double gap = 0.0;
};

/// Both sides of the divergence chain rule for P_X, Q_X pushed through the
/// channel, evaluated on the truncated alphabet.  supp(P) must be contained
/// in supp(Q); otherwise both sides are the +inf sentinel.
inline ChainRuleCheck kl_chain_rule_check(const DiscreteInput& input_p,
                                          const DiscreteInput& input_q,
                                          const ChannelParams& params,
                                          const TruncationPolicy& trunc) {
  input_p.validate(params);
  input_q.validate(params);
  const double match_tol = 1e-12 * std::max(1.0, params.amplitude);

  // Express P on Q's support grid (zero probability where P has no atom).
  std::vector<double> p_on_q(input_q.size(), 0.0);
  for (std::size_t i = 0; i < input_p.size(); ++i) {
    bool found = false;
    for (std::size_t j = 0; j < input_q.size(); ++j) {
      if (std::abs(input_p.points[i] - input_q.points[j]) <= match_tol) {
        p_on_q[j] = input_p.probs[i];
        found = true;
        break;
      }
    }
    if (!found) return ChainRuleCheck{pos_inf, pos_inf, 0.0};
  }

  double lhs = 0.0;
  for (std::size_t j = 0; j < input_q.size(); ++j) {
    if (p_on_q[j] > 0.0) lhs += p_on_q[j] * std::log(p_on_q[j] / input_q.probs[j]);
  }

  const OutputPmf out_p = output_pmf(input_p, params, trunc);
  const OutputPmf out_q = output_pmf(input_q, params, trunc);
  double rhs = relative_entropy(out_p, out_q);

  // Conditional divergence between the posteriors, weighted by P_Y.
  const std::size_t n = input_q.size();
  std::vector<double> lw_p(n), lw_q(n);
  DiscreteInput p_grid;  // P on Q's grid, zero atoms dropped for the row fill
  p_grid.points = input_q.points;
  p_grid.probs = p_on_q;
  for (int y = 0; y <= trunc.y_max; ++y) {
    const double log_py = out_p.log_probs[static_cast<std::size_t>(y)];
    if (log_py == neg_inf) continue;
    // posterior weights under P: proportional to p_i (x_i+l)^y e^{-(x_i+l)}
    for (std::size_t j = 0; j < n; ++j) {
      const double mean = input_q.points[j] + params.dark_current;
      const double yl = (y == 0) ? 0.0 : (mean > 0.0 ? y * std::log(mean) : neg_inf);
      lw_p[j] = p_on_q[j] > 0.0 ? std::log(p_on_q[j]) + yl - mean : neg_inf;
      lw_q[j] = std::log(input_q.probs[j]) + yl - mean;
    }
    const double norm_p = log_sum_exp(lw_p);
    const double norm_q = log_sum_exp(lw_q);
    if (norm_p == neg_inf) continue;
    double kl_y = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (lw_p[j] == neg_inf) continue;
      kl_y += std::exp(lw_p[j] - norm_p) * ((lw_p[j] - norm_p) - (lw_q[j] - norm_q));
    }
    rhs += std::exp(log_py) * kl_y;
  }
  return ChainRuleCheck{lhs, rhs, lhs - rhs};
}

/// D(delta_{x*} || P_{X|Y} | P_{Y|X}(.|x*)) for a support point x* of input:
/// sum_y P(y|x*) log(1 / P_{X|Y}(x*|y)).
inline double posterior_mismatch_divergence(double x_star, const DiscreteInput& input,
                                            const ChannelParams& params,
                                            const TruncationPolicy& trunc) {
  input.validate(params);
  const double match_tol = 1e-12 * std::max(1.0, params.amplitude);
  std::size_t idx = input.size();
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (std::abs(input.points[i] - x_star) <= match_tol) {
      idx = i;
      break;
    }
  }
  if (idx == input.size())
    throw std::domain_error("posterior_mismatch_divergence: x_star is not a support point");

  std::vector<double> row(input.size());
  const double mean = input.points[idx] + params.dark_current;
  const double log_mean = mean > 0.0 ? std::log(mean) : neg_inf;
  double div = 0.0;
  for (int y = 0; y <= trunc.y_max; ++y) {
    const double lr = (mean == 0.0)
                          ? (y == 0 ? 0.0 : neg_inf)
                          : y * log_mean - mean - std::lgamma(static_cast<double>(y) + 1.0);
    if (lr == neg_inf) break;  // zero-mean row: only y = 0 carries mass
    detail::fill_log_posterior_row(input, params.dark_current, y, row);
    div += std::exp(lr) * (-row[idx]);
  }
  return div;
}

struct SupportIdentity {
  double n_predicted = 0.0;
  int n_actual = 0;
  double gap = 0.0;
};

/// The exact support-size identity
///   N = e^C / ( (1/N) sum_{x*} e^{-D(delta_{x*} || P_{X|Y} | P_{Y|X}(.|x*))} )
/// evaluated at a solved input law with capacity_nats = C.
inline SupportIdentity exact_support_identity(const DiscreteInput& input, double capacity_nats,
                                              const ChannelParams& params,
                                              const TruncationPolicy& trunc) {
  input.validate(params);
  const int n = static_cast<int>(input.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < input.size(); ++i)
    sum += std::exp(-posterior_mismatch_divergence(input.points[i], input, params, trunc));
  const double n_predicted = std::exp(capacity_nats) / (sum / n);
  return SupportIdentity{n_predicted, n, std::abs(n_predicted - n)};
}

}  // namespace poissoncap
