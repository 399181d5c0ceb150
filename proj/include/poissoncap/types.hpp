#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "poissoncap/numerics.hpp"

namespace poissoncap {

/// Channel instance: Y | X=x ~ Poisson(x + dark_current), 0 <= x <= amplitude.
struct ChannelParams {
  double amplitude = 1.0;     // A
  double dark_current = 0.0;  // lambda

  void validate() const {
    if (!(amplitude > 0.0) || !std::isfinite(amplitude))
      throw std::domain_error("ChannelParams: amplitude must be positive and finite");
    if (!(dark_current >= 0.0) || !std::isfinite(dark_current))
      throw std::domain_error("ChannelParams: dark_current must be nonnegative and finite");
  }

  double mean_at(double x) const { return x + dark_current; }
};

/// Finite output alphabet {0, ..., y_max} whose discarded upper tail carries
/// at most tail_epsilon of the Poisson(amplitude + dark_current) mass.
struct TruncationPolicy {
  double tail_epsilon = 1e-12;
  int y_max = 1;
};

/// Discrete input law: strictly increasing support points in [0, A] with
/// positive probabilities summing to one.
struct DiscreteInput {
  std::vector<double> points;
  std::vector<double> probs;

  std::size_t size() const { return points.size(); }

  void validate(const ChannelParams& params, double prob_sum_tol = 1e-12) const {
    if (points.empty()) throw std::domain_error("DiscreteInput: empty support");
    if (points.size() != probs.size())
      throw std::domain_error("DiscreteInput: points/probs size mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!(probs[i] > 0.0))
        throw std::domain_error("DiscreteInput: probabilities must be positive");
      if (!(points[i] >= 0.0) || !(points[i] <= params.amplitude))
        throw std::domain_error("DiscreteInput: point outside [0, amplitude]");
      if (i > 0 && !(points[i] > points[i - 1]))
        throw std::domain_error("DiscreteInput: points must be strictly increasing");
      sum += probs[i];
    }
    if (std::abs(sum - 1.0) > prob_sum_tol)
      throw std::domain_error("DiscreteInput: probabilities must sum to 1");
  }
};

/// Truncated output law, log domain, indexed by y = 0..y_max.
struct OutputPmf {
  std::vector<double> log_probs;
  double tail_epsilon = 0.0;

  int y_max() const { return static_cast<int>(log_probs.size()) - 1; }
};

}  // namespace poissoncap
