#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "poissoncap/posterior.hpp"

namespace poissoncap {

struct SolverConfig {
  double kkt_tolerance = 1e-6;     // nats
  double prob_tolerance = 1e-8;    // Blahut-Arimoto stationarity gap, nats
  int grid_points = 10000;         // KKT scan resolution
  int max_outer_iters = 200;
  double merge_distance = 1e-4;    // fraction of amplitude
  double prune_probability = 1e-9;
  double location_step = 0.1;      // Newton trust region, fraction of amplitude
  double tail_epsilon = 1e-12;
  int max_ba_iters = 50000;
  int max_location_sweeps = 60;

  void validate() const {
    if (!(kkt_tolerance > 0.0)) throw std::domain_error("SolverConfig: kkt_tolerance must be > 0");
    if (grid_points < 1000) throw std::domain_error("SolverConfig: grid_points must be >= 1000");
    if (!(merge_distance > 0.0) || merge_distance > 0.01)
      throw std::domain_error("SolverConfig: merge_distance must lie in (0, 0.01]");
    if (!(prune_probability >= 0.0) || prune_probability > 1e-6)
      throw std::domain_error("SolverConfig: prune_probability must lie in [0, 1e-6]");
    if (!(prob_tolerance > 0.0)) throw std::domain_error("SolverConfig: prob_tolerance must be > 0");
    if (!(location_step > 0.0)) throw std::domain_error("SolverConfig: location_step must be > 0");
    if (!(tail_epsilon > 0.0) || !(tail_epsilon < 1.0))
      throw std::domain_error("SolverConfig: tail_epsilon must lie in (0, 1)");
    if (max_outer_iters < 1) throw std::domain_error("SolverConfig: max_outer_iters must be >= 1");
  }
};

struct CapacitySolution {
  DiscreteInput input;
  double capacity_nats = 0.0;
  double kkt_gap = 0.0;
  int iterations = 0;  // outer iterations used
  int y_max = 0;
  bool converged = false;
  double ascent_violation = 0.0;  // most negative per-phase change of certified I
};

struct ProbOptResult {
  std::vector<double> probs;
  double mutual_info = 0.0;
  double ba_gap = 0.0;  // max_i i(x_i; P) - I(P)
  int iterations = 0;
  bool converged = false;
};

struct KktScanResult {
  double max_gap = 0.0;
  double argmax_x = 0.0;
};

struct TwoPointOracle {
  double q_star = 0.0;
  double capacity = 0.0;
};

namespace detail {

/// log P_Y on the truncated alphabet from atoms, with a cached factorial table.
inline void output_log_pmf_cached(std::span<const double> points, std::span<const double> probs,
                                  const ChannelParams& params, int y_max,
                                  const LogFactorialTable& lg, std::vector<double>& out) {
  const std::size_t n = points.size();
  out.assign(static_cast<std::size_t>(y_max) + 1, neg_inf);
  std::vector<double> log_p(n), log_mean(n), mean(n), terms(n);
  for (std::size_t i = 0; i < n; ++i) {
    mean[i] = points[i] + params.dark_current;
    log_mean[i] = mean[i] > 0.0 ? std::log(mean[i]) : neg_inf;
    log_p[i] = std::log(probs[i]);
  }
  for (int y = 0; y <= y_max; ++y) {
    for (std::size_t i = 0; i < n; ++i) {
      const double yl = (y == 0) ? 0.0 : static_cast<double>(y) * log_mean[i];
      terms[i] = log_p[i] + yl - mean[i];
    }
    out[static_cast<std::size_t>(y)] = log_sum_exp(terms) - lg(y);
  }
}

/// i(x; P) against a precomputed log P_Y, with a cached factorial table.
inline double info_density_cached(double x, std::span<const double> log_out,
                                  const ChannelParams& params, const LogFactorialTable& lg) {
  const double mean = x + params.dark_current;
  if (mean == 0.0) return -log_out[0];
  const double log_mean = std::log(mean);
  double kl = 0.0;
  const int y_max = static_cast<int>(log_out.size()) - 1;
  for (int y = 0; y <= y_max; ++y) {
    const double lr = static_cast<double>(y) * log_mean - mean - lg(y);
    kl += std::exp(lr) * (lr - log_out[static_cast<std::size_t>(y)]);
  }
  return kl;
}

inline double mutual_info_cached(std::span<const double> points, std::span<const double> probs,
                                 const ChannelParams& params, int y_max,
                                 const LogFactorialTable& lg, std::vector<double>& scratch) {
  output_log_pmf_cached(points, probs, params, y_max, lg, scratch);
  double mi = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    mi += probs[i] * info_density_cached(points[i], scratch, params, lg);
  return mi;
}

}  // namespace detail

/// Blahut-Arimoto fixed point for the probabilities on a fixed support:
/// p_i <- p_i exp(i(x_i; P)) / sum_j p_j exp(i(x_j; P)), with a safeguarded
/// over-relaxed exponent (same fixed points; any candidate that fails to
/// increase I falls back to the plain, provably monotone step).
inline ProbOptResult optimize_probabilities(const std::vector<double>& points,
                                            const ChannelParams& params,
                                            const TruncationPolicy& trunc, double tol,
                                            std::vector<double> initial_probs = {},
                                            int max_iters = 200000) {
  const std::size_t n = points.size();
  if (n == 0) throw std::domain_error("optimize_probabilities: empty support");
  if (initial_probs.empty()) initial_probs.assign(n, 1.0 / static_cast<double>(n));
  if (initial_probs.size() != n)
    throw std::domain_error("optimize_probabilities: initial_probs size mismatch");
  for (double p : initial_probs)
    if (!(p > 0.0)) throw std::domain_error("optimize_probabilities: probabilities must be > 0");

  const LogFactorialTable lg(trunc.y_max);
  const int rows = trunc.y_max + 1;
  std::vector<double> row_matrix(n * static_cast<std::size_t>(rows));
  for (std::size_t i = 0; i < n; ++i) {
    const double mean = points[i] + params.dark_current;
    const double log_mean = mean > 0.0 ? std::log(mean) : neg_inf;
    for (int y = 0; y < rows; ++y) {
      const double yl = (y == 0) ? 0.0 : static_cast<double>(y) * log_mean;
      row_matrix[i * static_cast<std::size_t>(rows) + static_cast<std::size_t>(y)] =
          yl - mean - lg(y);
    }
  }

  std::vector<double> lp(n), probs = initial_probs, lq(static_cast<std::size_t>(rows));
  std::vector<double> dens(n), terms(n);
  for (std::size_t i = 0; i < n; ++i) lp[i] = std::log(probs[i]);

  const auto evaluate = [&](const std::vector<double>& lp_cur, std::vector<double>& dens_out) {
    for (int y = 0; y < rows; ++y) {
      for (std::size_t i = 0; i < n; ++i)
        terms[i] = lp_cur[i] + row_matrix[i * static_cast<std::size_t>(rows) + static_cast<std::size_t>(y)];
      lq[static_cast<std::size_t>(y)] = log_sum_exp(terms);
    }
    double mi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double kl = 0.0;
      for (int y = 0; y < rows; ++y) {
        const double lr = row_matrix[i * static_cast<std::size_t>(rows) + static_cast<std::size_t>(y)];
        if (lr == neg_inf) continue;
        kl += std::exp(lr) * (lr - lq[static_cast<std::size_t>(y)]);
      }
      dens_out[i] = kl;
      mi += std::exp(lp_cur[i]) * kl;
    }
    return mi;
  };

  const auto renormalize = [&](std::vector<double>& lp_cur) {
    const double z = log_sum_exp(lp_cur);
    for (double& v : lp_cur) v -= z;
  };

  double mi = evaluate(lp, dens);
  double theta = 1.0;
  double mi_checkpoint = mi;
  std::vector<double> lp_cand(n), dens_cand(n);
  int it = 0;
  for (; it < max_iters; ++it) {
    const double gap = *std::max_element(dens.begin(), dens.end()) - mi;
    if (gap <= tol) {
      for (std::size_t i = 0; i < n; ++i) probs[i] = std::exp(lp[i]);
      const double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
      for (double& p : probs) p /= sum;
      return ProbOptResult{probs, mi, gap, it, true};
    }
    if ((it & 511) == 511) {  // I stopped moving at double precision: fixed point reached
      if (mi - mi_checkpoint < 1e-15 * (1.0 + std::abs(mi))) break;
      mi_checkpoint = mi;
    }
    for (std::size_t i = 0; i < n; ++i) lp_cand[i] = lp[i] + theta * dens[i];
    renormalize(lp_cand);
    const double mi_cand = evaluate(lp_cand, dens_cand);
    if (theta > 1.0 && mi_cand < mi - 1e-15) {
      theta = 1.0;  // safeguard: retake as a plain step
      for (std::size_t i = 0; i < n; ++i) lp_cand[i] = lp[i] + dens[i];
      renormalize(lp_cand);
      mi = evaluate(lp_cand, dens_cand);
    } else {
      mi = mi_cand;
      theta = std::min(theta * 1.3, 12.0);
    }
    lp.swap(lp_cand);
    dens.swap(dens_cand);
  }
  for (std::size_t i = 0; i < n; ++i) probs[i] = std::exp(lp[i]);
  const double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
  for (double& p : probs) p /= sum;
  const double gap = *std::max_element(dens.begin(), dens.end()) - mi;
  return ProbOptResult{probs, mi, gap, it, false};
}

/// Coordinate ascent on interior support locations.  Guarded Newton steps on
/// i'(x) (second derivative from the cumulant-ratio series), backtracking on
/// the exact mutual information, endpoints pinned.
inline DiscreteInput optimize_locations(const DiscreteInput& input, const ChannelParams& params,
                                        const TruncationPolicy& trunc,
                                        const SolverConfig& config) {
  input.validate(params);
  DiscreteInput cur = input;
  const std::size_t n = cur.size();
  if (n <= 2) return cur;

  const LogFactorialTable lg(trunc.y_max);
  std::vector<double> scratch;
  double mi_cur = detail::mutual_info_cached(cur.points, cur.probs, params, trunc.y_max, lg, scratch);
  const double amp = params.amplitude;
  const double max_step = config.location_step * amp;

  for (int sweep = 0; sweep < config.max_location_sweeps; ++sweep) {
    double max_move = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      // fresh derivatives for every proposal; stale tables make the
      // coordinate steps dither around the joint optimum
      const PosteriorTable table = build_posterior(cur, params, trunc);
      const Lemma2Eval d = lemma2_functions(table, params, trunc, cur.points[i]);
      if (std::abs(d.i_prime) < 1e-15) continue;
      const bool newton = d.i_second < -1e-14;
      double step = newton ? -d.i_prime / d.i_second
                           : (d.i_prime > 0.0 ? 0.05 * amp : -0.05 * amp);
      step = std::clamp(step, -max_step, max_step);
      const double x_old = cur.points[i];
      const double lo = cur.points[i - 1] + 1e-13 * amp;
      const double hi = cur.points[i + 1] - 1e-13 * amp;
      bool accepted = false;
      double alpha = 1.0;
      for (int bt = 0; bt < 14; ++bt, alpha *= 0.5) {
        const double x_new = std::clamp(x_old + alpha * step, lo, hi);
        if (x_new == x_old) continue;
        cur.points[i] = x_new;
        const double mi_new =
            detail::mutual_info_cached(cur.points, cur.probs, params, trunc.y_max, lg, scratch);
        // Newton steps may tie (flat at fp scale); fallback steps must gain
        const bool ok = newton ? mi_new >= mi_cur : mi_new > mi_cur + 1e-15;
        if (ok) {
          mi_cur = std::max(mi_cur, mi_new);
          max_move = std::max(max_move, std::abs(x_new - x_old));
          accepted = true;
          break;
        }
      }
      if (!accepted) cur.points[i] = x_old;
    }
    if (max_move <= 1e-11 * amp) break;
  }
  return cur;
}

/// Largest KKT gap max_x i(x; P) - I(P) over a uniform grid on [0, A] plus
/// local refinement around the top three grid maxima.  Ties within 1e-12
/// resolve toward the smaller x.
inline KktScanResult kkt_scan(const DiscreteInput& input, const ChannelParams& params,
                              const TruncationPolicy& trunc, int grid_points) {
  input.validate(params);
  if (grid_points < 2) throw std::domain_error("kkt_scan: grid_points must be >= 2");
  const LogFactorialTable lg(trunc.y_max);
  std::vector<double> log_out;
  detail::output_log_pmf_cached(input.points, input.probs, params, trunc.y_max, lg, log_out);
  double mi = 0.0;
  for (std::size_t i = 0; i < input.size(); ++i)
    mi += input.probs[i] * detail::info_density_cached(input.points[i], log_out, params, lg);

  const double amp = params.amplitude;
  const int g = grid_points;
  std::vector<double> gap(static_cast<std::size_t>(g));
  for (int j = 0; j < g; ++j) {
    const double x = amp * (static_cast<double>(j) / static_cast<double>(g - 1));
    gap[static_cast<std::size_t>(j)] =
        detail::info_density_cached(x, log_out, params, lg) - mi;
  }

  double best_val = neg_inf, best_x = 0.0;
  const auto consider = [&](double val, double x) {
    if (val - best_val > 1e-12 || (std::abs(val - best_val) <= 1e-12 && x < best_x)) {
      best_val = val;
      best_x = x;
    }
  };
  // top-3 local maxima of the coarse grid
  struct Peak {
    double val;
    int idx;
  };
  std::vector<Peak> peaks;
  for (int j = 0; j < g; ++j) {
    const double v = gap[static_cast<std::size_t>(j)];
    const bool up = j == 0 || v >= gap[static_cast<std::size_t>(j - 1)];
    const bool down = j == g - 1 || v >= gap[static_cast<std::size_t>(j + 1)];
    if (up && down) peaks.push_back({v, j});
    consider(v, amp * (static_cast<double>(j) / static_cast<double>(g - 1)));
  }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    return a.val > b.val || (a.val == b.val && a.idx < b.idx);
  });
  if (peaks.size() > 3) peaks.resize(3);
  constexpr int refine = 100;
  for (const Peak& p : peaks) {
    const double x_lo = amp * (static_cast<double>(std::max(p.idx - 1, 0)) / (g - 1));
    const double x_hi = amp * (static_cast<double>(std::min(p.idx + 1, g - 1)) / (g - 1));
    for (int k = 0; k <= refine; ++k) {
      const double x =
          std::min(x_lo + (x_hi - x_lo) * (static_cast<double>(k) / refine), amp);
      consider(detail::info_density_cached(x, log_out, params, lg) - mi, x);
    }
  }
  return KktScanResult{best_val, best_x};
}

/// Brute-force capacity of two-point laws {0, A} over a q-grid (test oracle).
inline TwoPointOracle two_point_capacity_oracle(const ChannelParams& params,
                                                double q_step = 1e-6) {
  params.validate();
  if (!(q_step > 0.0) || q_step > 1e-4)
    throw std::domain_error("two_point_capacity_oracle: q_step must lie in (0, 1e-4]");
  const TruncationPolicy trunc = choose_truncation(params, 1e-12);
  const LogFactorialTable lg(trunc.y_max);
  std::vector<double> scratch;
  const std::vector<double> points{0.0, params.amplitude};
  const long long steps = static_cast<long long>(std::llround(1.0 / q_step));
  double best_q = 0.0, best_i = 0.0;
  std::vector<double> probs(2);
  for (long long k = 1; k < steps; ++k) {
    const double q = static_cast<double>(k) * q_step;
    probs[0] = 1.0 - q;
    probs[1] = q;
    const double mi =
        detail::mutual_info_cached(points, probs, params, trunc.y_max, lg, scratch);
    if (mi > best_i) {
      best_i = mi;
      best_q = q;
    }
  }
  return TwoPointOracle{best_q, best_i};
}

namespace detail {

struct SolverState {
  std::vector<double> points;
  std::vector<double> probs;
  double mutual_info = 0.0;
};

inline DiscreteInput to_input(const SolverState& s) {
  return DiscreteInput{s.points, s.probs};
}

}  // namespace detail

/// Smith-style alternating optimization: starting from {0, A}, alternate the
/// Blahut-Arimoto probability fixed point with Newton location ascent, insert
/// a support point at the KKT-gap argmax whenever the scan exceeds tolerance,
/// merge and prune with a certified non-decrease of I, and finish with a
/// certified cleanup of low-mass atoms.
inline CapacitySolution solve(const ChannelParams& params, const SolverConfig& config = {}) {
  params.validate();
  config.validate();
  const TruncationPolicy trunc = choose_truncation(params, config.tail_epsilon);
  const double amp = params.amplitude;
  const LogFactorialTable lg(trunc.y_max);
  std::vector<double> scratch;

  detail::SolverState state;
  state.points = {0.0, amp};
  state.probs = {0.5, 0.5};

  // Committed-state ascent bookkeeping; trial states that get reverted are
  // never recorded.
  double certified = neg_inf;
  double violation = 0.0;
  double current_ba_tol = 1e-3;
  const auto phase = [&]() {
    if (certified != neg_inf) violation = std::min(violation, state.mutual_info - certified);
    certified = std::max(certified, state.mutual_info);
  };

  const auto run_ba = [&](double tol) {
    ProbOptResult r = optimize_probabilities(state.points, params, trunc, tol, state.probs,
                                             config.max_ba_iters);
    state.probs = std::move(r.probs);
    state.mutual_info = r.mutual_info;
  };

  const auto run_locations = [&]() {
    if (state.points.size() <= 2) return;
    DiscreteInput moved = optimize_locations(detail::to_input(state), params, trunc, config);
    state.points = std::move(moved.points);
    state.mutual_info =
        detail::mutual_info_cached(state.points, state.probs, params, trunc.y_max, lg, scratch);
  };

  // Merge adjacent atoms closer than merge_distance * A (endpoints keep their
  // location); accept only when the re-optimized I does not drop.
  const auto run_merge = [&]() {
    std::size_t i = 0;
    while (i + 1 < state.points.size()) {
      if (state.points[i + 1] - state.points[i] >= config.merge_distance * amp) {
        ++i;
        continue;
      }
      const detail::SolverState saved = state;
      const double w = state.probs[i] + state.probs[i + 1];
      double merged_x;
      if (i == 0)
        merged_x = state.points[0];
      else if (i + 2 == state.points.size())
        merged_x = state.points[i + 1];
      else
        merged_x = (state.points[i] * state.probs[i] + state.points[i + 1] * state.probs[i + 1]) / w;
      state.points.erase(state.points.begin() + static_cast<std::ptrdiff_t>(i + 1));
      state.probs.erase(state.probs.begin() + static_cast<std::ptrdiff_t>(i + 1));
      state.points[i] = merged_x;
      state.probs[i] = w;
      run_ba(current_ba_tol);
      if (state.mutual_info >= saved.mutual_info - 1e-12) {
        phase();
        continue;  // merged; retry at the same index
      }
      state = saved;
      ++i;
    }
  };

  const auto run_prune = [&]() {
    if (state.points.size() <= 2) return;
    detail::SolverState saved = state;
    bool removed = false;
    for (std::size_t i = state.points.size() - 2; i >= 1; --i) {  // interior only
      if (state.probs[i] < config.prune_probability) {
        state.points.erase(state.points.begin() + static_cast<std::ptrdiff_t>(i));
        state.probs.erase(state.probs.begin() + static_cast<std::ptrdiff_t>(i));
        removed = true;
      }
    }
    if (!removed) return;
    double sum = std::accumulate(state.probs.begin(), state.probs.end(), 0.0);
    for (double& p : state.probs) p /= sum;
    run_ba(current_ba_tol);
    if (state.mutual_info < saved.mutual_info - 1e-12)
      state = saved;
    else
      phase();
  };

  // 1-D concave line search over the mixing weight of a new atom.
  const auto insert_atom = [&](double x_new) {
    std::vector<double> pts = state.points;
    const auto pos = std::lower_bound(pts.begin(), pts.end(), x_new);
    const std::size_t idx = static_cast<std::size_t>(pos - pts.begin());
    pts.insert(pos, x_new);
    std::vector<double> pr(pts.size());
    const auto mi_at = [&](double eps) {
      for (std::size_t i = 0, j = 0; i < pts.size(); ++i) {
        if (i == idx)
          pr[i] = eps;
        else
          pr[i] = state.probs[j++] * (1.0 - eps);
      }
      return detail::mutual_info_cached(pts, pr, params, trunc.y_max, lg, scratch);
    };
    double lo = 0.0, hi = 0.5;
    for (int k = 0; k < 60; ++k) {
      const double m1 = lo + (hi - lo) / 3.0;
      const double m2 = hi - (hi - lo) / 3.0;
      if (mi_at(m1) < mi_at(m2))
        lo = m1;
      else
        hi = m2;
    }
    const double eps = 0.5 * (lo + hi);
    if (!(eps > 1e-12)) return false;
    const double mi_new = mi_at(eps);
    if (mi_new < state.mutual_info - 1e-15) return false;
    state.points = std::move(pts);
    state.probs = pr;
    state.mutual_info = mi_new;
    phase();
    return true;
  };

  // Tentatively drop low-mass atoms once converged; keep a removal only if
  // the re-optimized law certifies the same I and still passes the scan.
  const auto cleanup = [&](double kkt_tol) {
    bool again = true;
    while (again && state.points.size() > 2) {
      again = false;
      std::vector<std::size_t> order;
      for (std::size_t i = 1; i + 1 < state.points.size(); ++i)
        if (state.probs[i] < 0.05) order.push_back(i);
      std::sort(order.begin(), order.end(),
                [&](std::size_t a, std::size_t b) { return state.probs[a] < state.probs[b]; });
      for (std::size_t i : order) {
        const detail::SolverState saved = state;
        state.points.erase(state.points.begin() + static_cast<std::ptrdiff_t>(i));
        state.probs.erase(state.probs.begin() + static_cast<std::ptrdiff_t>(i));
        double sum = std::accumulate(state.probs.begin(), state.probs.end(), 0.0);
        for (double& p : state.probs) p /= sum;
        run_ba(config.prob_tolerance);
        run_locations();
        run_ba(config.prob_tolerance);
        const KktScanResult scan =
            kkt_scan(detail::to_input(state), params, trunc, config.grid_points);
        if (state.mutual_info >= saved.mutual_info - 1e-12 && scan.max_gap <= kkt_tol) {
          phase();
          again = true;
          break;
        }
        state = saved;
      }
    }
  };

  const auto finish = [&](int outer, double gap) {
    CapacitySolution sol;
    sol.input = detail::to_input(state);
    sol.capacity_nats = mutual_information(sol.input, params, trunc);
    sol.kkt_gap = gap;
    sol.iterations = outer;
    sol.y_max = trunc.y_max;
    sol.converged = gap <= config.kkt_tolerance;
    sol.ascent_violation = violation;
    return sol;
  };

  // Relocation jump: the prob/location alternation contracts slowly along a
  // flat valley, so when the scan argmax lies near an interior atom, try
  // moving that atom straight to the argmax and re-optimizing.
  const auto relocate_atom = [&](double x_new) {
    std::size_t j = 0;
    double dist = pos_inf;
    for (std::size_t i = 1; i + 1 < state.points.size(); ++i) {
      const double d = std::abs(x_new - state.points[i]);
      if (d < dist) {
        dist = d;
        j = i;
      }
    }
    if (j == 0 || dist > 0.1 * amp) return false;
    if (x_new <= state.points[j - 1] || x_new >= state.points[j + 1]) return false;
    const detail::SolverState saved = state;
    state.points[j] = x_new;
    run_ba(current_ba_tol);
    run_locations();
    run_ba(current_ba_tol);
    if (state.mutual_info > saved.mutual_info + 1e-15) {
      phase();
      return true;
    }
    state = saved;
    return false;
  };

  int tighten_rounds = 0;
  double last_gap = pos_inf;
  for (int outer = 1; outer <= config.max_outer_iters; ++outer) {
    // loose probability updates while the support is still coarse; full
    // precision once the scan gap closes in on the tolerance
    current_ba_tol = std::clamp(last_gap / 100.0, config.prob_tolerance, 1e-3);
    run_ba(current_ba_tol);
    phase();
    for (int round = 0; round < 3 && state.points.size() > 2; ++round) {
      run_locations();
      run_ba(current_ba_tol);
    }
    phase();
    run_merge();
    run_prune();
    KktScanResult scan = kkt_scan(detail::to_input(state), params, trunc, config.grid_points);
    last_gap = scan.max_gap;
    if (scan.max_gap <= config.kkt_tolerance) {
      cleanup(config.kkt_tolerance);
      run_ba(std::min(config.prob_tolerance, config.kkt_tolerance / 100.0));
      phase();
      scan = kkt_scan(detail::to_input(state), params, trunc, config.grid_points);
      return finish(outer, scan.max_gap);
    }
    double dist = pos_inf;
    for (double p : state.points) dist = std::min(dist, std::abs(scan.argmax_x - p));
    if (dist <= 0.05 * amp && relocate_atom(scan.argmax_x)) {
      tighten_rounds = 0;
      continue;
    }
    if (dist >= config.merge_distance * amp || tighten_rounds >= 3) {
      if (dist > 1e-15 * amp && insert_atom(scan.argmax_x)) {
        tighten_rounds = 0;
        continue;
      }
    }
    // argmax sits on an existing atom: tighten instead of inserting
    ++tighten_rounds;
    const double tight = std::max(config.prob_tolerance * std::pow(10.0, -tighten_rounds), 1e-12);
    run_ba(tight);
    run_locations();
    phase();
  }
  return finish(config.max_outer_iters, last_gap);
}

}  // namespace poissoncap
