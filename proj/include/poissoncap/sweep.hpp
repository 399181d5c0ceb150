#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "poissoncap/bounds.hpp"
#include "poissoncap/solver.hpp"

namespace poissoncap {

struct SweepRecord {
  double amplitude = 0.0;
  double dark_current = 0.0;
  double capacity_nats = 0.0;
  double capacity_bits = 0.0;
  int support_size = 0;
  double kkt_gap = 0.0;
  int lower_bound_N = 2;
  std::optional<int> upper_bound_N;  // no formula on the A + lambda = e boundary
  double runtime_seconds = 0.0;
  bool converged = false;
};

/// One solve per log-spaced amplitude in [amin, amax]; rows are independent
/// and run on `threads` workers, output ordered by amplitude.
inline std::vector<SweepRecord> run_sweep(double amin, double amax, int count,
                                          double dark_current, const SolverConfig& config,
                                          unsigned threads = 0) {
  if (!(amin > 0.0) || !(amin < amax)) throw std::domain_error("run_sweep: need 0 < amin < amax");
  if (count < 2) throw std::domain_error("run_sweep: count must be >= 2");
  std::vector<double> amps(static_cast<std::size_t>(count));
  const double ratio = std::log(amax / amin);
  for (int k = 0; k < count; ++k)
    amps[static_cast<std::size_t>(k)] =
        amin * std::exp(ratio * static_cast<double>(k) / static_cast<double>(count - 1));

  std::vector<SweepRecord> rows(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  const auto worker = [&]() {
    for (;;) {
      const int k = next.fetch_add(1);
      if (k >= count) return;
      const ChannelParams params{amps[static_cast<std::size_t>(k)], dark_current};
      const auto t0 = std::chrono::steady_clock::now();
      const CapacitySolution sol = solve(params, config);
      const auto t1 = std::chrono::steady_clock::now();
      SweepRecord& r = rows[static_cast<std::size_t>(k)];
      r.amplitude = params.amplitude;
      r.dark_current = params.dark_current;
      r.capacity_nats = sol.capacity_nats;
      r.capacity_bits = sol.capacity_nats / std::numbers::ln2;
      r.support_size = static_cast<int>(sol.input.size());
      r.kkt_gap = sol.kkt_gap;
      r.lower_bound_N = support_lower_bound(params, sol.capacity_nats);
      r.upper_bound_N = support_upper_bound(params);
      r.runtime_seconds = std::chrono::duration<double>(t1 - t0).count();
      r.converged = sol.converged;
    }
  };

  unsigned n_threads = threads ? threads : std::thread::hardware_concurrency();
  n_threads = std::max(1u, std::min<unsigned>(n_threads, static_cast<unsigned>(count)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return rows;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    quoted += c;
    if (c == '"') quoted += '"';
  }
  quoted += '"';
  return quoted;
}

}  // namespace detail

inline std::string sweep_csv(const std::vector<SweepRecord>& rows) {
  std::ostringstream os;
  os << "amplitude,dark_current,capacity_nats,capacity_bits,support_size,kkt_gap,"
        "lower_bound_N,upper_bound_N,runtime_seconds,status\r\n";
  char buf[40];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const SweepRecord& r : rows) {
    os << num(r.amplitude) << ',' << num(r.dark_current) << ',' << num(r.capacity_nats) << ','
       << num(r.capacity_bits) << ',' << r.support_size << ',' << num(r.kkt_gap) << ','
       << r.lower_bound_N << ',';
    if (r.upper_bound_N)
      os << *r.upper_bound_N;
    else
      os << "NA";
    os << ',' << num(r.runtime_seconds) << ','
       << detail::csv_field(r.converged ? "converged" : "not_converged") << "\r\n";
  }
  return os.str();
}

}  // namespace poissoncap
