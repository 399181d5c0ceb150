#include <catch2/catch_amalgamated.hpp>
#include <numbers>

#include "oracles.hpp"
#include "poissoncap/bounds.hpp"
#include "poissoncap/solver.hpp"

using namespace poissoncap;
using Catch::Approx;

TEST_CASE("two_point_capacity_oracle") {
  SECTION("frozen golden at A = 0.5") {
    const TwoPointOracle o = two_point_capacity_oracle(ChannelParams{0.5, 0.0}, 1e-5);
    CHECK(o.capacity == Approx(oracles::kTwoPointCapacity_05).margin(2e-9));
    CHECK(o.q_star == Approx(oracles::kTwoPointQStar_05).margin(2e-5));
    CHECK(o.q_star > 0.0);
    CHECK(o.q_star < 1.0);
  }
  SECTION("degenerate channel: capacity vanishes with A") {
    CHECK(two_point_capacity_oracle(ChannelParams{0.01, 0.0}, 1e-4).capacity < 0.01);
  }
}

TEST_CASE("optimize_probabilities") {
  const ChannelParams params{0.5, 0.0};
  const TruncationPolicy trunc = choose_truncation(params, 1e-12);
  SECTION("matches the q-grid oracle on {0, A}") {
    const ProbOptResult r =
        optimize_probabilities({0.0, 0.5}, params, trunc, 1e-10);
    REQUIRE(r.converged);
    const TwoPointOracle o = two_point_capacity_oracle(params, 1e-6);
    CHECK(r.probs[1] == Approx(o.q_star).margin(1e-5));
    CHECK(r.mutual_info == Approx(o.capacity).margin(1e-9));
  }
  SECTION("single point: probability one, zero information") {
    const ProbOptResult r = optimize_probabilities({0.3}, params, trunc, 1e-10);
    CHECK(r.converged);
    CHECK(r.probs[0] == 1.0);
    CHECK(r.mutual_info == Approx(0.0).margin(1e-14));
  }
  SECTION("relabeling invariance") {
    const ProbOptResult a = optimize_probabilities({0.0, 0.5}, params, trunc, 1e-10);
    const ProbOptResult b = optimize_probabilities({0.5, 0.0}, params, trunc, 1e-10);
    CHECK(a.probs[0] == Approx(b.probs[1]).margin(1e-9));
    CHECK(a.probs[1] == Approx(b.probs[0]).margin(1e-9));
    CHECK(a.mutual_info == Approx(b.mutual_info).margin(1e-12));
  }
  SECTION("mutual information is nondecreasing across iterations") {
    // indirectly: the returned I is at least the uniform-start I
    const ChannelParams big{10.0, 0.0};
    const TruncationPolicy tr = choose_truncation(big, 1e-12);
    const std::vector<double> pts{0.0, 2.0, 6.0, 10.0};
    const LogFactorialTable lg(tr.y_max);
    std::vector<double> scratch;
    const std::vector<double> uniform(4, 0.25);
    const double start = detail::mutual_info_cached(pts, uniform, big, tr.y_max, lg, scratch);
    const ProbOptResult r = optimize_probabilities(pts, big, tr, 1e-9);
    CHECK(r.mutual_info >= start - 1e-15);
    CHECK(r.ba_gap <= 1e-9);
  }
}

TEST_CASE("optimize_locations") {
  SECTION("two-point input is unchanged") {
    const ChannelParams params{1.5, 0.0};
    const TruncationPolicy trunc = choose_truncation(params, 1e-12);
    const DiscreteInput input{{0.0, 1.5}, {0.5, 0.5}};
    const DiscreteInput moved = optimize_locations(input, params, trunc, SolverConfig{});
    CHECK(moved.points == input.points);
    CHECK(moved.probs == input.probs);
  }
  SECTION("|i'| at an interior point shrinks") {
    const ChannelParams params{10.0, 0.0};
    const TruncationPolicy trunc = choose_truncation(params, 1e-12);
    DiscreteInput input{{0.0, 2.2, 10.0}, {0.4, 0.25, 0.35}};
    const PosteriorTable before = build_posterior(input, params, trunc);
    const double ip_before =
        std::abs(lemma2_functions(before, params, trunc, input.points[1]).i_prime);
    SolverConfig cfg;
    cfg.max_location_sweeps = 12;
    const DiscreteInput moved = optimize_locations(input, params, trunc, cfg);
    const PosteriorTable after = build_posterior(moved, params, trunc);
    const double ip_after =
        std::abs(lemma2_functions(after, params, trunc, moved.points[1]).i_prime);
    CHECK(ip_after < ip_before);
    CHECK(moved.points.front() == 0.0);
    CHECK(moved.points.back() == 10.0);
  }
  SECTION("dI/dx_i = p_i i'(x_i) against finite differences") {
    const ChannelParams params{6.0, 0.4};
    const TruncationPolicy trunc = choose_truncation(params, 1e-13);
    const DiscreteInput input{{0.0, 2.3, 6.0}, {0.4, 0.27, 0.33}};
    const PosteriorTable table = build_posterior(input, params, trunc);
    const double x = input.points[1];
    const double analytic =
        input.probs[1] * lemma2_functions(table, params, trunc, x).i_prime;
    const double h = 1e-5 * std::max(1.0, x);
    DiscreteInput up = input, dn = input;
    up.points[1] = x + h;
    dn.points[1] = x - h;
    const double fd = (mutual_information(up, params, trunc) -
                       mutual_information(dn, params, trunc)) /
                      (2 * h);
    CHECK(analytic == Approx(fd).epsilon(1e-5).margin(1e-10));
  }
}

TEST_CASE("kkt_scan") {
  const ChannelParams params{2.0, 0.0};
  const TruncationPolicy trunc = choose_truncation(params, 1e-12);
  SECTION("uniform two-point law at A = 2 is not optimal") {
    const DiscreteInput input{{0.0, 2.0}, {0.5, 0.5}};
    const KktScanResult r = kkt_scan(input, params, trunc, 2000);
    CHECK(r.max_gap > 0.0);
  }
  SECTION("deterministic") {
    const DiscreteInput input{{0.0, 0.9, 2.0}, {0.4, 0.2, 0.4}};
    const KktScanResult a = kkt_scan(input, params, trunc, 3000);
    const KktScanResult b = kkt_scan(input, params, trunc, 3000);
    CHECK(a.max_gap == b.max_gap);
    CHECK(a.argmax_x == b.argmax_x);
  }
}

TEST_CASE("solve: two-point regime A = 0.5") {
  const ChannelParams params{0.5, 0.0};
  const CapacitySolution sol = solve(params);
  REQUIRE(sol.converged);
  REQUIRE(sol.input.size() == 2);
  CHECK(sol.input.points[0] == Approx(0.0).margin(1e-6 * 0.5));
  CHECK(sol.input.points[1] == Approx(0.5).margin(1e-6 * 0.5));
  CHECK(sol.capacity_nats == Approx(oracles::kTwoPointCapacity_05).margin(1e-5));
  CHECK(sol.input.probs[1] == Approx(oracles::kTwoPointQStar_05).margin(1e-4));
  CHECK(sol.kkt_gap <= 1e-6);
  CHECK(sol.ascent_violation >= -1e-12);
  SECTION("capacity equals the library mutual information") {
    const TruncationPolicy trunc = choose_truncation(params, 1e-12);
    CHECK(sol.capacity_nats ==
          Approx(mutual_information(sol.input, params, trunc)).margin(1e-12));
  }
  SECTION("bit-for-bit determinism") {
    const CapacitySolution again = solve(params);
    CHECK(again.input.points == sol.input.points);
    CHECK(again.input.probs == sol.input.probs);
    CHECK(again.capacity_nats == sol.capacity_nats);
    CHECK(again.kkt_gap == sol.kkt_gap);
  }
}

TEST_CASE("solve: A + lambda < e keeps two points") {
  const CapacitySolution sol = solve(ChannelParams{2.0, 0.5});
  REQUIRE(sol.converged);
  CHECK(sol.input.size() == 2);
  CHECK(sol.input.points[0] == 0.0);
  CHECK(sol.input.points[1] == 2.0);
}

TEST_CASE("solve: A = 10, lambda = 0") {
  const ChannelParams params{10.0, 0.0};
  const CapacitySolution sol = solve(params);
  REQUIRE(sol.converged);
  const TruncationPolicy trunc = choose_truncation(params, 1e-12);

  SECTION("support law: endpoints present, lower bound respected") {
    CHECK(sol.input.points.front() == 0.0);
    CHECK(sol.input.points.back() == 10.0);
    const int lower = support_lower_bound(params, sol.capacity_nats);
    CHECK(static_cast<int>(sol.input.size()) >= lower);
    CHECK(std::exp(sol.capacity_nats) <= sol.input.size() + 1e-3);
  }
  SECTION("at most one atom inside (0, 1) when lambda = 0") {
    int inside = 0;
    for (double x : sol.input.points)
      if (x > 0.0 && x < 1.0) ++inside;
    CHECK(inside <= 1);
  }
  SECTION("interior atoms inside the Lambert interval") {
    const auto loc = interior_location_bounds(params);
    REQUIRE(loc.has_value());
    for (std::size_t i = 1; i + 1 < sol.input.size(); ++i) {
      CHECK(sol.input.points[i] >= loc->lambert.lo - 1e-5 * params.amplitude);
      CHECK(sol.input.points[i] <= loc->lambert.hi + 1e-5 * params.amplitude);
    }
  }
  SECTION("KKT equality at support points") {
    const OutputPmf out = output_pmf(sol.input, params, trunc);
    for (double x : sol.input.points)
      CHECK(std::abs(info_density(x, out, params) - sol.capacity_nats) <= 1e-6);
  }
  SECTION("exact support-size identity") {
    const SupportIdentity id =
        exact_support_identity(sol.input, sol.capacity_nats, params, trunc);
    CHECK(id.gap <= 1e-2);
  }
  SECTION("monotone ascent held") { CHECK(sol.ascent_violation >= -1e-12); }
}
