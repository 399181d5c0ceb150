#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "poissoncap/info.hpp"

using namespace poissoncap;
using Catch::Approx;

namespace {

std::vector<double> truncated_poisson_log(double mean, int y_max) {
  std::vector<double> v(static_cast<std::size_t>(y_max) + 1);
  for (int y = 0; y <= y_max; ++y)
    v[static_cast<std::size_t>(y)] = (mean == 0.0)
                                         ? (y == 0 ? 0.0 : neg_inf)
                                         : y * std::log(mean) - mean - std::lgamma(y + 1.0);
  return v;
}

}  // namespace

TEST_CASE("relative_entropy") {
  SECTION("identity gives exactly zero") {
    const auto p = truncated_poisson_log(2.0, 30);
    CHECK(relative_entropy(p, p) == 0.0);
  }
  SECTION("single-atom KL: D(delta_0 || Poisson(1)) = 1 nat") {
    std::vector<double> delta(31, neg_inf);
    delta[0] = 0.0;
    const auto q = truncated_poisson_log(1.0, 30);
    CHECK(relative_entropy(delta, q) == Approx(1.0).epsilon(1e-14));
  }
  SECTION("Poisson closed form against the summation oracle") {
    const auto p = truncated_poisson_log(2.0, 60);
    const auto q = truncated_poisson_log(1.0, 60);
    const double kl = relative_entropy(p, q);
    CHECK(kl == Approx(oracles::kKlPoisson2Poisson1).epsilon(1e-10));
    CHECK(kl == Approx(oracles::kl_poisson_direct(2.0, 1.0, 60)).epsilon(1e-13));
  }
  SECTION("nonnegative on random pmfs, zero iff equal") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int t = 0; t < 200; ++t) {
      std::vector<double> p(16), q(16);
      double sp = 0, sq = 0;
      for (auto& v : p) sp += (v = u(rng));
      for (auto& v : q) sq += (v = u(rng));
      for (auto& v : p) v = std::log(v / sp);
      for (auto& v : q) v = std::log(v / sq);
      CHECK(relative_entropy(p, q) >= -1e-14);
    }
  }
  SECTION("support violation yields the +inf sentinel, not an error") {
    std::vector<double> p{std::log(0.5), std::log(0.5)};
    std::vector<double> q{0.0, neg_inf};
    CHECK(relative_entropy(p, q) == pos_inf);
  }
  SECTION("alphabet mismatch is a domain error") {
    std::vector<double> p{0.0}, q{0.0, neg_inf};
    CHECK_THROWS_AS(relative_entropy(p, q), std::domain_error);
  }
}

TEST_CASE("info_density") {
  const ChannelParams params{10.0, 0.0};
  const TruncationPolicy trunc = choose_truncation(params, 1e-12);
  SECTION("point-mass input: row equals mixture") {
    const DiscreteInput input{{4.0}, {1.0}};
    CHECK(info_density(4.0, input, params, trunc) == 0.0);
  }
  SECTION("two-atom law, query at x = 0") {
    const DiscreteInput input{{0.0, 10.0}, {0.5, 0.5}};
    CHECK(info_density(0.0, input, params, trunc) ==
          Approx(oracles::kInfoDensityTwoAtomAtZero).epsilon(1e-12));
  }
  SECTION("two-atom law, query at x = 10: direct summation oracle") {
    const DiscreteInput input{{0.0, 10.0}, {0.5, 0.5}};
    long double expected = 0.0L;
    for (int y = 0; y <= trunc.y_max; ++y) {
      const long double row = oracles::poisson_pmf_ref(y, 10.0L);
      const long double mix = oracles::mixture_output_ref(input, 0.0, y);
      if (row > 0.0L) expected += row * std::log(row / mix);
    }
    CHECK(info_density(10.0, input, params, trunc) ==
          Approx(static_cast<double>(expected)).epsilon(1e-12));
  }
}

TEST_CASE("mutual_information") {
  SECTION("point mass carries no information") {
    const ChannelParams params{3.0, 0.5};
    const TruncationPolicy trunc = choose_truncation(params, 1e-12);
    const DiscreteInput input{{1.7}, {1.0}};
    CHECK(mutual_information(input, params, trunc) == Approx(0.0).margin(1e-15));
  }
  SECTION("entropy-difference oracle") {
    const ChannelParams params{1.0, 0.0};
    const TruncationPolicy trunc = choose_truncation(params, 1e-13);
    const DiscreteInput input{{0.0, 1.0}, {0.5, 0.5}};
    CHECK(mutual_information(input, params, trunc) ==
          Approx(oracles::mutual_info_entropy_ref(input, 0.0, trunc.y_max)).epsilon(1e-10));
  }
  SECTION("concave in the two-point weight") {
    const ChannelParams params{2.0, 0.0};
    const TruncationPolicy trunc = choose_truncation(params, 1e-12);
    std::vector<double> mi;
    for (int k = 1; k <= 19; ++k) {
      const double q = k / 20.0;
      mi.push_back(mutual_information(DiscreteInput{{0.0, 2.0}, {1.0 - q, q}}, params, trunc));
    }
    for (std::size_t k = 1; k + 1 < mi.size(); ++k)
      CHECK(mi[k] >= 0.5 * (mi[k - 1] + mi[k + 1]) - 1e-12);
  }
}

TEST_CASE("kl_chain_rule_check") {
  SECTION("identical inputs: both sides zero") {
    const ChannelParams params{2.0, 0.0};
    const TruncationPolicy trunc = choose_truncation(params, 1e-12);
    const DiscreteInput p{{0.0, 2.0}, {0.4, 0.6}};
    const ChainRuleCheck c = kl_chain_rule_check(p, p, params, trunc);
    CHECK(c.lhs == Approx(0.0).margin(1e-15));
    CHECK(std::abs(c.gap) <= 1e-12);
  }
  SECTION("binary example, lambda = 0") {
    const ChannelParams params{1.0, 0.0};
    const TruncationPolicy trunc = choose_truncation(params, 1e-12);
    const DiscreteInput p{{0.0, 1.0}, {0.3, 0.7}};
    const DiscreteInput q{{0.0, 1.0}, {0.5, 0.5}};
    const ChainRuleCheck c = kl_chain_rule_check(p, q, params, trunc);
    CHECK(c.lhs == Approx(oracles::kChainRuleLhs).epsilon(1e-13));
    CHECK(std::abs(c.gap) <= 1e-8);
  }
  SECTION("lambda = 1 example") {
    const ChannelParams params{2.0, 1.0};
    const TruncationPolicy trunc = choose_truncation(params, 1e-12);
    const DiscreteInput p{{0.0, 2.0}, {0.5, 0.5}};
    const DiscreteInput q{{0.0, 2.0}, {0.25, 0.75}};
    const ChainRuleCheck c = kl_chain_rule_check(p, q, params, trunc);
    CHECK(std::abs(c.gap) <= 1e-8);
  }
  SECTION("gap shrinks as the tail budget tightens") {
    const ChannelParams params{6.0, 0.3};
    const DiscreteInput p{{0.0, 2.0, 6.0}, {0.3, 0.3, 0.4}};
    const DiscreteInput q{{0.0, 2.0, 6.0}, {0.2, 0.5, 0.3}};
    double prev = pos_inf;
    for (double eps : {1e-8, 1e-10, 1e-12}) {
      const TruncationPolicy trunc = choose_truncation(params, eps);
      const double gap = std::abs(kl_chain_rule_check(p, q, params, trunc).gap);
      CHECK(gap <= prev + 1e-15);
      prev = gap;
    }
    CHECK(prev <= 1e-10);
  }
  SECTION("support violation yields the sentinel") {
    const ChannelParams params{2.0, 0.0};
    const TruncationPolicy trunc = choose_truncation(params, 1e-12);
    const DiscreteInput p{{0.0, 1.0, 2.0}, {0.2, 0.3, 0.5}};
    const DiscreteInput q{{0.0, 2.0}, {0.5, 0.5}};
    const ChainRuleCheck c = kl_chain_rule_check(p, q, params, trunc);
    CHECK(c.lhs == pos_inf);
    CHECK(c.rhs == pos_inf);
  }
}

TEST_CASE("posterior_mismatch_divergence") {
  SECTION("point mass: posterior is always the atom") {
    const ChannelParams params{3.0, 0.2};
    const TruncationPolicy trunc = choose_truncation(params, 1e-12);
    const DiscreteInput input{{1.5}, {1.0}};
    CHECK(posterior_mismatch_divergence(1.5, input, params, trunc) == Approx(0.0).margin(1e-15));
  }
  SECTION("two-atom hand value at x* = 0") {
    const ChannelParams params{10.0, 0.0};
    const TruncationPolicy trunc = choose_truncation(params, 1e-12);
    const DiscreteInput input{{0.0, 10.0}, {0.5, 0.5}};
    CHECK(posterior_mismatch_divergence(0.0, input, params, trunc) ==
          Approx(oracles::kMismatchTwoAtom).epsilon(1e-10));
  }
  SECTION("random two-point inputs against the summation oracle") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> ua(0.5, 8.0);
    std::uniform_real_distribution<double> uq(0.1, 0.9);
    for (int t = 0; t < 25; ++t) {
      const ChannelParams params{ua(rng), 0.3};
      const TruncationPolicy trunc = choose_truncation(params, 1e-13);
      const double q = uq(rng);
      const DiscreteInput input{{0.0, params.amplitude}, {1.0 - q, q}};
      for (std::size_t idx : {std::size_t{0}, std::size_t{1}}) {
        const double got =
            posterior_mismatch_divergence(input.points[idx], input, params, trunc);
        const double want =
            oracles::mismatch_divergence_ref(input, params.dark_current, idx, trunc.y_max);
        CHECK(got == Approx(want).margin(1e-10));
        CHECK(got >= 0.0);
      }
    }
  }
  SECTION("unknown support point is a domain error") {
    const ChannelParams params{2.0, 0.0};
    const TruncationPolicy trunc = choose_truncation(params, 1e-12);
    const DiscreteInput input{{0.0, 2.0}, {0.5, 0.5}};
    CHECK_THROWS_AS(posterior_mismatch_divergence(1.0, input, params, trunc), std::domain_error);
  }
}

TEST_CASE("per-atom divergence split: -log p_i = i(x_i) + D_i for any input") {
  // the chain-rule specialization behind the exact support-size identity
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> ua(0.5, 12.0);
  for (int t = 0; t < 40; ++t) {
    const ChannelParams params{ua(rng), t % 2 == 0 ? 0.0 : 0.7};
    const TruncationPolicy trunc = choose_truncation(params, 1e-13);
    const DiscreteInput input = oracles::random_input(rng, params.amplitude);
    const OutputPmf out = output_pmf(input, params, trunc);
    for (std::size_t i = 0; i < input.size(); ++i) {
      const double lhs = -std::log(input.probs[i]);
      const double rhs = info_density(input.points[i], out, params) +
                         posterior_mismatch_divergence(input.points[i], input, params, trunc);
      CHECK(lhs == Approx(rhs).margin(1e-8));
    }
  }
}
