#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>

#include "ghostlab/analytics.hpp"
#include "ghostlab/estimators.hpp"
#include "ghostlab/parallel.hpp"

using namespace ghostlab;

namespace {

void expect_within(double estimate, double se, double reference, double sigmas = 5.0) {
  EXPECT_LE(std::fabs(estimate - reference), sigmas * se) << "estimate " << estimate << " reference " << reference;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST(Regime, RoundTripsNames) {
  for (auto r : {Regime::classical_intensity, Regime::photocount_plain, Regime::photocount_factorial})
    EXPECT_EQ(parse_regime(to_string(r)), r);
  EXPECT_EQ(parse_regime("factorial"), Regime::photocount_factorial);
  EXPECT_THROW(parse_regime("quantum"), ConfigError);
}

TEST(TrialBatch, BatchCountAndValidation) {
  EXPECT_EQ((TrialBatch{{2, 1, 1.0}, 1000000}.resolved_batches()), 128u);
  EXPECT_EQ((TrialBatch{{2, 1, 1.0}, 10}.resolved_batches()), 5u);
  EXPECT_EQ((TrialBatch{{2, 1, 1.0}, 1000, Regime::classical_intensity, 0, 16}.resolved_batches()), 16u);
  EXPECT_THROW(estimate_cf(TrialBatch{{2, 1, 1.0}, 1}), DomainError);
  EXPECT_THROW(estimate_cf(TrialBatch{{2, 0, 1.0}, 100}), DomainError);
}

class RegimeMeans : public ::testing::TestWithParam<std::tuple<int, int, double>> {};

TEST_P(RegimeMeans, MatchClosedForms) {
  const auto [n, m, I] = GetParam();
  const GiParameters p{n, m, I};
  const auto fac = estimate_cf({p, 400000, Regime::photocount_factorial, 11});
  expect_within(fac.g_max_hat, fac.std_errors.g_max, g_max(p));
  expect_within(fac.g_back_hat, fac.std_errors.g_back, g_back(p));
  expect_within(fac.var_back_hat, fac.std_errors.var_back, var_g_back(p));

  const auto cls = estimate_cf({p, 400000, Regime::classical_intensity, 12});
  expect_within(cls.g_max_hat, cls.std_errors.g_max, g_max(p));
  expect_within(cls.var_back_hat, cls.std_errors.var_back, var_g_back_classical(p));

  const auto plain = estimate_cf({p, 400000, Regime::photocount_plain, 13});
  expect_within(plain.g_max_hat, plain.std_errors.g_max, g_max_plain(p));
  expect_within(plain.g_back_hat, plain.std_errors.g_back, g_back_plain(p));
}

INSTANTIATE_TEST_SUITE_P(Grid, RegimeMeans,
                         ::testing::Values(std::tuple{2, 1, 1.0}, std::tuple{2, 3, 0.5}, std::tuple{3, 2, 2.0},
                                           std::tuple{4, 1, 1.5}));

TEST(Estimates, VisibilityNearClosedForm) {
  const auto v = estimate_visibility({{2, 1, 5.0}, 400000, Regime::photocount_factorial, 3});
  expect_within(v.value, v.std_error, visibility(2, 1));
}

TEST(Estimates, SnrAtSingleModeMatchesFormula) {
  const GiParameters p{2, 1, 1.0};
  const auto s = estimate_snr({p, 1000000, Regime::photocount_factorial, 5});
  expect_within(s.value, s.std_error, snr_thermal(p));
}

TEST(Estimates, ThreadCountDoesNotChangeBits) {
  const TrialBatch batch{{3, 4, 0.8}, 50000, Regime::photocount_factorial, 99, 0};
  const auto a = estimate_cf(batch, 1);
  const auto b = estimate_cf(batch, 3);
  EXPECT_TRUE(same_bits(a.g_max_hat, b.g_max_hat));
  EXPECT_TRUE(same_bits(a.var_back_hat, b.var_back_hat));
  EXPECT_TRUE(same_bits(a.snr_hat, b.snr_hat));
  EXPECT_TRUE(same_bits(a.std_errors.snr, b.std_errors.snr));
}

TEST(Estimates, SeedControlsStream) {
  const TrialBatch a{{2, 2, 1.0}, 20000, Regime::classical_intensity, 1, 0};
  TrialBatch b = a;
  EXPECT_TRUE(same_bits(estimate_cf(a).g_max_hat, estimate_cf(b).g_max_hat));
  b.seed = 2;
  EXPECT_FALSE(same_bits(estimate_cf(a).g_max_hat, estimate_cf(b).g_max_hat));
}

TEST(Estimates, ConstantSamplerIsDegenerate) {
  auto constant = [](const ModeEnsembleSpec&, RngStream&, std::span<double> out) {
    for (double& v : out) v = 1.0;
  };
  EXPECT_THROW(estimate_cf(TrialBatch{{2, 3, 1.0}, 1000, Regime::classical_intensity}, 1, constant), DegenerateBatch);
}

TEST(Estimates, CustomSamplerIsUsed) {
  // Intensities 0 or 2 with equal odds: E[I] = 1, E[I^2] = 2.
  auto coin = [](const ModeEnsembleSpec&, RngStream& rng, std::span<double> out) {
    for (double& v : out) v = rng.uniform() < 0.5 ? 0.0 : 2.0;
  };
  const auto s = estimate_cf(TrialBatch{{2, 1, 1.0}, 200000, Regime::classical_intensity, 4}, 1, coin);
  expect_within(s.g_max_hat, s.std_errors.g_max, 2.0);
  expect_within(s.g_back_hat, s.std_errors.g_back, 1.0);
}

TEST(OrderingDominance, FollowsStirlingExcess) {
  for (int n : {3, 4}) {
    const auto low = ordering_dominance({n, 1, 0.5}, 400000, 8);
    expect_within(low.value, low.std_error, ordering_excess(n, 0.5));
    const auto high = ordering_dominance({n, 1, 1e3}, 50000, 9);
    EXPECT_LT(std::fabs(high.value), 0.01);
  }
}

TEST(Parallel, ResolveThreads) {
  EXPECT_EQ(resolve_threads(3), 3u);
  ::setenv("GHOSTLAB_THREADS", "5", 1);
  EXPECT_EQ(resolve_threads(0), 5u);
  ::setenv("GHOSTLAB_THREADS", "five", 1);
  EXPECT_THROW(resolve_threads(0), ConfigError);
  ::unsetenv("GHOSTLAB_THREADS");
  EXPECT_GE(resolve_threads(0), 1u);
}

TEST(Parallel, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(100, 4,
                            [](std::size_t i) {
                              if (i == 57) throw DomainError("boom");
                            }),
               DomainError);
}

TEST(Parallel, VisitsEveryIndexOnce) {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
}
