#include <gtest/gtest.h>

#include "ghostlab/accumulators.hpp"
#include "ghostlab/combinatorics.hpp"

using namespace ghostlab;

TEST(Factorial, ExactValues) {
  EXPECT_EQ(factorial_exact(0), 1u);
  EXPECT_EQ(factorial_exact(5), 120u);
  EXPECT_EQ(factorial_exact(20), 2432902008176640000ull);
  EXPECT_THROW(factorial_exact(21), OrderOverflow);
  EXPECT_THROW(factorial_exact(-1), DomainError);
}

TEST(Factorial, ExtendedRangeAndGuard) {
  EXPECT_EQ(factorial(6), 720.0L);
  EXPECT_NEAR(static_cast<double>(factorial(25) / 1.5511210043330986e25L), 1.0, 1e-15);
  EXPECT_NO_THROW(factorial(40));
  EXPECT_THROW(factorial(41), OrderOverflow);
}

TEST(Stirling, SecondKindTable) {
  EXPECT_EQ(stirling2(0, 0), 1u);
  EXPECT_EQ(stirling2(3, 1), 1u);
  EXPECT_EQ(stirling2(3, 2), 3u);
  EXPECT_EQ(stirling2(3, 3), 1u);
  EXPECT_EQ(stirling2(4, 2), 7u);
  EXPECT_EQ(stirling2(5, 3), 25u);
  EXPECT_EQ(stirling2(10, 5), 42525u);
  EXPECT_EQ(stirling2(4, 0), 0u);
  EXPECT_EQ(stirling2(2, 5), 0u);
}

TEST(Stirling, RowsSumToBellNumbers) {
  const std::uint64_t bell[] = {1, 1, 2, 5, 15, 52, 203, 877, 4140};
  for (int n = 0; n <= 8; ++n) {
    std::uint64_t sum = 0;
    for (int k = 0; k <= n; ++k) sum += stirling2(n, k);
    EXPECT_EQ(sum, bell[n]) << n;
  }
}

TEST(FallingFactorial, Values) {
  EXPECT_EQ(falling_factorial(5, 0), 1.0);
  EXPECT_EQ(falling_factorial(5, 3), 60.0);
  EXPECT_EQ(falling_factorial(2, 3), 0.0);
}

TEST(KahanSum, RecoversLostLowOrderBits) {
  KahanSum s;
  s.add(1e16);
  for (int i = 0; i < 1000; ++i) s.add(1.0);
  s.add(-1e16);
  EXPECT_EQ(s.value(), 1000.0);
}

TEST(PairMoments, MergeMatchesSinglePass) {
  PairMoments all, a, b;
  for (int i = 0; i < 100; ++i) {
    const double x = i * 0.37 - 3, y = (i % 7) * 1.3 + x;
    all.add(x, y);
    (i < 41 ? a : b).add(x, y);
  }
  a.merge(b);
  EXPECT_EQ(a.count(), all.count());
  EXPECT_NEAR(a.mean_x(), all.mean_x(), 1e-12);
  EXPECT_NEAR(a.var_y(), all.var_y(), 1e-10);
  EXPECT_NEAR(a.cov(), all.cov(), 1e-10);
}

TEST(BatchSummary, StandardErrorOfMean) {
  const double v[] = {1.0, 2.0, 3.0, 4.0};
  const auto s = summarize_batches(v);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.std_error, std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
}
