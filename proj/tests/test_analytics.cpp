#include <gtest/gtest.h>

#include <cmath>

#include "ghostlab/analytics.hpp"

using namespace ghostlab;

namespace {

double binom(int a, int b) {
  double r = 1.0;
  for (int i = 1; i <= b; ++i) r = r * (a - b + i) / i;
  return r;
}

// E[(K^(p))^2] for a Bose-Einstein count of mean I, from the product rule
// x^(p) x^(p) = sum_i C(p,i)^2 i! x^(2p-i) for falling factorials.
double be_falling_square(int p, double I) {
  double total = 0.0;
  for (int i = 0; i <= p; ++i)
    total += binom(p, i) * binom(p, i) * static_cast<double>(factorial(i) * factorial(2 * p - i)) * std::pow(I, 2 * p - i);
  return total;
}

// Var(K_0^(n-1) * sum_{k=1..M} K_k) with independent Bose-Einstein counts.
double var_back_oracle(int n, int M, double I) {
  const double sum_sq = M * (I + I * I) + static_cast<double>(M) * M * I * I;
  const double mean = static_cast<double>(factorial(n - 1)) * std::pow(I, n - 1) * M * I;
  return be_falling_square(n - 1, I) * sum_sq - mean * mean;
}

}  // namespace

TEST(Correlations, PeakAndBackground) {
  EXPECT_DOUBLE_EQ(g_max({2, 1, 1.0}), 2.0);
  EXPECT_DOUBLE_EQ(g_back({2, 1, 1.0}), 1.0);
  EXPECT_DOUBLE_EQ(g_max({3, 4, 2.0}), 2.0 * 6.0 * 8.0);
  EXPECT_DOUBLE_EQ(g_back({4, 10, 0.5}), 6.0 * 10.0 * 0.0625);
}

TEST(Correlations, RejectInvalidParameters) {
  EXPECT_THROW(g_max({1, 1, 1.0}), DomainError);
  EXPECT_THROW(g_back({2, 0, 1.0}), DomainError);
  EXPECT_THROW(var_g_back({2, 1, 0.0}), DomainError);
  EXPECT_THROW(snr_thermal({2, 1, -3.0}), DomainError);
  EXPECT_THROW(g_max({45, 1, 1.0}), OrderOverflow);
}

TEST(Visibility, ExactSingleModeValues) {
  EXPECT_EQ(visibility(2, 1), 1.0 / 3.0);
  EXPECT_EQ(visibility(3, 1), 1.0 / 2.0);
  EXPECT_EQ(visibility(4, 1), 3.0 / 5.0);
  EXPECT_EQ(visibility(2, 10), 1.0 / 21.0);
}

TEST(Visibility, MatchesCorrelationRatio) {
  for (int n = 2; n <= 6; ++n)
    for (int m : {1, 2, 7, 50}) {
      const GiParameters p{n, m, 0.3};
      EXPECT_NEAR(visibility(n, m), (g_max(p) - g_back(p)) / (g_max(p) + g_back(p)), 1e-14);
    }
}

TEST(BackgroundVariance, MatchesCountOracle) {
  for (int n = 2; n <= 5; ++n)
    for (int m : {1, 3, 10})
      for (double I : {0.01, 0.1, 1.0, 10.0, 100.0}) {
        const double oracle = var_back_oracle(n, m, I);
        EXPECT_NEAR(var_g_back({n, m, I}) / oracle, 1.0, 1e-12) << n << " " << m << " " << I;
      }
}

TEST(BackgroundVariance, SecondOrderSingleModePolynomial) {
  for (double I : {0.1, 1.0, 10.0, 100.0})
    EXPECT_NEAR(var_g_back({2, 1, I}) / (I * I + 4 * I * I * I + 3 * I * I * I * I), 1.0, 1e-12);
}

TEST(BackgroundVariance, ClassicalLimitAtHighIntensity) {
  EXPECT_NEAR(var_g_back({3, 4, 1e7}) / var_g_back_classical({3, 4, 1e7}), 1.0, 1e-5);
  EXPECT_DOUBLE_EQ(var_g_back_classical({2, 1, 1.0}), 3.0);
}

TEST(ThermalSnr, SingleModeReferenceValues) {
  EXPECT_NEAR(snr_thermal({2, 1, 0.1}), 0.0373979, 5e-7);
  EXPECT_NEAR(snr_thermal({2, 1, 1.0}), 0.158114, 5e-7);
  EXPECT_NEAR(snr_thermal({3, 1, 1.0}), 0.0845154, 5e-7);
  EXPECT_NEAR(snr_thermal({4, 1, 1.0}), 0.0414276, 5e-7);
}

TEST(ThermalSnr, CloseToExactCountOracleForManyModes) {
  // Exact normally ordered photocount SNR, computed symbolically.
  struct Case {
    int n, m;
    double I, exact;
  };
  const Case cases[] = {{2, 3, 0.1, 0.0261443}, {2, 3, 1.0, 0.0980581}, {2, 3, 10.0, 0.143904},
                        {3, 3, 1.0, 0.0610847}, {4, 3, 1.0, 0.0325243}, {2, 10, 0.1, 0.0135246},
                        {2, 10, 1.0, 0.0415227}, {3, 10, 0.1, 0.00604111}, {4, 10, 0.1, 0.0020325}};
  for (const auto& c : cases) EXPECT_NEAR(snr_thermal({c.n, c.m, c.I}) / c.exact, 1.0, 0.02) << c.n << " " << c.m;
}

TEST(ThermalSnr, LowIntensityAsymptote) {
  for (int n = 2; n <= 4; ++n)
    for (int m : {1, 10}) {
      double previous = 1.0;
      for (double I : {1e-2, 1e-4, 1e-6}) {
        const double gap = std::fabs(snr_thermal({n, m, I}) / snr_low_intensity({n, m, I}) - 1.0);
        EXPECT_LT(gap, previous);
        previous = gap;
      }
      EXPECT_LT(previous, 0.01);
    }
  EXPECT_EQ(snr_low_intensity({2, 1, 0.0}), 0.0);
}

TEST(ThermalSnr, UnrootedLowIntensityFormDiffersByRootFactor) {
  const GiParameters p{3, 10, 1e-3};
  EXPECT_NEAR(snr_low_intensity(p) / snr_low_intensity_unrooted(p), std::sqrt(2.0 * 10 - 1 + 9), 1e-12);
}

TEST(ThermalSnr, HighIntensityAsymptote) {
  for (int n = 2; n <= 4; ++n)
    for (int m : {1, 10}) EXPECT_NEAR(snr_thermal({n, m, 1e6}) / snr_high_intensity(n, m), 1.0, 1e-3);
}

TEST(ThermalSnr, DecreasesWithOrderAtHighIntensity) {
  for (int m : {1, 5, 20}) {
    EXPECT_GT(snr_high_intensity(2, m), snr_high_intensity(3, m));
    EXPECT_GT(snr_high_intensity(3, m), snr_high_intensity(4, m));
  }
}

TEST(Spdc, HighIntensityLimitsMatchSecondOrderThermal) {
  EXPECT_NEAR(snr_spdc_limit(1), 1.0 / std::sqrt(15.0), 1e-15);
  EXPECT_NEAR(snr_spdc_limit(10), 1.0 / std::sqrt(267.0), 1e-15);
  for (int m = 1; m <= 100; ++m) EXPECT_NEAR(snr_high_intensity(2, m) / snr_spdc_limit(m), 1.0, 1e-12);
  EXPECT_NEAR(snr_spdc({1e9, 3}) / snr_spdc_limit(3), 1.0, 1e-6);
  EXPECT_EQ(snr_spdc({0.0, 1}), 0.0);
  EXPECT_THROW(snr_spdc({-1.0, 1}), DomainError);
}

TEST(Spdc, PeakLocations) {
  const auto p1 = spdc_peak(1);
  EXPECT_NEAR(p1.snr, 0.27, 0.01);
  EXPECT_NEAR(p1.mean_photons, 0.8, 0.12);
  const auto p10 = spdc_peak(10);
  EXPECT_NEAR(p10.snr, 0.11, 0.01);
  EXPECT_NEAR(p10.mean_photons, 0.07, 0.014);
  EXPECT_GT(p10.snr, snr_spdc_limit(10) * 1.8);
}

TEST(Ordering, StirlingCoefficients) {
  EXPECT_EQ(ordering_coefficients(2), (std::vector<double>{1}));
  EXPECT_EQ(ordering_coefficients(3), (std::vector<double>{1, 1}));
  EXPECT_EQ(ordering_coefficients(4), (std::vector<double>{1, 3, 1}));
  EXPECT_EQ(ordering_coefficients(5), (std::vector<double>{1, 7, 6, 1}));
}

TEST(Ordering, PlainMomentsAndExcess) {
  EXPECT_DOUBLE_EQ(bose_einstein_plain_moment(1, 0.4), 0.4);
  EXPECT_NEAR(bose_einstein_plain_moment(2, 0.4), 0.4 + 2 * 0.16, 1e-15);
  EXPECT_NEAR(ordering_excess(3, 0.1), 5.0, 1e-12);
  EXPECT_NEAR(ordering_excess(4, 0.1), 10.0 + 1.0 / 0.06, 1e-10);
  EXPECT_LT(ordering_excess(3, 1e3), 1e-3);
  EXPECT_LT(ordering_excess(4, 1e3), 1e-2);
  EXPECT_EQ(ordering_excess(2, 0.1), 0.0);
}

TEST(Ordering, PlainCorrelationsReduceToNormalOnesForSecondOrder) {
  const GiParameters p{2, 4, 0.7};
  EXPECT_NEAR(g_back_plain(p), g_back(p), 1e-14);
  EXPECT_NEAR(g_max_plain(p), g_max(p) + p.mean_intensity, 1e-14);
}

TEST(Analyze, BundlesClosedForms) {
  const GiParameters p{3, 2, 5.0};
  const auto r = analyze(p);
  EXPECT_EQ(r.g_max, g_max(p));
  EXPECT_EQ(r.visibility, visibility(3, 2));
  EXPECT_EQ(r.snr, snr_thermal(p));
}
