#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "ghostlab/combinatorics.hpp"
#include "ghostlab/error.hpp"

// Closed-form statistics of n-th order ghost imaging with thermal light in
// the discrete-mode picture (M mask modes, one background mode, mean
// intensity I photons per mode), plus the SPDC baseline.

namespace ghostlab {

struct GiParameters {
  int order = 2;               // n
  int modes = 1;               // M
  double mean_intensity = 1.0;  // I

  void validate() const {
    if (order < 2) throw DomainError("order must be >= 2, got " + std::to_string(order));
    if (modes < 1) throw DomainError("modes must be >= 1, got " + std::to_string(modes));
    if (!(mean_intensity > 0.0) || !std::isfinite(mean_intensity))
      throw DomainError("mean_intensity must be positive and finite");
  }
};

struct SpdcParameters {
  double mean_photons = 0.0;  // m
  int modes = 1;

  void validate() const {
    if (!(mean_photons >= 0.0) || !std::isfinite(mean_photons))
      throw DomainError("mean_photons must be non-negative and finite");
    if (modes < 1) throw DomainError("modes must be >= 1");
  }
};

struct AnalyticReport {
  double g_max = 0.0;
  double g_back = 0.0;
  double visibility = 0.0;
  double var_back = 0.0;
  double snr = 0.0;
};

namespace detail {

inline double checked(long double value, const char* what) {
  if (!std::isfinite(value) || std::fabs(value) > std::numeric_limits<double>::max())
    throw OrderOverflow(std::string(what) + " overflows double range");
  return static_cast<double>(value);
}

}  // namespace detail

/// Peak correlation (reference detector behind an open mask mode).
inline double g_max(const GiParameters& p) {
  p.validate();
  const long double value = factorial(p.order - 1) * (p.modes + p.order - 1) *
                            std::pow(static_cast<long double>(p.mean_intensity), p.order);
  return detail::checked(value, "g_max");
}

/// Background correlation (reference detector outside the mask).
inline double g_back(const GiParameters& p) {
  p.validate();
  const long double value =
      factorial(p.order - 1) * p.modes * std::pow(static_cast<long double>(p.mean_intensity), p.order);
  return detail::checked(value, "g_back");
}

/// Visibility (n-1)/(2M+n-1), i.e. (2M/(n-1)+1)^-1 evaluated as one
/// division of exact integers so small rationals come out correctly rounded.
inline double visibility(int order, int modes) {
  if (order < 2 || modes < 1) throw DomainError("visibility needs order >= 2 and modes >= 1");
  return static_cast<double>(order - 1) / static_cast<double>(2 * modes + order - 1);
}

/// Variance of the background correlation with shot noise included.
inline double var_g_back(const GiParameters& p) {
  p.validate();
  const int n = p.order;
  const long double M = p.modes;
  const long double I = p.mean_intensity;
  const long double fn1 = factorial(n - 1);
  long double sum = 0.0L;
  for (int i = 0; i < n; ++i) {
    const long double fr = factorial(n - i - 1);
    sum += factorial(2 * n - i - 2) * std::pow(I, -i) / (fr * fr * factorial(i));
  }
  const long double bracket = sum * M * (M + 1.0L + 1.0L / I) - M * M;
  return detail::checked(fn1 * fn1 * std::pow(I, 2 * n) * bracket, "var_g_back");
}

/// Background variance of the classical (shot-noise-free) model.
inline double var_g_back_classical(const GiParameters& p) {
  p.validate();
  const int n = p.order;
  const long double M = p.modes;
  const long double fn1 = factorial(n - 1);
  const long double value = (factorial(2 * n - 2) * M * (M + 1.0L) - fn1 * fn1 * M * M) *
                            std::pow(static_cast<long double>(p.mean_intensity), 2 * n);
  return detail::checked(value, "var_g_back_classical");
}

/// The bracket under the inverse square root of the full thermal SNR.
inline long double snr_thermal_bracket(const GiParameters& p) {
  p.validate();
  const int n = p.order;
  const long double nn = n;
  const long double M = p.modes;
  const long double I = p.mean_intensity;
  long double sum = 0.0L;
  for (int i = 0; i < n; ++i) {
    const long double fr = factorial(n - i - 1);
    const long double weight = factorial(2 * n - i - 2) * std::pow(I, -i) / (fr * fr * factorial(i));
    const long double ni = n - i;
    const long double brace = nn * nn * (2 * n - i) * (2 * n - i - 1) / (ni * ni) +
                              2.0L * (M - 1.0L) * nn * (2 * n - i - 1) / ni + 2.0L * M * M +
                              (2.0L * M - 1.0L) / I;
    sum += weight * brace;
  }
  return sum + nn * nn / std::pow(I, n) + 2.0L * (1.0L - M - nn * nn) / I - (M - 1.0L) * (M + 4.0L * nn - 1.0L) -
         M * M - 3.0L * nn * nn;
}

/// Full thermal SNR of the ghost image (signal G_max - G_back over the
/// standard deviation of that difference, shot noise included).
inline double snr_thermal(const GiParameters& p) {
  const long double bracket = snr_thermal_bracket(p);
  if (!(bracket > 0.0L) || !std::isfinite(bracket))
    throw DomainError("SNR bracket is non-positive for n=" + std::to_string(p.order) +
                      ", M=" + std::to_string(p.modes));
  return static_cast<double>((p.order - 1) / std::sqrt(bracket));
}

/// Leading low-intensity behaviour of snr_thermal: the bracket tends to
/// (n^2 + 2M - 1) / I^n, so SNR ~ I^(n/2) (n-1) / sqrt(2M - 1 + n^2).
/// Zero intensity is accepted and yields zero.
inline double snr_low_intensity(const GiParameters& p) {
  if (p.order < 2 || p.modes < 1 || !(p.mean_intensity >= 0.0)) throw DomainError("invalid GiParameters");
  const double n = p.order;
  return std::pow(p.mean_intensity, n / 2.0) * (n - 1.0) / std::sqrt(2.0 * p.modes - 1.0 + n * n);
}

/// I^(n/2) (n-1) / (2M - 1 + n^2): the low-intensity form without the
/// square root. Differs from the true limit of snr_thermal by the factor
/// sqrt(2M - 1 + n^2); kept for comparison only.
inline double snr_low_intensity_unrooted(const GiParameters& p) {
  if (p.order < 2 || p.modes < 1 || !(p.mean_intensity >= 0.0)) throw DomainError("invalid GiParameters");
  const double n = p.order;
  return std::pow(p.mean_intensity, n / 2.0) * (n - 1.0) / (2.0 * p.modes - 1.0 + n * n);
}

/// I -> infinity limit of snr_thermal.
inline double snr_high_intensity(int order, int modes) {
  if (order < 2 || modes < 1) throw DomainError("snr_high_intensity needs order >= 2 and modes >= 1");
  const long double n = order;
  const long double M = modes;
  const long double fn1 = factorial(order - 1);
  const long double bracket = 2.0L * factorial(2 * order - 2) / (fn1 * fn1) *
                                  ((2.0L * n - 1.0L) * (n + M - 1.0L) + M * M) -
                              2.0L * (M - 1.0L) * (M + 2.0L * n) - 3.0L * n * n - 1.0L;
  return static_cast<double>((n - 1.0L) / std::sqrt(bracket));
}

/// Ghost-imaging SNR with an SPDC (biphoton) source.
inline double snr_spdc(const SpdcParameters& p) {
  p.validate();
  const long double m = p.mean_photons;
  const long double M = p.modes;
  const long double den =
      1.0L + 7.0L * m + 7.0L * m * m + 2.0L * M * m * (3.0L * m + 2.0L) + 2.0L * M * M * m * m;
  return static_cast<double>(std::sqrt(m * (m + 1.0L)) / std::sqrt(den));
}

/// m -> infinity limit of snr_spdc.
inline double snr_spdc_limit(int modes) {
  if (modes < 1) throw DomainError("modes must be >= 1");
  const long double M = modes;
  return static_cast<double>(1.0L / std::sqrt(7.0L + 6.0L * M + 2.0L * M * M));
}

struct SpdcPeak {
  double mean_photons = 0.0;
  double snr = 0.0;
};

/// Interior maximum of snr_spdc over the photon number, by golden-section
/// search in log(m) on [1e-6, 1e4].
inline SpdcPeak spdc_peak(int modes, double tolerance = 1e-10) {
  auto f = [modes](double log_m) { return snr_spdc({std::exp(log_m), modes}); };
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = std::log(1e-6);
  double hi = std::log(1e4);
  double x1 = hi - phi * (hi - lo);
  double x2 = lo + phi * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  while (hi - lo > tolerance) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = f(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = f(x1);
    }
  }
  const double best = 0.5 * (lo + hi);
  return {std::exp(best), f(best)};
}

/// Coefficients C_2..C_n expanding the plain reference-count power
/// (a^+ a)^(n-1) into normally ordered terms: C_{j+1} = S(n-1, j).
inline std::vector<double> ordering_coefficients(int order) {
  if (order < 2) throw DomainError("ordering_coefficients needs order >= 2");
  std::vector<double> coefficients;
  coefficients.reserve(static_cast<std::size_t>(order - 1));
  for (int j = 1; j <= order - 1; ++j) coefficients.push_back(static_cast<double>(stirling2(order - 1, j)));
  return coefficients;
}

/// E[K^p] for a Bose-Einstein count of mean I: sum_j S(p, j) j! I^j.
inline double bose_einstein_plain_moment(int power, double mean) {
  if (power < 0) throw DomainError("negative moment power");
  if (power == 0) return 1.0;
  long double total = 0.0L;
  for (int j = 1; j <= power; ++j)
    total += static_cast<long double>(stirling2(power, j)) * factorial(j) * std::pow(static_cast<long double>(mean), j);
  return detail::checked(total, "bose_einstein_plain_moment");
}

/// Relative excess of the plain-power (2-port) correlation over the
/// normally ordered one for distinct reference and bucket points:
/// E[K^(n-1)] / ((n-1)! I^(n-1)) - 1. Tends to zero as I grows.
inline double ordering_excess(int order, double mean_intensity) {
  GiParameters{order, 1, mean_intensity}.validate();
  const long double normal = factorial(order - 1) * std::pow(static_cast<long double>(mean_intensity), order - 1);
  return static_cast<double>(bose_einstein_plain_moment(order - 1, mean_intensity) / normal - 1.0L);
}

/// Expected plain-power correlations <K_r^(n-1) sum_k K_k> for photocounts,
/// at a mask mode (max) and at the background mode (back).
inline double g_max_plain(const GiParameters& p) {
  p.validate();
  const double I = p.mean_intensity;
  return bose_einstein_plain_moment(p.order, I) + bose_einstein_plain_moment(p.order - 1, I) * (p.modes - 1) * I;
}

inline double g_back_plain(const GiParameters& p) {
  p.validate();
  return bose_einstein_plain_moment(p.order - 1, p.mean_intensity) * p.modes * p.mean_intensity;
}

inline AnalyticReport analyze(const GiParameters& p) {
  return {g_max(p), g_back(p), visibility(p.order, p.modes), var_g_back(p), snr_thermal(p)};
}

}  // namespace ghostlab
