#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ghostlab/combinatorics.hpp"
#include "ghostlab/error.hpp"
#include "ghostlab/rng.hpp"

namespace ghostlab {

/// Discrete-mode thermal ensemble: M modes behind the mask plus one
/// background mode (index 0) seen only by the reference detector.
struct ModeEnsembleSpec {
  int mode_count_in_mask = 1;
  bool has_background_mode = true;
  double mean_intensity = 1.0;  // photons per mode per sample

  void validate() const {
    if (mode_count_in_mask < 1) throw DomainError("mode_count_in_mask must be >= 1");
    if (!(mean_intensity > 0.0) || !std::isfinite(mean_intensity))
      throw DomainError("mean_intensity must be a positive finite number");
  }

  /// Length of a sample vector: slot 0 is always the background slot.
  std::size_t slots() const noexcept { return static_cast<std::size_t>(mode_count_in_mask) + 1; }
};

/// One realization of the instantaneous mode intensities. Slot 0 holds the
/// background mode (zero when the ensemble has none), slots 1..M the mask.
struct ModeSample {
  std::vector<double> intensities;
  std::optional<std::vector<std::uint64_t>> counts;
};

namespace detail {

inline std::uint64_t poisson_inversion(double mean, RngStream& rng) noexcept {
  // Sequential search; mean < 10 keeps exp(-mean) well away from underflow.
  double u = rng.uniform();
  double p = std::exp(-mean);
  std::uint64_t k = 0;
  while (u > p) {
    u -= p;
    ++k;
    p *= mean / static_cast<double>(k);
    if (p <= 0.0) break;  // cumulative round-off; tail mass is < 1e-300
  }
  return k;
}

// Transformed rejection with squeeze (Hormann 1993, "PTRS").
inline std::uint64_t poisson_ptrs(double mean, RngStream& rng) noexcept {
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform_open_closed();
    const double us = 0.5 - std::fabs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <= -mean + k * loglam - std::lgamma(k + 1.0))
      return static_cast<std::uint64_t>(k);
  }
}

}  // namespace detail

/// Exponential deviate with the given mean, by inversion.
inline double sample_exponential(double mean, RngStream& rng) noexcept {
  return -mean * std::log(rng.uniform_open_closed());
}

/// Poisson deviate: inversion below mean 10, PTRS rejection above.
inline std::uint64_t sample_poisson(double mean, RngStream& rng) noexcept {
  if (!(mean > 0.0)) return 0;
  if (mean < 10.0) return detail::poisson_inversion(mean, rng);
  return detail::poisson_ptrs(mean, rng);
}

/// Fills `out` (length spec.slots()) with i.i.d. exponential intensities.
inline void sample_thermal_into(const ModeEnsembleSpec& spec, RngStream& rng, std::span<double> out) noexcept {
  out[0] = spec.has_background_mode ? sample_exponential(spec.mean_intensity, rng) : 0.0;
  for (std::size_t k = 1; k < out.size(); ++k) out[k] = sample_exponential(spec.mean_intensity, rng);
}

inline ModeSample sample_thermal(const ModeEnsembleSpec& spec, RngStream& rng) {
  spec.validate();
  ModeSample sample;
  sample.intensities.resize(spec.slots());
  sample_thermal_into(spec, rng, sample.intensities);
  return sample;
}

/// Photon counts given intensities (doubly stochastic Poisson model).
inline ModeSample sample_photocounts(const ModeSample& sample, RngStream& rng) {
  if (sample.counts) throw DomainError("sample already carries photocounts");
  ModeSample out{sample.intensities, std::vector<std::uint64_t>(sample.intensities.size())};
  for (std::size_t k = 0; k < sample.intensities.size(); ++k) {
    if (sample.intensities[k] < 0.0) throw DomainError("negative intensity in mode sample");
    (*out.counts)[k] = sample_poisson(sample.intensities[k], rng);
  }
  return out;
}

/// Exact thermal moment <I_k^l I_k'^m> for single-mode mean intensity I.
inline double thermal_moment(int l, int m, bool same_mode, double mean_intensity) {
  if (l < 0 || m < 0) throw DomainError("moment orders must be non-negative");
  if (l + m > kFactorialGuard)
    throw OrderOverflow("moment order l+m=" + std::to_string(l + m) + " exceeds guard " +
                        std::to_string(kFactorialGuard));
  const long double weight = same_mode ? factorial(l + m) : factorial(l) * factorial(m);
  return static_cast<double>(weight * std::pow(static_cast<long double>(mean_intensity), l + m));
}

}  // namespace ghostlab
