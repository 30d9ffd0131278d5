#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ghostlab/accumulators.hpp"
#include "ghostlab/analytics.hpp"
#include "ghostlab/combinatorics.hpp"
#include "ghostlab/core_model.hpp"
#include "ghostlab/error.hpp"
#include "ghostlab/parallel.hpp"
#include "ghostlab/rng.hpp"

// Monte-Carlo estimation of the n-th order correlation functions and of the
// signal-to-noise ratio from sampled mode realizations. Trial t always uses
// RngStream(seed, t), and trials are grouped into fixed batches that are
// merged in index order, so results do not depend on the thread count.

namespace ghostlab {

enum class Regime {
  classical_intensity,   // statistic built from intensities
  photocount_plain,      // plain powers of photocounts (2-port measurement)
  photocount_factorial,  // falling factorials: normally ordered moments
};

inline std::string_view to_string(Regime r) noexcept {
  switch (r) {
    case Regime::classical_intensity:
      return "classical_intensity";
    case Regime::photocount_plain:
      return "photocount_plain";
    case Regime::photocount_factorial:
      return "photocount_factorial";
  }
  return "unknown";
}

inline Regime parse_regime(std::string_view name) {
  if (name == "classical_intensity" || name == "classical") return Regime::classical_intensity;
  if (name == "photocount_plain" || name == "plain") return Regime::photocount_plain;
  if (name == "photocount_factorial" || name == "factorial") return Regime::photocount_factorial;
  throw ConfigError("unknown regime '" + std::string(name) + "'");
}

inline constexpr std::uint32_t kDefaultBatches = 128;

struct TrialBatch {
  GiParameters params;
  std::uint64_t trials = 1'000'000;
  Regime regime = Regime::photocount_factorial;
  std::uint64_t seed = 0;
  std::uint32_t batches = 0;  // 0 = kDefaultBatches, reduced for tiny runs

  void validate() const {
    params.validate();
    if (trials < 2) throw DomainError("trials must be >= 2 (variance needs Bessel correction)");
  }

  std::uint32_t resolved_batches() const noexcept {
    const std::uint64_t wanted = batches == 0 ? kDefaultBatches : batches;
    const std::uint64_t fit = trials / 2;  // at least two trials per batch
    return static_cast<std::uint32_t>(std::max<std::uint64_t>(1, std::min(wanted, fit)));
  }

  ModeEnsembleSpec ensemble() const noexcept { return {params.modes, true, params.mean_intensity}; }
};

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

struct CorrelationStats {
  double g_max_hat = 0.0;
  double g_back_hat = 0.0;
  double var_max_hat = 0.0;
  double var_back_hat = 0.0;
  double cov_hat = 0.0;
  double signal = 0.0;
  double noise = 0.0;
  double snr_hat = 0.0;
  double visibility_hat = 0.0;

  /// Batch-means standard errors of the fields above.
  struct Errors {
    double g_max = 0.0;
    double g_back = 0.0;
    double var_max = 0.0;
    double var_back = 0.0;
    double cov = 0.0;
    double signal = 0.0;
    double noise = 0.0;
    double snr = 0.0;
    double visibility = 0.0;
  } std_errors;

  std::uint64_t trials = 0;
  std::uint32_t batches = 0;
};

/// Default intensity sampler: i.i.d. exponential modes.
struct ThermalSampler {
  void operator()(const ModeEnsembleSpec& spec, RngStream& rng, std::span<double> out) const noexcept {
    sample_thermal_into(spec, rng, out);
  }
};

template <class S>
concept IntensitySampler = requires(const S& s, const ModeEnsembleSpec& spec, RngStream& rng, std::span<double> out) {
  s(spec, rng, out);
};

namespace detail {

struct DerivedFields {
  double signal, noise, snr, visibility;
};

inline DerivedFields derive(const PairMoments& m) noexcept {
  const double signal = m.mean_x() - m.mean_y();
  const double noise_sq = m.var_x() + m.var_y() - 2.0 * m.cov();
  const double noise = noise_sq > 0.0 ? std::sqrt(noise_sq) : 0.0;
  const double snr = noise > 0.0 ? signal / noise : std::numeric_limits<double>::quiet_NaN();
  const double visibility = signal / (m.mean_x() + m.mean_y());
  return {signal, noise, snr, visibility};
}

// Draws one ModeSample for `trial` into `values`: intensities, replaced by
// photocounts for the photocount regimes.
template <IntensitySampler Sampler>
void draw_trial(const TrialBatch& batch, const ModeEnsembleSpec& spec, const Sampler& sampler, std::uint64_t trial,
                std::span<double> values) {
  RngStream rng(batch.seed, stream_domain::kTrials + trial);
  sampler(spec, rng, values);
  if (batch.regime != Regime::classical_intensity)
    for (double& v : values) v = static_cast<double>(sample_poisson(v, rng));
}

// Per-trial (G_max, G_back) statistic pair on one realization.
inline std::pair<double, double> correlation_pair(Regime regime, int order, std::span<const double> v) noexcept {
  KahanSum rest;  // modes 2..M
  for (std::size_t k = 2; k < v.size(); ++k) rest.add(v[k]);
  const double x_max = v[1];
  const double x_back = v[0];
  const double all = rest.value() + x_max;
  switch (regime) {
    case Regime::photocount_factorial:
      // (a1^+)^(n-1) a1^+ a1 a1^(n-1) = (a1^+)^n a1^n for the k = 1 term.
      return {falling_factorial(x_max, order) + falling_factorial(x_max, order - 1) * rest.value(),
              falling_factorial(x_back, order - 1) * all};
    case Regime::classical_intensity:
    case Regime::photocount_plain:
    default:
      return {std::pow(x_max, order - 1) * all, std::pow(x_back, order - 1) * all};
  }
}

template <class PerTrial>
std::vector<PairMoments> run_batches(const TrialBatch& batch, unsigned threads, PerTrial&& per_trial) {
  const std::uint32_t nb = batch.resolved_batches();
  std::vector<PairMoments> moments(nb);
  parallel_for(nb, threads, [&](std::size_t b) {
    const std::uint64_t begin = batch.trials * b / nb;
    const std::uint64_t end = batch.trials * (b + 1) / nb;
    std::vector<double> values(batch.ensemble().slots());
    PairMoments local;
    for (std::uint64_t t = begin; t < end; ++t) {
      const auto [x, y] = per_trial(t, std::span<double>(values));
      local.add(x, y);
    }
    moments[b] = local;
  });
  return moments;
}

}  // namespace detail

/// Estimates G_max, G_back, their variances and covariance, and the derived
/// signal, noise, SNR and visibility. Throws DegenerateBatch when the noise
/// estimate is exactly zero.
template <IntensitySampler Sampler = ThermalSampler>
CorrelationStats estimate_cf(const TrialBatch& batch, unsigned threads = 1, const Sampler& sampler = {}) {
  batch.validate();
  const ModeEnsembleSpec spec = batch.ensemble();
  const int order = batch.params.order;
  const auto moments = detail::run_batches(batch, threads, [&](std::uint64_t t, std::span<double> values) {
    detail::draw_trial(batch, spec, sampler, t, values);
    return detail::correlation_pair(batch.regime, order, values);
  });

  PairMoments total;
  for (const auto& m : moments) total.merge(m);

  CorrelationStats stats;
  stats.trials = batch.trials;
  stats.batches = static_cast<std::uint32_t>(moments.size());
  stats.g_max_hat = total.mean_x();
  stats.g_back_hat = total.mean_y();
  stats.var_max_hat = total.var_x();
  stats.var_back_hat = total.var_y();
  stats.cov_hat = total.cov();
  const auto derived = detail::derive(total);
  stats.signal = derived.signal;
  stats.noise = derived.noise;
  if (!(derived.noise > 0.0))
    throw DegenerateBatch("noise estimate is exactly zero (constant correlation statistics)");
  stats.snr_hat = derived.snr;
  stats.visibility_hat = derived.visibility;

  const std::size_t nb = moments.size();
  std::vector<double> g_max(nb), g_back(nb), var_max(nb), var_back(nb), cov(nb), signal(nb), noise(nb), snr(nb),
      vis(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    const auto& m = moments[b];
    const auto d = detail::derive(m);
    g_max[b] = m.mean_x();
    g_back[b] = m.mean_y();
    var_max[b] = m.var_x();
    var_back[b] = m.var_y();
    cov[b] = m.cov();
    signal[b] = d.signal;
    noise[b] = d.noise;
    snr[b] = d.snr;
    vis[b] = d.visibility;
  }
  auto se = [](const std::vector<double>& v) { return summarize_batches(v).std_error; };
  stats.std_errors = {se(g_max), se(g_back), se(var_max), se(var_back), se(cov),
                      se(signal), se(noise), se(snr), se(vis)};
  return stats;
}

template <IntensitySampler Sampler = ThermalSampler>
Estimate estimate_visibility(const TrialBatch& batch, unsigned threads = 1, const Sampler& sampler = {}) {
  const auto stats = estimate_cf(batch, threads, sampler);
  return {stats.visibility_hat, stats.std_errors.visibility};
}

template <IntensitySampler Sampler = ThermalSampler>
Estimate estimate_snr(const TrialBatch& batch, unsigned threads = 1, const Sampler& sampler = {}) {
  const auto stats = estimate_cf(batch, threads, sampler);
  return {stats.snr_hat, stats.std_errors.snr};
}

/// Relative excess (plain - factorial) / factorial of the photocount
/// correlation <K_0^(n-1) sum_k K_k>, with the reference detector at a point
/// distinct from the bucket modes. Both statistics are evaluated on the same
/// realizations. Compare with ordering_excess().
inline Estimate ordering_dominance(const GiParameters& params, std::uint64_t trials, std::uint64_t seed = 0,
                                   unsigned threads = 1) {
  const TrialBatch batch{params, trials, Regime::photocount_plain, seed, 0};
  batch.validate();
  const ModeEnsembleSpec spec = batch.ensemble();
  const int order = params.order;
  const ThermalSampler sampler;
  const auto moments = detail::run_batches(batch, threads, [&](std::uint64_t t, std::span<double> values) {
    detail::draw_trial(batch, spec, sampler, t, values);
    KahanSum all;
    for (std::size_t k = 1; k < values.size(); ++k) all.add(values[k]);
    return std::pair{std::pow(values[0], order - 1) * all.value(),
                     falling_factorial(values[0], order - 1) * all.value()};
  });
  PairMoments total;
  for (const auto& m : moments) total.merge(m);
  if (!(total.mean_y() > 0.0)) throw DegenerateBatch("normally ordered correlation is zero in every trial");
  // Linearized ratio: batch b contributes (x_b - R y_b) / y, which stays
  // finite when a sparse batch has no nonzero factorial counts.
  const double ratio = total.mean_x() / total.mean_y();
  std::vector<double> linear;
  linear.reserve(moments.size());
  for (const auto& m : moments) linear.push_back((m.mean_x() - ratio * m.mean_y()) / total.mean_y());
  return {ratio - 1.0, summarize_batches(linear).std_error};
}

}  // namespace ghostlab
