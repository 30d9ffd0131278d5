#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ghostlab/accumulators.hpp"
#include "ghostlab/combinatorics.hpp"
#include "ghostlab/error.hpp"
#include "ghostlab/parallel.hpp"
#include "ghostlab/rng.hpp"

// Synthetic pseudothermal speckle and 2-point ghost-image reconstruction
// with a software slit mask and bucket detector.

namespace ghostlab {

/// Default mode-count scale factor: one mode per 1.19 speckle FWHM.
inline constexpr double kDefaultModeScale = 1.19;

struct SpeckleConfig {
  int width = 768;
  int height = 512;
  double speckle_fwhm = 30.0;    // intensity autocorrelation FWHM, pixels
  double mean_intensity = 1.0;   // per pixel, arbitrary units
  std::uint64_t frames = 5000;
  std::uint64_t seed = 0;

  void validate() const {
    if (width < 1 || height < 1) throw DomainError("grid dimensions must be positive");
    if (!(speckle_fwhm >= 2.0)) throw DomainError("speckle_fwhm must be >= 2 pixels");
    if (!(mean_intensity > 0.0) || !std::isfinite(mean_intensity)) throw DomainError("mean_intensity must be > 0");
    if (frames < 2) throw DomainError("frames must be >= 2");
    if (width < 4.0 * speckle_fwhm || height < 4.0 * speckle_fwhm)
      throw GridTooSmall("grid " + std::to_string(width) + "x" + std::to_string(height) +
                         " is smaller than 4 x speckle_fwhm (" + std::to_string(speckle_fwhm) + ")");
  }
};

struct SpeckleFrame {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;  // row-major

  SpeckleFrame() = default;
  SpeckleFrame(int w, int h, double fill = 0.0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  double& at(int row, int col) noexcept { return pixels[static_cast<std::size_t>(row) * width + col]; }
  double at(int row, int col) const noexcept { return pixels[static_cast<std::size_t>(row) * width + col]; }
  std::span<const double> row(int r) const noexcept {
    return {pixels.data() + static_cast<std::size_t>(r) * width, static_cast<std::size_t>(width)};
  }
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
};
struct FftwPlanDestroy {
  void operator()(fftw_plan_s* p) const noexcept {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(p);
  }
};
using FftwBuffer = std::unique_ptr<fftw_complex[], FftwFree>;
using FftwPlan = std::unique_ptr<fftw_plan_s, FftwPlanDestroy>;

inline FftwBuffer fftw_buffer(std::size_t n) {
  auto* p = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  if (p == nullptr) throw std::bad_alloc();
  return FftwBuffer(p);
}

}  // namespace detail

/// Circular complex Gaussian speckle by spectral filtering of white noise.
///
/// The field spectrum has a Gaussian power envelope exp(-k^2 / (2 s^2)) with
/// s = 2 sqrt(ln 2) / fwhm, which makes the normalized intensity
/// autocorrelation |mu(d)|^2 = exp(-s^2 d^2) have the requested FWHM.
/// Boundaries are periodic. Only spectral bins with amplitude above 1e-12 of
/// the peak are populated. Frame f is drawn from stream
/// (seed, kSpeckleFrames + f), so frames are independent and reproducible.
class SpeckleGenerator {
 public:
  explicit SpeckleGenerator(const SpeckleConfig& config) : config_(config) {
    config_.validate();
    const double sigma_k = 2.0 * std::sqrt(std::numbers::ln2) / config_.speckle_fwhm;
    const double cutoff = 2.0 * sigma_k * std::sqrt(2.0 * 12.0 * std::numbers::ln10);  // amplitude 1e-12
    const int w = config_.width;
    const int h = config_.height;
    double power = 0.0;
    for (int r = 0; r < h; ++r) {
      const double ky = 2.0 * std::numbers::pi * (r <= h / 2 ? r : r - h) / h;
      for (int c = 0; c < w; ++c) {
        const double kx = 2.0 * std::numbers::pi * (c <= w / 2 ? c : c - w) / w;
        const double k2 = kx * kx + ky * ky;
        if (k2 > cutoff * cutoff) continue;
        const double amp = std::exp(-k2 / (4.0 * sigma_k * sigma_k));
        bins_.push_back(static_cast<std::size_t>(r) * w + c);
        amplitudes_.push_back(amp);
        power += amp * amp;
      }
    }
    // E|E(x)|^2 = sum |amp|^2 for unit-variance complex white noise.
    const double scale = std::sqrt(config_.mean_intensity / power);
    for (double& a : amplitudes_) a *= scale;

    auto probe = detail::fftw_buffer(pixel_count());
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan_.reset(fftw_plan_dft_2d(h, w, probe.get(), probe.get(), FFTW_BACKWARD, FFTW_ESTIMATE));
    if (!plan_) throw Error("FFTW failed to create a plan");
  }

  const SpeckleConfig& config() const noexcept { return config_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(config_.width) * static_cast<std::size_t>(config_.height);
  }

  /// Thread-safe.
  SpeckleFrame generate(std::uint64_t frame_index) const {
    auto buffer = detail::fftw_buffer(pixel_count());
    std::fill_n(&buffer[0][0], 2 * pixel_count(), 0.0);
    RngStream rng(config_.seed, stream_domain::kSpeckleFrames + frame_index);
    for (std::size_t i = 0; i < bins_.size(); ++i) {
      const double re = rng.normal() * std::numbers::sqrt2 / 2.0;
      const double im = rng.normal() * std::numbers::sqrt2 / 2.0;
      buffer[bins_[i]][0] = amplitudes_[i] * re;
      buffer[bins_[i]][1] = amplitudes_[i] * im;
    }
    fftw_execute_dft(plan_.get(), buffer.get(), buffer.get());
    SpeckleFrame frame(config_.width, config_.height);
    for (std::size_t i = 0; i < frame.pixels.size(); ++i)
      frame.pixels[i] = buffer[i][0] * buffer[i][0] + buffer[i][1] * buffer[i][1];
    return frame;
  }

 private:
  SpeckleConfig config_;
  std::vector<std::size_t> bins_;
  std::vector<double> amplitudes_;
  detail::FftwPlan plan_;
};

/// All config.frames frames, generated in parallel.
inline std::vector<SpeckleFrame> generate_frames(const SpeckleConfig& config, unsigned threads = 1) {
  const SpeckleGenerator generator(config);
  std::vector<SpeckleFrame> frames(config.frames);
  parallel_for(frames.size(), threads, [&](std::size_t f) { frames[f] = generator.generate(f); });
  return frames;
}

struct PixelRect {
  int row = 0;
  int col = 0;
  int rows = 0;
  int cols = 0;

  std::size_t area() const noexcept { return static_cast<std::size_t>(std::max(rows, 0)) * std::max(cols, 0); }
  bool contains_row(int r) const noexcept { return r >= row && r < row + rows; }
};

/// One-pixel-high slit plus the background rectangle used for noise and
/// G_back estimates.
struct MaskGeometry {
  int slit_row = 0;
  int slit_start = 0;
  int slit_width = 1;
  PixelRect background;

  void validate(int width, int height) const {
    if (slit_width < 1) throw EmptyRegion("slit_width must be >= 1");
    if (background.area() == 0) throw EmptyRegion("background region is empty");
    if (slit_row < 0 || slit_row >= height || slit_start < 0 || slit_start + slit_width > width)
      throw DomainError("slit lies outside the grid");
    if (background.row < 0 || background.col < 0 || background.row + background.rows > height ||
        background.col + background.cols > width)
      throw DomainError("background region lies outside the grid");
    if (background.contains_row(slit_row)) throw DomainError("background region overlaps the slit row");
  }
};

/// Slit centred horizontally on row height/2; background = every row at
/// least three speckle widths below it, across the full width.
inline MaskGeometry default_mask(const SpeckleConfig& config, int slit_width) {
  MaskGeometry mask;
  mask.slit_row = config.height / 2;
  mask.slit_width = slit_width;
  mask.slit_start = (config.width - slit_width) / 2;
  const int first = mask.slit_row + static_cast<int>(std::ceil(3.0 * config.speckle_fwhm));
  mask.background = {first, 0, std::max(0, config.height - first), config.width};
  if (mask.slit_start < 0) throw DomainError("slit wider than the grid");
  mask.validate(config.width, config.height);
  return mask;
}

inline double bucket_signal(const SpeckleFrame& frame, const MaskGeometry& mask) {
  KahanSum sum;
  for (int c = mask.slit_start; c < mask.slit_start + mask.slit_width; ++c) sum.add(frame.at(mask.slit_row, c));
  return sum.value();
}

struct GhostImage {
  int order = 2;
  int width = 0;
  int height = 0;
  std::vector<double> values;  // per-pixel <I_ref^(n-1) B>
  std::uint64_t frames_used = 0;

  double at(int row, int col) const noexcept { return values[static_cast<std::size_t>(row) * width + col]; }
};

/// Independent additive Gaussian detector noise per arm; zero disables it.
struct DetectorNoise {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

namespace detail {

// Frame as seen by one arm (0 = reference, 1 = bucket), clamped at zero.
inline SpeckleFrame with_detector_noise(const SpeckleFrame& frame, const DetectorNoise& noise, std::uint64_t index,
                                        int arm) {
  SpeckleFrame out = frame;
  RngStream rng(noise.seed, stream_domain::kDetectorNoise + 2 * index + static_cast<std::uint64_t>(arm));
  for (double& p : out.pixels) p = std::max(0.0, p + noise.sigma * rng.normal());
  return out;
}

// <I^(n-1) B> / (<I^(n-1)> <B>) from raw sums over n frames; zero when a
// marginal vanishes (a pixel or bucket that never saw light).
inline double normalized_value(double cross_sum, double power_sum, double bucket_sum, std::uint64_t frames) noexcept {
  const double denom = power_sum * bucket_sum;
  return denom > 0.0 ? cross_sum * static_cast<double>(frames) / denom : 0.0;
}

}  // namespace detail

enum class GhostNormalization {
  none,      // <I(x)^(n-1) B>
  marginal,  // <I(x)^(n-1) B> / (<I(x)^(n-1)> <B>)
};

/// Order-n ghost image: per pixel (1/N) sum_f I_f(x)^(n-1) B_f, with the
/// bucket B_f summed over the slit of the same frame. The marginal variant
/// divides each pixel by its own sample moments, which cancels the
/// finite-sample scatter of <I(x)^(n-1)> between pixels.
inline GhostImage reconstruct(std::span<const SpeckleFrame> frames, const MaskGeometry& mask, int order,
                              const DetectorNoise& noise = {},
                              GhostNormalization normalization = GhostNormalization::none) {
  if (order < 2) throw DomainError("ghost-image order must be >= 2");
  if (frames.size() < 2) throw InsufficientFrames("reconstruction needs at least 2 frames");
  const int w = frames.front().width;
  const int h = frames.front().height;
  mask.validate(w, h);
  std::vector<KahanSum> sums(static_cast<std::size_t>(w) * h);
  std::vector<KahanSum> marginals(normalization == GhostNormalization::marginal ? sums.size() : 0);
  KahanSum bucket_sum;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    if (frames[f].width != w || frames[f].height != h) throw DomainError("frame dimensions differ");
    const SpeckleFrame* reference = &frames[f];
    const SpeckleFrame* signal = &frames[f];
    SpeckleFrame ref_noisy, sig_noisy;
    if (noise.sigma > 0.0) {
      ref_noisy = detail::with_detector_noise(frames[f], noise, f, 0);
      sig_noisy = detail::with_detector_noise(frames[f], noise, f, 1);
      reference = &ref_noisy;
      signal = &sig_noisy;
    }
    const double bucket = bucket_signal(*signal, mask);
    bucket_sum.add(bucket);
    for (std::size_t i = 0; i < sums.size(); ++i) {
      const double power = std::pow(reference->pixels[i], order - 1);
      sums[i].add(power * bucket);
      if (!marginals.empty()) marginals[i].add(power);
    }
  }
  GhostImage image{order, w, h, std::vector<double>(sums.size()), frames.size()};
  const double inv_n = 1.0 / static_cast<double>(frames.size());
  for (std::size_t i = 0; i < sums.size(); ++i) image.values[i] = sums[i].value() * inv_n;
  if (!marginals.empty())
    for (std::size_t i = 0; i < sums.size(); ++i)
      image.values[i] = detail::normalized_value(sums[i].value(), marginals[i].value(), bucket_sum.value(), frames.size());
  return image;
}

enum class NoiseMode {
  slit_pixels,        // std over slit pixels of (G(i, slit) - <G>_background)
  background_pixels,  // std over background pixels of G
};

struct ImageMetrics {
  double visibility = 0.0;
  double snr_normalized = 0.0;  // (signal / noise) / sqrt(N), clamped at zero
  double effective_modes = 1.0;
  double raw_width = 0.0;  // slit width in speckle FWHM units, before scaling
  std::vector<double> g_n_calibration;

  double slit_mean = 0.0;
  double background_mean = 0.0;
  double signal = 0.0;
  double noise = 0.0;
  bool noise_degenerate = false;
};

/// M_eff = slit_width / (speckle_fwhm * s_scale), at least one mode.
inline double estimate_effective_modes(const MaskGeometry& mask, const SpeckleConfig& config,
                                       double s_scale = kDefaultModeScale) {
  if (!(s_scale > 0.0)) throw DomainError("s_scale must be positive");
  return std::max(1.0, mask.slit_width / (config.speckle_fwhm * s_scale));
}

/// Signal, noise, visibility and normalized SNR of a ghost image from its
/// slit-row pixels and background rectangle.
inline ImageMetrics measure_metrics(const GhostImage& image, const MaskGeometry& mask, const SpeckleConfig& config,
                                    NoiseMode mode = NoiseMode::slit_pixels, double s_scale = kDefaultModeScale) {
  mask.validate(image.width, image.height);
  if (image.frames_used < 2) throw InsufficientFrames("ghost image built from fewer than 2 frames");

  KahanSum back_sum;
  for (int r = mask.background.row; r < mask.background.row + mask.background.rows; ++r)
    for (int c = mask.background.col; c < mask.background.col + mask.background.cols; ++c) back_sum.add(image.at(r, c));
  const double back_mean = back_sum.value() / static_cast<double>(mask.background.area());

  KahanSum slit_sum;
  for (int c = mask.slit_start; c < mask.slit_start + mask.slit_width; ++c) slit_sum.add(image.at(mask.slit_row, c));
  const double slit_mean = slit_sum.value() / mask.slit_width;

  double noise = 0.0;
  if (mode == NoiseMode::slit_pixels) {
    if (mask.slit_width >= 2) {
      KahanSum ss;
      for (int c = mask.slit_start; c < mask.slit_start + mask.slit_width; ++c) {
        const double d = (image.at(mask.slit_row, c) - back_mean) - (slit_mean - back_mean);
        ss.add(d * d);
      }
      noise = std::sqrt(ss.value() / (mask.slit_width - 1));
    }
  } else {
    KahanSum ss;
    for (int r = mask.background.row; r < mask.background.row + mask.background.rows; ++r)
      for (int c = mask.background.col; c < mask.background.col + mask.background.cols; ++c) {
        const double d = image.at(r, c) - back_mean;
        ss.add(d * d);
      }
    if (mask.background.area() >= 2) noise = std::sqrt(ss.value() / static_cast<double>(mask.background.area() - 1));
  }

  ImageMetrics m;
  m.slit_mean = slit_mean;
  m.background_mean = back_mean;
  m.signal = slit_mean - back_mean;
  m.noise = noise;
  const double denom = slit_mean + back_mean;
  m.visibility = denom != 0.0 ? m.signal / denom : 0.0;
  // Relative threshold: a flat image leaves only round-off in the noise.
  m.noise_degenerate = !(noise > 1e-12 * std::max(std::fabs(slit_mean), std::fabs(back_mean)));
  if (m.noise_degenerate) {
    m.snr_normalized = 0.0;
    if (std::fabs(m.signal) <= 1e-12 * std::fabs(denom)) m.visibility = 0.0;
  } else {
    m.snr_normalized = std::max(0.0, m.signal / noise / std::sqrt(static_cast<double>(image.frames_used)));
  }
  m.raw_width = mask.slit_width / config.speckle_fwhm;
  m.effective_modes = estimate_effective_modes(mask, config, s_scale);
  return m;
}

/// Accumulates the global power sums needed for F_n.
class MomentSums {
 public:
  explicit MomentSums(int max_order = 4) : sums_(static_cast<std::size_t>(max_order) + 1) {}

  /// Adds one frame; per-frame partial sums are folded in call order.
  void add_frame(const SpeckleFrame& frame) { add_partial(partial(frame)); }

  std::vector<double> partial(const SpeckleFrame& frame) const {
    std::vector<KahanSum> local(sums_.size());
    for (double v : frame.pixels) {
      double p = 1.0;
      for (std::size_t k = 1; k < local.size(); ++k) {
        p *= v;
        local[k].add(p);
      }
    }
    std::vector<double> out(sums_.size());
    for (std::size_t k = 1; k < out.size(); ++k) out[k] = local[k].value();
    out[0] = static_cast<double>(frame.pixels.size());
    return out;
  }

  void add_partial(const std::vector<double>& part) {
    for (std::size_t k = 0; k < sums_.size(); ++k) sums_[k].add(part[k]);
  }

  int max_order() const noexcept { return static_cast<int>(sums_.size()) - 1; }

  /// F_n = <I^n> / (n! <I>^n).
  double calibration(int order) const {
    if (order < 1 || order > max_order()) throw DomainError("calibration order out of range");
    const double count = sums_[0].value();
    if (!(count > 0.0)) throw InsufficientFrames("no pixels accumulated");
    const double mean = sums_[1].value() / count;
    const double moment = sums_[static_cast<std::size_t>(order)].value() / count;
    return moment / (static_cast<double>(factorial(order)) * std::pow(mean, order));
  }

 private:
  std::vector<KahanSum> sums_;
};

/// F_n averaged over all pixels and frames.
inline double calibrate_autocorrelation(std::span<const SpeckleFrame> frames, int order) {
  if (order < 1) throw DomainError("calibration order must be >= 1");
  if (frames.empty()) throw InsufficientFrames("calibration needs at least one frame");
  MomentSums sums(order);
  for (const auto& f : frames) sums.add_frame(f);
  return sums.calibration(order);
}

/// FWHM (pixels) of the normalized horizontal intensity autocorrelation
/// <I(x) I(x+d)> / <I>^2 - 1, averaged over all rows and frames, with
/// periodic wrap and linear interpolation at half maximum.
inline double measure_autocorrelation_fwhm(std::span<const SpeckleFrame> frames, int max_lag = 0) {
  if (frames.empty()) throw InsufficientFrames("autocorrelation needs at least one frame");
  const int w = frames.front().width;
  if (max_lag <= 0) max_lag = w / 2;
  std::vector<KahanSum> lag(static_cast<std::size_t>(max_lag) + 1);
  KahanSum total;
  double count = 0.0;
  for (const auto& f : frames) {
    for (int r = 0; r < f.height; ++r) {
      const auto row = f.row(r);
      for (int d = 0; d <= max_lag; ++d) {
        double s = 0.0;
        for (int c = 0; c < w; ++c) s += row[c] * row[(c + d) % w];
        lag[d].add(s);
      }
      for (double v : row) total.add(v);
      count += w;
    }
  }
  const double mean = total.value() / count;
  std::vector<double> c(lag.size());
  for (std::size_t d = 0; d < lag.size(); ++d) c[d] = lag[d].value() / count / (mean * mean) - 1.0;
  const double half = 0.5 * c[0];
  for (std::size_t d = 1; d < c.size(); ++d) {
    if (c[d] <= half) {
      const double frac = (c[d - 1] - half) / (c[d - 1] - c[d]);
      return 2.0 * (static_cast<double>(d - 1) + frac);
    }
  }
  throw DomainError("autocorrelation never drops to half maximum within max_lag");
}

/// Visibility with non-ideal thermal statistics <I^k> = F_k k! <I>^k:
/// (n F_n - F_{n-1}) / (n F_n + (2M - 1) F_{n-1}). Ideal factors give
/// (n-1)/(2M + n - 1).
inline double model_visibility(int order, double modes, double f_n = 1.0, double f_n_minus_1 = 1.0) {
  const double n = order;
  return (n * f_n - f_n_minus_1) / (n * f_n + (2.0 * modes - 1.0) * f_n_minus_1);
}

struct VisibilityPoint {
  int order = 2;
  int slit_width = 1;
  double visibility = 0.0;
};

struct VisibilityFit {
  double s_scale = kDefaultModeScale;
  double max_rel_residual = 0.0;
  std::vector<double> model;
  std::vector<double> rel_residuals;  // measured / model - 1
};

/// Fits the mode-count scale factor shared by all orders, minimizing the
/// largest relative residual of measured vs model visibility.
/// `calibration[k]` holds F_k (index 0 unused, F_1 = 1).
inline VisibilityFit fit_visibility_model(std::span<const VisibilityPoint> points, double speckle_fwhm,
                                          std::span<const double> calibration, double s_lo = 0.5, double s_hi = 2.0) {
  if (points.empty()) throw DomainError("no visibility points to fit");
  auto evaluate = [&](double s, VisibilityFit* out) {
    double worst = 0.0;
    for (const auto& p : points) {
      if (p.order < 2 || static_cast<std::size_t>(p.order) >= calibration.size())
        throw DomainError("missing F_n calibration for order " + std::to_string(p.order));
      const double modes = std::max(1.0, p.slit_width / (speckle_fwhm * s));
      const double model = model_visibility(p.order, modes, calibration[p.order], calibration[p.order - 1]);
      const double rel = p.visibility / model - 1.0;
      worst = std::max(worst, std::fabs(rel));
      if (out) {
        out->model.push_back(model);
        out->rel_residuals.push_back(rel);
      }
    }
    return worst;
  };
  // Coarse scan, then golden-section refinement around the best node.
  constexpr int kScan = 300;
  double best_s = s_lo;
  double best = evaluate(s_lo, nullptr);
  for (int i = 1; i <= kScan; ++i) {
    const double s = s_lo + (s_hi - s_lo) * i / kScan;
    const double v = evaluate(s, nullptr);
    if (v < best) {
      best = v;
      best_s = s;
    }
  }
  const double step = (s_hi - s_lo) / kScan;
  double lo = std::max(s_lo, best_s - step);
  double hi = std::min(s_hi, best_s + step);
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = evaluate(x1, nullptr), f2 = evaluate(x2, nullptr);
  for (int it = 0; it < 100 && hi - lo > 1e-9; ++it) {
    if (f1 > f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = evaluate(x2, nullptr);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = evaluate(x1, nullptr);
    }
  }
  const double refined = 0.5 * (lo + hi);
  if (evaluate(refined, nullptr) < best) best_s = refined;
  VisibilityFit fit;
  fit.s_scale = best_s;
  fit.max_rel_residual = evaluate(best_s, &fit);
  return fit;
}

}  // namespace ghostlab
