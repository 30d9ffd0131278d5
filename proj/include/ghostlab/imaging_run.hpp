#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "ghostlab/accumulators.hpp"
#include "ghostlab/error.hpp"
#include "ghostlab/parallel.hpp"
#include "ghostlab/speckle.hpp"

// Streaming version of the imaging pipeline for long frame sequences: all
// slit widths and orders are accumulated in a single pass over the frames,
// only over the rows the metrics need (slit row + background), so the frame
// stack never has to be held in memory.

namespace ghostlab {

struct ImagingPlan {
  SpeckleConfig speckle;
  std::vector<int> orders{2, 3, 4};
  std::vector<int> slit_widths;
  std::vector<int> export_widths;  // slits whose full-grid images are kept
  NoiseMode noise_mode = NoiseMode::slit_pixels;
  GhostNormalization normalization = GhostNormalization::none;
  double s_scale = kDefaultModeScale;
  DetectorNoise detector_noise;
  std::size_t frames_per_chunk = 16;

  void validate() const {
    speckle.validate();
    if (orders.empty()) throw ConfigError("imaging plan has no orders");
    if (slit_widths.empty()) throw ConfigError("imaging plan has no slit widths");
    for (int n : orders)
      if (n < 2) throw DomainError("ghost-image order must be >= 2");
    for (int w : export_widths)
      if (std::find(slit_widths.begin(), slit_widths.end(), w) == slit_widths.end())
        throw ConfigError("export width " + std::to_string(w) + " is not among the slit widths");
    if (frames_per_chunk == 0) throw ConfigError("frames_per_chunk must be positive");
  }

  int max_order() const { return *std::max_element(orders.begin(), orders.end()); }
};

/// Slit widths giving M_eff = 1, 2, ..., count at the given mode scale.
inline std::vector<int> slit_widths_for_modes(const SpeckleConfig& config, int count, double s_scale = kDefaultModeScale) {
  std::vector<int> widths;
  for (int m = 1; m <= count; ++m) widths.push_back(static_cast<int>(std::lround(m * config.speckle_fwhm * s_scale)));
  return widths;
}

struct ImagingRow {
  int slit_width = 0;
  int order = 2;
  ImageMetrics metrics;
  double model_visibility = 0.0;  // fitted model at this point
  double rel_residual = 0.0;      // measured / model - 1
};

struct ImagingResult {
  std::vector<ImagingRow> rows;  // slit-major, orders in plan order
  std::vector<double> calibration;  // F_k, k = 0..max order (F_0 unused)
  VisibilityFit fit;
  std::vector<GhostImage> exported;  // export-width-major, orders in plan order
  std::vector<int> exported_widths;
  std::uint64_t frames_used = 0;
};

/// Source of frame f; must be callable concurrently.
using FrameSource = std::function<SpeckleFrame(std::uint64_t)>;
/// Observer called once per frame, in frame order.
using FrameSink = std::function<void(std::uint64_t, const SpeckleFrame&)>;

namespace detail {

// Sums over a subset of rows for several (slit, order) channels, channel
// index fastest. Each pixel is updated in frame order.
class ChannelAccumulator {
 public:
  ChannelAccumulator(std::vector<int> rows, int width, std::size_t channels)
      : rows_(std::move(rows)), width_(width), channels_(channels),
        sums_(rows_.size() * static_cast<std::size_t>(width) * channels) {}

  const std::vector<int>& rows() const noexcept { return rows_; }

  // Adds frame contributions for row slot `slot`. buckets[s] per slit,
  // channel ch = s * orders.size() + o.
  void add_row(std::size_t slot, const SpeckleFrame& reference, std::span<const double> buckets,
               std::span<const int> orders) {
    const auto row = reference.row(rows_[slot]);
    const int max_power = *std::max_element(orders.begin(), orders.end()) - 1;
    std::vector<double> powers(static_cast<std::size_t>(max_power) + 1);
    KahanSum* base = sums_.data() + slot * static_cast<std::size_t>(width_) * channels_;
    for (int c = 0; c < width_; ++c) {
      powers[0] = 1.0;
      for (int p = 1; p <= max_power; ++p) powers[p] = powers[p - 1] * row[c];
      KahanSum* px = base + static_cast<std::size_t>(c) * channels_;
      std::size_t ch = 0;
      for (double b : buckets)
        for (int n : orders) px[ch++].add(powers[n - 1] * b);
    }
  }

  double sum(std::size_t slot, int column, std::size_t channel) const {
    return sums_[(slot * width_ + column) * channels_ + channel].value();
  }

  // Full-size image of one channel; rows outside the subset are NaN.
  GhostImage image(std::size_t channel, int order, int height, std::uint64_t frames) const {
    GhostImage img{order, width_, height,
                   std::vector<double>(static_cast<std::size_t>(width_) * height, std::numeric_limits<double>::quiet_NaN()),
                   frames};
    const double inv_n = 1.0 / static_cast<double>(frames);
    for (std::size_t slot = 0; slot < rows_.size(); ++slot)
      for (int c = 0; c < width_; ++c)
        img.values[static_cast<std::size_t>(rows_[slot]) * width_ + c] =
            sums_[(slot * width_ + c) * channels_ + channel].value() * inv_n;
    return img;
  }

 private:
  std::vector<int> rows_;
  int width_;
  std::size_t channels_;
  std::vector<KahanSum> sums_;
};

// cross / (marginal * bucket), the marginal accumulator holding one channel
// per order (bucket 1).
inline GhostImage normalized_image(const ChannelAccumulator& cross, const ChannelAccumulator& marginal,
                                   std::size_t channel, std::size_t order_index, int order, double bucket_sum,
                                   int height, std::uint64_t frames) {
  GhostImage img = cross.image(channel, order, height, frames);
  const int width = img.width;
  for (std::size_t slot = 0; slot < cross.rows().size(); ++slot)
    for (int c = 0; c < width; ++c)
      img.values[static_cast<std::size_t>(cross.rows()[slot]) * width + c] =
          normalized_value(cross.sum(slot, c, channel), marginal.sum(slot, c, order_index), bucket_sum, frames);
  return img;
}

}  // namespace detail

/// Runs the imaging pipeline over `frame_count` frames from `source`.
/// Results are bit-identical for any thread count.
inline ImagingResult run_imaging(const ImagingPlan& plan, const FrameSource& source, std::uint64_t frame_count,
                                 unsigned threads = 1, const FrameSink& sink = {}) {
  plan.validate();
  if (frame_count < 2) throw InsufficientFrames("imaging needs at least 2 frames");
  const SpeckleConfig& cfg = plan.speckle;
  const int w = cfg.width;
  const int h = cfg.height;

  std::vector<MaskGeometry> masks;
  for (int sw : plan.slit_widths) masks.push_back(default_mask(cfg, sw));
  const MaskGeometry& shape = masks.front();

  std::vector<int> roi_rows{shape.slit_row};
  for (int r = shape.background.row; r < shape.background.row + shape.background.rows; ++r) roi_rows.push_back(r);
  detail::ChannelAccumulator roi(roi_rows, w, masks.size() * plan.orders.size());

  std::vector<int> export_index;
  for (int ew : plan.export_widths)
    export_index.push_back(static_cast<int>(std::find(plan.slit_widths.begin(), plan.slit_widths.end(), ew) -
                                            plan.slit_widths.begin()));
  std::vector<int> all_rows(static_cast<std::size_t>(h));
  for (int r = 0; r < h; ++r) all_rows[r] = r;
  detail::ChannelAccumulator full(export_index.empty() ? std::vector<int>{} : all_rows, w,
                                  export_index.size() * plan.orders.size());

  const bool normalize = plan.normalization == GhostNormalization::marginal;
  const std::vector<double> unit_bucket{1.0};
  detail::ChannelAccumulator roi_marginal(normalize ? roi_rows : std::vector<int>{}, w, plan.orders.size());
  detail::ChannelAccumulator full_marginal(normalize ? full.rows() : std::vector<int>{}, w, plan.orders.size());
  std::vector<KahanSum> bucket_sums(masks.size());

  MomentSums moments(plan.max_order());
  const bool noisy = plan.detector_noise.sigma > 0.0;

  struct Prepared {
    SpeckleFrame clean;
    SpeckleFrame reference;  // equals clean when detector noise is off
    std::vector<double> buckets;
    std::vector<double> export_buckets;
    std::vector<double> moment_partial;
  };

  for (std::uint64_t start = 0; start < frame_count; start += plan.frames_per_chunk) {
    const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(plan.frames_per_chunk, frame_count - start));
    std::vector<Prepared> chunk(n);
    parallel_for(n, threads, [&](std::size_t i) {
      Prepared& p = chunk[i];
      const std::uint64_t f = start + i;
      p.clean = source(f);
      if (p.clean.width != w || p.clean.height != h) throw DomainError("frame dimensions do not match the config");
      const SpeckleFrame* signal = &p.clean;
      SpeckleFrame signal_noisy;
      if (noisy) {
        p.reference = detail::with_detector_noise(p.clean, plan.detector_noise, f, 0);
        signal_noisy = detail::with_detector_noise(p.clean, plan.detector_noise, f, 1);
        signal = &signal_noisy;
      }
      const SpeckleFrame& ref = noisy ? p.reference : p.clean;
      for (const auto& m : masks) p.buckets.push_back(bucket_signal(*signal, m));
      for (int idx : export_index) p.export_buckets.push_back(p.buckets[static_cast<std::size_t>(idx)]);
      p.moment_partial = moments.partial(ref);
    });
    for (std::size_t i = 0; i < n; ++i) {
      moments.add_partial(chunk[i].moment_partial);
      for (std::size_t s = 0; s < masks.size(); ++s) bucket_sums[s].add(chunk[i].buckets[s]);
      if (sink) sink(start + i, chunk[i].clean);
    }
    parallel_for(roi.rows().size(), threads, [&](std::size_t slot) {
      for (auto& p : chunk) {
        roi.add_row(slot, noisy ? p.reference : p.clean, p.buckets, plan.orders);
        if (normalize) roi_marginal.add_row(slot, noisy ? p.reference : p.clean, unit_bucket, plan.orders);
      }
    });
    if (!export_index.empty()) {
      parallel_for(full.rows().size(), threads, [&](std::size_t slot) {
        for (auto& p : chunk) {
          full.add_row(slot, noisy ? p.reference : p.clean, p.export_buckets, plan.orders);
          if (normalize) full_marginal.add_row(slot, noisy ? p.reference : p.clean, unit_bucket, plan.orders);
        }
      });
    }
  }

  ImagingResult result;
  result.frames_used = frame_count;
  result.calibration.assign(static_cast<std::size_t>(plan.max_order()) + 1, 1.0);
  for (int k = 1; k <= plan.max_order(); ++k) result.calibration[k] = moments.calibration(k);

  std::vector<VisibilityPoint> points;
  for (std::size_t s = 0; s < masks.size(); ++s) {
    for (std::size_t o = 0; o < plan.orders.size(); ++o) {
      const std::size_t ch = s * plan.orders.size() + o;
      const GhostImage img = normalize ? detail::normalized_image(roi, roi_marginal, ch, o, plan.orders[o],
                                                                  bucket_sums[s].value(), h, frame_count)
                                       : roi.image(ch, plan.orders[o], h, frame_count);
      ImagingRow row;
      row.slit_width = plan.slit_widths[s];
      row.order = plan.orders[o];
      row.metrics = measure_metrics(img, masks[s], cfg, plan.noise_mode, plan.s_scale);
      row.metrics.g_n_calibration = result.calibration;
      points.push_back({row.order, row.slit_width, row.metrics.visibility});
      result.rows.push_back(std::move(row));
    }
  }
  result.fit = fit_visibility_model(points, cfg.speckle_fwhm, result.calibration);
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    result.rows[i].model_visibility = result.fit.model[i];
    result.rows[i].rel_residual = result.fit.rel_residuals[i];
  }

  for (std::size_t e = 0; e < export_index.size(); ++e) {
    for (std::size_t o = 0; o < plan.orders.size(); ++o) {
      const std::size_t ch = e * plan.orders.size() + o;
      const double bucket = bucket_sums[static_cast<std::size_t>(export_index[e])].value();
      result.exported.push_back(normalize ? detail::normalized_image(full, full_marginal, ch, o, plan.orders[o], bucket, h,
                                                                     frame_count)
                                          : full.image(ch, plan.orders[o], h, frame_count));
      result.exported_widths.push_back(plan.export_widths[e]);
    }
  }
  return result;
}

/// Convenience overload generating frames from plan.speckle.
inline ImagingResult run_imaging(const ImagingPlan& plan, unsigned threads = 1, const FrameSink& sink = {}) {
  const SpeckleGenerator generator(plan.speckle);
  return run_imaging(
      plan, [&](std::uint64_t f) { return generator.generate(f); }, plan.speckle.frames, threads, sink);
}

}  // namespace ghostlab
