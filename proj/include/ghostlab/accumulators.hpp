#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

namespace ghostlab {

/// Neumaier-compensated running sum.
class KahanSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x))
      compensation_ += (sum_ - t) + x;
    else
      compensation_ += (x - t) + sum_;
    sum_ = t;
  }
  KahanSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }
  double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

inline double compensated_sum(std::span<const double> values) noexcept {
  KahanSum s;
  for (double v : values) s.add(v);
  return s.value();
}

/// Streaming means, variances and covariance of a pair (x, y).
/// Welford updates; merge() is Chan's pairwise combination, so a fixed
/// merge order gives a fixed result.
class PairMoments {
 public:
  void add(double x, double y) noexcept {
    ++count_;
    const double n = static_cast<double>(count_);
    const double dx = x - mean_x_;
    mean_x_ += dx / n;
    const double dy = y - mean_y_;
    mean_y_ += dy / n;
    m2x_ += dx * (x - mean_x_);
    m2y_ += dy * (y - mean_y_);
    cxy_ += dx * (y - mean_y_);
  }

  void merge(const PairMoments& other) noexcept {
    if (other.count_ == 0) return;
    if (count_ == 0) {
      *this = other;
      return;
    }
    const double na = static_cast<double>(count_);
    const double nb = static_cast<double>(other.count_);
    const double n = na + nb;
    const double dx = other.mean_x_ - mean_x_;
    const double dy = other.mean_y_ - mean_y_;
    mean_x_ += dx * nb / n;
    mean_y_ += dy * nb / n;
    m2x_ += other.m2x_ + dx * dx * na * nb / n;
    m2y_ += other.m2y_ + dy * dy * na * nb / n;
    cxy_ += other.cxy_ + dx * dy * na * nb / n;
    count_ += other.count_;
  }

  std::uint64_t count() const noexcept { return count_; }
  double mean_x() const noexcept { return mean_x_; }
  double mean_y() const noexcept { return mean_y_; }
  // Bessel-corrected.
  double var_x() const noexcept { return count_ > 1 ? m2x_ / static_cast<double>(count_ - 1) : nan(); }
  double var_y() const noexcept { return count_ > 1 ? m2y_ / static_cast<double>(count_ - 1) : nan(); }
  double cov() const noexcept { return count_ > 1 ? cxy_ / static_cast<double>(count_ - 1) : nan(); }

 private:
  static double nan() noexcept { return std::numeric_limits<double>::quiet_NaN(); }

  std::uint64_t count_ = 0;
  double mean_x_ = 0.0;
  double mean_y_ = 0.0;
  double m2x_ = 0.0;
  double m2y_ = 0.0;
  double cxy_ = 0.0;
};

/// Mean and standard error of a set of independent batch estimates.
struct BatchSummary {
  double mean = 0.0;
  double std_error = 0.0;
};

inline BatchSummary summarize_batches(std::span<const double> estimates) noexcept {
  const auto b = estimates.size();
  if (b == 0) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  const double mean = compensated_sum(estimates) / static_cast<double>(b);
  if (b < 2) return {mean, std::numeric_limits<double>::quiet_NaN()};
  KahanSum ss;
  for (double e : estimates) ss.add((e - mean) * (e - mean));
  const double var = ss.value() / static_cast<double>(b - 1);
  return {mean, std::sqrt(var / static_cast<double>(b))};
}

}  // namespace ghostlab
