#pragma once

// Time series, point clouds, and the windowing/delay-embedding step that
// turns one into many of the other.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "regime_tagger/error.hpp"
#include "regime_tagger/sim.hpp"

namespace regime_tagger::embed {

/// Finite set of points in R^d, row-major.
class PointCloud {
 public:
  PointCloud() = default;
  PointCloud(std::size_t dim, std::vector<double> coords) : dim_(dim), coords_(std::move(coords)) {
    if (dim_ == 0) throw ConfigError("point cloud: dimension must be >= 1");
    if (coords_.size() % dim_ != 0) throw ConfigError("point cloud: coordinate count not a multiple of dim");
    for (double c : coords_) {
      if (!std::isfinite(c)) throw DataError("point cloud: non-finite coordinate");
    }
  }

  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] std::size_t size() const noexcept { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  [[nodiscard]] bool empty() const noexcept { return size() == 0; }
  [[nodiscard]] std::span<const double> point(std::size_t i) const noexcept { return {coords_.data() + i * dim_, dim_}; }
  [[nodiscard]] std::span<const double> coords() const noexcept { return coords_; }

  [[nodiscard]] double distance(std::size_t i, std::size_t j) const noexcept {
    double sum = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) {
      const double d = coords_[i * dim_ + k] - coords_[j * dim_ + k];
      sum += d * d;
    }
    return std::sqrt(sum);
  }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
};

/// Uniformly indexed observations, c channels per sample, row-major.
class TimeSeries {
 public:
  TimeSeries(std::vector<double> times, std::vector<double> values, std::vector<std::string> channel_names)
      : times_(std::move(times)), values_(std::move(values)), names_(std::move(channel_names)) {
    if (names_.empty()) throw ConfigError("time series: needs at least one channel");
    if (times_.size() < 2) throw DataError("time series: needs at least 2 samples");
    if (values_.size() != times_.size() * names_.size()) throw ConfigError("time series: value buffer has wrong size");
    for (std::size_t i = 0; i + 1 < times_.size(); ++i) {
      if (!(times_[i] < times_[i + 1])) throw DataError("time series: times must be strictly increasing");
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw DataError("time series: non-finite value");
    }
  }

  [[nodiscard]] std::size_t size() const noexcept { return times_.size(); }
  [[nodiscard]] std::size_t channels() const noexcept { return names_.size(); }
  [[nodiscard]] double time(std::size_t i) const noexcept { return times_[i]; }
  [[nodiscard]] double value(std::size_t i, std::size_t c) const noexcept { return values_[i * names_.size() + c]; }
  [[nodiscard]] std::span<const double> sample(std::size_t i) const noexcept {
    return {values_.data() + i * names_.size(), names_.size()};
  }
  [[nodiscard]] const std::vector<double>& times() const noexcept { return times_; }
  [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }
  [[nodiscard]] const std::vector<std::string>& channel_names() const noexcept { return names_; }

  [[nodiscard]] std::vector<double> channel(std::size_t c) const {
    if (c >= channels()) throw ConfigError("time series: channel " + std::to_string(c) + " out of range");
    std::vector<double> out(size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = value(i, c);
    return out;
  }

  friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

 private:
  std::vector<double> times_;
  std::vector<double> values_;
  std::vector<std::string> names_;
};

inline std::vector<std::string> default_channel_names(std::size_t dim) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < dim; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

/// Every coordinate of a trajectory as a channel x0, x1, ...
inline TimeSeries to_series(const sim::Trajectory& trajectory) {
  auto data = trajectory.data();
  return TimeSeries(trajectory.times(), std::vector<double>(data.begin(), data.end()),
                    default_channel_names(trajectory.dim()));
}

/// Scalar series of one trajectory coordinate.
inline TimeSeries project(const sim::Trajectory& trajectory, std::size_t channel) {
  if (channel >= trajectory.dim()) {
    throw ConfigError("project: channel " + std::to_string(channel) + " out of range for dimension " +
                      std::to_string(trajectory.dim()));
  }
  std::vector<double> values(trajectory.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = trajectory.state(i)[channel];
  return TimeSeries(trajectory.times(), std::move(values), {"x" + std::to_string(channel)});
}

/// Minimum series length for a (d, tau) delay embedding to yield one point.
constexpr std::size_t delay_extent(std::size_t d, std::size_t tau) noexcept { return (d - 1) * tau + 1; }

/// Delay vectors (z_j, z_{j+tau}, ..., z_{j+(d-1)tau}) for every admissible j.
inline PointCloud delay_embed(std::span<const double> series, std::size_t d, std::size_t tau) {
  if (d < 1) throw ConfigError("delay_embed: d must be >= 1");
  if (tau < 1) throw ConfigError("delay_embed: tau must be >= 1");
  const std::size_t need = delay_extent(d, tau);
  if (series.size() < need) {
    throw ConfigError("delay_embed: series of length " + std::to_string(series.size()) +
                      " too short; need at least " + std::to_string(need) + " samples");
  }
  const std::size_t m = series.size() - (d - 1) * tau;
  std::vector<double> coords;
  coords.reserve(m * d);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = 0; k < d; ++k) coords.push_back(series[j + k * tau]);
  }
  return PointCloud(d, std::move(coords));
}

inline PointCloud delay_embed(const TimeSeries& series, std::size_t d, std::size_t tau) {
  if (series.channels() != 1) throw ConfigError("delay_embed: expects a scalar series");
  return delay_embed(series.values(), d, tau);
}

/// First lag at which the sample autocorrelation drops to zero or below,
/// capped at `cap`. Returns 1 for constant series.
inline std::size_t autocorrelation_zero_lag(std::span<const double> series, std::size_t cap) {
  cap = std::max<std::size_t>(cap, 1);
  const std::size_t n = series.size();
  if (n < 2) return 1;
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double v : series) var += (v - mean) * (v - mean);
  if (var == 0.0) return 1;
  for (std::size_t lag = 1; lag < n && lag <= cap; ++lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) acc += (series[i] - mean) * (series[i + lag] - mean);
    if (acc <= 0.0) return lag;
  }
  return cap;
}

struct RawMode {};

struct DelayMode {
  std::size_t d = 2;
  std::size_t tau = 1;
  std::size_t channel = 0;
};

using WindowMode = std::variant<RawMode, DelayMode>;

struct Window {
  std::size_t start_index = 0;
  double start_time = 0.0;
  PointCloud cloud;
};

inline std::size_t window_count(std::size_t n, std::size_t window_len, std::size_t stride) {
  if (window_len == 0 || window_len > n) return 0;
  return (n - window_len) / stride + 1;
}

/// Windows of `window_len` consecutive samples starting at 0, stride, ...
/// Raw mode uses each multichannel sample as a point; delay mode embeds one
/// channel within each window.
inline std::vector<Window> sliding_windows(const TimeSeries& series, std::size_t window_len, std::size_t stride,
                                           const WindowMode& mode) {
  if (stride < 1) throw ConfigError("sliding_windows: stride must be >= 1");
  if (window_len < 1) throw ConfigError("sliding_windows: window_len must be >= 1");
  if (window_len > series.size()) {
    throw ConfigError("sliding_windows: window_len " + std::to_string(window_len) + " exceeds series length " +
                      std::to_string(series.size()));
  }
  if (const auto* delay = std::get_if<DelayMode>(&mode)) {
    if (delay->channel >= series.channels()) throw ConfigError("sliding_windows: delay channel out of range");
    if (delay->d < 1 || delay->tau < 1) throw ConfigError("sliding_windows: d and tau must be >= 1");
    const std::size_t min_len = std::max<std::size_t>(2 * (delay->d - 1) * delay->tau, delay_extent(delay->d, delay->tau));
    if (window_len < min_len) {
      throw ConfigError("sliding_windows: window_len " + std::to_string(window_len) + " shorter than 2(d-1)tau = " +
                        std::to_string(min_len));
    }
  }

  const std::size_t count = window_count(series.size(), window_len, stride);
  const std::size_t c = series.channels();
  std::vector<Window> windows;
  windows.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t start = w * stride;
    PointCloud cloud;
    if (std::holds_alternative<RawMode>(mode)) {
      auto first = series.values().begin() + static_cast<std::ptrdiff_t>(start * c);
      cloud = PointCloud(c, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(window_len * c)));
    } else {
      const auto& delay = std::get<DelayMode>(mode);
      std::vector<double> scalar(window_len);
      for (std::size_t i = 0; i < window_len; ++i) scalar[i] = series.value(start + i, delay.channel);
      cloud = delay_embed(scalar, delay.d, delay.tau);
    }
    windows.push_back(Window{start, series.time(start), std::move(cloud)});
  }
  return windows;
}

inline std::vector<Window> sliding_windows(const sim::Trajectory& trajectory, std::size_t window_len,
                                           std::size_t stride, const WindowMode& mode) {
  return sliding_windows(to_series(trajectory), window_len, stride, mode);
}

}  // namespace regime_tagger::embed
