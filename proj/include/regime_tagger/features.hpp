#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "regime_tagger/error.hpp"
#include "regime_tagger/ph.hpp"

namespace regime_tagger::features {

/// Top-k persistence lengths of one window, descending, zero-padded.
struct FeatureVector {
  std::size_t window_index = 0;
  double start_time = 0.0;
  std::vector<double> lengths;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// Lengths of the k longest degree-`dim` bars. Capped bars count with their
/// capped death; zero-length bars are skipped.
inline std::vector<double> top_persistence_lengths(const ph::PersistenceDiagram& diagram, std::size_t k, int dim = 1) {
  if (k < 1) throw ConfigError("top_persistence_lengths: k must be >= 1");
  std::vector<double> lengths;
  for (const auto& bar : diagram.bars) {
    if (bar.dim == dim && !bar.zero_length()) lengths.push_back(bar.length());
  }
  std::sort(lengths.begin(), lengths.end(), std::greater<>());
  lengths.resize(k, 0.0);
  return lengths;
}

struct WindowInfo {
  std::size_t window_index = 0;
  double start_time = 0.0;
};

/// Feature vector per diagram, in input order.
inline std::vector<FeatureVector> featurize_windows(std::span<const ph::PersistenceDiagram> diagrams,
                                                    std::span<const WindowInfo> windows, std::size_t k, int dim = 1) {
  if (diagrams.empty()) throw DataError("featurize_windows: no diagrams");
  if (windows.size() != diagrams.size()) throw ConfigError("featurize_windows: window metadata count mismatch");
  std::vector<FeatureVector> out;
  out.reserve(diagrams.size());
  for (std::size_t i = 0; i < diagrams.size(); ++i) {
    out.push_back({windows[i].window_index, windows[i].start_time, top_persistence_lengths(diagrams[i], k, dim)});
  }
  return out;
}

/// Same as above with window_index = position and start_time = position.
inline std::vector<FeatureVector> featurize_windows(std::span<const ph::PersistenceDiagram> diagrams, std::size_t k,
                                                    int dim = 1) {
  std::vector<WindowInfo> info(diagrams.size());
  for (std::size_t i = 0; i < info.size(); ++i) info[i] = {i, static_cast<double>(i)};
  return featurize_windows(diagrams, info, k, dim);
}

/// Optional per-column standardization to zero mean and unit variance.
/// Constant columns are only centred.
inline void standardize(std::vector<FeatureVector>& features) {
  if (features.empty()) return;
  const std::size_t k = features.front().lengths.size();
  const auto n = static_cast<double>(features.size());
  for (std::size_t c = 0; c < k; ++c) {
    double mean = 0.0;
    for (const auto& f : features) mean += f.lengths[c];
    mean /= n;
    double var = 0.0;
    for (const auto& f : features) var += (f.lengths[c] - mean) * (f.lengths[c] - mean);
    const double sd = std::sqrt(var / n);
    for (auto& f : features) {
      f.lengths[c] -= mean;
      if (sd > 0.0) f.lengths[c] /= sd;
    }
  }
}

}  // namespace regime_tagger::features
