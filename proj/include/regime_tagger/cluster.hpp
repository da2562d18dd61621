#pragma once

// k-means (Lloyd iterations, k-means++ seeding, restarts) with a canonical
// label order so that tags are reproducible across runs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "regime_tagger/error.hpp"
#include "regime_tagger/rng.hpp"

namespace regime_tagger::cluster {

using Point = std::vector<double>;

struct KMeansOptions {
  std::size_t k = 2;
  std::uint64_t seed = 42;
  std::size_t max_iter = 300;
  double tol = 1e-9;
  std::size_t restarts = 10;
};

struct KMeansModel {
  std::size_t k = 0;
  std::vector<Point> centroids;
  double inertia = 0.0;
  std::uint64_t seed = 0;
  std::size_t iterations_run = 0;
  /// Inertia after every assignment step of the retained restart.
  std::vector<double> inertia_history;

  [[nodiscard]] std::size_t dim() const noexcept { return centroids.empty() ? 0 : centroids.front().size(); }
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

namespace detail {

/// Nearest centroid; ties go to the lowest index.
inline std::size_t nearest(const std::vector<Point>& centroids, std::span<const double> x, double* dist2 = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(centroids[c], x);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist2 != nullptr) *dist2 = best_d;
  return best;
}

inline std::vector<Point> plus_plus_seeds(const std::vector<Point>& data, std::size_t k, Rng& rng) {
  const std::size_t n = data.size();
  std::vector<Point> centers;
  centers.push_back(data[rng.below(n)]);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(data[i], centers.back()));
      total += d2[i];
    }
    std::size_t pick = n - 1;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        target -= d2[i];
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
      // Guard against landing on a zero-weight tail through rounding.
      while (d2[pick] == 0.0 && pick > 0) --pick;
    } else {
      pick = rng.below(n);
    }
    centers.push_back(data[pick]);
  }
  return centers;
}

struct LloydResult {
  std::vector<Point> centroids;
  double inertia = 0.0;
  std::size_t iterations = 0;
  std::vector<double> history;
};

inline LloydResult lloyd(const std::vector<Point>& data, std::vector<Point> centroids, const KMeansOptions& opt) {
  const std::size_t n = data.size();
  const std::size_t k = centroids.size();
  const std::size_t dim = data.front().size();
  std::vector<std::size_t> labels(n, 0);
  std::vector<double> d2(n, 0.0);
  LloydResult result;

  auto assign = [&] {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = nearest(centroids, data[i], &d2[i]);
      inertia += d2[i];
    }
    return inertia;
  };

  double inertia = assign();
  result.history.push_back(inertia);
  std::size_t it = 0;
  while (it < opt.max_iter) {
    ++it;
    std::vector<Point> next(k, Point(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[labels[i]];
      for (std::size_t j = 0; j < dim; ++j) next[labels[i]][j] += data[i][j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // Empty cluster: move it onto the point worst served by its centroid.
        const auto far = static_cast<std::size_t>(std::max_element(d2.begin(), d2.end()) - d2.begin());
        next[c] = data[far];
        d2[far] = 0.0;
        continue;
      }
      for (std::size_t j = 0; j < dim; ++j) next[c][j] /= static_cast<double>(counts[c]);
    }
    double movement = 0.0;
    for (std::size_t c = 0; c < k; ++c) movement = std::max(movement, std::sqrt(squared_distance(next[c], centroids[c])));
    centroids = std::move(next);
    const double updated = assign();
    // Lloyd steps never increase inertia; allow only floating-point noise.
    if (updated > inertia * (1.0 + 1e-12) + 1e-300) {
      throw std::logic_error("kmeans: inertia increased from " + std::to_string(inertia) + " to " + std::to_string(updated));
    }
    inertia = updated;
    result.history.push_back(inertia);
    if (movement < opt.tol) break;
  }
  result.centroids = std::move(centroids);
  result.inertia = inertia;
  result.iterations = it;
  return result;
}

}  // namespace detail

/// Orders centroids by ascending Euclidean norm, ties lexicographically.
inline void canonicalize(std::vector<Point>& centroids) {
  std::stable_sort(centroids.begin(), centroids.end(), [](const Point& a, const Point& b) {
    const double na = squared_distance(a, Point(a.size(), 0.0));
    const double nb = squared_distance(b, Point(b.size(), 0.0));
    if (na != nb) return na < nb;
    return a < b;
  });
}

inline KMeansModel kmeans_fit(const std::vector<Point>& data, const KMeansOptions& opt) {
  if (opt.k < 1) throw ConfigError("kmeans: k must be >= 1");
  if (opt.restarts < 1) throw ConfigError("kmeans: restarts must be >= 1");
  if (data.size() < opt.k) {
    throw DataError("kmeans: " + std::to_string(data.size()) + " points cannot form " + std::to_string(opt.k) +
                    " clusters");
  }
  const std::size_t dim = data.front().size();
  if (dim == 0) throw DataError("kmeans: zero-dimensional features");
  for (const auto& x : data) {
    if (x.size() != dim) throw DataError("kmeans: ragged feature matrix");
    for (double v : x) {
      if (!std::isfinite(v)) throw DataError("kmeans: non-finite feature");
    }
  }
  {
    auto sorted = data;
    std::sort(sorted.begin(), sorted.end());
    const auto distinct = static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
    if (distinct < opt.k) {
      throw DataError("kmeans: only " + std::to_string(distinct) + " distinct feature vectors for k=" +
                      std::to_string(opt.k));
    }
  }

  Rng master(opt.seed);
  KMeansModel best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t restart = 0; restart < opt.restarts; ++restart) {
    Rng rng(master.next_u64());
    auto result = detail::lloyd(data, detail::plus_plus_seeds(data, opt.k, rng), opt);
    if (result.inertia < best.inertia) {
      best.centroids = std::move(result.centroids);
      best.inertia = result.inertia;
      best.iterations_run = result.iterations;
      best.inertia_history = std::move(result.history);
    }
  }
  best.k = opt.k;
  best.seed = opt.seed;
  canonicalize(best.centroids);
  return best;
}

/// Nearest-centroid label; equidistant features get the lowest label.
inline std::size_t kmeans_predict(const KMeansModel& model, std::span<const double> feature) {
  if (feature.size() != model.dim()) {
    throw ConfigError("kmeans_predict: feature has dimension " + std::to_string(feature.size()) + ", model expects " +
                      std::to_string(model.dim()));
  }
  return detail::nearest(model.centroids, feature);
}

inline std::vector<std::size_t> kmeans_assign(const KMeansModel& model, const std::vector<Point>& data) {
  std::vector<std::size_t> labels;
  labels.reserve(data.size());
  for (const auto& x : data) labels.push_back(kmeans_predict(model, x));
  return labels;
}

}  // namespace regime_tagger::cluster
