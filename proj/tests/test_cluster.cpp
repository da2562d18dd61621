#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <vector>

#include "regime_tagger/cluster.hpp"
#include "regime_tagger/rng.hpp"

namespace rt = regime_tagger;
using rt::cluster::KMeansOptions;
using rt::cluster::Point;

namespace {

struct Blobs {
  std::vector<Point> data;
  std::vector<std::size_t> truth;
};

Blobs planted_blobs(std::uint64_t seed) {
  const std::vector<Point> centers{{0, 0}, {6, 0}, {3, 6}};
  rt::Rng rng(seed);
  Blobs b;
  for (std::size_t i = 0; i < 300; ++i) {
    const std::size_t c = i % 3;
    b.data.push_back({centers[c][0] + 0.1 * rng.normal(), centers[c][1] + 0.1 * rng.normal()});
    b.truth.push_back(c);
  }
  return b;
}

/// Agreement up to relabeling, for k <= 3 by trying every permutation.
double agreement(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b, std::size_t k) {
  std::vector<std::size_t> perm(k);
  for (std::size_t i = 0; i < k; ++i) perm[i] = i;
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < a.size(); ++i) hits += perm[a[i]] == b[i] ? 1 : 0;
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(a.size());
}

}  // namespace

TEST(KMeans, SeparatedPairsOnALine) {
  const std::vector<Point> data{{0}, {0.1}, {10}, {10.1}};
  const auto model = rt::cluster::kmeans_fit(data, {.k = 2});
  ASSERT_EQ(model.centroids.size(), 2u);
  EXPECT_NEAR(model.centroids[0][0], 0.05, 1e-12);
  EXPECT_NEAR(model.centroids[1][0], 10.05, 1e-12);
  EXPECT_EQ(rt::cluster::kmeans_assign(model, data), (std::vector<std::size_t>{0, 0, 1, 1}));
}

TEST(KMeans, SingleClusterIsTheMean) {
  const std::vector<Point> data{{1, 2}, {3, 4}, {5, 0}, {-1, 2}};
  const auto model = rt::cluster::kmeans_fit(data, {.k = 1});
  EXPECT_NEAR(model.centroids[0][0], 2.0, 1e-12);
  EXPECT_NEAR(model.centroids[0][1], 2.0, 1e-12);
  // n * total variance = sum of squared deviations
  EXPECT_NEAR(model.inertia, (1 + 1 + 9 + 9) + (0 + 4 + 4 + 0), 1e-12);
}

TEST(KMeans, RecoversPlantedBlobs) {
  const auto blobs = planted_blobs(2024);
  const auto model = rt::cluster::kmeans_fit(blobs.data, {.k = 3, .seed = 42});
  EXPECT_EQ(agreement(rt::cluster::kmeans_assign(model, blobs.data), blobs.truth, 3), 1.0);
}

TEST(KMeans, CanonicalOrderByNorm) {
  const auto blobs = planted_blobs(7);
  const auto model = rt::cluster::kmeans_fit(blobs.data, {.k = 3, .seed = 1});
  auto norm = [](const Point& p) { return rt::cluster::squared_distance(p, Point(p.size(), 0.0)); };
  for (std::size_t c = 1; c < model.centroids.size(); ++c) {
    EXPECT_LE(norm(model.centroids[c - 1]), norm(model.centroids[c]));
  }
  // The blob at the origin is always label 0.
  EXPECT_EQ(rt::cluster::kmeans_predict(model, Point{0.0, 0.0}), 0u);
}

TEST(KMeans, InertiaNeverIncreases) {
  rt::Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 20 + rng.below(80);
    const std::size_t dim = 1 + rng.below(4);
    std::vector<Point> data(n, Point(dim));
    for (auto& x : data) {
      for (auto& v : x) v = 10 * rng.uniform();
    }
    const std::size_t k = 2 + rng.below(4);
    const auto model = rt::cluster::kmeans_fit(data, {.k = k, .seed = static_cast<std::uint64_t>(trial)});
    const auto& h = model.inertia_history;
    ASSERT_FALSE(h.empty());
    for (std::size_t i = 1; i < h.size(); ++i) ASSERT_LE(h[i], h[i - 1] * (1 + 1e-12)) << "trial " << trial;
    ASSERT_GE(model.inertia, 0.0);
  }
}

TEST(KMeans, Deterministic) {
  const auto blobs = planted_blobs(11);
  const auto a = rt::cluster::kmeans_fit(blobs.data, {.k = 3, .seed = 5});
  const auto b = rt::cluster::kmeans_fit(blobs.data, {.k = 3, .seed = 5});
  EXPECT_EQ(a.centroids, b.centroids);
  EXPECT_EQ(a.inertia, b.inertia);
  EXPECT_EQ(a.iterations_run, b.iterations_run);
}

TEST(KMeans, LabelsDoNotDependOnSeed) {
  const auto blobs = planted_blobs(12);
  const auto a = rt::cluster::kmeans_fit(blobs.data, {.k = 3, .seed = 5});
  const auto b = rt::cluster::kmeans_fit(blobs.data, {.k = 3, .seed = 6});
  EXPECT_EQ(rt::cluster::kmeans_assign(a, blobs.data), rt::cluster::kmeans_assign(b, blobs.data));
}

TEST(KMeans, PredictReproducesFinalAssignment) {
  rt::Rng rng(21);
  std::vector<Point> data(60, Point(2));
  for (auto& x : data) {
    for (auto& v : x) v = rng.normal();
  }
  const auto model = rt::cluster::kmeans_fit(data, {.k = 4, .seed = 3});
  const auto labels = rt::cluster::kmeans_assign(model, data);
  double inertia = 0;
  for (std::size_t i = 0; i < data.size(); ++i) inertia += rt::cluster::squared_distance(data[i], model.centroids[labels[i]]);
  EXPECT_NEAR(inertia, model.inertia, 1e-9 * model.inertia);
}

TEST(KMeans, EmptyClusterIsReseeded) {
  // Two coincident starting centroids force one cluster to empty out.
  const std::vector<Point> data{{0}, {0.2}, {5}, {5.2}, {10}, {10.2}};
  const auto r = rt::cluster::detail::lloyd(data, {{0.1}, {0.1}, {0.1}}, KMeansOptions{});
  // Lloyd may stop in a local optimum, but no cluster is left empty.
  ASSERT_EQ(r.centroids.size(), 3u);
  std::vector<std::size_t> counts(3, 0);
  for (const auto& x : data) ++counts[rt::cluster::detail::nearest(r.centroids, x)];
  for (std::size_t c = 0; c < 3; ++c) EXPECT_GT(counts[c], 0u) << "cluster " << c;
}

TEST(KMeans, Errors) {
  EXPECT_THROW((void)rt::cluster::kmeans_fit({{1.0}}, {.k = 2}), rt::DataError);
  EXPECT_THROW((void)rt::cluster::kmeans_fit({{1.0}, {NAN}}, {.k = 1}), rt::DataError);
  EXPECT_THROW((void)rt::cluster::kmeans_fit({{1.0}, {1.0}, {1.0}}, {.k = 2}), rt::DataError);
  EXPECT_THROW((void)rt::cluster::kmeans_fit({{1.0}, {2.0}}, {.k = 0}), rt::ConfigError);
}

TEST(Predict, TiesAndNudges) {
  rt::cluster::KMeansModel model;
  model.k = 2;
  model.centroids = {{0.0, 0.0}, {2.0, 0.0}};
  EXPECT_EQ(rt::cluster::kmeans_predict(model, Point{2.0, 0.0}), 1u);
  EXPECT_EQ(rt::cluster::kmeans_predict(model, Point{1.0, 0.0}), 0u);
  EXPECT_EQ(rt::cluster::kmeans_predict(model, Point{1.0 + 1e-9, 0.0}), 1u);
  EXPECT_EQ(rt::cluster::kmeans_predict(model, Point{1.0, 5.0}), 0u);
  EXPECT_THROW((void)rt::cluster::kmeans_predict(model, Point{1.0}), rt::ConfigError);
}
