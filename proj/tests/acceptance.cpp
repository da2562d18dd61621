// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "regime_tagger/cluster.hpp"
#include "regime_tagger/io.hpp"
#include "regime_tagger/pipeline.hpp"
#include "regime_tagger/ph.hpp"
#include "regime_tagger/sim.hpp"
#include "support/clouds.hpp"
#include "support/rank_oracle.hpp"

namespace rt = regime_tagger;
namespace fs = std::filesystem;
using rt::cluster::Point;
using rt::embed::PointCloud;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "regime_tagger_acceptance" / name;
  fs::remove_all(dir);
  return dir;
}

std::vector<std::size_t> labels_of(const std::vector<rt::io::TaggedWindow>& tagged) {
  std::vector<std::size_t> out;
  for (const auto& w : tagged) out.push_back(w.label);
  return out;
}

/// Best hit count of `labels` against `truth` over all relabelings.
std::size_t best_agreement(const std::vector<std::size_t>& labels, const std::vector<std::size_t>& truth, std::size_t k) {
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hits += perm[labels[i]] == truth[i] ? 1 : 0;
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Verdict lorenz_separation() {
  rt::config::PipelineConfig cfg;
  rt::config::LorenzSource low;
  low.rho = 23.5;
  rt::config::LorenzSource high;
  high.rho = 24.5;
  for (auto* s : {&low, &high}) {
    s->dt = 0.01;
    s->t0 = 0.0;
    s->t1 = 100.0;
    s->transient = 20.0;
  }
  cfg.sources = {low, high};
  cfg.windowing.window_len = 100;
  cfg.windowing.stride = 50;
  cfg.clustering.k = 2;
  cfg.output.dir = scratch_dir("lorenz").string();
  cfg.workers = 1;

  const auto start = std::chrono::steady_clock::now();
  const auto run = rt::pipeline::run_pipeline(cfg);
  const double elapsed = seconds_since(start);

  std::vector<std::size_t> truth(run.tagged.size(), 0);
  const auto& second = run.manifest.sources.at(1);
  for (std::size_t i = second.first_window; i < second.first_window + second.window_count; ++i) truth[i] = 1;
  const auto labels = labels_of(run.tagged);
  const std::size_t hits = best_agreement(labels, truth, 2);
  const bool pass = hits == labels.size() && elapsed < 60.0;
  return {pass, fmt("%zu/%zu windows labeled by rho, %.1f s (need all, < 60 s)", hits, labels.size(), elapsed)};
}

struct HopfRun {
  rt::pipeline::RunOutcome outcome;
  double elapsed = 0.0;
  double window_span = 0.0;
  double lambda0 = 0.0;
  double epsilon = 0.0;
};

HopfRun hopf_run(std::size_t k) {
  rt::config::PipelineConfig cfg;
  const rt::config::HopfSource hopf;
  cfg.sources = {hopf};
  cfg.clustering.k = k;
  cfg.output.dir = scratch_dir("hopf_k" + std::to_string(k)).string();
  cfg.workers = 1;
  const auto start = std::chrono::steady_clock::now();
  HopfRun r{rt::pipeline::run_pipeline(cfg), 0.0, 0.0, hopf.lambda0, hopf.epsilon};
  r.elapsed = seconds_since(start);
  r.window_span = static_cast<double>(cfg.windowing.window_len - 1) * hopf.dt * static_cast<double>(hopf.sample_every);
  return r;
}

Verdict hopf_crossover(const HopfRun& run) {
  const auto& tagged = run.outcome.tagged;
  auto lambda = [&](double t) { return run.lambda0 + run.epsilon * t; };
  std::size_t low_total = 0;
  std::size_t low_bad = 0;
  std::size_t high_total = 0;
  std::size_t high_bad = 0;
  std::vector<std::size_t> middle;
  for (const auto& w : tagged) {
    const double end = w.start_time + run.window_span;
    if (lambda(end) < -0.25) {
      ++low_total;
      low_bad += w.label != 0 ? 1 : 0;
    } else if (lambda(w.start_time) > 0.5) {
      ++high_total;
      high_bad += w.label != 1 ? 1 : 0;
    } else {
      middle.push_back(w.label);
    }
  }
  // Fewest middle windows that disagree with a single 0 -> 1 step.
  std::size_t deviations = middle.size();
  for (std::size_t cut = 0; cut <= middle.size(); ++cut) {
    std::size_t bad = 0;
    for (std::size_t i = 0; i < middle.size(); ++i) bad += middle[i] != (i < cut ? 0u : 1u) ? 1 : 0;
    deviations = std::min(deviations, bad);
  }
  const double fraction = middle.empty() ? 0.0 : static_cast<double>(deviations) / static_cast<double>(middle.size());
  const bool pass = low_bad == 0 && high_bad == 0 && fraction <= 0.10 && run.elapsed < 120.0;
  return {pass, fmt("low %zu/%zu label 0, high %zu/%zu label 1, middle deviation %zu/%zu (%.1f%%, max 10%%), %.1f s",
                    low_total - low_bad, low_total, high_total - high_bad, high_total, deviations, middle.size(),
                    100 * fraction, run.elapsed)};
}

Verdict hopf_intermediate_band(const HopfRun& run) {
  const auto& tagged = run.outcome.tagged;
  // Labels are ordered by centroid norm, so 1 is the middle cluster.
  double last_low = -std::numeric_limits<double>::infinity();
  double first_high = std::numeric_limits<double>::infinity();
  for (const auto& w : tagged) {
    if (w.label == 0) last_low = std::max(last_low, w.start_time);
    if (w.label == 2) first_high = std::min(first_high, w.start_time);
  }
  std::size_t members = 0;
  std::size_t inside = 0;
  for (const auto& w : tagged) {
    if (w.label != 1) continue;
    ++members;
    inside += w.start_time > last_low && w.start_time < first_high ? 1 : 0;
  }
  const double fraction = members == 0 ? 0.0 : static_cast<double>(inside) / static_cast<double>(members);
  return {members > 0 && fraction >= 0.90,
          fmt("%zu/%zu middle-cluster windows after the last low and before the first high window (%.1f%%, need 90%%)",
              inside, members, 100 * fraction)};
}

Verdict oracle_equivalence() {
  rt::Rng rng(20240601);
  const auto start = std::chrono::steady_clock::now();
  std::size_t matched = 0;
  std::string first_failure;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + rng.below(6);
    const std::size_t dim = 2 + rng.below(2);
    const auto cloud = testclouds::random_cloud(rng, n, dim);
    const auto diagram = rt::ph::persistence_of(cloud, {.max_dim = 1, .t_max = std::nullopt});
    const auto expected = oracle::brute_force_bars(testclouds::as_points(cloud), 1);
    std::string why;
    if (testclouds::same_bars(diagram, expected, 1e-12, &why)) {
      ++matched;
    } else if (first_failure.empty()) {
      first_failure = "trial " + std::to_string(trial) + ": " + why;
    }
  }
  const double elapsed = seconds_since(start);
  auto detail = fmt("%zu/100 clouds match the rank oracle, %.2f s", matched, elapsed);
  if (!first_failure.empty()) detail += "; " + first_failure;
  return {matched == 100 && elapsed < 30.0, detail};
}

std::vector<rt::ph::Bar> positive_bars(const rt::ph::PersistenceDiagram& d, int dim) {
  std::vector<rt::ph::Bar> out;
  for (const auto& b : d.bars) {
    if (b.dim == dim && !b.zero_length()) out.push_back(b);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.length() > b.length(); });
  return out;
}

Verdict analytic_bars() {
  const auto square = positive_bars(rt::ph::persistence_of(testclouds::unit_square()), 1);
  const bool square_ok = square.size() == 1 && std::abs(square[0].birth - 1.0) <= 1e-12 &&
                         std::abs(square[0].death - std::sqrt(2.0)) <= 1e-12;
  const auto triangle = positive_bars(rt::ph::persistence_of(testclouds::equilateral_triangle()), 1);
  const auto polygon = positive_bars(rt::ph::persistence_of(testclouds::regular_polygon(20, 1.0)), 1);
  // Golden values from a Betti-number sweep of the rank oracle.
  constexpr double kPolygonBirth = 0.31286893008046213;
  constexpr double kPolygonDeath = 1.7820130483767358;
  bool polygon_ok = !polygon.empty() && std::abs(polygon[0].birth - kPolygonBirth) <= 1e-12 &&
                    std::abs(polygon[0].death - kPolygonDeath) <= 1e-12;
  const double second = polygon.size() > 1 ? polygon[1].length() : 0.0;
  polygon_ok = polygon_ok && polygon[0].length() > 5 * second;
  return {square_ok && triangle.empty() && polygon_ok,
          fmt("square %zu bar(s)%s, triangle %zu bar(s), 20-gon top %.6f vs second %.6f", square.size(),
              square_ok ? " [1, sqrt2)" : "", triangle.size(), polygon.empty() ? 0.0 : polygon[0].length(), second)};
}

Verdict capping_rule() {
  const PointCloud point(2, {0.0, 0.0});
  const auto d = rt::ph::persistence_of(point, {.max_dim = 1, .t_max = 5.0, .r = 2.0});
  const auto h0 = d.bars_of(0);
  const bool pass = h0.size() == 1 && h0[0].capped && h0[0].birth == 0.0 && h0[0].death == 7.0;
  return {pass, fmt("%zu degree-0 bar(s), death %.17g (want 7)", h0.size(), h0.empty() ? 0.0 : h0[0].death)};
}

Verdict stability() {
  rt::Rng rng(13);
  std::string detail;
  bool pass = true;
  for (double delta : {1e-3, 1e-2}) {
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const auto cloud = testclouds::noisy_circle(rng, 30, 1.0, 0.05);
      const auto moved = testclouds::perturb(rng, cloud, delta);
      worst = std::max(worst, testclouds::sorted_length_gap(rt::ph::persistence_of(cloud),
                                                            rt::ph::persistence_of(moved), 1));
    }
    pass = pass && worst <= 4 * delta;
    detail += fmt("%sdelta %g: worst gap %.3g (bound %g)", detail.empty() ? "" : ", ", delta, worst, 4 * delta);
  }
  return {pass, detail};
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

Verdict simulator_invariants() {
  // Symmetry (x, y, z) -> (-x, -y, z), bitwise.
  bool symmetric = true;
  rt::Rng rng(7);
  const auto field = rt::sim::lorenz_field(10.0, 24.5, 8.0 / 3.0);
  for (int trial = 0; trial < 5 && symmetric; ++trial) {
    const std::vector<double> a{20 * rng.uniform() - 10, 20 * rng.uniform() - 10, 30 * rng.uniform()};
    const std::vector<double> b{-a[0], -a[1], a[2]};
    const auto ta = rt::sim::rk4_integrate(field, a, 0.0, 10.0, 0.01);
    const auto tb = rt::sim::rk4_integrate(field, b, 0.0, 10.0, 0.01);
    for (std::size_t i = 0; i < ta.size() && symmetric; ++i) {
      symmetric = tb.state(i)[0] == -ta.state(i)[0] && tb.state(i)[1] == -ta.state(i)[1] &&
                  tb.state(i)[2] == ta.state(i)[2];
    }
  }

  const auto [cplus, cminus] = rt::sim::lorenz_equilibria(24.5);
  double drift = 0.0;
  for (const auto& c : {cplus, cminus}) {
    const auto traj = rt::sim::rk4_integrate(field, c, 0.0, 10.0, 0.01);
    for (std::size_t i = 0; i < traj.size(); ++i) drift = std::max(drift, max_abs_diff(traj.state(i), c));
  }

  // Noiseless Euler-Maruyama against a fine RK4 reference.
  const std::vector<double> x0{1.0, 1.0, 1.0};
  const auto reference = rt::sim::rk4_integrate(field, x0, 0.0, 10.0, 1e-4);
  auto error = [&](double dt) {
    const auto stride = static_cast<std::size_t>(std::lround(dt / 1e-4));
    const auto em = rt::sim::euler_maruyama({field, {0.0, 0.0, 0.0}}, x0, 0.0, 10.0, dt, 0);
    double worst = 0.0;
    for (std::size_t i = 0; i < em.size(); ++i) worst = std::max(worst, max_abs_diff(em.state(i), reference.state(i * stride)));
    return worst;
  };
  const double e1 = error(4e-4);
  const double e2 = error(2e-4);
  const double ratio = e2 / e1;
  const bool order_one = ratio >= 0.4 && ratio <= 0.6;

  return {symmetric && drift <= 1e-12 && order_one,
          fmt("symmetry %s, equilibrium drift %.3g, EM error ratio %.4f (want [0.4, 0.6])",
              symmetric ? "bitwise" : "BROKEN", drift, ratio)};
}

Verdict kmeans_properties() {
  rt::Rng rng(99);
  std::size_t monotone = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 20 + rng.below(80);
    const std::size_t dim = 1 + rng.below(4);
    std::vector<Point> data(n, Point(dim));
    for (auto& x : data) {
      for (auto& v : x) v = 10 * rng.uniform();
    }
    const std::size_t k = 2 + rng.below(4);
    const rt::cluster::KMeansOptions opt{.k = k, .seed = static_cast<std::uint64_t>(trial)};
    rt::Rng seeds(opt.seed);
    const auto run = rt::cluster::detail::lloyd(data, rt::cluster::detail::plus_plus_seeds(data, k, seeds), opt);
    bool ok = !run.history.empty();
    for (std::size_t i = 1; ok && i < run.history.size(); ++i) ok = run.history[i] <= run.history[i - 1] * (1 + 1e-12);
    monotone += ok ? 1 : 0;
  }

  const std::vector<Point> centers{{0, 0}, {6, 0}, {3, 6}};
  rt::Rng blob_rng(2024);
  std::vector<Point> blobs;
  std::vector<std::size_t> truth;
  for (std::size_t i = 0; i < 300; ++i) {
    const std::size_t c = i % 3;
    blobs.push_back({centers[c][0] + 0.1 * blob_rng.normal(), centers[c][1] + 0.1 * blob_rng.normal()});
    truth.push_back(c);
  }
  const auto a = rt::cluster::kmeans_fit(blobs, {.k = 3, .seed = 42});
  const auto b = rt::cluster::kmeans_fit(blobs, {.k = 3, .seed = 42});
  const std::size_t hits = best_agreement(rt::cluster::kmeans_assign(a, blobs), truth, 3);
  const bool deterministic = a.centroids == b.centroids && a.inertia == b.inertia &&
                             rt::cluster::kmeans_assign(a, blobs) == rt::cluster::kmeans_assign(b, blobs);
  return {monotone == 50 && hits == blobs.size() && deterministic,
          fmt("monotone %zu/50, blobs %zu/%zu, %s", monotone, hits, blobs.size(),
              deterministic ? "deterministic" : "NOT deterministic")};
}

Verdict vostok_fixture() {
  const fs::path fixtures = fs::path(REGIME_TAGGER_SOURCE_DIR) / "data" / "fixtures";
  rt::config::PipelineConfig cfg;
  rt::config::CsvSource source;
  source.path = (fixtures / "vostok_like.csv").string();
  source.time_column = "age";
  source.value_columns = {"temp", "co2"};
  source.standardize_channels = true;
  cfg.sources = {source};
  cfg.windowing.window_len = 20;
  cfg.windowing.stride = 5;
  cfg.clustering.k = 3;
  cfg.output.dir = scratch_dir("vostok").string();
  cfg.workers = 1;
  const auto run = rt::pipeline::run_pipeline(cfg);

  // Truth rows keyed by age; ingestion sorts ascending, so map order is sample order.
  std::map<double, std::size_t> by_age;
  for (const auto& row : rt::io::read_csv((fixtures / "vostok_like_truth.csv").string()).rows) {
    by_age[std::stod(row.at(0))] = std::stoul(row.at(1));
  }
  std::vector<std::size_t> sample_truth;
  for (const auto& [age, regime] : by_age) sample_truth.push_back(regime);

  std::vector<std::size_t> window_truth;
  for (const auto& w : run.tagged) {
    std::size_t count[3] = {0, 0, 0};
    for (std::size_t i = 0; i < cfg.windowing.window_len; ++i) ++count[sample_truth.at(w.window_index * cfg.windowing.stride + i)];
    window_truth.push_back(static_cast<std::size_t>(std::max_element(count, count + 3) - count));
  }
  const auto labels = labels_of(run.tagged);
  const std::size_t hits = best_agreement(labels, window_truth, 3);
  const double fraction = static_cast<double>(hits) / static_cast<double>(labels.size());
  return {fraction >= 0.85, fmt("%zu/%zu windows match the planted regimes (%.1f%%, need 85%%)", hits, labels.size(),
                                100 * fraction)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Verdict()>& check) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failures += v.pass ? 0 : 1;
    std::printf("%s %2d %s: %s\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "lorenz separation", lorenz_separation);
  std::optional<HopfRun> k2;
  std::optional<HopfRun> k3;
  report(2, "hopf crossover", [&] {
    k2 = hopf_run(2);
    return hopf_crossover(*k2);
  });
  report(3, "hopf intermediate band", [&] {
    k3 = hopf_run(3);
    return hopf_intermediate_band(*k3);
  });
  report(4, "persistence oracle equivalence", oracle_equivalence);
  report(5, "analytic bars", analytic_bars);
  report(6, "capping rule", capping_rule);
  report(7, "stability under perturbation", stability);
  report(8, "simulator invariants", simulator_invariants);
  report(9, "k-means properties", kmeans_properties);
  report(10, "vostok-like fixture", vostok_fixture);

  fs::remove_all(fs::temp_directory_path() / "regime_tagger_acceptance");
  std::printf("%d/10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
