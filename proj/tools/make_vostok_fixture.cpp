// Writes a synthetic two-channel ice-core style record (age, temp, co2) with
// planted regimes, plus the per-sample regime truth used by the tests.
//
//   stationary   noisy scatter around a cold, low-CO2 level
//   small loop   temperature and CO2 circling with a quarter-period CO2 lag
//   large loop   same, three times the radius, warmer and higher CO2
//
// Ages are written in descending order, as cores are often listed from the
// bottom up; ingestion sorts them.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "regime_tagger/rng.hpp"

namespace {

enum Regime { kStationary = 0, kSmallLoop = 1, kLargeLoop = 2 };

struct Segment {
  Regime regime;
  std::size_t samples;
};

constexpr double kPeriod = 16.0;  // samples per loop
constexpr double kSpacing = 300.0;  // mean years between samples

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the vostok-like regime fixture"};
  std::string out_dir = "data/fixtures";
  std::uint64_t seed = 7;
  app.add_option("--out-dir", out_dir, "Directory for vostok_like.csv and vostok_like_truth.csv");
  app.add_option("--seed", seed, "Random seed");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Segment> segments{{kStationary, 250}, {kSmallLoop, 250}, {kStationary, 200}, {kLargeLoop, 250},
                                      {kSmallLoop, 200},  {kStationary, 150}, {kLargeLoop, 200}};

  regime_tagger::Rng rng(seed);
  std::vector<double> age;
  std::vector<double> u;
  std::vector<double> v;
  std::vector<int> truth;
  double t = 1000.0;
  double phase = 0.0;
  for (const auto& seg : segments) {
    for (std::size_t i = 0; i < seg.samples; ++i) {
      t += kSpacing * (0.8 + 0.4 * rng.uniform());
      phase += 2 * std::numbers::pi / kPeriod;
      // Slow drift of the loop centre across the segment.
      const double drift = 0.3 * static_cast<double>(i) / static_cast<double>(seg.samples);
      double x = 0;
      double y = 0;
      switch (seg.regime) {
        case kStationary:
          x = -1.5 + 0.08 * rng.normal();
          y = -1.5 + 0.08 * rng.normal();
          break;
        case kSmallLoop:
          x = drift + 0.5 * std::cos(phase) + 0.05 * rng.normal();
          y = drift + 0.5 * std::cos(phase - std::numbers::pi / 2) + 0.05 * rng.normal();
          break;
        case kLargeLoop:
          x = 0.5 + drift + 1.5 * std::cos(phase) + 0.05 * rng.normal();
          y = 0.5 + drift + 1.5 * std::cos(phase - std::numbers::pi / 2) + 0.05 * rng.normal();
          break;
      }
      age.push_back(t);
      u.push_back(x);
      v.push_back(y);
      truth.push_back(seg.regime);
    }
  }

  std::filesystem::create_directories(out_dir);
  const std::string data_path = out_dir + "/vostok_like.csv";
  const std::string truth_path = out_dir + "/vostok_like_truth.csv";
  std::ofstream data(data_path, std::ios::binary);
  std::ofstream labels(truth_path, std::ios::binary);
  if (!data || !labels) {
    std::cerr << "cannot write into " << out_dir << '\n';
    return 3;
  }
  data << "# synthetic record: age in years before present, temp in degC anomaly, co2 in ppmv\n";
  data << "age,temp,co2\n";
  labels << "age,regime\n";
  char line[96];
  for (std::size_t i = age.size(); i-- > 0;) {
    std::snprintf(line, sizeof line, "%.0f,%.2f,%.1f\n", age[i], -4.0 + 2.5 * u[i], 235.0 + 30.0 * v[i]);
    data << line;
    std::snprintf(line, sizeof line, "%.0f,%d\n", age[i], truth[i]);
    labels << line;
  }
  std::cout << "wrote " << age.size() << " samples to " << data_path << " and " << truth_path << '\n';
  return 0;
}
