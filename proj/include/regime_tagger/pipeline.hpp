#pragma once

// End-to-end runs: simulate or ingest, window, persist, featurize, tag,
// report. Every stage writes its artifact into the output directory and a
// manifest ties them together.

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "regime_tagger/cluster.hpp"
#include "regime_tagger/config.hpp"
#include "regime_tagger/embed.hpp"
#include "regime_tagger/error.hpp"
#include "regime_tagger/features.hpp"
#include "regime_tagger/io.hpp"
#include "regime_tagger/ph.hpp"
#include "regime_tagger/sim.hpp"

namespace regime_tagger::pipeline {

inline constexpr const char* kVersion = "0.1.0";

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// ---- helpers ----------------------------------------------------------------

inline std::size_t resolve_workers(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(i) for i in [0, n) on up to `workers` threads. The first
/// exception (by worker) is rethrown after all threads have joined.
template <class F>
void parallel_for(std::size_t n, std::size_t workers, F&& fn) {
  workers = std::min(std::max<std::size_t>(workers, 1), std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < n; i = next++) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
          next = n;
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Runs `body`, prefixing any library error with the stage name while
/// keeping its type (and so its exit code).
template <class F>
decltype(auto) in_stage(const std::string& stage, F&& body) {
  try {
    return body();
  } catch (const DivergenceError& e) {
    throw DivergenceError(e.step(), stage + ": " + e.detail());
  } catch (const ConfigError& e) {
    throw ConfigError(stage + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(stage + ": " + e.what());
  }
}

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---- stages -----------------------------------------------------------------

/// Each channel shifted and scaled to zero mean and unit variance.
inline embed::TimeSeries standardize_channels(const embed::TimeSeries& series) {
  const std::size_t n = series.size();
  const std::size_t c = series.channels();
  std::vector<double> values = series.values();
  for (std::size_t j = 0; j < c; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += values[i * c + j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (values[i * c + j] - mean) * (values[i * c + j] - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      values[i * c + j] -= mean;
      if (sd > 0.0) values[i * c + j] /= sd;
    }
  }
  return embed::TimeSeries(series.times(), std::move(values), series.channel_names());
}

inline sim::Trajectory simulate(const config::HopfSource& s) {
  const sim::SdeSpec spec{sim::hopf_field(s.lambda0, s.epsilon), s.noise};
  auto traj = sim::euler_maruyama(spec, s.x0, s.t0, s.t1, s.dt, s.seed, s.sample_every);
  return s.transient > s.t0 ? traj.drop_before(s.transient) : traj;
}

inline sim::Trajectory simulate(const config::LorenzSource& s) {
  auto traj = sim::rk4_integrate(sim::lorenz_field(s.sigma, s.rho, s.beta), s.x0, s.t0, s.t1, s.dt, s.sample_every);
  return s.transient > s.t0 ? traj.drop_before(s.transient) : traj;
}

/// The time series a source contributes, after transients and rescaling.
inline embed::TimeSeries load_source(const config::Source& source, const io::IngestOptions& log = {}) {
  if (const auto* h = std::get_if<config::HopfSource>(&source)) return embed::to_series(simulate(*h));
  if (const auto* l = std::get_if<config::LorenzSource>(&source)) return embed::to_series(simulate(*l));
  const auto& c = std::get<config::CsvSource>(source);
  io::IngestOptions opt = log;
  opt.interpolate = c.interpolate;
  auto series = io::ingest_csv(c.path, c.time_column, c.value_columns, opt);
  return c.standardize_channels ? standardize_channels(series) : series;
}

inline const char* source_type(const config::Source& source) {
  if (std::holds_alternative<config::HopfSource>(source)) return "hopf";
  if (std::holds_alternative<config::LorenzSource>(source)) return "lorenz";
  return "csv";
}

/// Resolves "auto" mode and an unset lag against the series being windowed.
inline embed::WindowMode window_mode(const config::Windowing& w, const embed::TimeSeries& series) {
  if (w.mode == "raw" || (w.mode == "auto" && series.channels() >= 2)) return embed::RawMode{};
  if (w.channel >= series.channels()) {
    throw ConfigError("windowing.channel " + std::to_string(w.channel) + " out of range for a " +
                      std::to_string(series.channels()) + "-channel series");
  }
  std::size_t tau = 0;
  if (w.tau) {
    tau = *w.tau;
  } else {
    std::vector<double> values(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) values[i] = series.value(i, w.channel);
    tau = embed::autocorrelation_zero_lag(values, w.window_len / 4);
  }
  return embed::DelayMode{w.d, tau, w.channel};
}

inline ph::PersistenceOptions persistence_options(const config::Persistence& p) {
  return {.max_dim = p.max_dim, .t_max = p.t_max, .r = p.r};
}

/// One diagram per cloud, computed on a bounded worker pool; output order
/// follows input order regardless of scheduling.
inline std::vector<ph::PersistenceDiagram> persist_all(const std::vector<embed::PointCloud>& clouds,
                                                       const config::Persistence& p, std::size_t workers) {
  std::vector<ph::PersistenceDiagram> out(clouds.size());
  const auto opt = persistence_options(p);
  parallel_for(clouds.size(), workers, [&](std::size_t i) { out[i] = ph::persistence_of(clouds[i], opt); });
  return out;
}

inline std::vector<features::FeatureVector> featurize_all(const std::vector<ph::PersistenceDiagram>& diagrams,
                                                          const std::vector<features::WindowInfo>& info,
                                                          const config::Features& f, std::size_t workers) {
  if (diagrams.empty()) throw DataError("no windows to featurize");
  if (info.size() != diagrams.size()) throw DataError("window metadata count differs from diagram count");
  std::vector<features::FeatureVector> out(diagrams.size());
  parallel_for(diagrams.size(), workers, [&](std::size_t i) {
    out[i] = {info[i].window_index, info[i].start_time,
              features::top_persistence_lengths(diagrams[i], f.k_lengths, f.dim)};
  });
  return out;
}

struct Tagging {
  cluster::KMeansModel model;
  std::vector<io::TaggedWindow> tagged;
};

/// Fits k-means on the feature vectors (standardized first if asked) and
/// labels every window. Tagged rows carry the vectors that were clustered.
inline Tagging tag_features(std::vector<features::FeatureVector> fv, const config::Clustering& c, bool standardize) {
  if (standardize) features::standardize(fv);
  std::vector<cluster::Point> data;
  data.reserve(fv.size());
  for (const auto& f : fv) data.push_back(f.lengths);
  Tagging t;
  t.model = cluster::kmeans_fit(
      data, {.k = c.k, .seed = c.seed, .max_iter = c.max_iter, .tol = c.tol, .restarts = c.restarts});
  const auto labels = cluster::kmeans_assign(t.model, data);
  for (std::size_t i = 0; i < fv.size(); ++i) {
    t.tagged.push_back({fv[i].window_index, fv[i].start_time, labels[i], fv[i].lengths});
  }
  return t;
}

// ---- report -----------------------------------------------------------------

struct LabelRun {
  std::size_t label = 0;
  std::size_t first_window = 0;
  std::size_t length = 0;
  double start_time = 0.0;
};

struct Transition {
  std::size_t window_index = 0;
  double time = 0.0;
  std::size_t from = 0;
  std::size_t to = 0;
};

struct TagReport {
  std::size_t n_windows = 0;
  std::vector<std::size_t> counts;
  std::vector<LabelRun> runs;
  std::vector<Transition> transitions;
  /// Transitions after dropping runs shorter than min_run windows.
  std::vector<Transition> stable_transitions;
  std::size_t min_run = 2;
};

inline std::vector<LabelRun> label_runs(const std::vector<io::TaggedWindow>& tagged) {
  std::vector<LabelRun> runs;
  for (const auto& w : tagged) {
    if (!runs.empty() && runs.back().label == w.label) {
      ++runs.back().length;
    } else {
      runs.push_back({w.label, w.window_index, 1, w.start_time});
    }
  }
  return runs;
}

inline std::vector<Transition> transitions_between(const std::vector<LabelRun>& runs) {
  std::vector<Transition> out;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    out.push_back({runs[i].first_window, runs[i].start_time, runs[i - 1].label, runs[i].label});
  }
  return out;
}

inline TagReport tag_report(const std::vector<io::TaggedWindow>& tagged, std::size_t min_run = 2) {
  if (tagged.empty()) throw DataError("tag_report: no tagged windows");
  TagReport r;
  r.n_windows = tagged.size();
  r.min_run = min_run;
  for (const auto& w : tagged) {
    if (w.label >= r.counts.size()) r.counts.resize(w.label + 1, 0);
    ++r.counts[w.label];
  }
  r.runs = label_runs(tagged);
  r.transitions = transitions_between(r.runs);
  std::vector<LabelRun> kept;
  for (const auto& run : r.runs) {
    if (run.length < min_run) continue;
    if (!kept.empty() && kept.back().label == run.label) {
      kept.back().length += run.length;
    } else {
      kept.push_back(run);
    }
  }
  r.stable_transitions = transitions_between(kept);
  return r;
}

inline ordered_json to_json(const TagReport& r) {
  auto transitions = [](const std::vector<Transition>& ts) {
    ordered_json a = ordered_json::array();
    for (const auto& t : ts) a.push_back({{"window_index", t.window_index}, {"time", t.time}, {"from", t.from}, {"to", t.to}});
    return a;
  };
  ordered_json runs = ordered_json::array();
  for (const auto& run : r.runs) {
    runs.push_back({{"label", run.label}, {"first_window", run.first_window}, {"length", run.length},
                    {"start_time", run.start_time}});
  }
  return {{"n_windows", r.n_windows},
          {"counts", r.counts},
          {"n_transitions", r.transitions.size()},
          {"transitions", transitions(r.transitions)},
          {"min_run", r.min_run},
          {"n_stable_transitions", r.stable_transitions.size()},
          {"stable_transitions", transitions(r.stable_transitions)},
          {"runs", runs}};
}

// ---- plot -------------------------------------------------------------------

/// Scatter of (x, y) coloured by label, with a legend. Coordinates are
/// printed with fixed precision so the file is reproducible.
inline std::string scatter_svg(const std::vector<double>& x, const std::vector<double>& y,
                               const std::vector<std::size_t>& labels, const std::string& x_name,
                               const std::string& y_name) {
  static constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                             "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  constexpr double kW = 800, kH = 400, kLeft = 70, kRight = 120, kTop = 20, kBottom = 50;
  auto [x_lo, x_hi] = std::minmax_element(x.begin(), x.end());
  auto [y_lo, y_hi] = std::minmax_element(y.begin(), y.end());
  const double x0 = x.empty() ? 0 : *x_lo;
  const double x1 = x.empty() ? 1 : (*x_hi > *x_lo ? *x_hi : *x_lo + 1);
  const double y0 = y.empty() ? 0 : *y_lo;
  const double y1 = y.empty() ? 1 : (*y_hi > *y_lo ? *y_hi : *y_lo + 1);
  auto px = [&](double v) { return kLeft + (v - x0) / (x1 - x0) * (kW - kLeft - kRight); };
  auto py = [&](double v) { return kH - kBottom - (v - y0) / (y1 - y0) * (kH - kTop - kBottom); };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  auto label_num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return std::string(buf);
  };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight << "\" y2=\"" << kH - kBottom << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kH - kBottom << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << kLeft << "\" y=\"" << kH - kBottom + 16 << "\">" << label_num(x0) << "</text>\n";
  s << "<text x=\"" << kW - kRight << "\" y=\"" << kH - kBottom + 16 << "\" text-anchor=\"end\">" << label_num(x1) << "</text>\n";
  s << "<text x=\"" << kLeft - 4 << "\" y=\"" << kH - kBottom << "\" text-anchor=\"end\">" << label_num(y0) << "</text>\n";
  s << "<text x=\"" << kLeft - 4 << "\" y=\"" << kTop + 10 << "\" text-anchor=\"end\">" << label_num(y1) << "</text>\n";
  s << "<text x=\"" << (kLeft + kW - kRight) / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\">" << x_name << "</text>\n";
  s << "<text x=\"16\" y=\"" << (kTop + kH - kBottom) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << (kTop + kH - kBottom) / 2 << ")\">" << y_name << "</text>\n";
  for (std::size_t i = 0; i < x.size(); ++i) {
    s << "<circle cx=\"" << num(px(x[i])) << "\" cy=\"" << num(py(y[i])) << "\" r=\"2.5\" fill=\"" << kPalette[labels[i] % 10] << "\"/>\n";
  }
  const std::size_t n_labels = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  for (std::size_t l = 0; l < n_labels; ++l) {
    const double ly = kTop + 10 + 18 * static_cast<double>(l);
    s << "<circle cx=\"" << kW - kRight + 20 << "\" cy=\"" << ly << "\" r=\"5\" fill=\"" << kPalette[l % 10] << "\"/>\n";
    s << "<text x=\"" << kW - kRight + 30 << "\" y=\"" << ly + 4 << "\">label " << l << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

// ---- manifest ----------------------------------------------------------------

struct SourceSummary {
  std::size_t index = 0;
  std::string type;
  std::size_t samples = 0;
  std::size_t first_window = 0;
  std::size_t window_count = 0;
  std::string series_file;
};

struct RunManifest {
  config::PipelineConfig config;
  std::string input_checksum;
  std::vector<std::pair<std::string, std::string>> outputs;  // stage, file name
  std::vector<std::pair<std::string, double>> wall_times;    // stage, seconds
  std::vector<SourceSummary> sources;
  std::string version = kVersion;
};

inline ordered_json to_json(const RunManifest& m) {
  ordered_json outputs = ordered_json::object();
  for (const auto& [stage, file] : m.outputs) outputs[stage] = file;
  ordered_json times = ordered_json::object();
  for (const auto& [stage, seconds] : m.wall_times) times[stage] = seconds;
  ordered_json sources = ordered_json::array();
  for (const auto& s : m.sources) {
    sources.push_back({{"index", s.index},
                       {"type", s.type},
                       {"samples", s.samples},
                       {"first_window", s.first_window},
                       {"window_count", s.window_count},
                       {"series", s.series_file}});
  }
  return {{"version", m.version},      {"input_checksum", m.input_checksum},
          {"config", config::to_json(m.config)}, {"sources", sources},
          {"outputs", outputs},        {"wall_times_s", times}};
}

/// Checksum over everything that determines the outputs: the config snapshot
/// (minus output location and thread count) and the bytes of every external
/// input file.
inline std::string input_checksum(const config::PipelineConfig& c) {
  auto snapshot = config::to_json(c);
  snapshot.erase("output");
  snapshot.erase("workers");
  std::string bytes = snapshot.dump();
  for (const auto& s : c.sources) {
    if (const auto* csv = std::get_if<config::CsvSource>(&s)) bytes += read_file_bytes(csv->path);
  }
  return "sha256:" + sha256_hex(bytes);
}

// ---- run ----------------------------------------------------------------------

struct RunOutcome {
  RunManifest manifest;
  cluster::KMeansModel model;
  std::vector<io::TaggedWindow> tagged;
  TagReport report;
};

namespace detail {

/// Deletes the files a failed run wrote, and the output directory if the run
/// created it, unless disarmed.
class OutputGuard {
 public:
  explicit OutputGuard(fs::path dir) : dir_(std::move(dir)) {
    created_dir_ = !fs::exists(dir_);
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw DataError("cannot create output directory '" + dir_.string() + "': " + ec.message());
  }
  OutputGuard(const OutputGuard&) = delete;
  OutputGuard& operator=(const OutputGuard&) = delete;

  ~OutputGuard() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& f : written_) fs::remove(f, ec);
    if (created_dir_) fs::remove_all(dir_, ec);
  }

  std::string path(const std::string& name) {
    written_.push_back(dir_ / name);
    return (dir_ / name).string();
  }

  void commit() { committed_ = true; }

 private:
  fs::path dir_;
  std::vector<fs::path> written_;
  bool created_dir_ = false;
  bool committed_ = false;
};

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

}  // namespace detail

/// Runs every stage and writes the artifacts into config.output.dir. On
/// failure the error names the stage and the partial outputs are removed.
inline RunOutcome run_pipeline(const config::PipelineConfig& cfg, const io::Logger& log = nullptr) {
  in_stage("config", [&] { config::validate(cfg); });
  const std::size_t workers = resolve_workers(cfg.workers);
  detail::OutputGuard out(cfg.output.dir);
  detail::Stopwatch clock;
  RunOutcome result;
  RunManifest& m = result.manifest;
  m.config = cfg;
  m.input_checksum = in_stage("checksum", [&] { return input_checksum(cfg); });
  auto say = [&](const std::string& msg) {
    if (log) log(msg);
  };

  // Sources and windows.
  std::vector<embed::TimeSeries> series;
  io::IngestOptions ingest;
  ingest.log = log;
  for (std::size_t i = 0; i < cfg.sources.size(); ++i) {
    const bool external = std::holds_alternative<config::CsvSource>(cfg.sources[i]);
    const std::string name = "series_" + std::to_string(i) + ".csv";
    in_stage(external ? "ingest" : "simulate", [&] {
      series.push_back(load_source(cfg.sources[i], ingest));
      io::write_series_csv(out.path(name), series.back());
    });
    m.outputs.emplace_back("series_" + std::to_string(i), name);
    say("source " + std::to_string(i) + ": " + std::to_string(series.back().size()) + " samples");
  }
  m.wall_times.emplace_back("sources", clock.lap());

  std::vector<embed::Window> windows;
  std::vector<std::size_t> window_source;
  in_stage("embed", [&] {
    for (std::size_t i = 0; i < series.size(); ++i) {
      auto ws = embed::sliding_windows(series[i], cfg.windowing.window_len, cfg.windowing.stride,
                                       window_mode(cfg.windowing, series[i]));
      if (!windows.empty() && !ws.empty() && ws.front().cloud.dim() != windows.front().cloud.dim()) {
        throw ConfigError("source " + std::to_string(i) + " yields " + std::to_string(ws.front().cloud.dim()) +
                          "-dimensional points, earlier sources " + std::to_string(windows.front().cloud.dim()));
      }
      m.sources.push_back({i, source_type(cfg.sources[i]), series[i].size(), windows.size(), ws.size(),
                           "series_" + std::to_string(i) + ".csv"});
      for (auto& w : ws) {
        windows.push_back(std::move(w));
        window_source.push_back(i);
      }
    }
    io::write_windows_csv(out.path("windows.csv"), windows);
    io::write_window_meta_csv(out.path("windows_meta.csv"), windows);
  });
  m.outputs.emplace_back("windows", "windows.csv");
  m.outputs.emplace_back("window_meta", "windows_meta.csv");
  m.wall_times.emplace_back("embed", clock.lap());
  say(std::to_string(windows.size()) + " windows");

  std::vector<ph::PersistenceDiagram> diagrams;
  in_stage("persist", [&] {
    std::vector<embed::PointCloud> clouds;
    clouds.reserve(windows.size());
    for (const auto& w : windows) clouds.push_back(w.cloud);
    diagrams = persist_all(clouds, cfg.persistence, workers);
    io::write_diagrams_csv(out.path("diagrams.csv"), diagrams);
  });
  m.outputs.emplace_back("diagrams", "diagrams.csv");
  m.wall_times.emplace_back("persist", clock.lap());

  std::vector<features::FeatureVector> fv;
  in_stage("featurize", [&] {
    std::vector<features::WindowInfo> info;
    for (std::size_t i = 0; i < windows.size(); ++i) info.push_back({i, windows[i].start_time});
    fv = featurize_all(diagrams, info, cfg.features, workers);
    io::write_features_csv(out.path("features.csv"), fv);
  });
  m.outputs.emplace_back("features", "features.csv");
  m.wall_times.emplace_back("featurize", clock.lap());

  in_stage("tag", [&] {
    auto t = tag_features(fv, cfg.clustering, cfg.features.standardize);
    result.model = std::move(t.model);
    result.tagged = std::move(t.tagged);
    io::write_json(out.path("model.json"), io::model_to_json(result.model));
    io::write_tagged_csv(out.path("tagged.csv"), result.tagged);
  });
  m.outputs.emplace_back("model", "model.json");
  m.outputs.emplace_back("tagged", "tagged.csv");
  m.wall_times.emplace_back("tag", clock.lap());

  in_stage("report", [&] {
    result.report = tag_report(result.tagged);
    ordered_json report = to_json(result.report);
    ordered_json per_source = ordered_json::array();
    for (const auto& s : m.sources) {
      if (s.window_count == 0) continue;
      const auto first = result.tagged.begin() + static_cast<std::ptrdiff_t>(s.first_window);
      ordered_json one = to_json(tag_report({first, first + static_cast<std::ptrdiff_t>(s.window_count)}));
      one["source"] = s.index;
      per_source.push_back(std::move(one));
    }
    report["sources"] = std::move(per_source);
    io::write_json(out.path("report.json"), report);

    const std::size_t ch = cfg.output.plot_channel;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < windows.size(); ++i) {
      const auto& s = series[window_source[i]];
      if (ch >= s.channels()) {
        throw ConfigError("output.plot_channel " + std::to_string(ch) + " out of range for source " +
                          std::to_string(window_source[i]));
      }
      x.push_back(windows[i].start_time);
      y.push_back(s.value(windows[i].start_index, ch));
      labels.push_back(result.tagged[i].label);
    }
    const std::string y_name = series.front().channel_names()[std::min(ch, series.front().channels() - 1)];
    std::ofstream(out.path("plot.svg"), std::ios::binary) << scatter_svg(x, y, labels, "window start time", y_name);
  });
  m.outputs.emplace_back("report", "report.json");
  m.outputs.emplace_back("plot", "plot.svg");
  m.wall_times.emplace_back("report", clock.lap());

  in_stage("manifest", [&] { io::write_json(out.path("manifest.json"), to_json(m)); });
  out.commit();
  return result;
}

}  // namespace regime_tagger::pipeline
